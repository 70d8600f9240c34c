#pragma once

#include "cotrap/co_detector.hpp"
#include "cotrap/ratio_report.hpp"
#include "cotrap/source_model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

enum class DefectCategory {
    Vulnerability,
    Reliability,
    Defect,
    Maintainability,
    Correctness,
    Modularity,
};

const char* category_name(DefectCategory category);
std::optional<DefectCategory> category_from_name(std::string_view name);

struct DefectFinding {
    std::string rule_id;
    DefectCategory category = DefectCategory::Defect;
    std::optional<std::string> cwe; // e.g. "CWE-327"
    std::string file;
    LineSpan span;
    std::string message;
};

/// Maps scanner rule tags to a category. Priority when several match:
/// vulnerability > reliability > correctness > modularity > maintainability;
/// no recognized tag falls back to defect. A tag like "external/cwe/cwe-327"
/// also yields the CWE identifier.
struct CategoryInfo {
    DefectCategory category = DefectCategory::Defect;
    std::optional<std::string> cwe;
};
CategoryInfo categorize(std::span<const std::string> tags);

struct SarifIngest {
    std::vector<DefectFinding> findings;
    std::vector<SkipRecord> skips; // results without a physical location
    std::size_t total_results = 0; // findings.size() + skips.size()
};

/// Reads a SARIF 2.1.0 log: one finding per runs[].results[]. Malformed
/// documents throw an Error naming the offending path.
SarifIngest ingest_sarif(const nlohmann::json& document);
SarifIngest ingest_sarif_file(const std::filesystem::path& path);

struct ScannerConfig {
    std::string command_template; // must contain {input_dir} and {output_file} once each
    std::string ruleset_id;
    double timeout_seconds = 600;

    void validate() const; // throws on a bad template
};

/// Runs the external scanner over a snapshot directory. Returns the SARIF
/// output path on success; nonzero exit, timeout, or missing output throw an
/// Error carrying the captured diagnostics.
std::filesystem::path run_external_scanner(const ScannerConfig& config,
                                           const std::filesystem::path& snapshot_dir,
                                           const std::filesystem::path& output_file);

/// Replaces one comment block with its uncommented lines. When the whole
/// transformed file no longer parses, the skip reason is set instead.
struct UncommentOutcome {
    std::optional<std::string> text;
    std::optional<std::string> skip_reason;
    bool ok() const { return text.has_value(); }
};
UncommentOutcome uncomment_in_place(const SourceFile& file, const CommentBlock& block);
/// Uncomments several blocks of one file at once (blocks must be disjoint).
UncommentOutcome uncomment_all(const SourceFile& file, std::span<const CommentBlock> blocks);

/// Per-file input for defective-CO statistics: the CO blocks that were
/// uncommented into the snapshot and the findings the scanner reported there.
struct SnapshotAnalysis {
    std::string repository;
    std::string path;
    std::vector<CoVerdict> co_verdicts; // verdicts with co_line_count > 0
    std::vector<DefectFinding> findings;
};

/// Proportion of defective CO code per granularity. A block is defective when
/// some finding's span intersects it. `total_repositories` is the corpus-wide
/// repository count (all repositories, with or without CO code).
RatioReport co_defect_stats(std::span<const SnapshotAnalysis> files,
                            std::int64_t total_repositories);

} // namespace cotrap
