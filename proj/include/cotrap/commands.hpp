#pragma once

#include "cotrap/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cotrap::commands {

// Shared invocation context. `out` receives the primary output, `diag` the
// skip log (one JSON object per skipped file) and progress notes.
struct Context {
    ToolkitConfig config;
    bool json = false;
    int jobs = 0; // 0 = per-backend/default parallelism
    std::ostream* out = nullptr;
    std::ostream* diag = nullptr;
};

// Output layout under config.output_root.
std::filesystem::path scan_dir(const ToolkitConfig& config);
std::filesystem::path dataset_dir(const ToolkitConfig& config);
std::filesystem::path prompts_dir(const ToolkitConfig& config);
std::filesystem::path generated_dir(const ToolkitConfig& config);
std::filesystem::path evaluations_dir(const ToolkitConfig& config);
std::filesystem::path report_dir(const ToolkitConfig& config);

/// `detect <file>`: comment blocks and their CO verdicts as JSON.
int run_detect(Context& ctx, const std::filesystem::path& file);

/// `scan [--input dir]`: external scanner over a tree; SARIF + findings.jsonl.
int run_scan(Context& ctx, std::optional<std::filesystem::path> input);

/// `prevalence [--positions]`: CO-code proportions over the corpus; with
/// --positions also the CO-block position distribution (positions.csv).
int run_prevalence(Context& ctx, bool with_positions);

/// `codefects [--pool-out file]`: uncommented snapshot, scan, defective-CO
/// proportions; optionally emits the defect-free CO block pool.
int run_codefects(Context& ctx, std::optional<std::filesystem::path> pool_out);

/// `build-dataset [--sarif file] [--count n]`: excise, clean, sample, write.
int run_build_dataset(Context& ctx, std::optional<std::filesystem::path> sarif,
                      std::optional<std::size_t> count);

/// `forge [--kinds a,b]`: prompt variants for every dataset sample.
int run_forge(Context& ctx, const std::vector<VariantKind>& kinds);

/// `generate --backend id`: completions for every forged prompt.
int run_generate(Context& ctx, const std::string& backend_id);

/// `evaluate [--sarif file]`: reintroduction records for generated files.
int run_evaluate(Context& ctx, std::optional<std::filesystem::path> sarif);

/// `report`: tables (positions, categories, sparsity, decrease) from records.
int run_report(Context& ctx);

} // namespace cotrap::commands
