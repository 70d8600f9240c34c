#pragma once

#include "cotrap/defect_adapter.hpp"
#include "cotrap/rng.hpp"
#include "cotrap/source_model.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

struct DefectInfo {
    std::string rule_id;
    DefectCategory category = DefectCategory::Defect;
    std::optional<std::string> cwe;
    LineSpan original_span;
};

/// One evaluation unit: a file with its defective lines excised (context),
/// those lines commented out (co_block), and the line where they began.
struct DatasetSample {
    std::string sample_id;  // zero-padded
    std::string source_path;
    std::string context;    // file minus the defective lines
    std::string co_block;   // defective lines, commented
    int completion_point = 0; // 1-based line in context; equals original start
    DefectInfo defect;
};

/// Comments out one source line preserving its indentation.
std::string comment_out_line(std::string_view line);

/// Cuts the finding's span out of the file. The removed lines become the
/// commented block; the rest is the context.
DatasetSample excise(const SourceFile& file, const DefectFinding& finding,
                     std::string sample_id);

/// Rebuilds the original file from a sample (uncommented block re-inserted at
/// the completion point). Byte-exact inverse of excise.
std::string restore_original(const DatasetSample& sample);

struct CleanConfig {
    int max_findings_per_file = 10;
};

/// Drops files with overlapping findings ("same line"), files with more
/// findings than the threshold, and duplicate contexts (first by sorted path
/// survives). Idempotent; output sorted by (source_path, span, sample_id).
std::vector<DatasetSample> clean(std::vector<DatasetSample> samples,
                                 const CleanConfig& config = {});

/// Draws n samples with per-category quotas assigned by largest-remainder
/// apportionment over category frequencies; selection within a category is a
/// seeded uniform draw. Throws when n exceeds the pool.
std::vector<DatasetSample> proportional_sample(const std::vector<DatasetSample>& samples,
                                               std::size_t n, Rng& rng);

struct SampleMetadata {
    std::string sample_id;
    DefectCategory category = DefectCategory::Defect;
    std::string rule_slug; // lowercased, '/' replaced by '-'
    int completion_line = 0;
};

std::string rule_slug(std::string_view rule_id);
std::string encode_filename(const SampleMetadata& meta);
SampleMetadata decode_filename(std::string_view name); // throws on malformed names
SampleMetadata sample_metadata(const DatasetSample& sample);

struct ManifestHeader {
    std::uint64_t seed = Rng::kDefaultSeed;
    int max_findings_per_file = 10;
    std::size_t count = 0;
};

/// Dataset directory layout: manifest.jsonl (header line + one object per
/// sample), contexts/<encoded filename>, coblocks/<sample_id>.txt.
void write_manifest(std::span<const DatasetSample> samples, const std::filesystem::path& dir,
                    const ManifestHeader& header);

struct Dataset {
    ManifestHeader header;
    std::vector<DatasetSample> samples;
};

Dataset read_manifest(const std::filesystem::path& dir); // throws naming the sample

} // namespace cotrap
