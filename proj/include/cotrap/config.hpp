#pragma once

#include "cotrap/defect_adapter.hpp"
#include "cotrap/generation.hpp"
#include "cotrap/metrics.hpp"
#include "cotrap/prompt_forge.hpp"
#include "cotrap/source_model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cotrap {

// Minimal TOML reader covering what the toolkit config needs: [table] and
// [table.sub] headers, string/int/float/bool scalars, flat arrays of those,
// and # comments. No TOML library ships in this environment, the schema is
// closed, and unknown keys are rejected anyway.
namespace toml {

using Value = std::variant<std::string, std::int64_t, double, bool,
                           std::vector<std::string>, std::vector<std::int64_t>>;

/// Keys are "section.key" (or "a.b.key" for nested tables).
std::map<std::string, Value> parse(std::string_view text);

} // namespace toml

struct ToolkitConfig {
    std::uint64_t seed = Rng::kDefaultSeed;
    std::filesystem::path output_root = "out";

    // [corpus]
    std::filesystem::path corpus_root;
    CorpusFilter corpus_filter;

    // [scanner]
    ScannerConfig scanner;

    // [dataset]
    std::size_t sample_count = 1000;
    CleanConfig clean;

    // [forge]
    std::vector<VariantKind> kinds = {VariantKind::FullInsertion, VariantKind::Blank};
    ForgeConfig forge;
    std::filesystem::path pool_path;

    // [match]
    PositionStatsConfig position_stats;
    ReintroductionConfig reintroduction;

    // [backend.<id>]
    std::vector<BackendDescriptor> backends;

    /// Loads and validates a TOML config. Paths are resolved relative to the
    /// config file's directory. Unknown keys are rejected.
    static ToolkitConfig load(const std::filesystem::path& path);
    static ToolkitConfig from_text(std::string_view text,
                                   const std::filesystem::path& base_dir);
};

} // namespace cotrap
