#pragma once

#include "cotrap/co_detector.hpp"
#include "cotrap/dataset.hpp"
#include "cotrap/error.hpp"
#include "cotrap/rng.hpp"
#include "cotrap/source_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

// Insertion offsets. -k places the block's last line k lines above the
// completion point; +k places its first line k lines below. Allowed set:
// {-8..-1} and {+1..+3}.
constexpr int kMinAboveOffset = -8;
constexpr int kMaxBelowOffset = 3;
bool offset_allowed(int offset);
std::vector<int> all_offsets(); // -8..-1 then +1..+3

/// Serialized form: "above3", "below1".
std::string offset_label(int offset);
std::optional<int> offset_from_label(std::string_view label);
/// Table heading form: "Above3line", "Below1line", "Blank" when absent.
std::string position_label(const std::optional<int>& offset);

enum class VariantKind {
    Blank,
    FullInsertion,
    RandomInsertion,
    TruncatedInsertion,
    TaggedInsertion,
    Instructed,
};
const char* variant_kind_name(VariantKind kind);
std::optional<VariantKind> variant_kind_from_name(std::string_view name);
bool kind_carries_insertion(VariantKind kind);

struct PromptVariant {
    std::string sample_id;
    VariantKind kind = VariantKind::Blank;
    std::optional<int> offset;
    std::string text;
    std::optional<LineSpan> inserted_span;   // lines occupied by the block
    int completion_point_in_prompt = 0;
    std::optional<int> instruction_line;     // Instructed variants only
};

/// Places the commented block into the context at the given offset. Throws a
/// RangeError when any block line would land outside [1, line_count + 1].
struct RangeError : Error {
    using Error::Error;
};
PromptVariant insert_block(const std::string& context, const std::string& co_block,
                           int completion_point, int offset);

/// Deletes the inserted lines (and instruction line); inverse of insertion.
std::string strip_insertions(const PromptVariant& variant);

/// Keeps the leading ceil(n*(1-fraction)) characters of the block text, then
/// drops a trailing fragment that no longer reads as a comment line. Throws
/// when nothing survives.
std::string truncate_block(const std::string& co_block, double fraction = 0.5);

/// Wraps the block between `# <tag>` comment lines at the block's indentation.
std::string tag_block(const std::string& co_block, const std::string& tag = "<Vulnerable>");

/// Catalog of defect-free CO blocks used by the RandomInsertion group.
struct CoBlockPool {
    struct Entry {
        std::vector<std::string> lines;
    };
    std::vector<Entry> entries;

    void save(const std::filesystem::path& path) const;
    static CoBlockPool load(const std::filesystem::path& path);
};

/// Seeded uniform choice among pool blocks with exactly `line_count` lines.
std::string make_random_block(const CoBlockPool& pool, std::size_t line_count, Rng& rng);

enum class InstructionPlacement { Top, AboveBlock };

inline constexpr const char* kDefaultInstruction = "Do not refer to the commented-out code.";

/// Adds the mitigation instruction as a comment line; spans shift accordingly
/// and the variant becomes Instructed.
PromptVariant add_instruction(const PromptVariant& variant,
                              const std::string& text = kDefaultInstruction,
                              InstructionPlacement placement = InstructionPlacement::Top);

enum class SparsityClass {
    SurroundedBlank,
    LeadingBlank,
    TrailingBlank,
    Tight,
    Misaligned,
};
const char* sparsity_class_name(SparsityClass klass);
std::optional<SparsityClass> sparsity_class_from_name(std::string_view name);

/// Geometry of the lines around the inserted block. Rules: blank above and
/// below -> SurroundedBlank; one blank -> Leading/TrailingBlank; neither blank
/// and equal literal indentation -> Tight, unequal -> Misaligned. A missing
/// neighbor (file edge) counts as blank.
SparsityClass classify_sparsity(const PromptVariant& variant);

struct ForgeConfig {
    std::vector<int> offsets = all_offsets();
    std::vector<int> instructed_offsets = {1}; // one line below, per the RQ3 setup
    double truncate_fraction = 0.5;
    std::string tag = "<Vulnerable>";
    std::string instruction = kDefaultInstruction;
    InstructionPlacement placement = InstructionPlacement::Top;
};

struct RangeSkip {
    std::string sample_id;
    VariantKind kind = VariantKind::FullInsertion;
    int offset = 0;
    std::string reason;
};

struct ForgeResult {
    std::vector<PromptVariant> variants;
    std::vector<RangeSkip> skips;
};

/// Builds the requested variant groups for one sample: Blank yields one
/// variant; insertion kinds yield one per in-range offset; Instructed yields
/// one per configured instructed offset. Random kinds need a pool.
ForgeResult forge_suite(const DatasetSample& sample, std::span<const VariantKind> kinds,
                        const ForgeConfig& config = {}, const CoBlockPool* pool = nullptr,
                        Rng* rng = nullptr);

struct PositionStatsConfig {
    double similarity_threshold = 0.8;
};

/// Relative placement of CO blocks vs. their most similar active-code window.
struct PositionDistribution {
    std::map<int, std::int64_t> counts; // signed offset -> matched blocks
    std::int64_t matched = 0;
    std::int64_t unmatched = 0;

    std::int64_t band_count(int lo, int hi) const;
    /// Percentage of matched pairs in [lo, hi], in hundredths.
    std::int64_t band_pct_hundredths(int lo, int hi) const;
    std::string to_csv() const;
};

struct FileBlocks {
    SourceFile file;
    std::vector<CommentBlock> blocks;   // comment blocks of the file
    std::vector<CoVerdict> verdicts;    // aligned with blocks
};

/// For each CO block, finds the most similar same-length window of active
/// code in its file (normalized character edit similarity at or above the
/// threshold, ties to the nearest) and records the signed line distance:
/// -k = block ends k lines above the window, +k = begins k lines below it.
PositionDistribution co_position_stats(std::span<const FileBlocks> files,
                                       const PositionStatsConfig& config = {});

} // namespace cotrap
