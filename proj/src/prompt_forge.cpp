#include "cotrap/prompt_forge.hpp"

#include "cotrap/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cotrap {

bool offset_allowed(int offset) {
    return (offset >= kMinAboveOffset && offset <= -1) || (offset >= 1 && offset <= kMaxBelowOffset);
}

std::vector<int> all_offsets() {
    std::vector<int> out;
    for (int k = kMinAboveOffset; k <= -1; ++k)
        out.push_back(k);
    for (int k = 1; k <= kMaxBelowOffset; ++k)
        out.push_back(k);
    return out;
}

std::string offset_label(int offset) {
    return offset < 0 ? "above" + std::to_string(-offset) : "below" + std::to_string(offset);
}

std::optional<int> offset_from_label(std::string_view label) {
    int sign = 0;
    std::string_view digits;
    if (starts_with(label, "above")) {
        sign = -1;
        digits = label.substr(5);
    } else if (starts_with(label, "below")) {
        sign = 1;
        digits = label.substr(5);
    } else {
        return std::nullopt;
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos)
        return std::nullopt;
    int value = sign * std::stoi(std::string(digits));
    if (!offset_allowed(value))
        return std::nullopt;
    return value;
}

std::string position_label(const std::optional<int>& offset) {
    if (!offset)
        return "Blank";
    return *offset < 0 ? "Above" + std::to_string(-*offset) + "line"
                       : "Below" + std::to_string(*offset) + "line";
}

const char* variant_kind_name(VariantKind kind) {
    switch (kind) {
    case VariantKind::Blank: return "blank";
    case VariantKind::FullInsertion: return "full";
    case VariantKind::RandomInsertion: return "random";
    case VariantKind::TruncatedInsertion: return "truncated";
    case VariantKind::TaggedInsertion: return "tagged";
    case VariantKind::Instructed: return "instructed";
    }
    return "blank";
}

std::optional<VariantKind> variant_kind_from_name(std::string_view name) {
    if (name == "blank") return VariantKind::Blank;
    if (name == "full") return VariantKind::FullInsertion;
    if (name == "random") return VariantKind::RandomInsertion;
    if (name == "truncated") return VariantKind::TruncatedInsertion;
    if (name == "tagged") return VariantKind::TaggedInsertion;
    if (name == "instructed") return VariantKind::Instructed;
    return std::nullopt;
}

bool kind_carries_insertion(VariantKind kind) { return kind != VariantKind::Blank; }

PromptVariant insert_block(const std::string& context, const std::string& co_block,
                           int completion_point, int offset) {
    if (!offset_allowed(offset))
        throw Error("offset " + std::to_string(offset) + " outside the allowed set");
    Lines ctx = split_lines(context);
    Lines block = split_lines(co_block);
    int n = static_cast<int>(ctx.lines.size());
    int block_len = static_cast<int>(block.lines.size());
    if (block_len == 0)
        throw Error("cannot insert an empty block");

    // Prompt line of the block's first line.
    int first_line =
        offset < 0 ? completion_point + offset - block_len + 1 : completion_point + offset;
    int last_line = first_line + block_len - 1;
    if (first_line < 1 || first_line > n + 1)
        throw RangeError("offset " + offset_label(offset) + " places block lines " +
                         std::to_string(first_line) + "-" + std::to_string(last_line) +
                         " outside the file");

    PromptVariant variant;
    variant.kind = VariantKind::FullInsertion;
    variant.offset = offset;
    variant.inserted_span = LineSpan{first_line, last_line};
    variant.completion_point_in_prompt =
        offset < 0 ? completion_point + block_len : completion_point;

    Lines prompt;
    prompt.trailing_newline = ctx.trailing_newline;
    for (int i = 1; i <= n + 1; ++i) {
        if (i == first_line)
            for (const std::string& b : block.lines)
                prompt.lines.push_back(b);
        if (i <= n)
            prompt.lines.push_back(ctx.lines[static_cast<std::size_t>(i - 1)]);
    }
    variant.text = join_lines(prompt);
    return variant;
}

std::string strip_insertions(const PromptVariant& variant) {
    if (!variant.inserted_span && !variant.instruction_line)
        return variant.text;
    Lines split = split_lines(variant.text);
    Lines out;
    out.trailing_newline = split.trailing_newline;
    for (int i = 1; i <= static_cast<int>(split.lines.size()); ++i) {
        if (variant.inserted_span && variant.inserted_span->contains(i))
            continue;
        if (variant.instruction_line && *variant.instruction_line == i)
            continue;
        out.lines.push_back(split.lines[static_cast<std::size_t>(i - 1)]);
    }
    return join_lines(out);
}

namespace {

bool is_comment_shaped(std::string_view line) {
    std::string_view rest = line.substr(leading_whitespace(line).size());
    return !rest.empty() && rest.front() == '#';
}

} // namespace

std::string truncate_block(const std::string& co_block, double fraction) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw Error("truncation fraction must lie in (0, 1)");
    std::size_t n = co_block.size();
    std::size_t keep =
        static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - fraction)));
    std::string kept = co_block.substr(0, keep);

    // Drop a trailing fragment that lost its marker (at most the cut line).
    Lines split = split_lines(kept);
    if (!split.lines.empty() && !is_comment_shaped(split.lines.back())) {
        split.lines.pop_back();
        split.trailing_newline = false;
    }
    if (split.lines.empty())
        throw Error("block truncates to nothing");
    return join_lines(split);
}

namespace {

// Longest whitespace prefix shared by the non-blank lines.
std::string common_indent(const Lines& split) {
    std::optional<std::string_view> common;
    for (const std::string& line : split.lines) {
        if (is_blank(line))
            continue;
        std::string_view ws = leading_whitespace(line);
        if (!common) {
            common = ws;
            continue;
        }
        std::size_t n = 0;
        while (n < common->size() && n < ws.size() && (*common)[n] == ws[n])
            ++n;
        common = common->substr(0, n);
    }
    return common ? std::string(*common) : std::string();
}

} // namespace

std::string tag_block(const std::string& co_block, const std::string& tag) {
    if (tag.empty())
        throw Error("tag must be non-empty");
    Lines split = split_lines(co_block);
    std::string marker = common_indent(split) + "# " + tag;
    Lines out;
    out.trailing_newline = split.trailing_newline;
    out.lines.push_back(marker);
    for (std::string& line : split.lines)
        out.lines.push_back(std::move(line));
    out.lines.push_back(marker);
    return join_lines(out);
}

std::string make_random_block(const CoBlockPool& pool, std::size_t line_count, Rng& rng) {
    std::vector<std::size_t> matching;
    for (std::size_t i = 0; i < pool.entries.size(); ++i)
        if (pool.entries[i].lines.size() == line_count)
            matching.push_back(i);
    if (matching.empty())
        throw Error("pool has no block with " + std::to_string(line_count) + " lines");
    const CoBlockPool::Entry& entry =
        pool.entries[matching[static_cast<std::size_t>(rng.below(matching.size()))]];
    Lines lines;
    lines.lines = entry.lines;
    return join_lines(lines);
}

void CoBlockPool::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write pool file " + path.string());
    for (const Entry& entry : entries) {
        nlohmann::json row = {{"lines", entry.lines}};
        out << row.dump() << "\n";
    }
}

CoBlockPool CoBlockPool::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open pool file " + path.string());
    CoBlockPool pool;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        nlohmann::json row = nlohmann::json::parse(line);
        Entry entry;
        entry.lines = row.at("lines").get<std::vector<std::string>>();
        pool.entries.push_back(std::move(entry));
    }
    return pool;
}

PromptVariant add_instruction(const PromptVariant& variant, const std::string& text,
                              InstructionPlacement placement) {
    if (!kind_carries_insertion(variant.kind) || !variant.inserted_span)
        throw Error("instruction requires a variant with an inserted block");
    PromptVariant out = variant;
    out.kind = VariantKind::Instructed;
    std::string line = "# " + text;

    Lines split = split_lines(variant.text);
    int at = placement == InstructionPlacement::Top ? 1 : variant.inserted_span->start_line;
    split.lines.insert(split.lines.begin() + (at - 1), line);
    out.text = join_lines(split);
    out.instruction_line = at;
    if (variant.inserted_span->start_line >= at) {
        out.inserted_span =
            LineSpan{variant.inserted_span->start_line + 1, variant.inserted_span->end_line + 1};
    }
    if (variant.completion_point_in_prompt >= at)
        out.completion_point_in_prompt = variant.completion_point_in_prompt + 1;
    return out;
}

const char* sparsity_class_name(SparsityClass klass) {
    switch (klass) {
    case SparsityClass::SurroundedBlank: return "surrounded_blank";
    case SparsityClass::LeadingBlank: return "leading_blank";
    case SparsityClass::TrailingBlank: return "trailing_blank";
    case SparsityClass::Tight: return "tight";
    case SparsityClass::Misaligned: return "misaligned";
    }
    return "tight";
}

std::optional<SparsityClass> sparsity_class_from_name(std::string_view name) {
    if (name == "surrounded_blank") return SparsityClass::SurroundedBlank;
    if (name == "leading_blank") return SparsityClass::LeadingBlank;
    if (name == "trailing_blank") return SparsityClass::TrailingBlank;
    if (name == "tight") return SparsityClass::Tight;
    if (name == "misaligned") return SparsityClass::Misaligned;
    return std::nullopt;
}

SparsityClass classify_sparsity(const PromptVariant& variant) {
    if (!variant.inserted_span)
        throw Error("sparsity is defined only for variants with an inserted block");
    Lines split = split_lines(variant.text);
    int n = static_cast<int>(split.lines.size());
    int above = variant.inserted_span->start_line - 1;
    int below = variant.inserted_span->end_line + 1;

    // A missing neighbor at the file edge counts as blank.
    bool above_blank = above < 1 || is_blank(split.lines[static_cast<std::size_t>(above - 1)]);
    bool below_blank = below > n || is_blank(split.lines[static_cast<std::size_t>(below - 1)]);
    if (above_blank && below_blank)
        return SparsityClass::SurroundedBlank;
    if (above_blank)
        return SparsityClass::LeadingBlank;
    if (below_blank)
        return SparsityClass::TrailingBlank;
    std::string_view above_indent =
        leading_whitespace(split.lines[static_cast<std::size_t>(above - 1)]);
    std::string_view below_indent =
        leading_whitespace(split.lines[static_cast<std::size_t>(below - 1)]);
    return above_indent == below_indent ? SparsityClass::Tight : SparsityClass::Misaligned;
}

ForgeResult forge_suite(const DatasetSample& sample, std::span<const VariantKind> kinds,
                        const ForgeConfig& config, const CoBlockPool* pool, Rng* rng) {
    ForgeResult result;
    Lines block_lines = split_lines(sample.co_block);
    auto forge_insertions = [&](VariantKind kind, const std::string& block,
                                std::span<const int> offsets) {
        for (int offset : offsets) {
            try {
                PromptVariant variant =
                    insert_block(sample.context, block, sample.completion_point, offset);
                variant.sample_id = sample.sample_id;
                variant.kind = kind;
                if (kind == VariantKind::Instructed)
                    variant = add_instruction(variant, config.instruction, config.placement);
                result.variants.push_back(std::move(variant));
            } catch (const RangeError& e) {
                result.skips.push_back({sample.sample_id, kind, offset, e.what()});
            }
        }
    };

    for (VariantKind kind : kinds) {
        switch (kind) {
        case VariantKind::Blank: {
            PromptVariant variant;
            variant.sample_id = sample.sample_id;
            variant.kind = VariantKind::Blank;
            variant.text = sample.context;
            variant.completion_point_in_prompt = sample.completion_point;
            result.variants.push_back(std::move(variant));
            break;
        }
        case VariantKind::FullInsertion:
            forge_insertions(kind, sample.co_block, config.offsets);
            break;
        case VariantKind::RandomInsertion: {
            if (!pool || !rng)
                throw Error("RandomInsertion needs a defect-free block pool and a seeded rng");
            std::string random_block = make_random_block(*pool, block_lines.lines.size(), *rng);
            forge_insertions(kind, random_block, config.offsets);
            break;
        }
        case VariantKind::TruncatedInsertion:
            forge_insertions(kind, truncate_block(sample.co_block, config.truncate_fraction),
                             config.offsets);
            break;
        case VariantKind::TaggedInsertion:
            forge_insertions(kind, tag_block(sample.co_block, config.tag), config.offsets);
            break;
        case VariantKind::Instructed:
            forge_insertions(kind, sample.co_block, config.instructed_offsets);
            break;
        }
    }
    return result;
}

std::int64_t PositionDistribution::band_count(int lo, int hi) const {
    std::int64_t total = 0;
    for (const auto& [offset, count] : counts)
        if (offset >= lo && offset <= hi)
            total += count;
    return total;
}

std::int64_t PositionDistribution::band_pct_hundredths(int lo, int hi) const {
    if (matched == 0)
        return 0;
    return ratio_pct_hundredths(band_count(lo, hi), matched);
}

std::string PositionDistribution::to_csv() const {
    std::string out = "offset,count\n";
    for (const auto& [offset, count] : counts)
        out += std::to_string(offset) + "," + std::to_string(count) + "\n";
    return out;
}

PositionDistribution co_position_stats(std::span<const FileBlocks> files,
                                       const PositionStatsConfig& config) {
    PositionDistribution dist;
    for (const FileBlocks& fb : files) {
        Lines split = split_lines(fb.file.text);
        int n = static_cast<int>(split.lines.size());

        // Lines covered by any comment block are not active code.
        std::vector<bool> comment_line(static_cast<std::size_t>(n) + 1, false);
        for (const CommentBlock& block : fb.blocks)
            for (int l = block.span.start_line; l <= block.span.end_line && l <= n; ++l)
                comment_line[static_cast<std::size_t>(l)] = true;

        for (std::size_t bi = 0; bi < fb.blocks.size(); ++bi) {
            if (bi >= fb.verdicts.size() || fb.verdicts[bi].co_line_count <= 0)
                continue;
            const CommentBlock& block = fb.blocks[bi];
            int len = block.span.length();
            std::string needle = uncomment(block);

            double best_sim = 0.0;
            int best_distance = 0;
            bool found = false;
            for (int start = 1; start + len - 1 <= n; ++start) {
                int end = start + len - 1;
                bool usable = true;
                for (int l = start; l <= end; ++l) {
                    if (comment_line[static_cast<std::size_t>(l)]) {
                        usable = false;
                        break;
                    }
                }
                if (!usable)
                    continue;
                Lines window;
                for (int l = start; l <= end; ++l)
                    window.lines.push_back(split.lines[static_cast<std::size_t>(l - 1)]);
                std::string window_text = join_lines(window);
                // Length pre-filter: too different to reach the threshold.
                std::size_t a = needle.size(), b = window_text.size();
                std::size_t m = std::max(a, b);
                if (m > 0 &&
                    static_cast<double>(m - std::min(a, b)) / static_cast<double>(m) >
                        1.0 - config.similarity_threshold)
                    continue;
                double sim = edit_similarity(needle, window_text);
                if (sim < config.similarity_threshold)
                    continue;
                // Negative: the block ends above the window. Positive: it
                // begins below. Adjacency is distance 1 either way.
                int signed_offset = start > block.span.end_line
                                        ? -(start - block.span.end_line)
                                        : block.span.start_line - end;
                if (!found || sim > best_sim ||
                    (sim == best_sim && std::abs(signed_offset) < std::abs(best_distance))) {
                    best_sim = sim;
                    best_distance = signed_offset;
                    found = true;
                }
            }
            if (found) {
                dist.counts[best_distance] += 1;
                dist.matched += 1;
            } else {
                dist.unmatched += 1;
            }
        }
    }
    return dist;
}

} // namespace cotrap
