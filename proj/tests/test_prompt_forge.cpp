#include "cotrap/prompt_forge.hpp"

#include "cotrap/error.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <map>

using namespace cotrap;

namespace {

std::string numbered_context(int n) {
    Lines lines;
    lines.trailing_newline = true;
    for (int i = 1; i <= n; ++i)
        lines.lines.push_back("ctx_" + std::to_string(i) + " = " + std::to_string(i));
    return join_lines(lines);
}

} // namespace

TEST_CASE("insert_block geometry") {
    std::string context = numbered_context(20);

    SUBCASE("one line above: a 1-line block lands on prompt line 11") {
        PromptVariant v = insert_block(context, "# danger()", 12, -1);
        REQUIRE(v.inserted_span.has_value());
        CHECK(*v.inserted_span == LineSpan{11, 11});
        CHECK(v.completion_point_in_prompt == 13);
        Lines lines = split_lines(v.text);
        CHECK(lines.lines[10] == "# danger()");
    }

    SUBCASE("multi-line block above ends at completion_point - k") {
        PromptVariant v = insert_block(context, "# a()\n# b()\n# c()", 12, -2);
        REQUIRE(v.inserted_span.has_value());
        CHECK(v.inserted_span->end_line == 10);
        CHECK(v.inserted_span->start_line == 8);
        CHECK(v.completion_point_in_prompt == 15);
    }

    SUBCASE("below: first line at completion_point + k, completion point fixed") {
        PromptVariant v = insert_block(context, "# danger()", 12, 2);
        CHECK(*v.inserted_span == LineSpan{14, 14});
        CHECK(v.completion_point_in_prompt == 12);
    }

    SUBCASE("deleting the inserted span restores the context") {
        for (int offset : all_offsets()) {
            PromptVariant v = insert_block(context, "# x()\n# y()", 12, offset);
            v.kind = VariantKind::FullInsertion;
            CHECK(strip_insertions(v) == context);
        }
    }

    SUBCASE("out-of-range offsets raise a range error") {
        CHECK_THROWS_AS(insert_block(context, "# x()", 2, -8), RangeError);
        CHECK_THROWS_AS(insert_block(numbered_context(5), "# x()", 5, 3), RangeError);
        CHECK_NOTHROW(insert_block(numbered_context(5), "# x()", 5, 1));
    }

    SUBCASE("offsets outside the allowed set are contract errors") {
        CHECK_THROWS_AS(insert_block(context, "# x()", 12, 0), Error);
        CHECK_THROWS_AS(insert_block(context, "# x()", 12, -9), Error);
        CHECK_THROWS_AS(insert_block(context, "# x()", 12, 4), Error);
    }
}

TEST_CASE("forge_suite counts per kind") {
    Rng rng(8);
    DatasetSample sample = testutil::make_sample(rng, "000001");
    std::vector<VariantKind> kinds = {VariantKind::FullInsertion, VariantKind::Blank};
    ForgeResult result = forge_suite(sample, kinds);
    std::map<VariantKind, int> counts;
    for (const PromptVariant& v : result.variants)
        counts[v.kind] += 1;
    CHECK(counts[VariantKind::FullInsertion] == 11);
    CHECK(counts[VariantKind::Blank] == 1);
    CHECK(result.skips.empty());

    SUBCASE("blank variant is the raw context") {
        for (const PromptVariant& v : result.variants) {
            if (v.kind == VariantKind::Blank) {
                CHECK(v.text == sample.context);
                CHECK_FALSE(v.inserted_span.has_value());
            }
        }
    }
}

TEST_CASE("forge_suite records range skips instead of failing") {
    SourceFile file = SourceFile::from_text("s.py", "bad()\nok_1 = 1\nok_2 = 2\n");
    DefectFinding finding;
    finding.rule_id = "py/x";
    finding.file = "s.py";
    finding.span = LineSpan{1, 1};
    DatasetSample sample = excise(file, finding, "000009");

    std::vector<VariantKind> kinds = {VariantKind::FullInsertion};
    ForgeResult result = forge_suite(sample, kinds);
    // Completion point 1 rules out all eight "above" offsets, and the
    // two-line context also rules out below3 (insertion line 4 > 3).
    CHECK(result.skips.size() == 9);
    CHECK(result.variants.size() == 2);
    CHECK(result.variants.size() + result.skips.size() == 11);
}

TEST_CASE("truncation arithmetic on the spec examples") {
    // 8-character payload: first 4 kept.
    CHECK(truncate_block("#ABCDEFG", 0.5) == "#ABC");
    // 9 characters: ceil(9/2) = 5 kept.
    CHECK(truncate_block("#ABCDEFGH", 0.5) == "#ABCD");

    // Four-line block cut mid-third-line: lines 1-2 intact, line 3 partial
    // with its marker, line 4 gone.
    std::string block = "# aaaa\n# bbbb\n# cccccccc\n# dddddd";
    std::size_t n = block.size(); // 33
    std::string cut = truncate_block(block, 0.5);
    CHECK(cut.size() == (n + 1) / 2);
    Lines lines = split_lines(cut);
    REQUIRE(lines.lines.size() == 3);
    CHECK(lines.lines[0] == "# aaaa");
    CHECK(lines.lines[1] == "# bbbb");
    CHECK(lines.lines[2] == "# c");

    // A cut landing inside the last line's indentation drops the fragment.
    CHECK(truncate_block("# a\n                    # zz", 0.5) == "# a");

    CHECK_THROWS_AS(truncate_block("", 0.5), Error);
    CHECK_THROWS_AS(truncate_block("# x", 1.5), Error);
}

TEST_CASE("tag_block wraps the block at its indentation") {
    std::string block = "    # a = 1\n    # b = 2\n    # c = 3\n    # d = 4";
    std::string tagged = tag_block(block);
    Lines lines = split_lines(tagged);
    REQUIRE(lines.lines.size() == 6);
    CHECK(lines.lines.front() == "    # <Vulnerable>");
    CHECK(lines.lines.back() == "    # <Vulnerable>");
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(lines.lines[i + 1] == split_lines(block).lines[i]);

    SUBCASE("strip first/last restores the block on random inputs") {
        Rng rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::string> raw;
            std::size_t count = 1 + rng.below(5);
            std::string indent(4 * rng.below(3), ' ');
            for (std::size_t i = 0; i < count; ++i)
                raw.push_back(indent + "# " + testutil::random_code_line(rng, 0));
            Lines block_lines;
            block_lines.lines = raw;
            std::string original = join_lines(block_lines);
            Lines tagged_lines = split_lines(tag_block(original, "<Vulnerable>"));
            REQUIRE(tagged_lines.lines.size() == raw.size() + 2);
            tagged_lines.lines.erase(tagged_lines.lines.begin());
            tagged_lines.lines.pop_back();
            CHECK(join_lines(tagged_lines) == original);
        }
    }
}

TEST_CASE("make_random_block draws uniformly per line count") {
    CoBlockPool pool;
    pool.entries.push_back({{"# a = 1", "# b = 2", "# c = 3", "# d = 4"}});
    pool.entries.push_back({{"# e = 5", "# f = 6", "# g = 7", "# h = 8"}});
    pool.entries.push_back({{"# i = 9", "# j = 10", "# k = 11", "# l = 12"}});
    pool.entries.push_back({{"# one-liner()"}});

    Rng a(1903), b(1903);
    CHECK(make_random_block(pool, 4, a) == make_random_block(pool, 4, b));
    CHECK(count_lines(make_random_block(pool, 4, a)) == 4);
    Rng c(7);
    CHECK_THROWS_AS(make_random_block(pool, 7, c), Error);
}

TEST_CASE("pool save/load round-trip") {
    testutil::TempDir tmp("pool");
    CoBlockPool pool;
    pool.entries.push_back({{"# x = 1", "# y = 2"}});
    pool.entries.push_back({{"    # call()"}});
    pool.save(tmp.path / "pool.jsonl");
    CoBlockPool loaded = CoBlockPool::load(tmp.path / "pool.jsonl");
    REQUIRE(loaded.entries.size() == 2);
    CHECK(loaded.entries[0].lines == pool.entries[0].lines);
    CHECK(loaded.entries[1].lines == pool.entries[1].lines);
}

TEST_CASE("add_instruction places a comment at the top") {
    std::string context = numbered_context(20);
    PromptVariant base = insert_block(context, "# risky()", 12, 1);
    base.kind = VariantKind::FullInsertion;
    base.sample_id = "000001";

    PromptVariant guided = add_instruction(base);
    CHECK(guided.kind == VariantKind::Instructed);
    Lines lines = split_lines(guided.text);
    CHECK(lines.lines[0] == "# Do not refer to the commented-out code.");
    CHECK(guided.completion_point_in_prompt == base.completion_point_in_prompt + 1);
    REQUIRE(guided.inserted_span.has_value());
    CHECK(guided.inserted_span->start_line == base.inserted_span->start_line + 1);

    // Deleting the instruction line and the inserted span restores the context.
    CHECK(strip_insertions(guided) == context);

    SUBCASE("above-block placement sits right before the insertion") {
        PromptVariant adjacent =
            add_instruction(base, kDefaultInstruction, InstructionPlacement::AboveBlock);
        REQUIRE(adjacent.instruction_line.has_value());
        CHECK(*adjacent.instruction_line == base.inserted_span->start_line);
        CHECK(strip_insertions(adjacent) == context);
    }

    SUBCASE("blank variants cannot carry the instruction") {
        PromptVariant blank;
        blank.kind = VariantKind::Blank;
        blank.text = context;
        CHECK_THROWS_AS(add_instruction(blank), Error);
    }
}

TEST_CASE("sparsity classification") {
    auto variant_with = [](const std::string& above, const std::string& below) {
        Lines lines;
        lines.trailing_newline = true;
        lines.lines = {"head = 0", above, "# block", below, "tail = 1"};
        PromptVariant v;
        v.kind = VariantKind::FullInsertion;
        v.text = join_lines(lines);
        v.inserted_span = LineSpan{3, 3};
        v.completion_point_in_prompt = 5;
        return v;
    };

    CHECK(classify_sparsity(variant_with("", "")) == SparsityClass::SurroundedBlank);
    CHECK(classify_sparsity(variant_with("", "    b = 2")) == SparsityClass::LeadingBlank);
    CHECK(classify_sparsity(variant_with("    a = 1", "")) == SparsityClass::TrailingBlank);
    CHECK(classify_sparsity(variant_with("    a = 1", "    b = 2")) == SparsityClass::Tight);
    CHECK(classify_sparsity(variant_with("    a = 1", "        b = 2")) ==
          SparsityClass::Misaligned);
    // Literal whitespace comparison: tab and spaces differ.
    CHECK(classify_sparsity(variant_with("    a = 1", "\tb = 2")) == SparsityClass::Misaligned);

    SUBCASE("missing neighbors at the file edge count as blank") {
        PromptVariant top;
        top.kind = VariantKind::FullInsertion;
        top.text = "# block\nx = 1\n";
        top.inserted_span = LineSpan{1, 1};
        top.completion_point_in_prompt = 2;
        CHECK(classify_sparsity(top) == SparsityClass::LeadingBlank);

        PromptVariant bottom;
        bottom.kind = VariantKind::FullInsertion;
        bottom.text = "x = 1\n# block\n";
        bottom.inserted_span = LineSpan{2, 2};
        bottom.completion_point_in_prompt = 1;
        CHECK(classify_sparsity(bottom) == SparsityClass::TrailingBlank);
    }
}

TEST_CASE("sparsity classes partition any forged variant set") {
    Rng rng(64);
    std::map<SparsityClass, int> counts;
    int total = 0;
    for (int i = 0; i < 40; ++i) {
        DatasetSample sample = testutil::make_sample(rng, testutil::zero_pad(i));
        std::vector<VariantKind> kinds = {VariantKind::FullInsertion};
        ForgeResult result = forge_suite(sample, kinds);
        for (const PromptVariant& v : result.variants) {
            counts[classify_sparsity(v)] += 1;
            ++total;
        }
    }
    int sum = 0;
    for (const auto& [klass, count] : counts)
        sum += count;
    CHECK(sum == total);
}

TEST_CASE("position statistics recover planted offsets") {
    // Each file plants a CO block exactly 3 lines above its active twin, or
    // 2 lines below for the second group.
    auto planted_file = [](int gap, bool block_above) {
        Lines lines;
        lines.trailing_newline = true;
        std::string code = "planted_value = transform(seed_input, 17)";
        for (int i = 0; i < 6; ++i)
            lines.lines.push_back("filler_" + std::to_string(i) + " = " + std::to_string(i));
        if (block_above) {
            lines.lines.push_back("# " + code);
            for (int i = 1; i < gap; ++i)
                lines.lines.push_back("pad_" + std::to_string(i) + " = 0");
            lines.lines.push_back(code);
        } else {
            lines.lines.push_back(code);
            for (int i = 1; i < gap; ++i)
                lines.lines.push_back("pad_" + std::to_string(i) + " = 0");
            lines.lines.push_back("# " + code);
        }
        for (int i = 0; i < 6; ++i)
            lines.lines.push_back("tail_" + std::to_string(i) + " = " + std::to_string(i));
        return SourceFile::from_text("planted.py", join_lines(lines));
    };

    std::vector<FileBlocks> files;
    for (int i = 0; i < 10; ++i) {
        SourceFile f = planted_file(3, true);
        FileBlocks fb;
        fb.blocks = extract_comment_blocks(f);
        fb.file = f;
        for (const CommentBlock& b : fb.blocks)
            fb.verdicts.push_back(analyze_block(b));
        files.push_back(std::move(fb));
    }
    for (int i = 0; i < 5; ++i) {
        SourceFile f = planted_file(2, false);
        FileBlocks fb;
        fb.blocks = extract_comment_blocks(f);
        fb.file = f;
        for (const CommentBlock& b : fb.blocks)
            fb.verdicts.push_back(analyze_block(b));
        files.push_back(std::move(fb));
    }

    PositionDistribution dist = co_position_stats(files);
    CHECK(dist.matched == 15);
    CHECK(dist.unmatched == 0);
    CHECK(dist.counts.at(-3) == 10);
    CHECK(dist.counts.at(2) == 5);
    CHECK(dist.band_pct_hundredths(-8, -1) == ratio_pct_hundredths(10, 15));
    CHECK(dist.band_pct_hundredths(1, 3) == ratio_pct_hundredths(5, 15));
}

TEST_CASE("position statistics with no similar code find nothing") {
    SourceFile f = SourceFile::from_text(
        "lonely.py", "# settings = load_configuration(path)\nx = 1\ny = 2\nz = 3\n");
    FileBlocks fb;
    fb.file = f;
    fb.blocks = extract_comment_blocks(f);
    for (const CommentBlock& b : fb.blocks)
        fb.verdicts.push_back(analyze_block(b));
    std::vector<FileBlocks> files = {fb};
    PositionDistribution dist = co_position_stats(files);
    CHECK(dist.matched == 0);
    CHECK(dist.unmatched == 1);
    CHECK(dist.counts.empty());
}
