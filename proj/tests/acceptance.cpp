// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Thresholds and tolerances are pinned in code.

#include "cotrap/co_detector.hpp"
#include "cotrap/commands.hpp"
#include "cotrap/dataset.hpp"
#include "cotrap/generation.hpp"
#include "cotrap/metrics.hpp"
#include "cotrap/prompt_forge.hpp"
#include "cotrap/text.hpp"
#include "helpers.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

using namespace cotrap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Checker {
    int failures = 0;
    std::vector<std::string> notes;

    void expect(bool condition, const std::string& what) {
        if (!condition) {
            ++failures;
            notes.push_back(what);
        }
    }
};

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- criterion 1: the 60-block labeled corpus ------------------------------

void criterion_1(Checker& check) {
    std::ifstream in(std::string(COTRAP_FIXTURES_DIR) + "/labeled_blocks.json");
    check.expect(in.good(), "labeled corpus fixture missing");
    if (!in.good())
        return;
    json corpus;
    in >> corpus;
    check.expect(corpus.size() == 60, "corpus must hold 60 blocks");

    auto start = std::chrono::steady_clock::now();
    int matches = 0;
    for (const auto& entry : corpus) {
        CommentBlock block;
        block.lines = entry.at("lines").get<std::vector<std::string>>();
        block.span = LineSpan{1, static_cast<int>(block.lines.size())};
        int expected = entry.at("label") == "co" ? static_cast<int>(block.lines.size()) : 0;
        if (count_commented_code(block) == expected)
            ++matches;
        else
            check.notes.push_back("verdict mismatch on: " + entry.dump());
    }
    double seconds = elapsed_seconds(start);
    check.expect(matches == 60, "verdicts matched " + std::to_string(matches) + "/60");
    check.expect(seconds < 1.0,
                 "corpus runtime " + std::to_string(seconds) + "s exceeds 1s");
}

// --- criterion 2: prevalence math over the frozen reference pairs -------

void criterion_2(Checker& check) {
    struct Cell {
        std::int64_t with;
        std::int64_t total;
        const char* expected;
    };
    const Cell prevalence_cells[] = {
        {5418, 6403, "84.62"}, {132886, 1015407, "13.09"}, {1023844, 21554082, "4.53"}};
    const Cell defect_cells[] = {
        {3055, 6403, "47.71"}, {3023, 16269, "18.58"}, {10824, 51077, "21.19"}};
    for (const Cell& cell : prevalence_cells) {
        std::string got = format_hundredths(ratio_pct_hundredths(cell.with, cell.total));
        check.expect(got == cell.expected,
                     "prevalence cell (" + std::to_string(cell.with) + "," + std::to_string(cell.total) +
                         "): computed " + got + ", reference " + cell.expected);
    }
    for (const Cell& cell : defect_cells) {
        std::string got = format_hundredths(ratio_pct_hundredths(cell.with, cell.total));
        check.expect(got == cell.expected,
                     "defective-CO cell (" + std::to_string(cell.with) + "," + std::to_string(cell.total) +
                         "): computed " + got + ", reference " + cell.expected);
    }
}

// --- criterion 3: the 44 frozen relative-increase cells ----------------

void criterion_3(Checker& check) {
    struct Cell {
        std::int64_t count;
        std::int64_t blank;
        double reference;
    };
    // (defect count, blank count) -> frozen reference percentage.
    const Cell cells[] = {
        // backend A (blank 394)
        {429, 394, 8.88},  {447, 394, 13.45}, {446, 394, 13.20}, {444, 394, 12.69},
        {441, 394, 11.93}, {439, 394, 11.42}, {439, 394, 11.42}, {432, 394, 9.64},
        {567, 394, 43.91}, {612, 394, 55.33}, {615, 394, 56.09},
        // backend B (blank 416)
        {446, 416, 7.21},  {457, 416, 9.86},  {452, 416, 8.65},  {458, 416, 10.10},
        {441, 416, 6.01},  {453, 416, 8.89},  {435, 416, 4.57},  {442, 416, 6.25},
        {630, 416, 51.44}, {651, 416, 56.49}, {658, 416, 58.17},
        // backend C (blank 426)
        {543, 426, 27.46}, {502, 426, 17.84}, {484, 426, 13.62}, {555, 426, 30.28},
        {585, 426, 37.32}, {545, 426, 27.93}, {555, 426, 30.28}, {475, 426, 11.50},
        {499, 426, 17.14}, {583, 426, 36.85}, {535, 426, 25.59},
        // backend D (blank 589)
        {598, 589, 1.53},  {628, 589, 6.62},  {720, 589, 22.24}, {692, 589, 17.49},
        {759, 589, 28.86}, {763, 589, 29.54}, {747, 589, 26.83}, {758, 589, 28.69},
        {751, 589, 27.50}, {750, 589, 27.33}, {719, 589, 22.07},
    };
    static_assert(sizeof(cells) / sizeof(cells[0]) == 44);
    for (const Cell& cell : cells) {
        double got = hundredths_to_double(rel_incr_hundredths(cell.count, cell.blank));
        check.expect(std::abs(got - cell.reference) <= 0.01 + 1e-9,
                     "rel_incr(" + std::to_string(cell.count) + "," +
                         std::to_string(cell.blank) + ") = " + std::to_string(got) +
                         ", reference " + std::to_string(cell.reference));
    }
}

// --- criterion 4: the four frozen decrease-ratio rows ------------------

void criterion_4(Checker& check) {
    struct Row {
        std::int64_t before;
        std::int64_t after;
        double reference;
    };
    const Row rows[] = {
        {567, 471, 16.93}, {630, 567, 10.00}, {499, 390, 21.84}, {751, 714, 4.93}};
    for (const Row& row : rows) {
        double got = hundredths_to_double(decrease_ratio_hundredths(row.before, row.after));
        check.expect(std::abs(got - row.reference) <= 0.01 + 1e-9,
                     "decrease(" + std::to_string(row.before) + "," +
                         std::to_string(row.after) + ") = " + std::to_string(got));
    }
}

// --- criterion 5: prompt counts over a synthetic 1,000-sample dataset ------

void criterion_5(Checker& check) {
    auto start = std::chrono::steady_clock::now();
    Rng rng(1903);
    std::vector<DatasetSample> samples;
    samples.reserve(1000);
    for (std::size_t i = 0; i < 1000; ++i)
        samples.push_back(testutil::make_sample(rng, testutil::zero_pad(i)));

    std::size_t full = 0, blank = 0, skips = 0;
    std::vector<VariantKind> kinds = {VariantKind::FullInsertion, VariantKind::Blank};
    for (const DatasetSample& sample : samples) {
        ForgeResult result = forge_suite(sample, kinds);
        skips += result.skips.size();
        for (const PromptVariant& v : result.variants) {
            if (v.kind == VariantKind::FullInsertion)
                ++full;
            else if (v.kind == VariantKind::Blank)
                ++blank;
        }
    }
    double seconds = elapsed_seconds(start);
    check.expect(full == 11000, "FullInsertion variants: " + std::to_string(full));
    check.expect(blank == 1000, "Blank variants: " + std::to_string(blank));
    check.expect(skips == 0, "unexpected range skips: " + std::to_string(skips));
    check.expect(seconds < 30.0, "runtime " + std::to_string(seconds) + "s exceeds 30s");
}

// --- criterion 6: round-trip properties, 1,000 randomized cases each -------

void criterion_6(Checker& check) {
    Rng rng(1903);

    // excise / restore
    for (int i = 0; i < 1000; ++i) {
        int span = 1 + static_cast<int>(rng.below(4));
        testutil::PlantedFile planted = testutil::make_planted_file(rng, span);
        SourceFile file = SourceFile::from_text("f.py", planted.text);
        DefectFinding finding;
        finding.rule_id = "py/unsafe-eval";
        finding.file = file.path;
        finding.span = LineSpan{planted.defect_line, planted.defect_line + span - 1};
        DatasetSample sample = excise(file, finding, testutil::zero_pad(i));
        if (restore_original(sample) != planted.text) {
            check.expect(false, "excise/restore mismatch at case " + std::to_string(i));
            return;
        }
    }

    // insert / delete
    for (int i = 0; i < 1000; ++i) {
        DatasetSample sample = testutil::make_sample(rng, testutil::zero_pad(i));
        const std::vector<int> offsets = all_offsets();
        int offset = offsets[rng.below(offsets.size())];
        PromptVariant v = insert_block(sample.context, sample.co_block,
                                       sample.completion_point, offset);
        if (strip_insertions(v) != sample.context) {
            check.expect(false, "insert/delete mismatch at case " + std::to_string(i));
            return;
        }
    }

    // assemble_fim / reassemble
    for (int i = 0; i < 1000; ++i) {
        DatasetSample sample = testutil::make_sample(rng, testutil::zero_pad(i));
        PromptVariant v;
        v.sample_id = sample.sample_id;
        v.kind = VariantKind::Blank;
        v.text = sample.context;
        v.completion_point_in_prompt =
            1 + static_cast<int>(rng.below(count_lines(sample.context) + 1));
        GenerationRequest request = assemble_fim(v);
        if (request.prefix + request.suffix != v.text) {
            check.expect(false, "fim reassembly mismatch at case " + std::to_string(i));
            return;
        }
    }

    // tag / strip
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> lines;
        std::size_t count = 1 + rng.below(6);
        std::string indent(4 * rng.below(3), ' ');
        for (std::size_t k = 0; k < count; ++k)
            lines.push_back(indent + "# " + testutil::random_code_line(rng, 0));
        Lines block;
        block.lines = lines;
        std::string original = join_lines(block);
        Lines tagged = split_lines(tag_block(original, "<Vulnerable>"));
        if (tagged.lines.size() != lines.size() + 2) {
            check.expect(false, "tag line count at case " + std::to_string(i));
            return;
        }
        tagged.lines.erase(tagged.lines.begin());
        tagged.lines.pop_back();
        if (join_lines(tagged) != original) {
            check.expect(false, "tag/strip mismatch at case " + std::to_string(i));
            return;
        }
    }
}

// --- criterion 7: sparsity classes partition every variant set -------------

void criterion_7(Checker& check) {
    Rng rng(1903);
    std::map<SparsityClass, std::int64_t> counts;
    std::int64_t total = 0;
    for (int i = 0; i < 200; ++i) {
        DatasetSample sample = testutil::make_sample(rng, testutil::zero_pad(i));
        std::vector<VariantKind> kinds = {VariantKind::FullInsertion};
        ForgeResult result = forge_suite(sample, kinds);
        for (const PromptVariant& v : result.variants) {
            counts[classify_sparsity(v)] += 1;
            ++total;
        }
    }
    std::int64_t sum = 0;
    for (const auto& [klass, count] : counts)
        sum += count;
    check.expect(sum == total, "sparsity classes do not partition the variant set");

    // Planted fixture with known classes.
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
    struct Planted {
        std::string above, below;
        SparsityClass expected;
        int copies;
    };
    const Planted planted[] = {
        {"", "", SparsityClass::SurroundedBlank, 3},
        {"", "    b = 2", SparsityClass::LeadingBlank, 4},
        {"    a = 1", "", SparsityClass::TrailingBlank, 5},
        {"    a = 1", "    b = 2", SparsityClass::Tight, 6},
        {"    a = 1", "        b = 2", SparsityClass::Misaligned, 7},
    };
    std::map<SparsityClass, int> observed;
    for (const Planted& p : planted)
        for (int i = 0; i < p.copies; ++i)
            observed[classify_sparsity(variant_with(p.above, p.below))] += 1;
    check.expect(observed[SparsityClass::SurroundedBlank] == 3 &&
                     observed[SparsityClass::LeadingBlank] == 4 &&
                     observed[SparsityClass::TrailingBlank] == 5 &&
                     observed[SparsityClass::Tight] == 6 &&
                     observed[SparsityClass::Misaligned] == 7,
                 "planted sparsity counts do not match");
}

// --- criterion 8: end-to-end replay oracle ---------------------------------

void criterion_8(Checker& check) {
    testutil::TempDir tmp("acceptance_e2e");
    auto start = std::chrono::steady_clock::now();

    // 100-sample corpus with planted single-line defects.
    Rng rng(1903);
    fs::path corpus = tmp.path / "corpus";
    for (int i = 0; i < 100; ++i) {
        testutil::PlantedFile planted = testutil::make_planted_file(rng);
        testutil::write_file(corpus / ("repo" + std::to_string(i % 4)) /
                                 ("mod_" + std::to_string(i) + ".py"),
                             planted.text);
    }

    ToolkitConfig config;
    config.seed = 1903;
    config.output_root = tmp.path / "out";
    config.corpus_root = corpus;
    config.scanner.command_template =
        std::string(STUB_SCANNER_BIN) + " --mode grep {input_dir} {output_file}";
    config.scanner.ruleset_id = "stub";
    config.scanner.timeout_seconds = 120;
    config.sample_count = 0; // keep every cleaned sample
    config.kinds = {VariantKind::FullInsertion, VariantKind::Blank};
    {
        BackendDescriptor replay;
        replay.id = "captured";
        replay.kind = BackendKind::Replay;
        replay.replay_dir = tmp.path / "completions" / "captured";
        config.backends.push_back(replay);
        BackendDescriptor null_backend;
        null_backend.id = "nothing";
        null_backend.kind = BackendKind::Null;
        config.backends.push_back(null_backend);
    }

    std::ostringstream sink, diag;
    commands::Context ctx;
    ctx.config = config;
    ctx.json = true;
    ctx.out = &sink;
    ctx.diag = &diag;

    auto last_json = [&]() {
        std::string all = sink.str();
        std::size_t line_start = all.find_last_of('\n', all.size() - 2);
        return json::parse(all.substr(line_start == std::string::npos ? 0 : line_start + 1));
    };

    commands::run_scan(ctx, std::nullopt);
    json scan_summary = last_json();
    check.expect(scan_summary["findings"] == 100,
                 "scan found " + scan_summary["findings"].dump() + " of 100 planted defects");

    commands::run_build_dataset(ctx, std::nullopt, std::nullopt);
    json build_summary = last_json();
    check.expect(build_summary["samples"] == 100,
                 "dataset holds " + build_summary["samples"].dump() + " of 100 samples");

    commands::run_forge(ctx, {});
    json forge_summary = last_json();
    check.expect(forge_summary["variants"] == 100 * 12,
                 "forged " + forge_summary["variants"].dump() + " variants, expected 1200");

    // Replay store: every variant's completion is the original defective code.
    Dataset dataset = read_manifest(commands::dataset_dir(config));
    for (const DatasetSample& sample : dataset.samples) {
        Lines block = split_lines(sample.co_block);
        Lines original;
        for (const std::string& line : block.lines)
            original.lines.push_back(uncomment_line(line));
        std::string completion = join_lines(original);
        for (VariantKind kind : {VariantKind::FullInsertion, VariantKind::Blank}) {
            if (kind == VariantKind::Blank) {
                testutil::write_file(tmp.path / "completions" / "captured" /
                                         (variant_key(sample.sample_id, kind, std::nullopt) +
                                          ".txt"),
                                     completion);
            } else {
                for (int offset : all_offsets())
                    testutil::write_file(tmp.path / "completions" / "captured" /
                                             (variant_key(sample.sample_id, kind, offset) +
                                              ".txt"),
                                         completion);
            }
        }
    }

    commands::run_generate(ctx, "captured");
    json gen_summary = last_json();
    check.expect(gen_summary["ok"] == 1200,
                 "generation ok count " + gen_summary["ok"].dump() + ", expected 1200");

    // Evaluation scanner replays the original findings at the spliced spans.
    ctx.config.scanner.command_template =
        std::string(STUB_SCANNER_BIN) + " --mode replay-index {input_dir} {output_file}";
    commands::run_evaluate(ctx, std::nullopt);
    json replay_eval = last_json();
    check.expect(replay_eval["records"] == 1200,
                 "evaluated " + replay_eval["records"].dump() + " records");
    check.expect(replay_eval["reintroduced"] == 1200,
                 "replay oracle: " + replay_eval["reintroduced"].dump() +
                     "/1200 reintroduced, expected 100%");

    // Null backend + empty-result stub scanner: 0% reintroduction.
    ctx.config.scanner.command_template =
        std::string(STUB_SCANNER_BIN) + " --mode empty {input_dir} {output_file}";
    commands::run_generate(ctx, "nothing");
    commands::run_evaluate(ctx, std::nullopt);
    json null_eval = last_json();
    check.expect(null_eval["records"] == 2400, "expected records for both backends");
    check.expect(null_eval["reintroduced"] == 0,
                 "null backend with empty scanner must reintroduce nothing, got " +
                     null_eval["reintroduced"].dump());

    double seconds = elapsed_seconds(start);
    check.expect(seconds < 60.0, "end-to-end runtime " + std::to_string(seconds) + "s");
}

// --- criterion 9: position statistics on planted corpora -------------------

void criterion_9(Checker& check) {
    auto planted_file = [](int gap, bool block_above, int salt) {
        Lines lines;
        lines.trailing_newline = true;
        std::string code = "planted_value_" + std::to_string(salt) +
                           " = transform(seed_input, " + std::to_string(salt) + ")";
        for (int i = 0; i < 5; ++i)
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
        for (int i = 0; i < 5; ++i)
            lines.lines.push_back("tail_" + std::to_string(i) + " = " + std::to_string(i));
        return SourceFile::from_text("planted_" + std::to_string(salt) + ".py",
                                     join_lines(lines));
    };

    std::vector<FileBlocks> files;
    for (int i = 0; i < 12; ++i) {
        SourceFile f = planted_file(3, true, i);
        FileBlocks fb;
        fb.blocks = extract_comment_blocks(f);
        for (const CommentBlock& b : fb.blocks)
            fb.verdicts.push_back(analyze_block(b));
        fb.file = std::move(f);
        files.push_back(std::move(fb));
    }
    for (int i = 0; i < 8; ++i) {
        SourceFile f = planted_file(2, false, 100 + i);
        FileBlocks fb;
        fb.blocks = extract_comment_blocks(f);
        for (const CommentBlock& b : fb.blocks)
            fb.verdicts.push_back(analyze_block(b));
        fb.file = std::move(f);
        files.push_back(std::move(fb));
    }

    PositionDistribution dist = co_position_stats(files);
    check.expect(dist.matched == 20, "matched " + std::to_string(dist.matched) + "/20");
    check.expect(dist.unmatched == 0, "unmatched blocks present");
    check.expect(dist.counts.count(-3) && dist.counts.at(-3) == 12,
                 "offset -3 count wrong");
    check.expect(dist.counts.count(2) && dist.counts.at(2) == 8, "offset +2 count wrong");
    // Hand computation: 12/20 = 60.00% above band, 8/20 = 40.00% below band.
    check.expect(dist.band_pct_hundredths(-8, -1) == 6000, "above band pct wrong");
    check.expect(dist.band_pct_hundredths(1, 3) == 4000, "below band pct wrong");
}

// --- criterion 10: truncation arithmetic over 500 random blocks ------------

void criterion_10(Checker& check) {
    Rng rng(1903);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> lines;
        std::size_t count = 1 + rng.below(6);
        std::string indent(rng.below(9), ' ');
        for (std::size_t k = 0; k < count; ++k)
            lines.push_back(indent + "# " + testutil::random_code_line(rng, 0));
        Lines block;
        block.lines = lines;
        std::string text = join_lines(block);
        std::size_t n = text.size();
        std::size_t expected_keep = (n + 1) / 2; // ceil(n/2)

        std::string result;
        try {
            result = truncate_block(text, 0.5);
        } catch (const Error&) {
            check.expect(false, "truncation emptied block at case " + std::to_string(i));
            return;
        }
        // The retained prefix before fragment cleanup must be exactly
        // ceil(n/2) characters: verify against an independent recomputation.
        std::string prefix = text.substr(0, expected_keep);
        Lines kept = split_lines(prefix);
        bool dropped_fragment = false;
        if (!kept.lines.empty()) {
            const std::string& last = kept.lines.back();
            std::string_view rest =
                std::string_view(last).substr(leading_whitespace(last).size());
            if (rest.empty() || rest.front() != '#') {
                kept.lines.pop_back();
                kept.trailing_newline = false;
                dropped_fragment = true;
            }
        }
        (void)dropped_fragment;
        if (result != join_lines(kept)) {
            check.expect(false, "retained prefix deviates from ceil(n/2) at case " +
                                    std::to_string(i));
            return;
        }
        for (const std::string& line : split_lines(result).lines) {
            std::string_view rest =
                std::string_view(line).substr(leading_whitespace(line).size());
            if (rest.empty() || rest.front() != '#') {
                check.expect(false, "output line without marker at case " + std::to_string(i));
                return;
            }
        }
    }
}

} // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::function<void(Checker&)> run;
    };
    const Criterion criteria[] = {
        {1, "labeled 60-block corpus matches verdicts in under 1s", criterion_1},
        {2, "prevalence ratios reproduce the frozen reference cells", criterion_2},
        {3, "all 44 relative-increase cells reproduce within 0.01pp", criterion_3},
        {4, "all four decrease-ratio rows reproduce within 0.01pp", criterion_4},
        {5, "1,000 samples forge 11,000 full + 1,000 blank prompts in under 30s",
         criterion_5},
        {6, "excise/insert/fim/tag round-trips are byte-exact (1,000 cases each)",
         criterion_6},
        {7, "sparsity classes partition variant sets and match planted counts",
         criterion_7},
        {8, "end-to-end replay oracle: 100% with replay, 0% with null backend",
         criterion_8},
        {9, "position statistics recover planted offsets and band coverages",
         criterion_9},
        {10, "truncation keeps ceil(n/2) characters and marker-shaped lines",
         criterion_10},
    };

    int failed = 0;
    for (const Criterion& criterion : criteria) {
        Checker check;
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("unexpected exception: ") + e.what());
        }
        if (check.failures == 0) {
            std::cout << "PASS criterion " << criterion.number << ": " << criterion.name
                      << "\n";
        } else {
            ++failed;
            std::cout << "FAIL criterion " << criterion.number << ": " << criterion.name
                      << "\n";
            for (const std::string& note : check.notes)
                std::cout << "     - " << note << "\n";
        }
    }
    if (failed) {
        std::cout << failed << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
