#include "cotrap/defect_adapter.hpp"

#include "cotrap/error.hpp"
#include "helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>

using namespace cotrap;
using cotrap::testutil::TempDir;
using cotrap::testutil::write_file;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void make_executable(const fs::path& path) {
    fs::permissions(path, fs::perms::owner_all | fs::perms::group_read | fs::perms::others_read,
                    fs::perm_options::replace);
}

} // namespace

TEST_CASE("categorize follows the tag priority order") {
    auto tags = [](std::initializer_list<const char*> list) {
        std::vector<std::string> out;
        for (const char* t : list)
            out.emplace_back(t);
        return out;
    };
    auto vuln = categorize(tags({"security", "external/cwe/cwe-327"}));
    CHECK(vuln.category == DefectCategory::Vulnerability);
    CHECK(vuln.cwe == "CWE-327");

    CHECK(categorize(tags({})).category == DefectCategory::Defect);
    CHECK(categorize(tags({"maintainability"})).category == DefectCategory::Maintainability);
    CHECK(categorize(tags({"maintainability", "reliability"})).category ==
          DefectCategory::Reliability);
    CHECK(categorize(tags({"correctness", "modularity"})).category ==
          DefectCategory::Correctness);
    CHECK(categorize(tags({"unknown-tag"})).category == DefectCategory::Defect);
}

TEST_CASE("sarif ingestion") {
    SUBCASE("empty results") {
        json doc = {{"runs", {{{"results", json::array()}}}}};
        SarifIngest ingest = ingest_sarif(doc);
        CHECK(ingest.findings.empty());
        CHECK(ingest.skips.empty());
        CHECK(ingest.total_results == 0);
    }

    SUBCASE("fixture with one weak-crypto result") {
        SarifIngest ingest =
            ingest_sarif_file(std::string(COTRAP_FIXTURES_DIR) + "/weak_crypto.sarif");
        REQUIRE(ingest.findings.size() == 1);
        const DefectFinding& f = ingest.findings[0];
        CHECK(f.rule_id == "py/weak-crypto");
        CHECK(f.span == LineSpan{12, 15});
        CHECK(f.file == "pkg/client.py");
        CHECK(f.category == DefectCategory::Vulnerability);
        CHECK(f.cwe == "CWE-327");
    }

    SUBCASE("result without a location becomes a skip; counts stay consistent") {
        json doc = {
            {"runs",
             {{{"results",
                {{{"ruleId", "py/a"},
                  {"locations",
                   {{{"physicalLocation",
                      {{"artifactLocation", {{"uri", "m.py"}}},
                       {"region", {{"startLine", 3}}}}}}}}},
                 {{"ruleId", "py/b"}}}}}}}};
        SarifIngest ingest = ingest_sarif(doc);
        CHECK(ingest.findings.size() == 1);
        CHECK(ingest.skips.size() == 1);
        CHECK(ingest.findings.size() + ingest.skips.size() == ingest.total_results);
        CHECK(ingest.findings[0].span == LineSpan{3, 3}); // endLine defaults to startLine
    }

    SUBCASE("malformed documents name the offending path") {
        CHECK_THROWS_WITH_AS(ingest_sarif(json{{"version", "2.1.0"}}),
                             doctest::Contains("$.runs"), Error);
        json bad = {{"runs", {{{"results", 42}}}}};
        CHECK_THROWS_WITH_AS(ingest_sarif(bad), doctest::Contains(".results"), Error);
    }
}

TEST_CASE("uncomment_in_place") {
    SUBCASE("valid block uncomments and the file still parses") {
        SourceFile file = SourceFile::from_text(
            "m.py", "def f():\n    # x = 1\n    # return x\n    pass\n");
        auto blocks = extract_comment_blocks(file);
        REQUIRE(blocks.size() == 1);
        UncommentOutcome outcome = uncomment_in_place(file, blocks[0]);
        REQUIRE(outcome.ok());
        CHECK(*outcome.text == "def f():\n    x = 1\n    return x\n    pass\n");
    }

    SUBCASE("indent mismatch after uncommenting is a skip, not an error") {
        SourceFile file = SourceFile::from_text("m.py", "x = 1\n#     y = 2\nz = 3\n");
        auto blocks = extract_comment_blocks(file);
        REQUIRE(blocks.size() == 1);
        UncommentOutcome outcome = uncomment_in_place(file, blocks[0]);
        CHECK_FALSE(outcome.ok());
        CHECK(outcome.skip_reason->find("parse") != std::string::npos);
    }

    SUBCASE("no blocks leaves the text untouched") {
        SourceFile file = SourceFile::from_text("m.py", "x = 1\ny = 2\n");
        UncommentOutcome outcome = uncomment_all(file, {});
        REQUIRE(outcome.ok());
        CHECK(*outcome.text == file.text);
    }

    SUBCASE("only block lines change") {
        SourceFile file = SourceFile::from_text(
            "m.py", "a = 1\n# b = 2\n# c = 3\nd = 4\n");
        auto blocks = extract_comment_blocks(file);
        REQUIRE(blocks.size() == 1);
        UncommentOutcome outcome = uncomment_in_place(file, blocks[0]);
        REQUIRE(outcome.ok());
        Lines before = split_lines(file.text);
        Lines after = split_lines(*outcome.text);
        REQUIRE(before.lines.size() == after.lines.size());
        for (std::size_t i = 0; i < before.lines.size(); ++i) {
            int line = static_cast<int>(i) + 1;
            if (blocks[0].span.contains(line))
                continue;
            CHECK(before.lines[i] == after.lines[i]);
        }
    }
}

TEST_CASE("external scanner runner") {
    TempDir tmp("scanner");
    fs::path snapshot = tmp.path / "snap";
    fs::create_directories(snapshot);
    fs::path output = tmp.path / "out.sarif";

    SUBCASE("stub that copies a fixture SARIF succeeds") {
        fs::path script = tmp.path / "stub.sh";
        write_file(script, "#!/bin/sh\ncp \"" + std::string(COTRAP_FIXTURES_DIR) +
                               "/weak_crypto.sarif\" \"$2\"\n");
        make_executable(script);
        ScannerConfig config;
        config.command_template = script.string() + " {input_dir} {output_file}";
        config.timeout_seconds = 10;
        fs::path produced = run_external_scanner(config, snapshot, output);
        CHECK(produced == output);
        CHECK(ingest_sarif_file(produced).findings.size() == 1);
    }

    SUBCASE("nonzero exit carries the code") {
        fs::path script = tmp.path / "fail.sh";
        write_file(script, "#!/bin/sh\necho boom >&2\nexit 3\n");
        make_executable(script);
        ScannerConfig config;
        config.command_template = script.string() + " {input_dir} {output_file}";
        CHECK_THROWS_WITH_AS(run_external_scanner(config, snapshot, output),
                             doctest::Contains("code 3"), Error);
    }

    SUBCASE("a sleeping stub hits the timeout") {
        fs::path script = tmp.path / "sleep.sh";
        write_file(script, "#!/bin/sh\nsleep 30\n");
        make_executable(script);
        ScannerConfig config;
        config.command_template = script.string() + " {input_dir} {output_file}";
        config.timeout_seconds = 1;
        CHECK_THROWS_WITH_AS(run_external_scanner(config, snapshot, output),
                             doctest::Contains("timed out"), Error);
    }

    SUBCASE("template validation") {
        ScannerConfig config;
        config.command_template = "scan {input_dir}";
        CHECK_THROWS_AS(config.validate(), Error);
        config.command_template = "scan {input_dir} {output_file} {input_dir}";
        CHECK_THROWS_AS(config.validate(), Error);
    }
}

TEST_CASE("defective-CO statistics intersect findings with block spans") {
    SnapshotAnalysis a;
    a.repository = "r1";
    a.path = "r1/a.py";
    a.co_verdicts = {CoVerdict{LineSpan{10, 12}, 3, true, "Assign"},
                     CoVerdict{LineSpan{30, 30}, 1, true, "Call"}};
    a.findings = {DefectFinding{"py/x", DefectCategory::Defect, std::nullopt, "r1/a.py",
                                LineSpan{11, 11}, ""}};

    SnapshotAnalysis b;
    b.repository = "r2";
    b.path = "r2/b.py";
    b.co_verdicts = {CoVerdict{LineSpan{5, 6}, 2, true, "For"}};
    b.findings = {DefectFinding{"py/x", DefectCategory::Defect, std::nullopt, "r2/b.py",
                                LineSpan{99, 99}, ""}};

    std::vector<SnapshotAnalysis> rows = {a, b};
    RatioReport report = co_defect_stats(rows, 4);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].with_count == 1); // repositories with a defective block
    CHECK(report.rows[0].total == 4);
    CHECK(report.rows[1].with_count == 1); // files
    CHECK(report.rows[1].total == 2);
    CHECK(report.rows[2].with_count == 3); // defective CO lines
    CHECK(report.rows[2].total == 6);      // CO lines in the snapshot
}
