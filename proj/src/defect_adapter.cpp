#include "cotrap/defect_adapter.hpp"

#include "cotrap/error.hpp"
#include "cotrap/process.hpp"
#include "cotrap/pysyntax/parser.hpp"
#include "cotrap/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace cotrap {

const char* category_name(DefectCategory category) {
    switch (category) {
    case DefectCategory::Vulnerability: return "vulnerability";
    case DefectCategory::Reliability: return "reliability";
    case DefectCategory::Defect: return "defect";
    case DefectCategory::Maintainability: return "maintainability";
    case DefectCategory::Correctness: return "correctness";
    case DefectCategory::Modularity: return "modularity";
    }
    return "defect";
}

std::optional<DefectCategory> category_from_name(std::string_view name) {
    if (name == "vulnerability") return DefectCategory::Vulnerability;
    if (name == "reliability") return DefectCategory::Reliability;
    if (name == "defect") return DefectCategory::Defect;
    if (name == "maintainability") return DefectCategory::Maintainability;
    if (name == "correctness") return DefectCategory::Correctness;
    if (name == "modularity") return DefectCategory::Modularity;
    return std::nullopt;
}

CategoryInfo categorize(std::span<const std::string> tags) {
    CategoryInfo info;
    bool vulnerability = false, reliability = false, correctness = false;
    bool modularity = false, maintainability = false;
    for (const std::string& raw : tags) {
        std::string tag;
        tag.reserve(raw.size());
        for (char c : raw)
            tag += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (tag == "security" || tag == "vulnerability")
            vulnerability = true;
        else if (tag == "reliability")
            reliability = true;
        else if (tag == "correctness")
            correctness = true;
        else if (tag == "modularity")
            modularity = true;
        else if (tag == "maintainability")
            maintainability = true;
        if (!info.cwe && starts_with(tag, "external/cwe/cwe-")) {
            std::string num = tag.substr(std::string_view("external/cwe/cwe-").size());
            if (!num.empty() && num.find_first_not_of("0123456789") == std::string::npos)
                info.cwe = "CWE-" + num;
        }
    }
    if (vulnerability)
        info.category = DefectCategory::Vulnerability;
    else if (reliability)
        info.category = DefectCategory::Reliability;
    else if (correctness)
        info.category = DefectCategory::Correctness;
    else if (modularity)
        info.category = DefectCategory::Modularity;
    else if (maintainability)
        info.category = DefectCategory::Maintainability;
    else
        info.category = DefectCategory::Defect;
    return info;
}

namespace {

[[noreturn]] void malformed(const std::string& path) {
    throw Error("malformed SARIF document at " + path);
}

// Rule id -> tags, collected from tool.driver.rules (and extensions).
using RuleTags = std::map<std::string, std::vector<std::string>>;

void collect_rules(const nlohmann::json& component, RuleTags& tags) {
    if (!component.contains("rules") || !component["rules"].is_array())
        return;
    for (const auto& rule : component["rules"]) {
        if (!rule.is_object() || !rule.contains("id") || !rule["id"].is_string())
            continue;
        std::vector<std::string> rule_tags;
        if (rule.contains("properties") && rule["properties"].is_object()) {
            const auto& props = rule["properties"];
            if (props.contains("tags") && props["tags"].is_array()) {
                for (const auto& t : props["tags"])
                    if (t.is_string())
                        rule_tags.push_back(t.get<std::string>());
            }
        }
        tags[rule["id"].get<std::string>()] = std::move(rule_tags);
    }
}

} // namespace

SarifIngest ingest_sarif(const nlohmann::json& document) {
    if (!document.is_object() || !document.contains("runs"))
        malformed("$.runs");
    const auto& runs = document["runs"];
    if (!runs.is_array())
        malformed("$.runs");

    SarifIngest ingest;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& run = runs[r];
        std::string run_path = "$.runs[" + std::to_string(r) + "]";
        if (!run.is_object())
            malformed(run_path);

        RuleTags rule_tags;
        if (run.contains("tool") && run["tool"].is_object()) {
            const auto& tool = run["tool"];
            if (tool.contains("driver") && tool["driver"].is_object())
                collect_rules(tool["driver"], rule_tags);
            if (tool.contains("extensions") && tool["extensions"].is_array())
                for (const auto& ext : tool["extensions"])
                    if (ext.is_object())
                        collect_rules(ext, rule_tags);
        }

        if (!run.contains("results"))
            continue;
        if (!run["results"].is_array())
            malformed(run_path + ".results");
        const auto& results = run["results"];
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& result = results[i];
            std::string res_path = run_path + ".results[" + std::to_string(i) + "]";
            if (!result.is_object())
                malformed(res_path);
            ++ingest.total_results;

            std::string rule_id;
            if (result.contains("ruleId") && result["ruleId"].is_string())
                rule_id = result["ruleId"].get<std::string>();

            const nlohmann::json* region = nullptr;
            std::string uri;
            if (result.contains("locations") && result["locations"].is_array()) {
                for (const auto& loc : result["locations"]) {
                    if (!loc.is_object() || !loc.contains("physicalLocation"))
                        continue;
                    const auto& phys = loc["physicalLocation"];
                    if (!phys.is_object())
                        continue;
                    if (phys.contains("artifactLocation") &&
                        phys["artifactLocation"].is_object() &&
                        phys["artifactLocation"].contains("uri") &&
                        phys["artifactLocation"]["uri"].is_string())
                        uri = phys["artifactLocation"]["uri"].get<std::string>();
                    if (phys.contains("region") && phys["region"].is_object()) {
                        region = &phys["region"];
                        break;
                    }
                }
            }
            if (!region || !region->contains("startLine") ||
                !(*region)["startLine"].is_number_integer()) {
                ingest.skips.push_back({rule_id.empty() ? res_path : rule_id,
                                        "result has no physical location with a region"});
                continue;
            }
            DefectFinding finding;
            finding.rule_id = rule_id;
            finding.file = uri;
            finding.span.start_line = (*region)["startLine"].get<int>();
            finding.span.end_line = finding.span.start_line;
            if (region->contains("endLine") && (*region)["endLine"].is_number_integer())
                finding.span.end_line = (*region)["endLine"].get<int>();
            if (!finding.span.valid())
                malformed(res_path + ".locations[0].physicalLocation.region");
            if (result.contains("message") && result["message"].is_object() &&
                result["message"].contains("text") && result["message"]["text"].is_string())
                finding.message = result["message"]["text"].get<std::string>();
            auto it = rule_tags.find(rule_id);
            if (it != rule_tags.end()) {
                CategoryInfo info = categorize(it->second);
                finding.category = info.category;
                finding.cwe = info.cwe;
            }
            ingest.findings.push_back(std::move(finding));
        }
    }
    return ingest;
}

SarifIngest ingest_sarif_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open SARIF file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed SARIF document " + path.string() + ": " + e.what());
    }
    return ingest_sarif(doc);
}

void ScannerConfig::validate() const {
    auto count = [&](std::string_view needle) {
        std::size_t n = 0, pos = 0;
        while ((pos = command_template.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    if (count("{input_dir}") != 1 || count("{output_file}") != 1)
        throw Error("scanner command template must contain {input_dir} and {output_file} "
                    "exactly once each");
}

fs::path run_external_scanner(const ScannerConfig& config, const fs::path& snapshot_dir,
                              const fs::path& output_file) {
    config.validate();
    std::error_code ec;
    if (!fs::is_directory(snapshot_dir, ec) || ec)
        throw Error("snapshot directory does not exist: " + snapshot_dir.string());

    std::string cmd = config.command_template;
    auto replace_once = [&](std::string_view placeholder, const std::string& value) {
        std::size_t pos = cmd.find(placeholder);
        cmd.replace(pos, placeholder.size(), value);
    };
    replace_once("{input_dir}", snapshot_dir.string());
    replace_once("{output_file}", output_file.string());

    CommandResult result = run_command(cmd, config.timeout_seconds);
    if (result.timed_out)
        throw Error("scanner timed out after " + std::to_string(config.timeout_seconds) +
                    "s: " + cmd);
    if (result.exit_code != 0)
        throw Error("scanner exited with code " + std::to_string(result.exit_code) + ": " + cmd +
                    "\nstderr: " + result.err);
    if (!fs::exists(output_file))
        throw Error("scanner reported success but produced no output file: " +
                    output_file.string() + "\nstderr: " + result.err);
    return output_file;
}

UncommentOutcome uncomment_all(const SourceFile& file, std::span<const CommentBlock> blocks) {
    Lines split = split_lines(file.text);
    for (const CommentBlock& block : blocks) {
        if (block.span.start_line < 1 ||
            block.span.end_line > static_cast<int>(split.lines.size()))
            throw Error("comment block span outside file: " + file.path);
        for (int line = block.span.start_line; line <= block.span.end_line; ++line) {
            std::string& slot = split.lines[static_cast<std::size_t>(line - 1)];
            slot = uncomment_line(slot);
        }
    }
    std::string text = join_lines(split);
    UncommentOutcome outcome;
    if (!py::parse_module(text)) {
        outcome.skip_reason = "file does not parse after uncommenting";
        return outcome;
    }
    outcome.text = std::move(text);
    return outcome;
}

UncommentOutcome uncomment_in_place(const SourceFile& file, const CommentBlock& block) {
    return uncomment_all(file, std::span<const CommentBlock>(&block, 1));
}

RatioReport co_defect_stats(std::span<const SnapshotAnalysis> files,
                            std::int64_t total_repositories) {
    std::set<std::string> defective_repos;
    std::int64_t defective_files = 0;
    std::int64_t defective_lines = 0, co_lines = 0;
    for (const SnapshotAnalysis& file : files) {
        bool file_defective = false;
        for (const CoVerdict& verdict : file.co_verdicts) {
            if (verdict.co_line_count <= 0)
                continue;
            co_lines += verdict.co_line_count;
            bool block_defective = false;
            for (const DefectFinding& finding : file.findings) {
                if (finding.span.intersects(verdict.span)) {
                    block_defective = true;
                    break;
                }
            }
            if (block_defective) {
                defective_lines += verdict.co_line_count;
                file_defective = true;
            }
        }
        if (file_defective) {
            ++defective_files;
            defective_repos.insert(file.repository);
        }
    }
    RatioReport report;
    report.value_column = "defective";
    report.rows.push_back(make_ratio_row(
        "repository", static_cast<std::int64_t>(defective_repos.size()), total_repositories));
    report.rows.push_back(
        make_ratio_row("file", defective_files, static_cast<std::int64_t>(files.size())));
    report.rows.push_back(make_ratio_row("comment_line", defective_lines, co_lines));
    return report;
}

} // namespace cotrap
