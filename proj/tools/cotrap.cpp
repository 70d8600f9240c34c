// cotrap: commented-out-code analysis and generation-evaluation toolkit.
//
// Subcommands cover the pipeline end to end: scan a corpus with an external
// SARIF scanner, detect commented-out code, measure its prevalence and defect
// proportions, build an excision dataset, forge prompt variants, drive a
// completion backend, and measure defect reintroduction.

#include "cotrap/commands.hpp"
#include "cotrap/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool json = false;
    int jobs = 0;
};

cotrap::commands::Context make_context(const GlobalOptions& options) {
    cotrap::commands::Context ctx;
    if (!options.config_path.empty())
        ctx.config = cotrap::ToolkitConfig::load(options.config_path);
    if (options.seed)
        ctx.config.seed = *options.seed;
    if (!options.out_dir.empty())
        ctx.config.output_root = options.out_dir;
    ctx.json = options.json;
    ctx.jobs = options.jobs;
    return ctx;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"commented-out code analysis and evaluation toolkit"};
    app.require_subcommand(1);

    GlobalOptions options;
    app.add_option("--config", options.config_path, "TOML configuration file")
        ->envname("COTRAP_CONFIG");
    app.add_option("--seed", options.seed, "override the configured random seed");
    app.add_option("--out", options.out_dir, "override the output root directory");
    app.add_flag("--json", options.json, "machine-readable summaries on stdout");
    app.add_option("--jobs", options.jobs, "cap worker threads");

    std::string detect_file;
    auto* detect = app.add_subcommand("detect", "classify comment blocks in one file");
    detect->add_option("file", detect_file, "source file to analyze")->required();

    std::string scan_input;
    auto* scan = app.add_subcommand("scan", "run the external scanner over a tree");
    scan->add_option("--input", scan_input, "directory to scan (default: corpus root)");

    bool with_positions = false;
    auto* prevalence = app.add_subcommand("prevalence", "CO-code proportions over the corpus");
    prevalence->add_flag("--positions", with_positions,
                         "also compute the CO-block position distribution");

    std::string pool_out;
    auto* codefects =
        app.add_subcommand("codefects", "defective-CO-code proportions via snapshot scan");
    codefects->add_option("--pool-out", pool_out, "write the defect-free CO block pool here");

    std::string bd_sarif;
    std::size_t bd_count = 0;
    bool bd_count_set = false;
    auto* build = app.add_subcommand("build-dataset", "excise findings into dataset samples");
    build->add_option("--sarif", bd_sarif, "SARIF file (default: scan output)");
    build->add_option("--count", bd_count, "sample count (0 keeps every cleaned sample)")
        ->each([&](const std::string&) { bd_count_set = true; });

    std::string forge_kinds;
    auto* forge = app.add_subcommand("forge", "construct prompt variants");
    forge->add_option("--kinds", forge_kinds,
                      "comma-separated kinds: blank,full,random,truncated,tagged,instructed");

    std::string backend_id;
    auto* generate = app.add_subcommand("generate", "produce completions for forged prompts");
    generate->add_option("--backend", backend_id, "backend id from the config")->required();

    std::string eval_sarif;
    auto* evaluate = app.add_subcommand("evaluate", "detect defect reintroduction");
    evaluate->add_option("--sarif", eval_sarif,
                         "SARIF over the generated tree (default: run the scanner)");

    app.add_subcommand("report", "aggregate evaluation records into tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 1;
    }

    try {
        cotrap::commands::Context ctx = make_context(options);
        auto opt_path = [](const std::string& s) {
            return s.empty() ? std::optional<std::filesystem::path>{}
                             : std::optional<std::filesystem::path>{s};
        };
        if (app.got_subcommand(detect))
            return cotrap::commands::run_detect(ctx, detect_file);
        if (app.got_subcommand(scan))
            return cotrap::commands::run_scan(ctx, opt_path(scan_input));
        if (app.got_subcommand(prevalence))
            return cotrap::commands::run_prevalence(ctx, with_positions);
        if (app.got_subcommand(codefects))
            return cotrap::commands::run_codefects(ctx, opt_path(pool_out));
        if (app.got_subcommand(build))
            return cotrap::commands::run_build_dataset(
                ctx, opt_path(bd_sarif),
                bd_count_set ? std::optional<std::size_t>{bd_count} : std::nullopt);
        if (app.got_subcommand(forge)) {
            std::vector<cotrap::VariantKind> kinds;
            if (!forge_kinds.empty()) {
                std::size_t start = 0;
                while (start <= forge_kinds.size()) {
                    std::size_t comma = forge_kinds.find(',', start);
                    std::string name = forge_kinds.substr(
                        start, comma == std::string::npos ? std::string::npos : comma - start);
                    auto kind = cotrap::variant_kind_from_name(name);
                    if (!kind)
                        throw cotrap::Error("unknown variant kind: " + name);
                    kinds.push_back(*kind);
                    if (comma == std::string::npos)
                        break;
                    start = comma + 1;
                }
            }
            return cotrap::commands::run_forge(ctx, kinds);
        }
        if (app.got_subcommand(generate))
            return cotrap::commands::run_generate(ctx, backend_id);
        if (app.got_subcommand(evaluate))
            return cotrap::commands::run_evaluate(ctx, opt_path(eval_sarif));
        if (app.got_subcommand("report"))
            return cotrap::commands::run_report(ctx);
        std::cerr << "no subcommand selected\n";
        return 1;
    } catch (const cotrap::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
