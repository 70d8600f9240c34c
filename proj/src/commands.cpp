#include "cotrap/commands.hpp"

#include "cotrap/co_detector.hpp"
#include "cotrap/dataset.hpp"
#include "cotrap/defect_adapter.hpp"
#include "cotrap/error.hpp"
#include "cotrap/generation.hpp"
#include "cotrap/metrics.hpp"
#include "cotrap/prompt_forge.hpp"
#include "cotrap/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cotrap::commands {

namespace {

std::ostream& out_stream(Context& ctx) { return ctx.out ? *ctx.out : std::cout; }
std::ostream& diag_stream(Context& ctx) { return ctx.diag ? *ctx.diag : std::cerr; }

void log_skip(Context& ctx, const SkipRecord& skip) {
    json row = {{"path", skip.path}, {"reason", skip.reason}};
    diag_stream(ctx) << row.dump() << "\n";
}

std::string repository_of(const std::string& rel_path) {
    std::size_t slash = rel_path.find('/');
    return slash == std::string::npos ? "." : rel_path.substr(0, slash);
}

struct AnalyzedFile {
    SourceFile file;
    std::vector<CommentBlock> blocks;
    std::vector<CoVerdict> verdicts;
};

// Enumerates, loads, and classifies the whole corpus. Undecodable or
// unreadable files become skip records, never failures.
struct CorpusAnalysis {
    std::vector<AnalyzedFile> files;
    std::vector<SkipRecord> skips;
    std::set<std::string> repositories;
};

CorpusAnalysis analyze_corpus(Context& ctx) {
    const ToolkitConfig& config = ctx.config;
    if (config.corpus_root.empty())
        throw Error("no corpus root configured ([corpus] root in the config file)");
    CorpusListing listing = enumerate_corpus(config.corpus_root, config.corpus_filter);
    CorpusAnalysis analysis;
    analysis.skips = listing.skips;
    for (const SourceFileRef& ref : listing.files) {
        analysis.repositories.insert(repository_of(ref.path));
        std::string reason;
        std::optional<SourceFile> file = read_source_file(config.corpus_root, ref.path, &reason);
        if (!file) {
            analysis.skips.push_back({ref.path, reason});
            continue;
        }
        AnalyzedFile af;
        af.blocks = extract_comment_blocks(*file);
        af.verdicts.reserve(af.blocks.size());
        for (const CommentBlock& block : af.blocks)
            af.verdicts.push_back(analyze_block(block));
        af.file = std::move(*file);
        analysis.files.push_back(std::move(af));
    }
    for (const SkipRecord& skip : analysis.skips)
        log_skip(ctx, skip);
    return analysis;
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

json finding_to_json(const DefectFinding& finding) {
    json row = {{"rule_id", finding.rule_id},
                {"category", category_name(finding.category)},
                {"file", finding.file},
                {"start_line", finding.span.start_line},
                {"end_line", finding.span.end_line},
                {"message", finding.message}};
    if (finding.cwe)
        row["cwe"] = *finding.cwe;
    return row;
}

DefectFinding finding_from_json(const json& row) {
    DefectFinding finding;
    finding.rule_id = row.at("rule_id").get<std::string>();
    if (auto category = category_from_name(row.value("category", "defect")))
        finding.category = *category;
    finding.file = row.value("file", "");
    finding.span.start_line = row.at("start_line").get<int>();
    finding.span.end_line = row.at("end_line").get<int>();
    finding.message = row.value("message", "");
    if (row.contains("cwe"))
        finding.cwe = row["cwe"].get<std::string>();
    return finding;
}

std::vector<DefectFinding> load_findings_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read findings file " + path.string());
    std::vector<DefectFinding> findings;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        findings.push_back(finding_from_json(json::parse(line)));
    }
    return findings;
}

} // namespace

fs::path scan_dir(const ToolkitConfig& config) { return config.output_root / "scan"; }
fs::path dataset_dir(const ToolkitConfig& config) { return config.output_root / "dataset"; }
fs::path prompts_dir(const ToolkitConfig& config) { return config.output_root / "prompts"; }
fs::path generated_dir(const ToolkitConfig& config) { return config.output_root / "generated"; }
fs::path evaluations_dir(const ToolkitConfig& config) {
    return config.output_root / "evaluations";
}
fs::path report_dir(const ToolkitConfig& config) { return config.output_root / "report"; }

int run_detect(Context& ctx, const fs::path& file) {
    std::string reason;
    std::optional<SourceFile> source =
        read_source_file(file.parent_path().empty() ? "." : file.parent_path(),
                         file.filename().string(), &reason);
    if (!source)
        throw Error("cannot analyze " + file.string() + ": " + reason);

    json blocks = json::array();
    for (const CommentBlock& block : extract_comment_blocks(*source)) {
        CoVerdict verdict = analyze_block(block);
        json row = {{"start_line", block.span.start_line},
                    {"end_line", block.span.end_line},
                    {"lines", block.lines.size()},
                    {"co_line_count", verdict.co_line_count},
                    {"parse_ok", verdict.parse_ok}};
        if (verdict.nontrivial_kind)
            row["nontrivial_kind"] = *verdict.nontrivial_kind;
        blocks.push_back(std::move(row));
    }
    json output = {{"path", file.string()}, {"blocks", blocks}};
    out_stream(ctx) << output.dump(2) << "\n";
    return 0;
}

int run_scan(Context& ctx, std::optional<fs::path> input) {
    const ToolkitConfig& config = ctx.config;
    fs::path target = input.value_or(config.corpus_root);
    if (target.empty())
        throw Error("scan needs --input or a configured corpus root");
    fs::path dir = scan_dir(config);
    fs::create_directories(dir);
    fs::path sarif_path = run_external_scanner(config.scanner, target, dir / "results.sarif");
    SarifIngest ingest = ingest_sarif_file(sarif_path);

    std::ofstream findings(dir / "findings.jsonl");
    for (const DefectFinding& finding : ingest.findings)
        findings << finding_to_json(finding).dump() << "\n";
    for (const SkipRecord& skip : ingest.skips)
        log_skip(ctx, skip);

    json summary = {{"command", "scan"},
                    {"sarif", sarif_path.string()},
                    {"findings", ingest.findings.size()},
                    {"skipped_results", ingest.skips.size()},
                    {"ruleset_id", config.scanner.ruleset_id}};
    out_stream(ctx) << (ctx.json ? summary.dump() : summary.dump(2)) << "\n";
    return 0;
}

int run_prevalence(Context& ctx, bool with_positions) {
    CorpusAnalysis analysis = analyze_corpus(ctx);
    std::vector<FileAnalysis> rows;
    rows.reserve(analysis.files.size());
    for (const AnalyzedFile& af : analysis.files)
        rows.push_back({repository_of(af.file.path), af.file.path, af.verdicts});
    RatioReport report = prevalence_stats(rows);

    fs::path dir = ctx.config.output_root / "prevalence";
    write_file(dir / "prevalence.csv", report.to_csv());
    write_file(dir / "prevalence.md", report.to_markdown("With CO code"));

    json summary = report.to_json();
    summary["command"] = "prevalence";
    summary["skipped_files"] = analysis.skips.size();

    if (with_positions) {
        std::vector<FileBlocks> blocks;
        for (AnalyzedFile& af : analysis.files)
            blocks.push_back({af.file, af.blocks, af.verdicts});
        PositionDistribution dist =
            co_position_stats(blocks, ctx.config.position_stats);
        write_file(dir / "positions.csv", dist.to_csv());
        summary["positions"] = {
            {"matched", dist.matched},
            {"unmatched", dist.unmatched},
            {"above_band_pct", hundredths_to_double(dist.band_pct_hundredths(-8, -1))},
            {"below_band_pct", hundredths_to_double(dist.band_pct_hundredths(1, 3))},
        };
    }
    out_stream(ctx) << (ctx.json ? summary.dump() : report.to_markdown("With CO code")) << "\n";
    return 0;
}

int run_codefects(Context& ctx, std::optional<fs::path> pool_out) {
    const ToolkitConfig& config = ctx.config;
    CorpusAnalysis analysis = analyze_corpus(ctx);

    fs::path snapshot = config.output_root / "codefects" / "snapshot";
    fs::remove_all(snapshot);
    fs::create_directories(snapshot);

    // Uncomment every CO block in place; drop files that stop parsing.
    struct SnapshotFile {
        const AnalyzedFile* source;
        std::vector<CoVerdict> co_verdicts;
    };
    std::vector<SnapshotFile> kept;
    std::vector<SkipRecord> skips;
    for (const AnalyzedFile& af : analysis.files) {
        std::vector<CommentBlock> co_blocks;
        std::vector<CoVerdict> co_verdicts;
        for (std::size_t i = 0; i < af.blocks.size(); ++i) {
            if (af.verdicts[i].co_line_count > 0) {
                co_blocks.push_back(af.blocks[i]);
                co_verdicts.push_back(af.verdicts[i]);
            }
        }
        if (co_blocks.empty())
            continue;
        UncommentOutcome outcome = uncomment_all(af.file, co_blocks);
        if (!outcome.ok()) {
            skips.push_back({af.file.path, *outcome.skip_reason});
            continue;
        }
        write_file(snapshot / af.file.path, *outcome.text);
        kept.push_back({&af, std::move(co_verdicts)});
    }
    for (const SkipRecord& skip : skips)
        log_skip(ctx, skip);

    fs::path sarif_path = run_external_scanner(config.scanner, snapshot,
                                               config.output_root / "codefects" /
                                                   "results.sarif");
    SarifIngest ingest = ingest_sarif_file(sarif_path);
    std::map<std::string, std::vector<DefectFinding>> findings_by_file;
    for (const DefectFinding& finding : ingest.findings)
        findings_by_file[finding.file].push_back(finding);

    std::vector<SnapshotAnalysis> rows;
    for (const SnapshotFile& sf : kept) {
        SnapshotAnalysis row;
        row.repository = repository_of(sf.source->file.path);
        row.path = sf.source->file.path;
        row.co_verdicts = sf.co_verdicts;
        auto it = findings_by_file.find(sf.source->file.path);
        if (it != findings_by_file.end())
            row.findings = it->second;
        rows.push_back(std::move(row));
    }
    RatioReport report =
        co_defect_stats(rows, static_cast<std::int64_t>(analysis.repositories.size()));
    fs::path dir = config.output_root / "codefects";
    write_file(dir / "codefects.csv", report.to_csv());
    write_file(dir / "codefects.md", report.to_markdown("Defective"));

    if (pool_out) {
        // Defect-free CO blocks: scanner saw the uncommented snapshot and
        // reported nothing that touches them.
        CoBlockPool pool;
        for (const SnapshotFile& sf : kept) {
            auto it = findings_by_file.find(sf.source->file.path);
            for (std::size_t i = 0; i < sf.source->blocks.size(); ++i) {
                if (sf.source->verdicts[i].co_line_count <= 0)
                    continue;
                bool clean_block = true;
                if (it != findings_by_file.end()) {
                    for (const DefectFinding& finding : it->second) {
                        if (finding.span.intersects(sf.source->blocks[i].span)) {
                            clean_block = false;
                            break;
                        }
                    }
                }
                if (clean_block)
                    pool.entries.push_back({sf.source->blocks[i].lines});
            }
        }
        fs::create_directories(pool_out->parent_path());
        pool.save(*pool_out);
    }

    json summary = report.to_json();
    summary["command"] = "codefects";
    summary["uncomment_skips"] = skips.size();
    summary["scanned_files"] = kept.size();
    out_stream(ctx) << (ctx.json ? summary.dump() : report.to_markdown("Defective")) << "\n";
    return 0;
}

int run_build_dataset(Context& ctx, std::optional<fs::path> sarif,
                      std::optional<std::size_t> count) {
    const ToolkitConfig& config = ctx.config;
    std::vector<DefectFinding> findings;
    if (sarif) {
        SarifIngest ingest = ingest_sarif_file(*sarif);
        findings = std::move(ingest.findings);
        for (const SkipRecord& skip : ingest.skips)
            log_skip(ctx, skip);
    } else {
        findings = load_findings_jsonl(scan_dir(config) / "findings.jsonl");
    }
    std::sort(findings.begin(), findings.end(),
              [](const DefectFinding& a, const DefectFinding& b) {
                  if (a.file != b.file)
                      return a.file < b.file;
                  return a.span.start_line < b.span.start_line;
              });

    std::vector<DatasetSample> samples;
    std::size_t next_id = 0;
    std::map<std::string, std::optional<SourceFile>> cache;
    for (const DefectFinding& finding : findings) {
        auto it = cache.find(finding.file);
        if (it == cache.end()) {
            std::string reason;
            auto file = read_source_file(config.corpus_root, finding.file, &reason);
            if (!file)
                log_skip(ctx, {finding.file, reason});
            it = cache.emplace(finding.file, std::move(file)).first;
        }
        if (!it->second)
            continue;
        std::string sample_id = std::to_string(next_id++);
        sample_id.insert(0, 6 > sample_id.size() ? 6 - sample_id.size() : 0, '0');
        try {
            samples.push_back(excise(*it->second, finding, sample_id));
        } catch (const Error& e) {
            log_skip(ctx, {finding.file, e.what()});
        }
    }

    samples = clean(std::move(samples), config.clean);
    std::size_t n = count.value_or(config.sample_count);
    if (n > 0 && n < samples.size()) {
        Rng rng(config.seed);
        samples = proportional_sample(samples, n, rng);
    }

    ManifestHeader header;
    header.seed = config.seed;
    header.max_findings_per_file = config.clean.max_findings_per_file;
    header.count = samples.size();
    fs::remove_all(dataset_dir(config)); // no stale contexts from earlier runs
    write_manifest(samples, dataset_dir(config), header);

    json summary = {{"command", "build-dataset"},
                    {"findings", findings.size()},
                    {"samples", samples.size()},
                    {"dataset", dataset_dir(config).string()}};
    out_stream(ctx) << (ctx.json ? summary.dump() : summary.dump(2)) << "\n";
    return 0;
}

int run_forge(Context& ctx, const std::vector<VariantKind>& kinds_arg) {
    const ToolkitConfig& config = ctx.config;
    Dataset dataset = read_manifest(dataset_dir(config));
    const std::vector<VariantKind>& kinds = kinds_arg.empty() ? config.kinds : kinds_arg;

    std::optional<CoBlockPool> pool;
    bool needs_pool = std::find(kinds.begin(), kinds.end(), VariantKind::RandomInsertion) !=
                      kinds.end();
    if (needs_pool) {
        if (config.pool_path.empty())
            throw Error("RandomInsertion needs [forge] pool in the config");
        pool = CoBlockPool::load(config.pool_path);
    }
    Rng rng(config.seed);

    fs::path dir = prompts_dir(config);
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream index(dir / "index.jsonl");
    std::ofstream skips_log(dir / "skips.jsonl");
    std::size_t variant_count = 0, skip_count = 0;

    for (const DatasetSample& sample : dataset.samples) {
        ForgeResult result =
            forge_suite(sample, kinds, config.forge, pool ? &*pool : nullptr, &rng);
        for (const PromptVariant& variant : result.variants) {
            std::string name = std::string(variant_kind_name(variant.kind)) + "__" +
                               (variant.offset ? offset_label(*variant.offset) : "blank") + ".py";
            write_file(dir / variant.sample_id / name, variant.text);
            json row = {{"sample_id", variant.sample_id},
                        {"kind", variant_kind_name(variant.kind)},
                        {"offset", variant.offset ? offset_label(*variant.offset) : "blank"},
                        {"completion_point_in_prompt", variant.completion_point_in_prompt},
                        {"file", variant.sample_id + "/" + name}};
            if (variant.inserted_span) {
                row["inserted_span"] = {{"start_line", variant.inserted_span->start_line},
                                        {"end_line", variant.inserted_span->end_line}};
                row["sparsity_class"] = sparsity_class_name(classify_sparsity(variant));
            }
            if (variant.instruction_line)
                row["instruction_line"] = *variant.instruction_line;
            index << row.dump() << "\n";
            ++variant_count;
        }
        for (const RangeSkip& skip : result.skips) {
            json row = {{"sample_id", skip.sample_id},
                        {"kind", variant_kind_name(skip.kind)},
                        {"offset", offset_label(skip.offset)},
                        {"reason", skip.reason}};
            skips_log << row.dump() << "\n";
            ++skip_count;
        }
    }

    json summary = {{"command", "forge"},
                    {"samples", dataset.samples.size()},
                    {"variants", variant_count},
                    {"range_skips", skip_count},
                    {"prompts", dir.string()}};
    out_stream(ctx) << (ctx.json ? summary.dump() : summary.dump(2)) << "\n";
    return 0;
}

namespace {

struct PromptIndexEntry {
    std::string sample_id;
    VariantKind kind = VariantKind::Blank;
    std::optional<int> offset;
    int completion_point_in_prompt = 0;
    std::string file;
    std::optional<std::string> sparsity;
};

std::vector<PromptIndexEntry> load_prompt_index(const fs::path& dir) {
    std::ifstream in(dir / "index.jsonl");
    if (!in)
        throw Error("no prompt index at " + (dir / "index.jsonl").string() +
                    " (run `forge` first)");
    std::vector<PromptIndexEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        json row = json::parse(line);
        PromptIndexEntry entry;
        entry.sample_id = row.at("sample_id").get<std::string>();
        auto kind = variant_kind_from_name(row.at("kind").get<std::string>());
        if (!kind)
            throw Error("unknown kind in prompt index: " + line);
        entry.kind = *kind;
        std::string offset = row.at("offset").get<std::string>();
        if (offset != "blank")
            entry.offset = offset_from_label(offset);
        entry.completion_point_in_prompt = row.at("completion_point_in_prompt").get<int>();
        entry.file = row.at("file").get<std::string>();
        if (row.contains("sparsity_class"))
            entry.sparsity = row["sparsity_class"].get<std::string>();
        entries.push_back(std::move(entry));
    }
    return entries;
}

} // namespace

int run_generate(Context& ctx, const std::string& backend_id) {
    const ToolkitConfig& config = ctx.config;
    const BackendDescriptor* descriptor = nullptr;
    for (const BackendDescriptor& b : config.backends)
        if (b.id == backend_id)
            descriptor = &b;
    if (!descriptor)
        throw Error("no backend '" + backend_id + "' in the config");

    Dataset dataset = read_manifest(dataset_dir(config));
    std::map<std::string, const DatasetSample*> samples_by_id;
    for (const DatasetSample& s : dataset.samples)
        samples_by_id[s.sample_id] = &s;

    fs::path pdir = prompts_dir(config);
    std::vector<PromptIndexEntry> prompts = load_prompt_index(pdir);
    std::vector<GenerationRequest> requests;
    requests.reserve(prompts.size());
    for (const PromptIndexEntry& entry : prompts) {
        PromptVariant variant;
        variant.sample_id = entry.sample_id;
        variant.kind = entry.kind;
        variant.offset = entry.offset;
        variant.completion_point_in_prompt = entry.completion_point_in_prompt;
        variant.text = read_file(pdir / entry.file);
        requests.push_back(assemble_fim(variant));
    }
    std::sort(requests.begin(), requests.end(),
              [](const GenerationRequest& a, const GenerationRequest& b) {
                  return request_key(a) < request_key(b);
              });

    BackendDescriptor desc = *descriptor;
    if (ctx.jobs > 0)
        desc.max_concurrency = ctx.jobs;
    std::unique_ptr<Backend> backend = make_backend(desc);
    std::vector<GenerationResult> results = run_generation(requests, *backend);

    fs::path gdir = generated_dir(config);
    fs::remove_all(gdir / backend_id);
    fs::create_directories(gdir / backend_id);

    // Rewrite the shared index, keeping other backends' entries.
    std::vector<json> index_rows;
    {
        std::ifstream existing(gdir / "index.jsonl");
        std::string line;
        while (existing && std::getline(existing, line)) {
            if (trim(line).empty())
                continue;
            json row = json::parse(line);
            if (row.value("backend", "") != backend_id)
                index_rows.push_back(std::move(row));
        }
    }

    std::size_t ok = 0, empty = 0, failed = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const GenerationResult& result = results[i];
        const GenerationRequest& request = requests[i];
        std::string key = request_key(request);
        write_file(gdir / backend_id / (key + ".py"), result.spliced);
        const DatasetSample* sample = samples_by_id.count(result.sample_id)
                                          ? samples_by_id[result.sample_id]
                                          : nullptr;
        json row = {{"backend", backend_id},
                    {"sample_id", result.sample_id},
                    {"kind", variant_kind_name(result.kind)},
                    {"offset", result.offset ? offset_label(*result.offset) : "blank"},
                    {"status", gen_status_name(result.status)},
                    {"file", backend_id + "/" + key + ".py"},
                    {"completion_point_in_prompt", request.completion_point_in_prompt}};
        if (sample)
            row["rule_id"] = sample->defect.rule_id;
        if (result.spliced_span)
            row["spliced_span"] = {{"start_line", result.spliced_span->start_line},
                                   {"end_line", result.spliced_span->end_line}};
        if (!result.diagnostics.empty())
            row["diagnostics"] = result.diagnostics;
        index_rows.push_back(std::move(row));
        switch (result.status) {
        case GenStatus::Ok: ++ok; break;
        case GenStatus::Empty: ++empty; break;
        case GenStatus::BackendError: ++failed; break;
        }
    }
    std::ofstream index(gdir / "index.jsonl");
    for (const json& row : index_rows)
        index << row.dump() << "\n";

    json summary = {{"command", "generate"}, {"backend", backend_id},
                    {"requests", requests.size()}, {"ok", ok},
                    {"empty", empty},             {"backend_errors", failed}};
    out_stream(ctx) << (ctx.json ? summary.dump() : summary.dump(2)) << "\n";
    return 0;
}

int run_evaluate(Context& ctx, std::optional<fs::path> sarif) {
    const ToolkitConfig& config = ctx.config;
    fs::path gdir = generated_dir(config);
    std::ifstream gen_index_file(gdir / "index.jsonl");
    if (!gen_index_file)
        throw Error("no generated index at " + (gdir / "index.jsonl").string() +
                    " (run `generate` first)");

    Dataset dataset = read_manifest(dataset_dir(config));
    std::map<std::string, const DatasetSample*> samples_by_id;
    for (const DatasetSample& s : dataset.samples)
        samples_by_id[s.sample_id] = &s;

    std::map<std::string, std::optional<std::string>> sparsity_by_key;
    for (const PromptIndexEntry& entry : load_prompt_index(prompts_dir(config)))
        sparsity_by_key[variant_key(entry.sample_id, entry.kind, entry.offset)] = entry.sparsity;

    fs::path sarif_path;
    if (sarif) {
        sarif_path = *sarif;
    } else {
        fs::create_directories(evaluations_dir(config));
        sarif_path = run_external_scanner(config.scanner, gdir,
                                          evaluations_dir(config) / "results.sarif");
    }
    SarifIngest ingest = ingest_sarif_file(sarif_path);
    for (const SkipRecord& skip : ingest.skips)
        log_skip(ctx, skip);
    std::map<std::string, std::vector<DefectFinding>> findings_by_file;
    for (const DefectFinding& finding : ingest.findings)
        findings_by_file[finding.file].push_back(finding);

    fs::create_directories(evaluations_dir(config));
    std::ofstream records(evaluations_dir(config) / "index.jsonl");
    std::size_t total = 0, reintroduced_count = 0;
    std::string line;
    while (std::getline(gen_index_file, line)) {
        if (trim(line).empty())
            continue;
        json row = json::parse(line);
        std::string sample_id = row.at("sample_id").get<std::string>();
        const DatasetSample* sample =
            samples_by_id.count(sample_id) ? samples_by_id[sample_id] : nullptr;
        if (!sample) {
            log_skip(ctx, {sample_id, "sample missing from dataset manifest"});
            continue;
        }
        std::optional<LineSpan> spliced_span;
        if (row.contains("spliced_span"))
            spliced_span = LineSpan{row["spliced_span"]["start_line"].get<int>(),
                                    row["spliced_span"]["end_line"].get<int>()};
        std::string file = row.at("file").get<std::string>();
        std::vector<DefectFinding> empty_findings;
        const std::vector<DefectFinding>& file_findings =
            findings_by_file.count(file) ? findings_by_file[file] : empty_findings;

        MatchOutcome outcome = detect_reintroduction(
            file_findings, sample->defect.rule_id, spliced_span,
            row.value("completion_point_in_prompt", sample->completion_point),
            config.reintroduction);

        json record = {{"sample_id", sample_id},
                       {"kind", row.at("kind")},
                       {"offset", row.at("offset")},
                       {"backend", row.at("backend")},
                       {"reintroduced", outcome.reintroduced},
                       {"category", category_name(sample->defect.category)}};
        json matched = json::array();
        for (const DefectFinding& finding : outcome.matched)
            matched.push_back(finding_to_json(finding));
        record["matched_findings"] = matched;
        std::string key = variant_key(sample_id,
                                      *variant_kind_from_name(row.at("kind").get<std::string>()),
                                      row.at("offset").get<std::string>() == "blank"
                                          ? std::optional<int>{}
                                          : offset_from_label(
                                                row.at("offset").get<std::string>()));
        auto sparsity_it = sparsity_by_key.find(key);
        if (sparsity_it != sparsity_by_key.end() && sparsity_it->second)
            record["sparsity_class"] = *sparsity_it->second;
        records << record.dump() << "\n";
        ++total;
        if (outcome.reintroduced)
            ++reintroduced_count;
    }

    // Matching settings travel with the records so reports can state them.
    json settings = {{"rule_match", "rule id equality + span intersection"},
                     {"empty_splice_window", config.reintroduction.empty_splice_window},
                     {"ruleset_id", config.scanner.ruleset_id},
                     {"sarif", sarif_path.string()}};
    write_file(evaluations_dir(config) / "settings.json", settings.dump(2) + "\n");

    json summary = {{"command", "evaluate"},
                    {"records", total},
                    {"reintroduced", reintroduced_count},
                    {"empty_splice_window", config.reintroduction.empty_splice_window},
                    {"sarif", sarif_path.string()}};
    out_stream(ctx) << (ctx.json ? summary.dump() : summary.dump(2)) << "\n";
    return 0;
}

int run_report(Context& ctx) {
    const ToolkitConfig& config = ctx.config;
    fs::path index_path = evaluations_dir(config) / "index.jsonl";
    std::ifstream in(index_path);
    if (!in)
        throw Error("no evaluation index at " + index_path.string() + " (run `evaluate` first)");

    std::vector<EvaluationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        json row = json::parse(line);
        EvaluationRecord record;
        record.sample_id = row.at("sample_id").get<std::string>();
        auto kind = variant_kind_from_name(row.at("kind").get<std::string>());
        if (!kind)
            throw Error("unknown kind in evaluation index: " + line);
        record.kind = *kind;
        std::string offset = row.at("offset").get<std::string>();
        if (offset != "blank")
            record.offset = offset_from_label(offset);
        record.backend_id = row.at("backend").get<std::string>();
        record.reintroduced = row.at("reintroduced").get<bool>();
        if (auto category = category_from_name(row.value("category", "defect")))
            record.category = *category;
        if (row.contains("sparsity_class"))
            record.sparsity = sparsity_class_from_name(row["sparsity_class"].get<std::string>());
        records.push_back(std::move(record));
    }

    ReportBundle bundle = tabulate(records);
    fs::path dir = report_dir(config);
    fs::create_directories(dir);

    std::string header;
    {
        std::ifstream settings(evaluations_dir(config) / "settings.json");
        if (settings) {
            json s;
            settings >> s;
            header = "Matching: " + s.value("rule_match", "") + "; empty-splice window +/-" +
                     std::to_string(s.value("empty_splice_window", 0)) + " lines";
            if (!s.value("ruleset_id", "").empty())
                header += "; ruleset " + s.value("ruleset_id", "");
            header += "\n\n";
        }
    }
    for (const PositionTable& table : bundle.position_tables) {
        std::string name = table.kind == VariantKind::FullInsertion
                               ? "positions_" + table.backend_id + ".csv"
                               : "positions_" + table.backend_id + "_" +
                                     variant_kind_name(table.kind) + ".csv";
        write_file(dir / name, table.to_csv());
    }
    for (const auto& [backend, rows] : bundle.categories)
        write_file(dir / ("categories_" + backend + ".csv"), rates_to_csv(rows, "category"));
    for (const auto& [backend, rows] : bundle.sparsity)
        write_file(dir / ("sparsity_" + backend + ".csv"), rates_to_csv(rows, "sparsity_class"));
    if (!bundle.decrease.empty())
        write_file(dir / "decrease.csv", decrease_to_csv(bundle.decrease));
    write_file(dir / "report.md", header + bundle.to_markdown());

    json summary = {{"command", "report"},
                    {"records", records.size()},
                    {"position_tables", bundle.position_tables.size()},
                    {"report", dir.string()}};
    out_stream(ctx) << (ctx.json ? summary.dump() : bundle.to_markdown()) << "\n";
    return 0;
}

} // namespace cotrap::commands
