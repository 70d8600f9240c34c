#include "cotrap/dataset.hpp"

#include "cotrap/co_detector.hpp"
#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

namespace fs = std::filesystem;

namespace cotrap {

std::string comment_out_line(std::string_view line) {
    std::string_view indent = leading_whitespace(line);
    std::string_view rest = line.substr(indent.size());
    std::string out(indent);
    out += '#';
    if (!rest.empty()) {
        out += ' ';
        out += rest;
    }
    return out;
}

DatasetSample excise(const SourceFile& file, const DefectFinding& finding,
                     std::string sample_id) {
    Lines split = split_lines(file.text);
    int line_count = static_cast<int>(split.lines.size());
    if (!finding.span.valid() || finding.span.end_line > line_count)
        throw Error("finding span " + std::to_string(finding.span.start_line) + "-" +
                    std::to_string(finding.span.end_line) + " outside file " + file.path);

    Lines context;
    Lines block;
    for (int i = 1; i <= line_count; ++i) {
        std::string& line = split.lines[static_cast<std::size_t>(i - 1)];
        if (finding.span.contains(i))
            block.lines.push_back(comment_out_line(line));
        else
            context.lines.push_back(std::move(line));
    }
    context.trailing_newline = split.trailing_newline;

    DatasetSample sample;
    sample.sample_id = std::move(sample_id);
    sample.source_path = file.path;
    sample.context = join_lines(context);
    sample.co_block = join_lines(block);
    sample.completion_point = finding.span.start_line;
    sample.defect = DefectInfo{finding.rule_id, finding.category, finding.cwe, finding.span};
    return sample;
}

std::string restore_original(const DatasetSample& sample) {
    Lines context = split_lines(sample.context);
    Lines block = split_lines(sample.co_block);
    Lines out;
    out.trailing_newline = context.trailing_newline;
    int insert_at = sample.completion_point; // 1-based
    int next = 1;
    for (const std::string& line : context.lines) {
        if (next == insert_at)
            for (const std::string& b : block.lines)
                out.lines.push_back(uncomment_line(b));
        out.lines.push_back(line);
        ++next;
    }
    if (next == insert_at || insert_at > next)
        for (const std::string& b : block.lines)
            out.lines.push_back(uncomment_line(b));
    return join_lines(out);
}

std::vector<DatasetSample> clean(std::vector<DatasetSample> samples, const CleanConfig& config) {
    std::sort(samples.begin(), samples.end(), [](const DatasetSample& a, const DatasetSample& b) {
        if (a.source_path != b.source_path)
            return a.source_path < b.source_path;
        if (a.defect.original_span.start_line != b.defect.original_span.start_line)
            return a.defect.original_span.start_line < b.defect.original_span.start_line;
        return a.sample_id < b.sample_id;
    });

    // Per-file rules: overlapping findings or too many findings drop the file.
    std::map<std::string, std::vector<const DatasetSample*>> by_file;
    for (const DatasetSample& s : samples)
        by_file[s.source_path].push_back(&s);
    std::map<std::string, bool> drop_file;
    for (const auto& [path, list] : by_file) {
        bool drop = static_cast<int>(list.size()) > config.max_findings_per_file;
        for (std::size_t i = 0; i + 1 < list.size() && !drop; ++i) {
            // sorted by start line: overlap only possible with the next span
            if (list[i]->defect.original_span.intersects(list[i + 1]->defect.original_span))
                drop = true;
        }
        drop_file[path] = drop;
    }

    std::vector<DatasetSample> out;
    std::map<std::string, bool> seen_context; // byte-identical context dedupe
    for (DatasetSample& s : samples) {
        if (drop_file[s.source_path])
            continue;
        auto [it, inserted] = seen_context.emplace(s.context, true);
        (void)it;
        if (!inserted)
            continue;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<DatasetSample> proportional_sample(const std::vector<DatasetSample>& samples,
                                               std::size_t n, Rng& rng) {
    if (n > samples.size())
        throw Error("requested " + std::to_string(n) + " samples from a pool of " +
                    std::to_string(samples.size()));
    static constexpr std::array<DefectCategory, 6> kOrder = {
        DefectCategory::Vulnerability, DefectCategory::Reliability,  DefectCategory::Defect,
        DefectCategory::Maintainability, DefectCategory::Correctness, DefectCategory::Modularity,
    };
    std::array<std::vector<std::size_t>, 6> pools;
    auto slot = [&](DefectCategory c) {
        return static_cast<std::size_t>(
            std::find(kOrder.begin(), kOrder.end(), c) - kOrder.begin());
    };
    for (std::size_t i = 0; i < samples.size(); ++i)
        pools[slot(samples[i].defect.category)].push_back(i);

    // Largest-remainder apportionment of n over category frequencies.
    std::size_t total = samples.size();
    std::array<std::size_t, 6> quota{};
    std::array<std::pair<std::size_t, std::size_t>, 6> remainders{}; // (remainder, slot)
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 6; ++k) {
        std::size_t count = pools[k].size();
        quota[k] = n * count / total;
        remainders[k] = {(n * count) % total, k};
        assigned += quota[k];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first > b.first; // larger remainder first
        return a.second < b.second;   // stable tie-break: category order
    });
    for (std::size_t i = 0; assigned < n; ++i) {
        quota[remainders[i % 6].second] += 1;
        ++assigned;
    }

    std::vector<DatasetSample> out;
    out.reserve(n);
    for (std::size_t k = 0; k < 6; ++k) {
        const std::vector<std::size_t>& pool = pools[k];
        for (std::size_t idx : rng.sample_indices(pool.size(), quota[k]))
            out.push_back(samples[pool[idx]]);
    }
    std::sort(out.begin(), out.end(), [](const DatasetSample& a, const DatasetSample& b) {
        return a.sample_id < b.sample_id;
    });
    return out;
}

std::string rule_slug(std::string_view rule_id) {
    std::string slug;
    slug.reserve(rule_id.size());
    for (char c : rule_id) {
        if (c == '/')
            slug += '-';
        else
            slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return slug;
}

std::string encode_filename(const SampleMetadata& meta) {
    return meta.sample_id + "__" + category_name(meta.category) + "__" + meta.rule_slug + "__L" +
           std::to_string(meta.completion_line) + ".py";
}

SampleMetadata decode_filename(std::string_view name) {
    auto bad = [&]() -> Error {
        return Error("filename does not follow the sample codec: " + std::string(name));
    };
    if (!ends_with(name, ".py"))
        throw bad();
    std::string_view stem = name.substr(0, name.size() - 3);

    std::size_t first = stem.find("__");
    if (first == std::string_view::npos)
        throw bad();
    std::string_view id = stem.substr(0, first);
    if (id.empty() || id.find_first_not_of("0123456789") != std::string_view::npos)
        throw bad();

    std::size_t second = stem.find("__", first + 2);
    if (second == std::string_view::npos)
        throw bad();
    std::string_view cat = stem.substr(first + 2, second - first - 2);
    std::optional<DefectCategory> category = category_from_name(cat);
    if (!category)
        throw bad();

    std::size_t last = stem.rfind("__L");
    if (last == std::string_view::npos || last < second)
        throw bad();
    if (last == second)
        throw bad(); // empty rule slug
    std::string_view slug = stem.substr(second + 2, last - second - 2);
    std::string_view line_part = stem.substr(last + 3);
    if (slug.empty() || line_part.empty() ||
        line_part.find_first_not_of("0123456789") != std::string_view::npos)
        throw bad();

    SampleMetadata meta;
    meta.sample_id = std::string(id);
    meta.category = *category;
    meta.rule_slug = std::string(slug);
    meta.completion_line = std::stoi(std::string(line_part));
    if (meta.completion_line < 1)
        throw bad();
    return meta;
}

SampleMetadata sample_metadata(const DatasetSample& sample) {
    SampleMetadata meta;
    meta.sample_id = sample.sample_id;
    meta.category = sample.defect.category;
    meta.rule_slug = rule_slug(sample.defect.rule_id);
    meta.completion_line = sample.completion_point;
    return meta;
}

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
}

std::string read_text_file(const fs::path& path, const std::string& owner) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("missing referenced file for sample " + owner + ": " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

} // namespace

void write_manifest(std::span<const DatasetSample> samples, const fs::path& dir,
                    const ManifestHeader& header) {
    fs::create_directories(dir / "contexts");
    fs::create_directories(dir / "coblocks");
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
    if (!manifest)
        throw Error("cannot write manifest in " + dir.string());

    nlohmann::json head = {{"seed", header.seed},
                           {"max_findings_per_file", header.max_findings_per_file},
                           {"count", samples.size()}};
    manifest << head.dump() << "\n";

    for (const DatasetSample& s : samples) {
        std::string context_name = encode_filename(sample_metadata(s));
        std::string coblock_name = s.sample_id + ".txt";
        write_text_file(dir / "contexts" / context_name, s.context);
        write_text_file(dir / "coblocks" / coblock_name, s.co_block);
        nlohmann::json row = {
            {"sample_id", s.sample_id},
            {"source_path", s.source_path},
            {"context_file", "contexts/" + context_name},
            {"co_block_file", "coblocks/" + coblock_name},
            {"completion_point", s.completion_point},
            {"defect",
             {{"rule_id", s.defect.rule_id},
              {"category", category_name(s.defect.category)},
              {"original_span",
               {{"start_line", s.defect.original_span.start_line},
                {"end_line", s.defect.original_span.end_line}}}}},
        };
        if (s.defect.cwe)
            row["defect"]["cwe"] = *s.defect.cwe;
        manifest << row.dump() << "\n";
    }
}

Dataset read_manifest(const fs::path& dir) {
    std::ifstream manifest(dir / "manifest.jsonl", std::ios::binary);
    if (!manifest)
        throw Error("no manifest.jsonl in " + dir.string());
    Dataset dataset;
    std::string line;
    bool first = true;
    while (std::getline(manifest, line)) {
        if (trim(line).empty())
            continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed manifest line: " + std::string(e.what()));
        }
        if (first) {
            first = false;
            dataset.header.seed = row.value("seed", Rng::kDefaultSeed);
            dataset.header.max_findings_per_file = row.value("max_findings_per_file", 10);
            dataset.header.count = row.value("count", std::size_t{0});
            continue;
        }
        DatasetSample s;
        s.sample_id = row.at("sample_id").get<std::string>();
        s.source_path = row.value("source_path", "");
        s.completion_point = row.at("completion_point").get<int>();
        s.context = read_text_file(dir / row.at("context_file").get<std::string>(), s.sample_id);
        s.co_block = read_text_file(dir / row.at("co_block_file").get<std::string>(), s.sample_id);
        const auto& defect = row.at("defect");
        s.defect.rule_id = defect.at("rule_id").get<std::string>();
        auto category = category_from_name(defect.at("category").get<std::string>());
        if (!category)
            throw Error("unknown defect category for sample " + s.sample_id);
        s.defect.category = *category;
        if (defect.contains("cwe"))
            s.defect.cwe = defect["cwe"].get<std::string>();
        s.defect.original_span.start_line = defect.at("original_span").at("start_line").get<int>();
        s.defect.original_span.end_line = defect.at("original_span").at("end_line").get<int>();
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

} // namespace cotrap
