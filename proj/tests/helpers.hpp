#pragma once

#include "cotrap/dataset.hpp"
#include "cotrap/rng.hpp"
#include "cotrap/source_model.hpp"
#include "cotrap/text.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace cotrap::testutil {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("cotrap_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(dir);
    return dir;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) : path(make_temp_dir(tag)) {}
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Random python-ish source line at a given indent level.
inline std::string random_code_line(Rng& rng, int indent) {
    static const char* kTemplates[] = {
        "value_% = load_%(source_%)",  "total_% += weight_% * factor_%",
        "flag_% = check_%(input_%)",   "result_% = helper_%(arg_%, key_%)",
        "name_% = str(field_%)",       "items_%.append(entry_%)",
    };
    std::string line(static_cast<std::size_t>(indent), ' ');
    std::string body = kTemplates[rng.below(6)];
    std::string out;
    for (char c : body) {
        if (c == '%')
            out += std::to_string(rng.below(90));
        else
            out += c;
    }
    return line + out;
}

/// A synthetic source file with one planted defective line. The defect sits
/// deep enough that every insertion offset stays in range.
struct PlantedFile {
    std::string text;
    int defect_line = 0; // 1-based
};

inline PlantedFile make_planted_file(Rng& rng, int defect_span_lines = 1) {
    PlantedFile out;
    int head = 12 + static_cast<int>(rng.below(6));
    int tail = 8 + static_cast<int>(rng.below(6));
    Lines lines;
    lines.trailing_newline = true;
    lines.lines.push_back("import helpers");
    lines.lines.push_back("");
    for (int i = 2; i < head; ++i) {
        if (rng.below(7) == 0)
            lines.lines.push_back("");
        else
            lines.lines.push_back(random_code_line(rng, rng.below(2) == 0 ? 0 : 4));
    }
    out.defect_line = static_cast<int>(lines.lines.size()) + 1;
    for (int i = 0; i < defect_span_lines; ++i)
        lines.lines.push_back("result_" + std::to_string(i) + " = unsafe_eval(payload_" +
                              std::to_string(rng.below(90)) + ")");
    for (int i = 0; i < tail; ++i)
        lines.lines.push_back(random_code_line(rng, 0));
    out.text = join_lines(lines);
    return out;
}

/// DatasetSample built directly (no corpus round trip) for forge-level tests.
inline DatasetSample make_sample(Rng& rng, const std::string& sample_id,
                                 DefectCategory category = DefectCategory::Vulnerability,
                                 int defect_span_lines = 1) {
    PlantedFile planted = make_planted_file(rng, defect_span_lines);
    SourceFile file = SourceFile::from_text("synthetic/" + sample_id + ".py", planted.text);
    DefectFinding finding;
    finding.rule_id = "py/unsafe-eval";
    finding.category = category;
    finding.file = file.path;
    finding.span = LineSpan{planted.defect_line, planted.defect_line + defect_span_lines - 1};
    finding.message = "planted";
    return excise(file, finding, sample_id);
}

inline std::string zero_pad(std::size_t value, std::size_t width = 6) {
    std::string s = std::to_string(value);
    if (s.size() < width)
        s.insert(0, width - s.size(), '0');
    return s;
}

} // namespace cotrap::testutil
