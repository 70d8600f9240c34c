#include "cotrap/source_model.hpp"

#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace cotrap {

SourceFile SourceFile::from_text(std::string path, std::string text) {
    SourceFile f;
    f.path = std::move(path);
    f.line_count = count_lines(text);
    f.text = std::move(text);
    return f;
}

namespace {

// Tracks whether each physical line begins inside a string literal.
// Handles single/triple quotes, escapes, and backslash continuation of
// single-quoted strings. f-string interiors are plain string text.
class StringState {
public:
    bool in_string_at_line_start() const { return mode_ != Mode::None; }

    // Scans one physical line (without the newline) and reports whether its
    // first non-whitespace character is a `#` outside any string.
    bool scan_line_is_comment(std::string_view line) {
        std::size_t i = 0;
        if (mode_ == Mode::None) {
            std::size_t first = line.find_first_not_of(" \t\f\v");
            if (first == std::string_view::npos)
                return false; // blank line, state unchanged
            if (line[first] == '#')
                return true; // whole line is a comment
            i = first;
        }
        scan_from(line, i);
        return false;
    }

private:
    enum class Mode { None, Single, Triple };

    void scan_from(std::string_view line, std::size_t i) {
        while (i < line.size()) {
            char c = line[i];
            if (mode_ == Mode::None) {
                if (c == '#')
                    return; // trailing comment, rest of line ignored
                if (c == '\'' || c == '"') {
                    quote_ = c;
                    if (i + 2 < line.size() && line[i + 1] == c && line[i + 2] == c) {
                        mode_ = Mode::Triple;
                        i += 3;
                    } else {
                        mode_ = Mode::Single;
                        i += 1;
                    }
                    continue;
                }
                ++i;
            } else if (mode_ == Mode::Single) {
                if (c == '\\') {
                    if (i + 1 >= line.size()) {
                        // Backslash-newline: string continues on the next line.
                        return;
                    }
                    i += 2;
                    continue;
                }
                if (c == quote_) {
                    mode_ = Mode::None;
                }
                ++i;
            } else { // Triple
                if (c == '\\') {
                    i += 2;
                    continue;
                }
                if (c == quote_ && i + 2 < line.size() && line[i + 1] == quote_ &&
                    line[i + 2] == quote_) {
                    mode_ = Mode::None;
                    i += 3;
                    continue;
                }
                ++i;
            }
        }
        // Unterminated single-quoted string without a continuation backslash:
        // the real tokenizer rejects the file; recover by closing at EOL.
        if (mode_ == Mode::Single)
            mode_ = Mode::None;
    }

    Mode mode_ = Mode::None;
    char quote_ = 0;
};

const std::regex kEncodingDecl(R"(^[ \t\f]*#.*coding[:=][ \t]*[-_.a-zA-Z0-9]+)");

bool is_directive_line(std::string_view line, int line_number) {
    if (line_number > 2)
        return false;
    std::string_view body = line.substr(leading_whitespace(line).size());
    if (line_number == 1 && starts_with(body, "#!"))
        return true;
    return std::regex_search(line.begin(), line.end(), kEncodingDecl);
}

} // namespace

std::vector<CommentBlock> extract_comment_blocks(const SourceFile& file) {
    std::vector<CommentBlock> blocks;
    Lines split = split_lines(file.text);
    StringState state;
    CommentBlock current;
    current.file = file.path;
    auto flush = [&]() {
        if (!current.lines.empty()) {
            blocks.push_back(current);
            current.lines.clear();
        }
    };
    for (std::size_t idx = 0; idx < split.lines.size(); ++idx) {
        const std::string& line = split.lines[idx];
        int line_no = static_cast<int>(idx) + 1;
        bool comment = state.scan_line_is_comment(line);
        if (comment && !is_directive_line(line, line_no)) {
            if (current.lines.empty())
                current.span.start_line = line_no;
            current.span.end_line = line_no;
            current.lines.push_back(line);
        } else {
            flush();
        }
    }
    flush();
    return blocks;
}

bool glob_match(std::string_view pattern, std::string_view path) {
    // Segment-wise match; "**" spans any number of segments.
    auto split_segments = [](std::string_view s) {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        while (start <= s.size()) {
            std::size_t sep = s.find('/', start);
            if (sep == std::string_view::npos) {
                out.push_back(s.substr(start));
                break;
            }
            out.push_back(s.substr(start, sep - start));
            start = sep + 1;
        }
        return out;
    };

    // Classic wildcard match for one segment (* and ? only).
    auto segment_match = [](std::string_view pat, std::string_view seg) {
        std::size_t p = 0, s = 0, star_p = std::string_view::npos, star_s = 0;
        while (s < seg.size()) {
            if (p < pat.size() && (pat[p] == '?' || pat[p] == seg[s])) {
                ++p;
                ++s;
            } else if (p < pat.size() && pat[p] == '*') {
                star_p = p++;
                star_s = s;
            } else if (star_p != std::string_view::npos) {
                p = star_p + 1;
                s = ++star_s;
            } else {
                return false;
            }
        }
        while (p < pat.size() && pat[p] == '*')
            ++p;
        return p == pat.size();
    };

    std::vector<std::string_view> pats = split_segments(pattern);
    std::vector<std::string_view> segs = split_segments(path);

    // DP over (pattern segment, path segment).
    std::size_t np = pats.size(), ns = segs.size();
    std::vector<std::vector<char>> dp(np + 1, std::vector<char>(ns + 1, 0));
    dp[0][0] = 1;
    for (std::size_t i = 1; i <= np; ++i) {
        if (pats[i - 1] == "**")
            dp[i][0] = dp[i - 1][0];
    }
    for (std::size_t i = 1; i <= np; ++i) {
        for (std::size_t j = 1; j <= ns; ++j) {
            if (pats[i - 1] == "**")
                dp[i][j] = dp[i - 1][j] || dp[i][j - 1];
            else
                dp[i][j] = dp[i - 1][j - 1] && segment_match(pats[i - 1], segs[j - 1]);
        }
    }
    return dp[np][ns];
}

namespace {

bool matches_any(const std::vector<std::string>& globs, std::string_view path) {
    for (const auto& g : globs)
        if (glob_match(g, path))
            return true;
    return false;
}

bool dir_excluded(const std::vector<std::string>& globs, const std::string& dir_rel) {
    for (const auto& g : globs) {
        if (glob_match(g, dir_rel))
            return true;
        if (ends_with(g, "/**") && glob_match(g.substr(0, g.size() - 3), dir_rel))
            return true;
    }
    return false;
}

void walk(const fs::path& root, const std::string& rel, const CorpusFilter& filter,
          CorpusListing& out) {
    fs::path dir = rel.empty() ? root : root / fs::path(rel);
    std::vector<fs::directory_entry> entries;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
        entries.push_back(*it);
    if (ec) {
        out.skips.push_back({rel.empty() ? "." : rel, "unreadable directory: " + ec.message()});
        return;
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
    for (const auto& entry : entries) {
        std::string name = entry.path().filename().string();
        std::string child_rel = rel.empty() ? name : rel + "/" + name;
        std::error_code tec;
        if (entry.is_directory(tec)) {
            if (dir_excluded(filter.exclude_globs, child_rel))
                continue;
            walk(root, child_rel, filter, out);
        } else if (entry.is_regular_file(tec)) {
            if (!matches_any(filter.include_globs, child_rel))
                continue;
            if (matches_any(filter.exclude_globs, child_rel))
                continue;
            std::error_code sec;
            std::uint64_t size = entry.file_size(sec);
            if (sec) {
                out.skips.push_back({child_rel, "unreadable file: " + sec.message()});
                continue;
            }
            if (size < filter.min_bytes || size > filter.max_bytes) {
                out.skips.push_back({child_rel, "size " + std::to_string(size) +
                                                    " outside configured bounds"});
                continue;
            }
            out.files.push_back({child_rel, size});
        } else if (tec) {
            out.skips.push_back({child_rel, "unreadable entry: " + tec.message()});
        }
    }
}

} // namespace

CorpusListing enumerate_corpus(const fs::path& root, const CorpusFilter& filter) {
    std::error_code ec;
    if (!fs::is_directory(root, ec) || ec)
        throw Error("corpus root is not a readable directory: " + root.string());
    CorpusListing out;
    walk(root, "", filter, out);
    std::sort(out.files.begin(), out.files.end(),
              [](const auto& a, const auto& b) { return a.path < b.path; });
    return out;
}

std::optional<SourceFile> read_source_file(const fs::path& root, const std::string& rel_path,
                                           std::string* reason) {
    fs::path full = root / fs::path(rel_path);
    std::ifstream in(full, std::ios::binary);
    if (!in) {
        if (reason)
            *reason = "cannot open file";
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (!is_valid_utf8(text)) {
        if (reason)
            *reason = "not valid UTF-8";
        return std::nullopt;
    }
    return SourceFile::from_text(rel_path, std::move(text));
}

} // namespace cotrap
