#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cotrap {

/// 1-based inclusive line range.
struct LineSpan {
    int start_line = 0;
    int end_line = 0;

    bool valid() const { return start_line >= 1 && start_line <= end_line; }
    int length() const { return end_line - start_line + 1; }
    bool contains(int line) const { return line >= start_line && line <= end_line; }
    bool intersects(const LineSpan& other) const {
        return start_line <= other.end_line && other.start_line <= end_line;
    }
    bool operator==(const LineSpan&) const = default;
};

struct SourceFile {
    std::string path; // corpus-relative
    std::string text;
    std::size_t line_count = 0;

    static SourceFile from_text(std::string path, std::string text);
};

/// Maximal run of full-line `#` comments.
struct CommentBlock {
    std::string file;
    LineSpan span;
    std::vector<std::string> lines; // raw source lines, markers included
};

/// All maximal full-line comment runs, ascending by start line. The scan is
/// lexical and tracks string/docstring state, so `#` inside string literals
/// never opens a comment. Shebang and encoding-declaration lines 1-2 are
/// directives, not comment-block members.
std::vector<CommentBlock> extract_comment_blocks(const SourceFile& file);

struct CorpusFilter {
    std::vector<std::string> include_globs = {"**/*.py"};
    std::vector<std::string> exclude_globs;
    std::uint64_t min_bytes = 0;
    std::uint64_t max_bytes = UINT64_MAX;
};

struct SourceFileRef {
    std::string path; // root-relative, '/'-separated
    std::uint64_t size_bytes = 0;
};

struct SkipRecord {
    std::string path;
    std::string reason;
};

struct CorpusListing {
    std::vector<SourceFileRef> files; // lexicographically sorted by path
    std::vector<SkipRecord> skips;
};

/// Walks `root` and lists files matching the filter, sorted by relative path.
/// Unreadable root throws; unreadable entries become skip records.
CorpusListing enumerate_corpus(const std::filesystem::path& root, const CorpusFilter& filter = {});

/// Loads one corpus file. Undecodable (non-UTF-8) or unreadable files yield
/// nullopt and fill `reason`.
std::optional<SourceFile> read_source_file(const std::filesystem::path& root,
                                           const std::string& rel_path, std::string* reason);

/// fnmatch-style glob with `**` spanning path separators.
bool glob_match(std::string_view pattern, std::string_view path);

} // namespace cotrap
