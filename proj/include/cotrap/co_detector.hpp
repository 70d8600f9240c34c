#pragma once

#include "cotrap/pysyntax/ast.hpp"
#include "cotrap/ratio_report.hpp"
#include "cotrap/source_model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

/// Strips one comment marker from a block line: leading whitespace stays, the
/// first `#` goes, and one space right after it (when present) goes too.
std::string uncomment_line(std::string_view line);
std::vector<std::string> uncomment_lines(const CommentBlock& block);
/// Block lines uncommented and joined with '\n'.
std::string uncomment(const CommentBlock& block);

/// Removes the longest whitespace prefix shared by all non-blank lines.
/// Blank lines pass through unchanged. Idempotent.
std::string normalize_indent(std::string_view text);

/// Whether a statement counts as code rather than prose. Statements other
/// than bare expressions always do (Pass only when nested inside a compound).
/// Bare expression statements count when they contain a call, subscript,
/// comprehension, lambda, or await anywhere inside.
bool is_nontrivial(const py::Stmt& stmt);

/// Name of the node kind that makes a statement nontrivial; for expression
/// statements, the feature that triggered (e.g. "Call").
std::string nontrivial_kind(const py::Stmt& stmt);

struct CoVerdict {
    LineSpan span;
    int co_line_count = 0; // 0 or the block's full line count
    bool parse_ok = false;
    std::optional<std::string> nontrivial_kind;
};

/// Runs the block classifier: uncomment, normalize indent, parse, then walk
/// until the first nontrivial node. Verdict is all-or-nothing.
CoVerdict analyze_block(const CommentBlock& block);
int count_commented_code(const CommentBlock& block);

/// Per-file analysis input for corpus statistics.
struct FileAnalysis {
    std::string repository;
    std::string path;
    std::vector<CoVerdict> verdicts; // one per comment block in the file
};

/// Proportion of CO code at repository / file / comment-line granularity.
/// Files with zero comment blocks still count toward the file total.
RatioReport prevalence_stats(std::span<const FileAnalysis> files);

} // namespace cotrap
