#include "cotrap/co_detector.hpp"

#include "cotrap/error.hpp"
#include "cotrap/pysyntax/parser.hpp"
#include "cotrap/text.hpp"

#include <map>
#include <set>

namespace cotrap {

std::string uncomment_line(std::string_view line) {
    std::string_view indent = leading_whitespace(line);
    std::string_view rest = line.substr(indent.size());
    std::string out(indent);
    if (!rest.empty() && rest.front() == '#') {
        rest.remove_prefix(1);
        if (!rest.empty() && rest.front() == ' ')
            rest.remove_prefix(1);
    }
    out += rest;
    return out;
}

std::vector<std::string> uncomment_lines(const CommentBlock& block) {
    std::vector<std::string> out;
    out.reserve(block.lines.size());
    for (const std::string& line : block.lines)
        out.push_back(uncomment_line(line));
    return out;
}

std::string uncomment(const CommentBlock& block) {
    Lines lines;
    lines.lines = uncomment_lines(block);
    return join_lines(lines);
}

std::string normalize_indent(std::string_view text) {
    Lines split = split_lines(text);
    std::optional<std::string_view> common;
    for (const std::string& line : split.lines) {
        if (is_blank(line))
            continue;
        std::string_view ws = leading_whitespace(line);
        if (!common) {
            common = ws;
            continue;
        }
        std::size_t n = 0;
        while (n < common->size() && n < ws.size() && (*common)[n] == ws[n])
            ++n;
        common = common->substr(0, n);
    }
    if (!common || common->empty())
        return std::string(text);
    std::size_t cut = common->size();
    for (std::string& line : split.lines) {
        if (!is_blank(line))
            line.erase(0, cut);
    }
    return join_lines(split);
}

bool is_nontrivial(const py::Stmt& stmt) {
    switch (stmt.kind) {
    case py::StmtKind::Expr:
        return stmt.expr_features != 0;
    case py::StmtKind::Pass:
        return stmt.nested;
    default:
        return true;
    }
}

std::string nontrivial_kind(const py::Stmt& stmt) {
    if (stmt.kind != py::StmtKind::Expr)
        return py::stmt_kind_name(stmt.kind);
    if (stmt.expr_features & py::FeatCall)
        return "Call";
    if (stmt.expr_features & py::FeatSubscript)
        return "Subscript";
    if (stmt.expr_features & py::FeatComprehension)
        return "Comprehension";
    if (stmt.expr_features & py::FeatLambda)
        return "Lambda";
    if (stmt.expr_features & py::FeatAwait)
        return "Await";
    return "Expr";
}

CoVerdict analyze_block(const CommentBlock& block) {
    CoVerdict verdict;
    verdict.span = block.span;
    std::string text = normalize_indent(uncomment(block));
    std::optional<py::Module> tree = py::parse_module(text);
    if (!tree)
        return verdict;
    verdict.parse_ok = true;
    py::visit_statements(tree->body, [&](const py::Stmt& stmt) {
        if (is_nontrivial(stmt)) {
            verdict.co_line_count = static_cast<int>(block.lines.size());
            verdict.nontrivial_kind = nontrivial_kind(stmt);
            return false; // early return: block is CO code
        }
        return true;
    });
    return verdict;
}

int count_commented_code(const CommentBlock& block) {
    return analyze_block(block).co_line_count;
}

RatioReport prevalence_stats(std::span<const FileAnalysis> files) {
    if (files.empty())
        throw Error("prevalence over an empty corpus");
    std::map<std::string, bool> repo_has_co;
    std::int64_t files_with_co = 0;
    std::int64_t co_lines = 0, comment_lines = 0;
    for (const FileAnalysis& file : files) {
        bool has_co = false;
        for (const CoVerdict& v : file.verdicts) {
            comment_lines += v.span.length();
            co_lines += v.co_line_count;
            if (v.co_line_count > 0)
                has_co = true;
        }
        repo_has_co[file.repository] |= has_co;
        if (has_co)
            ++files_with_co;
    }
    std::int64_t repos_with_co = 0;
    for (const auto& [repo, has] : repo_has_co)
        repos_with_co += has ? 1 : 0;

    RatioReport report;
    report.value_column = "with_co";
    report.rows.push_back(make_ratio_row("repository", repos_with_co,
                                         static_cast<std::int64_t>(repo_has_co.size())));
    report.rows.push_back(
        make_ratio_row("file", files_with_co, static_cast<std::int64_t>(files.size())));
    report.rows.push_back(make_ratio_row("comment_line", co_lines, comment_lines));
    return report;
}

} // namespace cotrap
