#pragma once

#include <string>
#include <vector>

namespace cotrap::py {

enum class StmtKind {
    FunctionDef,
    AsyncFunctionDef,
    ClassDef,
    Return,
    Delete,
    Assign,
    AugAssign,
    AnnAssign,
    For,
    AsyncFor,
    While,
    If,
    With,
    AsyncWith,
    Match,
    Raise,
    Try,
    Assert,
    Import,
    ImportFrom,
    Global,
    Nonlocal,
    Expr,
    Pass,
    Break,
    Continue,
};

const char* stmt_kind_name(StmtKind kind);

// Expression features recorded per statement; these drive the trivial /
// nontrivial split for bare expression statements.
enum ExprFeature : unsigned {
    FeatCall = 1u << 0,
    FeatSubscript = 1u << 1,
    FeatComprehension = 1u << 2,
    FeatLambda = 1u << 3,
    FeatAwait = 1u << 4,
};

struct Stmt {
    StmtKind kind;
    int line = 0;               // 1-based line of the statement start
    bool nested = false;        // lives inside another statement's suite
    unsigned expr_features = 0; // ExprFeature bits from this statement's own expressions
    std::vector<Stmt> body;     // nested statements, document order
};

struct Module {
    std::vector<Stmt> body;
};

/// Pre-order visit; the callback returns false to stop early.
template <typename F> bool visit_statements(const std::vector<Stmt>& stmts, F&& fn) {
    for (const Stmt& s : stmts) {
        if (!fn(s))
            return false;
        if (!visit_statements(s.body, fn))
            return false;
    }
    return true;
}

} // namespace cotrap::py
