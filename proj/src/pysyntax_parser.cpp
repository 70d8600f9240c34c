// Recursive-descent parser for the Python 3.10 surface grammar. It keeps just
// enough structure for comment-block classification: statement kinds, nesting,
// and which expression features (calls, subscripts, comprehensions, lambdas,
// awaits) occur in each statement. Accept/reject behaviour follows the
// CPython 3.10 parser, including parse-time checks such as assignment-target
// validity, argument ordering, and bytes/str concatenation. f-string interiors
// are treated as opaque string text and are not analyzed.

#include "cotrap/pysyntax/parser.hpp"

#include "cotrap/pysyntax/lexer.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace cotrap::py {

namespace {

struct SyntaxFailure {
    int line;
    std::string message;
};

// How an expression may be used on the left of `=` / `del` / `for`.
enum class Target {
    None,      // not assignable
    Name,      // plain name: valid single target
    Single,    // attribute/subscript: valid single target, not for walrus
    Starred,   // *x where x is a target; only valid inside tuples/lists
    TupleList, // display whose elements are all targets
};

struct ExprRes {
    Target target = Target::None;
    bool parenthesized = false; // exactly one pair of enclosing parens, no comma
};

bool targetable(const ExprRes& e) {
    return e.target == Target::Name || e.target == Target::Single ||
           e.target == Target::TupleList || e.target == Target::Starred;
}

const std::array<std::string_view, 30> kHardKeywords = {
    "False", "None",   "True",  "and",    "as",     "assert", "async", "await",
    "break", "class",  "def",   "del",    "elif",   "else",   "except", "finally",
    "for",   "from",   "global", "if",    "import", "in",     "is",    "lambda",
    "nonlocal", "not", "or",    "pass",   "raise",  "return",
};
// "while", "with", "try", "yield", "continue" handled too; keep full set below.
const std::array<std::string_view, 5> kHardKeywords2 = {"while", "with", "try", "yield",
                                                        "continue"};

bool is_keyword(std::string_view name) {
    return std::find(kHardKeywords.begin(), kHardKeywords.end(), name) != kHardKeywords.end() ||
           std::find(kHardKeywords2.begin(), kHardKeywords2.end(), name) != kHardKeywords2.end();
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Module parse_file() {
        Module mod;
        while (!check(TokType::EndMarker))
            parse_statement_into(mod.body, /*nested=*/false);
        return mod;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    unsigned* features_ = nullptr; // current statement's feature accumulator
    int depth_ = 0;                // expression nesting guard

    struct DepthGuard {
        Parser& parser;
        explicit DepthGuard(Parser& p) : parser(p) {
            if (++parser.depth_ > 1500)
                parser.fail("expression nesting too deep");
        }
        ~DepthGuard() { --parser.depth_; }
    };

    // Restores the feature accumulator even when a parse attempt is unwound
    // (match-statement and parenthesized-with backtracking).
    struct FeatureScope {
        Parser& parser;
        unsigned* saved;
        FeatureScope(Parser& p, unsigned* next) : parser(p), saved(p.features_) {
            p.features_ = next;
        }
        ~FeatureScope() { parser.features_ = saved; }
    };

    // ---- token helpers -----------------------------------------------------

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t n = 1) const {
        std::size_t i = pos_ + n;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool check(TokType t) const { return cur().type == t; }
    bool check_op(std::string_view text) const {
        return cur().type == TokType::Op && cur().text == text;
    }
    bool check_name(std::string_view text) const {
        return cur().type == TokType::Name && cur().text == text;
    }
    bool accept_op(std::string_view text) {
        if (check_op(text)) {
            ++pos_;
            return true;
        }
        return false;
    }
    bool accept_name(std::string_view text) {
        if (check_name(text)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect_op(std::string_view text) {
        if (!accept_op(text))
            fail(std::string("expected '") + std::string(text) + "'");
    }
    void expect_name(std::string_view text) {
        if (!accept_name(text))
            fail(std::string("expected '") + std::string(text) + "'");
    }
    void expect(TokType t, const char* what) {
        if (!check(t))
            fail(std::string("expected ") + what);
        ++pos_;
    }
    std::string expect_identifier() {
        if (cur().type != TokType::Name || is_keyword(cur().text))
            fail("expected identifier");
        return toks_[pos_++].text;
    }
    [[noreturn]] void fail(std::string message) const {
        throw SyntaxFailure{cur().line, std::move(message)};
    }
    void note(unsigned feature) {
        if (features_)
            *features_ |= feature;
    }

    // True when the current token could begin an expression.
    bool at_expression_start() const {
        const Token& t = cur();
        switch (t.type) {
        case TokType::Name:
            if (!is_keyword(t.text))
                return true;
            return t.text == "lambda" || t.text == "not" || t.text == "await" ||
                   t.text == "None" || t.text == "True" || t.text == "False";
        case TokType::Number:
        case TokType::String:
            return true;
        case TokType::Op:
            return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "+" ||
                   t.text == "-" || t.text == "~" || t.text == "*" || t.text == "...";
        default:
            return false;
        }
    }

    // ---- statements --------------------------------------------------------

    void parse_statement_into(std::vector<Stmt>& out, bool nested) {
        if (check_name("if") || check_name("while") || check_name("for") || check_name("try") ||
            check_name("with") || check_name("def") || check_name("class") ||
            check_name("async") || check_op("@")) {
            out.push_back(parse_compound(nested));
            return;
        }
        if (check_name("match")) {
            std::size_t mark = pos_;
            try {
                out.push_back(parse_match(nested));
                return;
            } catch (const SyntaxFailure&) {
                pos_ = mark; // not a match statement; fall through to simple
            }
        }
        parse_simple_stmts(out, nested);
    }

    // simple_stmt (';' simple_stmt)* [';'] NEWLINE
    void parse_simple_stmts(std::vector<Stmt>& out, bool nested) {
        for (;;) {
            out.push_back(parse_simple_stmt(nested));
            if (accept_op(";")) {
                if (check(TokType::Newline)) {
                    ++pos_;
                    return;
                }
                continue;
            }
            expect(TokType::Newline, "newline");
            return;
        }
    }

    Stmt make_stmt(StmtKind kind, bool nested) {
        Stmt s;
        s.kind = kind;
        s.line = cur().line;
        s.nested = nested;
        return s;
    }

    Stmt parse_simple_stmt(bool nested) {
        Stmt s = make_stmt(StmtKind::Expr, nested);
        FeatureScope scope(*this, &s.expr_features);
        parse_simple_stmt_body(s);
        return s;
    }

    void parse_simple_stmt_body(Stmt& s) {
        if (accept_name("pass")) {
            s.kind = StmtKind::Pass;
            return;
        }
        if (accept_name("break")) {
            s.kind = StmtKind::Break;
            return;
        }
        if (accept_name("continue")) {
            s.kind = StmtKind::Continue;
            return;
        }
        if (accept_name("return")) {
            s.kind = StmtKind::Return;
            if (at_expression_start())
                parse_star_expressions();
            return;
        }
        if (accept_name("raise")) {
            s.kind = StmtKind::Raise;
            if (at_expression_start()) {
                parse_expression();
                if (accept_name("from"))
                    parse_expression();
            }
            return;
        }
        if (accept_name("global")) {
            s.kind = StmtKind::Global;
            do {
                expect_identifier();
            } while (accept_op(","));
            return;
        }
        if (accept_name("nonlocal")) {
            s.kind = StmtKind::Nonlocal;
            do {
                expect_identifier();
            } while (accept_op(","));
            return;
        }
        if (accept_name("assert")) {
            s.kind = StmtKind::Assert;
            parse_expression();
            if (accept_op(","))
                parse_expression();
            return;
        }
        if (accept_name("del")) {
            s.kind = StmtKind::Delete;
            do {
                ExprRes t = parse_primary_chain();
                if (!targetable(t) || t.target == Target::Starred)
                    fail("cannot delete this expression");
            } while (accept_op(","));
            return;
        }
        if (accept_name("import")) {
            s.kind = StmtKind::Import;
            parse_import_names();
            return;
        }
        if (check_name("from")) {
            s.kind = StmtKind::ImportFrom;
            parse_from_import();
            return;
        }
        if (check_name("yield")) {
            s.kind = StmtKind::Expr;
            parse_yield_expr();
            return;
        }
        parse_assignment_or_expression(s);
    }

    void parse_import_names() {
        do {
            expect_identifier();
            while (accept_op("."))
                expect_identifier();
            if (accept_name("as"))
                expect_identifier();
        } while (accept_op(","));
    }

    void parse_from_import() {
        expect_name("from");
        int dots = 0;
        for (;;) {
            if (accept_op("."))
                dots += 1;
            else if (accept_op("..."))
                dots += 3;
            else
                break;
        }
        bool has_module = cur().type == TokType::Name && !is_keyword(cur().text);
        if (has_module) {
            expect_identifier();
            while (accept_op("."))
                expect_identifier();
        } else if (dots == 0) {
            fail("expected module name");
        }
        expect_name("import");
        if (accept_op("*"))
            return;
        bool parens = accept_op("(");
        do {
            if (parens && check_op(")"))
                break; // trailing comma
            expect_identifier();
            if (accept_name("as"))
                expect_identifier();
        } while (accept_op(","));
        if (parens)
            expect_op(")");
    }

    // assignment | augassign | annassign | expression statement
    void parse_assignment_or_expression(Stmt& s) {
        ExprRes first = parse_star_expressions();

        if (check_op(":")) {
            // Annotated assignment: single name/attribute/subscript target.
            if (first.target != Target::Name && first.target != Target::Single)
                fail("invalid annotated assignment target");
            ++pos_;
            s.kind = StmtKind::AnnAssign;
            parse_expression();
            if (accept_op("=")) {
                if (check_name("yield"))
                    parse_yield_expr();
                else
                    parse_star_expressions();
            }
            return;
        }

        static const std::array<std::string_view, 13> aug = {
            "+=", "-=", "*=", "/=", "//=", "%=", "@=", "**=", ">>=", "<<=", "&=", "|=", "^="};
        for (std::string_view op : aug) {
            if (check_op(op)) {
                if (first.target != Target::Name && first.target != Target::Single)
                    fail("illegal expression for augmented assignment");
                ++pos_;
                s.kind = StmtKind::AugAssign;
                if (check_name("yield"))
                    parse_yield_expr();
                else
                    parse_star_expressions();
                return;
            }
        }

        if (check_op("=")) {
            s.kind = StmtKind::Assign;
            ExprRes lhs = first;
            while (accept_op("=")) {
                if (!targetable(lhs))
                    fail("cannot assign to expression");
                if (lhs.target == Target::Starred)
                    fail("starred assignment target must be in a list or tuple");
                if (check_name("yield")) {
                    parse_yield_expr();
                    lhs = ExprRes{};
                } else {
                    lhs = parse_star_expressions();
                }
            }
            return;
        }

        s.kind = StmtKind::Expr;
    }

    // ---- compound statements ------------------------------------------------

    Stmt parse_compound(bool nested) {
        DepthGuard guard(*this);
        if (check_op("@"))
            return parse_decorated(nested);
        if (check_name("if"))
            return parse_if(nested);
        if (check_name("while"))
            return parse_while(nested);
        if (check_name("for"))
            return parse_for(nested, false);
        if (check_name("try"))
            return parse_try(nested);
        if (check_name("with"))
            return parse_with(nested, false);
        if (check_name("def"))
            return parse_def(nested, false);
        if (check_name("class"))
            return parse_class(nested);
        if (check_name("async")) {
            if (peek().type == TokType::Name && peek().text == "def") {
                ++pos_;
                return parse_def(nested, true);
            }
            if (peek().type == TokType::Name && peek().text == "for") {
                ++pos_;
                return parse_for(nested, true);
            }
            if (peek().type == TokType::Name && peek().text == "with") {
                ++pos_;
                return parse_with(nested, true);
            }
            fail("expected 'def', 'for' or 'with' after 'async'");
        }
        fail("expected compound statement");
    }

    Stmt parse_decorated(bool nested) {
        while (accept_op("@")) {
            unsigned decorator_features = 0; // decorators belong to the definition
            {
                FeatureScope scope(*this, &decorator_features);
                parse_namedexpr();
            }
            expect(TokType::Newline, "newline after decorator");
        }
        if (check_name("def"))
            return parse_def(nested, false);
        if (check_name("class"))
            return parse_class(nested);
        if (check_name("async") && peek().type == TokType::Name && peek().text == "def") {
            ++pos_;
            return parse_def(nested, true);
        }
        fail("expected function or class definition after decorators");
    }

    // Statement suite: either inline simple statements or an indented block.
    void parse_block_into(Stmt& parent) {
        if (check(TokType::Newline)) {
            ++pos_;
            expect(TokType::Indent, "an indented block");
            while (!check(TokType::Dedent))
                parse_statement_into(parent.body, /*nested=*/true);
            ++pos_; // Dedent
            return;
        }
        parse_simple_stmts(parent.body, /*nested=*/true);
    }

    // Parses header expressions into the compound statement's own features.
    template <typename F> void with_features(Stmt& s, F&& fn) {
        FeatureScope scope(*this, &s.expr_features);
        fn();
    }

    Stmt parse_if(bool nested) {
        Stmt s = make_stmt(StmtKind::If, nested);
        expect_name("if");
        with_features(s, [&] { parse_namedexpr(); });
        expect_op(":");
        parse_block_into(s);
        while (check_name("elif")) {
            ++pos_;
            with_features(s, [&] { parse_namedexpr(); });
            expect_op(":");
            parse_block_into(s);
        }
        if (accept_name("else")) {
            expect_op(":");
            parse_block_into(s);
        }
        return s;
    }

    Stmt parse_while(bool nested) {
        Stmt s = make_stmt(StmtKind::While, nested);
        expect_name("while");
        with_features(s, [&] { parse_namedexpr(); });
        expect_op(":");
        parse_block_into(s);
        if (accept_name("else")) {
            expect_op(":");
            parse_block_into(s);
        }
        return s;
    }

    Stmt parse_for(bool nested, bool is_async) {
        Stmt s = make_stmt(is_async ? StmtKind::AsyncFor : StmtKind::For, nested);
        expect_name("for");
        with_features(s, [&] {
            ExprRes targets = parse_for_targets();
            if (targets.target == Target::Starred)
                fail("starred assignment target must be in a list or tuple");
            expect_name("in");
            parse_star_expressions();
        });
        expect_op(":");
        parse_block_into(s);
        if (accept_name("else")) {
            expect_op(":");
            parse_block_into(s);
        }
        return s;
    }

    Stmt parse_try(bool nested) {
        Stmt s = make_stmt(StmtKind::Try, nested);
        expect_name("try");
        expect_op(":");
        parse_block_into(s);
        bool saw_handler = false;
        while (check_name("except")) {
            saw_handler = true;
            ++pos_;
            if (!check_op(":")) {
                with_features(s, [&] { parse_expression(); });
                if (accept_name("as"))
                    expect_identifier();
            }
            expect_op(":");
            parse_block_into(s);
        }
        if (accept_name("else")) {
            if (!saw_handler)
                fail("'else' without 'except' in try statement");
            expect_op(":");
            parse_block_into(s);
        }
        if (accept_name("finally")) {
            expect_op(":");
            parse_block_into(s);
        } else if (!saw_handler) {
            fail("expected 'except' or 'finally'");
        }
        return s;
    }

    Stmt parse_with(bool nested, bool is_async) {
        Stmt s = make_stmt(is_async ? StmtKind::AsyncWith : StmtKind::With, nested);
        expect_name("with");
        with_features(s, [&] {
            // Parenthesized item lists need lookahead: '(' may open either a
            // group of with-items or an ordinary expression.
            if (check_op("(")) {
                std::size_t mark = pos_;
                try {
                    ++pos_;
                    parse_with_items(/*closing_paren=*/true);
                    expect_op(")");
                    if (!check_op(":"))
                        fail("expected ':'");
                    return;
                } catch (const SyntaxFailure&) {
                    pos_ = mark;
                }
            }
            parse_with_items(/*closing_paren=*/false);
        });
        expect_op(":");
        parse_block_into(s);
        return s;
    }

    void parse_with_items(bool closing_paren) {
        do {
            if (closing_paren && check_op(")"))
                return; // trailing comma
            parse_expression();
            if (accept_name("as")) {
                ExprRes t = parse_star_target();
                if (t.target == Target::Starred)
                    fail("cannot assign to 'with' target");
            }
        } while (accept_op(","));
    }

    Stmt parse_def(bool nested, bool is_async) {
        Stmt s = make_stmt(is_async ? StmtKind::AsyncFunctionDef : StmtKind::FunctionDef, nested);
        expect_name("def");
        expect_identifier();
        expect_op("(");
        with_features(s, [&] { parse_parameters(/*allow_annotations=*/true); });
        expect_op(")");
        if (accept_op("->"))
            with_features(s, [&] { parse_expression(); });
        expect_op(":");
        parse_block_into(s);
        return s;
    }

    Stmt parse_class(bool nested) {
        Stmt s = make_stmt(StmtKind::ClassDef, nested);
        expect_name("class");
        expect_identifier();
        if (accept_op("(")) {
            with_features(s, [&] {
                if (!check_op(")"))
                    parse_call_arguments();
            });
            expect_op(")");
        }
        expect_op(":");
        parse_block_into(s);
        return s;
    }

    // def parameters and lambda parameters share ordering rules.
    void parse_parameters(bool allow_annotations) {
        bool seen_default = false;
        bool seen_star = false;
        bool seen_slash = false;
        bool seen_kwargs = false;
        bool any_param = false;
        bool bare_star_pending = false;
        auto at_end = [&] { return allow_annotations ? check_op(")") : check_op(":"); };
        auto finish = [&] {
            if (bare_star_pending)
                fail("named arguments must follow bare *");
        };
        if (at_end())
            return;
        do {
            if (at_end()) {
                finish();
                return; // trailing comma
            }
            if (seen_kwargs)
                fail("arguments cannot follow **kwargs");
            if (accept_op("/")) {
                if (seen_slash || seen_star || !any_param)
                    fail("invalid position for '/' in parameters");
                seen_slash = true;
                continue;
            }
            if (accept_op("*")) {
                if (seen_star)
                    fail("duplicate '*' in parameters");
                seen_star = true;
                if (at_end() || check_op(",")) {
                    bare_star_pending = true;
                    continue;
                }
                expect_identifier();
                if (allow_annotations && accept_op(":"))
                    parse_expression();
                continue;
            }
            if (accept_op("**")) {
                expect_identifier();
                if (allow_annotations && accept_op(":"))
                    parse_expression();
                seen_kwargs = true;
                bare_star_pending = false;
                continue;
            }
            expect_identifier();
            any_param = true;
            bare_star_pending = false;
            if (allow_annotations && accept_op(":"))
                parse_expression();
            if (accept_op("=")) {
                parse_expression();
                seen_default = true;
            } else if (seen_default && !seen_star) {
                fail("parameter without a default follows parameter with a default");
            }
        } while (accept_op(","));
        finish();
    }

    // ---- match statement (soft keyword) --------------------------------------

    Stmt parse_match(bool nested) {
        Stmt s = make_stmt(StmtKind::Match, nested);
        expect_name("match");
        with_features(s, [&] {
            // subject: star_named_expression (',' star_named_expression)* [',']
            parse_star_namedexpr_list();
        });
        expect_op(":");
        expect(TokType::Newline, "newline after match subject");
        expect(TokType::Indent, "an indented block");
        if (!check_name("case"))
            fail("expected 'case'");
        while (check_name("case")) {
            ++pos_;
            with_features(s, [&] { parse_patterns(); });
            if (accept_name("if"))
                with_features(s, [&] { parse_namedexpr(); });
            expect_op(":");
            parse_block_into(s);
        }
        expect(TokType::Dedent, "dedent after match cases");
        return s;
    }

    void parse_star_namedexpr_list() {
        do {
            if (check_op(":"))
                return; // trailing comma before colon
            if (accept_op("*"))
                parse_or_expr();
            else
                parse_namedexpr();
        } while (accept_op(","));
    }

    void parse_patterns() {
        // open sequence pattern: p (',' p)* [',']
        parse_maybe_star_pattern();
        while (accept_op(",")) {
            if (check_op(":") || check_name("if"))
                return;
            parse_maybe_star_pattern();
        }
    }

    void parse_maybe_star_pattern() {
        if (accept_op("*")) {
            if (accept_name("_"))
                return;
            expect_identifier();
            return;
        }
        parse_as_pattern();
    }

    void parse_as_pattern() {
        parse_or_pattern();
        if (accept_name("as")) {
            std::string name = expect_identifier();
            if (name == "_")
                fail("cannot use '_' as a target");
        }
    }

    void parse_or_pattern() {
        parse_closed_pattern();
        while (accept_op("|"))
            parse_closed_pattern();
    }

    void parse_closed_pattern() {
        const Token& t = cur();
        if (t.type == TokType::Number || (t.type == TokType::Op && (t.text == "-"))) {
            parse_literal_number_pattern();
            return;
        }
        if (t.type == TokType::String) {
            ++pos_;
            while (check(TokType::String))
                ++pos_;
            return;
        }
        if (check_name("None") || check_name("True") || check_name("False")) {
            ++pos_;
            return;
        }
        if (check_op("(")) {
            ++pos_;
            if (accept_op(")"))
                return; // empty sequence
            parse_patterns();
            expect_op(")");
            return;
        }
        if (check_op("[")) {
            ++pos_;
            if (accept_op("]"))
                return;
            parse_patterns();
            expect_op("]");
            return;
        }
        if (check_op("{")) {
            ++pos_;
            parse_mapping_pattern();
            expect_op("}");
            return;
        }
        if (t.type == TokType::Name && !is_keyword(t.text)) {
            ++pos_;
            bool dotted = false;
            while (accept_op(".")) {
                dotted = true;
                expect_identifier();
            }
            if (check_op("(")) {
                ++pos_;
                parse_class_pattern_args();
                expect_op(")");
                return;
            }
            (void)dotted; // plain name: capture or value pattern
            return;
        }
        fail("invalid pattern");
    }

    void parse_literal_number_pattern() {
        accept_op("-");
        expect(TokType::Number, "number");
        if (check_op("+") || check_op("-")) {
            ++pos_;
            // Only a complex literal may continue: the second part must be imaginary.
            if (cur().type != TokType::Number ||
                (cur().text.back() != 'j' && cur().text.back() != 'J'))
                fail("invalid complex literal pattern");
            ++pos_;
        }
    }

    void parse_mapping_pattern() {
        if (check_op("}"))
            return;
        do {
            if (check_op("}"))
                return; // trailing comma
            if (accept_op("**")) {
                std::string name = expect_identifier();
                if (name == "_")
                    fail("cannot use '_' as a target");
                continue;
            }
            // key: literal or dotted value
            if (cur().type == TokType::Number || check_op("-")) {
                parse_literal_number_pattern();
            } else if (cur().type == TokType::String) {
                ++pos_;
                while (check(TokType::String))
                    ++pos_;
            } else if (check_name("None") || check_name("True") || check_name("False")) {
                ++pos_;
            } else if (cur().type == TokType::Name && !is_keyword(cur().text)) {
                ++pos_;
                if (!check_op("."))
                    fail("mapping pattern keys may not be capture names");
                while (accept_op("."))
                    expect_identifier();
            } else {
                fail("invalid mapping pattern key");
            }
            expect_op(":");
            parse_as_pattern();
        } while (accept_op(","));
    }

    void parse_class_pattern_args() {
        if (check_op(")"))
            return;
        bool seen_kw = false;
        do {
            if (check_op(")"))
                return; // trailing comma
            if (cur().type == TokType::Name && !is_keyword(cur().text) && peek().type == TokType::Op &&
                peek().text == "=") {
                ++pos_;
                ++pos_;
                parse_as_pattern();
                seen_kw = true;
            } else {
                if (seen_kw)
                    fail("positional patterns follow keyword patterns");
                parse_as_pattern();
            }
        } while (accept_op(","));
    }

    // ---- expressions ---------------------------------------------------------

    // star_expressions: (star_expression | expression) (',' ...)* [',']
    // Used at statement level, assignment sides, and return values. Walrus is
    // not allowed here (CPython requires parentheses).
    ExprRes parse_star_expressions() {
        ExprRes first = parse_star_item();
        if (!check_op(","))
            return first;
        bool all_targets = targetable(first);
        while (accept_op(",")) {
            if (!at_expression_start() && !check_op("*"))
                break; // trailing comma
            ExprRes e = parse_star_item();
            all_targets = all_targets && targetable(e);
        }
        ExprRes res;
        res.target = all_targets ? Target::TupleList : Target::None;
        return res;
    }

    ExprRes parse_star_item() {
        if (accept_op("*")) {
            ExprRes inner = parse_or_expr();
            ExprRes res;
            res.target = targetable(inner) && inner.target != Target::Starred ? Target::Starred
                                                                              : Target::None;
            return res;
        }
        return parse_expression();
    }

    // Assignment-target grammar. Never consumes comparison operators, so it is
    // safe before 'in' in for statements and comprehensions.
    ExprRes parse_star_target() {
        if (accept_op("*")) {
            ExprRes inner = parse_star_target();
            if (inner.target == Target::Starred)
                fail("cannot star a starred target");
            ExprRes r;
            r.target = Target::Starred;
            return r;
        }
        if (check_op("(")) {
            ++pos_;
            if (accept_op(")")) {
                ExprRes r;
                r.target = Target::TupleList;
                return r;
            }
            ExprRes inner = parse_star_targets_list(")");
            expect_op(")");
            return inner;
        }
        if (check_op("[")) {
            ++pos_;
            if (accept_op("]")) {
                ExprRes r;
                r.target = Target::TupleList;
                return r;
            }
            parse_star_targets_list("]");
            expect_op("]");
            ExprRes r;
            r.target = Target::TupleList;
            return r;
        }
        ExprRes e = parse_primary_chain();
        if (e.target != Target::Name && e.target != Target::Single)
            fail("cannot assign to this expression");
        return e;
    }

    ExprRes parse_star_targets_list(std::string_view closer) {
        ExprRes first = parse_star_target();
        bool tuple = false;
        while (accept_op(",")) {
            tuple = true;
            if (check_op(closer))
                break;
            parse_star_target();
        }
        if (!tuple)
            return first; // grouped single target keeps its category
        ExprRes r;
        r.target = Target::TupleList;
        return r;
    }

    /// Unparenthesized target list, terminated by 'in'.
    ExprRes parse_for_targets() {
        ExprRes first = parse_star_target();
        bool tuple = false;
        while (accept_op(",")) {
            tuple = true;
            if (check_name("in"))
                break; // trailing comma
            parse_star_target();
        }
        if (!tuple)
            return first;
        ExprRes r;
        r.target = Target::TupleList;
        return r;
    }

    // namedexpr_test: NAME ':=' expression | expression
    ExprRes parse_namedexpr() {
        ExprRes e = parse_expression();
        if (check_op(":=")) {
            if (e.target != Target::Name || e.parenthesized)
                fail("cannot use assignment expression with this target");
            ++pos_;
            parse_expression();
            return ExprRes{};
        }
        return e;
    }

    // expression: lambda | disjunction ['if' disjunction 'else' expression]
    ExprRes parse_expression() {
        DepthGuard guard(*this);
        if (check_name("lambda"))
            return parse_lambda();
        ExprRes e = parse_disjunction();
        if (check_name("if")) {
            ++pos_;
            parse_disjunction();
            expect_name("else");
            parse_expression();
            return ExprRes{};
        }
        return e;
    }

    ExprRes parse_lambda() {
        expect_name("lambda");
        note(FeatLambda);
        parse_parameters(/*allow_annotations=*/false);
        expect_op(":");
        parse_expression();
        return ExprRes{};
    }

    ExprRes parse_disjunction() {
        ExprRes e = parse_conjunction();
        while (check_name("or")) {
            ++pos_;
            parse_conjunction();
            e = ExprRes{};
        }
        return e;
    }

    ExprRes parse_conjunction() {
        ExprRes e = parse_inversion();
        while (check_name("and")) {
            ++pos_;
            parse_inversion();
            e = ExprRes{};
        }
        return e;
    }

    ExprRes parse_inversion() {
        if (accept_name("not")) {
            DepthGuard guard(*this);
            parse_inversion();
            return ExprRes{};
        }
        return parse_comparison();
    }

    ExprRes parse_comparison() {
        ExprRes e = parse_or_expr();
        bool any = false;
        for (;;) {
            if (check_op("<") || check_op(">") || check_op("<=") || check_op(">=") ||
                check_op("==") || check_op("!=")) {
                ++pos_;
            } else if (check_name("in")) {
                ++pos_;
            } else if (check_name("not") && peek().type == TokType::Name && peek().text == "in") {
                pos_ += 2;
            } else if (check_name("is")) {
                ++pos_;
                accept_name("not");
            } else {
                break;
            }
            parse_or_expr();
            any = true;
        }
        return any ? ExprRes{} : e;
    }

    ExprRes parse_or_expr() { return parse_binary_level(0); }

    // Binary operator ladder: | ^ & <</>> +- */@,//,% .
    ExprRes parse_binary_level(int level) {
        struct Level {
            std::array<std::string_view, 5> ops;
            std::size_t count;
        };
        static const std::array<Level, 5> levels = {{
            {{"|"}, 1},
            {{"^"}, 1},
            {{"&"}, 1},
            {{"<<", ">>"}, 2},
            {{"+", "-"}, 2},
        }};
        if (level == static_cast<int>(levels.size()))
            return parse_term();
        ExprRes e = parse_binary_level(level + 1);
        for (;;) {
            bool matched = false;
            for (std::size_t i = 0; i < levels[level].count; ++i) {
                if (check_op(levels[level].ops[i])) {
                    ++pos_;
                    parse_binary_level(level + 1);
                    e = ExprRes{};
                    matched = true;
                    break;
                }
            }
            if (!matched)
                return e;
        }
    }

    ExprRes parse_term() {
        ExprRes e = parse_factor();
        for (;;) {
            if (check_op("*") || check_op("/") || check_op("//") || check_op("%") ||
                check_op("@")) {
                ++pos_;
                parse_factor();
                e = ExprRes{};
            } else {
                return e;
            }
        }
    }

    ExprRes parse_factor() {
        if (check_op("+") || check_op("-") || check_op("~")) {
            DepthGuard guard(*this);
            ++pos_;
            parse_factor();
            return ExprRes{};
        }
        return parse_power();
    }

    ExprRes parse_power() {
        ExprRes e = parse_await_primary();
        if (check_op("**")) {
            ++pos_;
            parse_factor();
            return ExprRes{};
        }
        return e;
    }

    ExprRes parse_await_primary() {
        if (accept_name("await")) {
            note(FeatAwait);
            parse_primary_chain();
            return ExprRes{};
        }
        return parse_primary_chain();
    }

    // primary: atom ('.' NAME | call | subscript)*
    ExprRes parse_primary_chain() {
        ExprRes e = parse_atom();
        for (;;) {
            if (accept_op(".")) {
                expect_identifier();
                e = ExprRes{};
                e.target = Target::Single;
            } else if (check_op("(")) {
                ++pos_;
                note(FeatCall);
                if (!check_op(")"))
                    parse_call_arguments();
                expect_op(")");
                e = ExprRes{};
            } else if (check_op("[")) {
                ++pos_;
                note(FeatSubscript);
                parse_subscript_list();
                expect_op("]");
                e = ExprRes{};
                e.target = Target::Single;
            } else {
                return e;
            }
        }
    }

    void parse_subscript_list() {
        bool first = true;
        do {
            if (!first && check_op("]"))
                return; // trailing comma
            parse_slice_item();
            first = false;
        } while (accept_op(","));
    }

    void parse_slice_item() {
        // [expr] [':' [expr] [':' [expr]]] — or a plain (named) expression.
        bool have_lower = false;
        if (!check_op(":")) {
            parse_namedexpr();
            have_lower = true;
        }
        if (accept_op(":")) {
            if (!check_op(":") && !check_op("]") && !check_op(","))
                parse_expression();
            if (accept_op(":")) {
                if (!check_op("]") && !check_op(","))
                    parse_expression();
            }
            return;
        }
        if (!have_lower)
            fail("invalid subscript");
    }

    void parse_call_arguments() {
        bool seen_keyword = false;
        bool seen_kwargs = false;
        bool first_arg = true;
        do {
            if (check_op(")"))
                return; // trailing comma
            if (accept_op("*")) {
                if (seen_kwargs)
                    fail("iterable argument unpacking follows keyword argument unpacking");
                parse_expression();
                first_arg = false;
                continue;
            }
            if (accept_op("**")) {
                parse_expression();
                seen_kwargs = true;
                first_arg = false;
                continue;
            }
            if (cur().type == TokType::Name && !is_keyword(cur().text) &&
                peek().type == TokType::Op && peek().text == "=" ) {
                ++pos_;
                ++pos_;
                parse_expression();
                seen_keyword = true;
                first_arg = false;
                continue;
            }
            if (seen_keyword || seen_kwargs)
                fail("positional argument follows keyword argument");
            ExprRes e = parse_namedexpr();
            (void)e;
            if (check_name("for") || (check_name("async") && peek().type == TokType::Name &&
                                      peek().text == "for")) {
                // Generator expression: must be the sole argument.
                if (!first_arg)
                    fail("generator expression must be parenthesized");
                parse_comprehension_clauses();
                if (!check_op(")"))
                    fail("generator expression must be parenthesized");
                return;
            }
            first_arg = false;
        } while (accept_op(","));
    }

    void parse_comprehension_clauses() {
        note(FeatComprehension);
        for (;;) {
            if (check_name("async") && peek().type == TokType::Name && peek().text == "for")
                ++pos_;
            expect_name("for");
            ExprRes targets = parse_for_targets();
            if (targets.target == Target::Starred)
                fail("starred assignment target must be in a list or tuple");
            expect_name("in");
            parse_disjunction();
            while (check_name("if")) {
                ++pos_;
                parse_namedexpr_no_ternary_guard();
            }
            if (!(check_name("for") ||
                  (check_name("async") && peek().type == TokType::Name && peek().text == "for")))
                return;
        }
    }

    // Comprehension 'if' guards take disjunction (no bare ternary).
    void parse_namedexpr_no_ternary_guard() {
        ExprRes e = parse_disjunction();
        if (check_op(":=")) {
            if (e.target != Target::Name || e.parenthesized)
                fail("cannot use assignment expression with this target");
            ++pos_;
            parse_expression();
        }
    }

    ExprRes parse_yield_expr() {
        expect_name("yield");
        if (accept_name("from")) {
            parse_expression();
            return ExprRes{};
        }
        if (at_expression_start() || check_op("*"))
            parse_star_expressions();
        return ExprRes{};
    }

    ExprRes parse_atom() {
        const Token& t = cur();
        switch (t.type) {
        case TokType::Number:
            ++pos_;
            return ExprRes{};
        case TokType::String:
            return parse_strings();
        case TokType::Name: {
            if (t.text == "lambda")
                return parse_lambda();
            if (t.text == "None" || t.text == "True" || t.text == "False") {
                ++pos_;
                return ExprRes{};
            }
            if (is_keyword(t.text))
                fail("unexpected keyword '" + t.text + "'");
            ++pos_;
            ExprRes e;
            e.target = Target::Name;
            return e;
        }
        case TokType::Op:
            if (t.text == "...") {
                ++pos_;
                return ExprRes{};
            }
            if (t.text == "(")
                return parse_paren_atom();
            if (t.text == "[")
                return parse_list_atom();
            if (t.text == "{")
                return parse_dict_set_atom();
            fail("unexpected token '" + t.text + "'");
        default:
            fail("unexpected token");
        }
    }

    ExprRes parse_strings() {
        bool has_bytes = false, has_nonbytes = false;
        while (check(TokType::String)) {
            if (cur().flavor == StringFlavor::Bytes)
                has_bytes = true;
            else
                has_nonbytes = true;
            ++pos_;
        }
        if (has_bytes && has_nonbytes)
            fail("cannot mix bytes and nonbytes literals");
        return ExprRes{};
    }

    ExprRes parse_paren_atom() {
        expect_op("(");
        if (accept_op(")"))
            return ExprRes{}; // empty tuple
        if (check_name("yield")) {
            parse_yield_expr();
            expect_op(")");
            return ExprRes{};
        }
        bool starred_first = check_op("*");
        ExprRes first = parse_star_item_named();
        if (check_name("for") ||
            (check_name("async") && peek().type == TokType::Name && peek().text == "for")) {
            if (starred_first)
                fail("iterable unpacking cannot be used in a comprehension");
            parse_comprehension_clauses();
            expect_op(")");
            return ExprRes{};
        }
        if (check_op(",")) {
            bool all_targets = targetable(first);
            while (accept_op(",")) {
                if (check_op(")"))
                    break;
                ExprRes e = parse_star_item_named();
                all_targets = all_targets && targetable(e);
            }
            expect_op(")");
            ExprRes res;
            res.target = all_targets ? Target::TupleList : Target::None;
            return res;
        }
        expect_op(")");
        if (starred_first)
            fail("cannot use starred expression here");
        ExprRes res = first;
        res.parenthesized = true;
        return res;
    }

    // Item inside parens/brackets: starred or named expression.
    ExprRes parse_star_item_named() {
        if (accept_op("*")) {
            ExprRes inner = parse_or_expr();
            ExprRes res;
            res.target = targetable(inner) ? Target::Starred : Target::None;
            return res;
        }
        return parse_namedexpr();
    }

    ExprRes parse_list_atom() {
        expect_op("[");
        if (accept_op("]")) {
            ExprRes res;
            res.target = Target::TupleList;
            return res;
        }
        bool starred_first = check_op("*");
        ExprRes first = parse_star_item_named();
        if (check_name("for") ||
            (check_name("async") && peek().type == TokType::Name && peek().text == "for")) {
            if (starred_first)
                fail("iterable unpacking cannot be used in a comprehension");
            parse_comprehension_clauses();
            expect_op("]");
            return ExprRes{};
        }
        bool all_targets = targetable(first);
        while (accept_op(",")) {
            if (check_op("]"))
                break;
            ExprRes e = parse_star_item_named();
            all_targets = all_targets && targetable(e);
        }
        expect_op("]");
        ExprRes res;
        res.target = all_targets ? Target::TupleList : Target::None;
        return res;
    }

    ExprRes parse_dict_set_atom() {
        expect_op("{");
        if (accept_op("}"))
            return ExprRes{}; // empty dict
        if (accept_op("**")) {
            // dict unpacking
            parse_or_expr();
            while (accept_op(",")) {
                if (check_op("}"))
                    break;
                parse_dict_entry();
            }
            expect_op("}");
            return ExprRes{};
        }
        if (check_op("*")) {
            // set with unpacking
            ++pos_;
            parse_or_expr();
            while (accept_op(",")) {
                if (check_op("}"))
                    break;
                if (accept_op("*"))
                    parse_or_expr();
                else
                    parse_namedexpr();
            }
            expect_op("}");
            return ExprRes{};
        }
        ExprRes first = parse_namedexpr();
        (void)first;
        if (accept_op(":")) {
            parse_expression();
            if (check_name("for") ||
                (check_name("async") && peek().type == TokType::Name && peek().text == "for")) {
                parse_comprehension_clauses();
                expect_op("}");
                return ExprRes{};
            }
            while (accept_op(",")) {
                if (check_op("}"))
                    break;
                parse_dict_entry();
            }
            expect_op("}");
            return ExprRes{};
        }
        if (check_name("for") ||
            (check_name("async") && peek().type == TokType::Name && peek().text == "for")) {
            parse_comprehension_clauses();
            expect_op("}");
            return ExprRes{};
        }
        while (accept_op(",")) {
            if (check_op("}"))
                break;
            if (accept_op("*"))
                parse_or_expr();
            else
                parse_namedexpr();
        }
        expect_op("}");
        return ExprRes{};
    }

    void parse_dict_entry() {
        if (accept_op("**")) {
            parse_or_expr();
            return;
        }
        parse_expression();
        expect_op(":");
        parse_expression();
    }
};

} // namespace

std::optional<Module> parse_module(std::string_view source, std::string* error_message) {
    std::vector<Token> tokens;
    LexError lex_error;
    if (!tokenize(source, tokens, lex_error)) {
        if (error_message)
            *error_message = "line " + std::to_string(lex_error.line) + ": " + lex_error.message;
        return std::nullopt;
    }
    try {
        Parser parser(std::move(tokens));
        return parser.parse_file();
    } catch (const SyntaxFailure& f) {
        if (error_message)
            *error_message = "line " + std::to_string(f.line) + ": " + f.message;
        return std::nullopt;
    }
}

std::optional<Module> parse_module(std::string_view source) {
    return parse_module(source, nullptr);
}

} // namespace cotrap::py
