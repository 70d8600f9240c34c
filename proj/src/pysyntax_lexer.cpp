#include "cotrap/pysyntax/lexer.hpp"

#include <array>
#include <cctype>
#include <utility>

namespace cotrap::py {

namespace {

bool is_ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool is_ident_cont(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_hex(unsigned char c) { return std::isxdigit(c); }

struct Failure {
    LexError error;
};

class Lexer {
public:
    Lexer(std::string_view src, std::vector<Token>& out) : src_(src), out_(out) {}

    void run() {
        for (;;) {
            if (at_line_start_ && bracket_stack_.empty()) {
                if (!handle_line_start())
                    break; // EOF
            }
            if (eof())
                break;
            char c = peek();
            if (c == '\n' || c == '\r') {
                consume_newline();
                if (bracket_stack_.empty()) {
                    emit(TokType::Newline, "");
                    at_line_start_ = true;
                }
                continue;
            }
            if (c == '#') {
                skip_comment();
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\f') {
                advance();
                continue;
            }
            if (c == '\\') {
                if (pos_ + 1 < src_.size() && (src_[pos_ + 1] == '\n' || src_[pos_ + 1] == '\r')) {
                    advance();
                    consume_newline();
                    continue;
                }
                fail("unexpected character after line continuation character");
            }
            if (is_ident_start(static_cast<unsigned char>(c))) {
                lex_name_or_string();
                continue;
            }
            if (is_digit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < src_.size() &&
                 is_digit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number();
                continue;
            }
            if (c == '\'' || c == '"') {
                lex_string("", line_, col_);
                continue;
            }
            lex_operator();
        }
        finish();
    }

private:
    std::string_view src_;
    std::vector<Token>& out_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 0;
    bool at_line_start_ = true;
    bool line_has_tokens_ = false;
    std::vector<char> bracket_stack_;
    std::vector<std::pair<long, long>> indents_ = {{0, 0}}; // (tabsize-8 col, tabsize-1 col)

    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }
    void advance() {
        ++pos_;
        ++col_;
    }

    void consume_newline() {
        if (src_[pos_] == '\r') {
            ++pos_;
            if (pos_ < src_.size() && src_[pos_] == '\n')
                ++pos_;
        } else {
            ++pos_;
        }
        ++line_;
        col_ = 0;
    }

    [[noreturn]] void fail(std::string message) {
        throw Failure{LexError{line_, col_, std::move(message)}};
    }

    void emit(TokType type, std::string text, StringFlavor flavor = StringFlavor::None) {
        out_.push_back(Token{type, std::move(text), line_, col_, flavor});
        if (type == TokType::Newline)
            line_has_tokens_ = false;
        else if (type != TokType::Indent && type != TokType::Dedent)
            line_has_tokens_ = true;
    }

    void skip_comment() {
        while (!eof() && peek() != '\n' && peek() != '\r')
            advance();
    }

    // Measures indentation and emits Indent/Dedent tokens. Blank and
    // comment-only lines are consumed whole. Returns false at EOF.
    bool handle_line_start() {
        for (;;) {
            if (eof())
                return false;
            long col8 = 0, col1 = 0;
            while (!eof()) {
                char c = peek();
                if (c == ' ') {
                    col8 += 1;
                    col1 += 1;
                    advance();
                } else if (c == '\t') {
                    col8 = (col8 / 8 + 1) * 8;
                    col1 += 1;
                    advance();
                } else if (c == '\f') {
                    advance();
                } else {
                    break;
                }
            }
            if (eof())
                return false;
            char c = peek();
            if (c == '\n' || c == '\r') {
                consume_newline();
                continue;
            }
            if (c == '#') {
                skip_comment();
                continue;
            }
            apply_indent(col8, col1);
            at_line_start_ = false;
            line_has_tokens_ = false;
            return true;
        }
    }

    void apply_indent(long col8, long col1) {
        auto [top8, top1] = indents_.back();
        if (col8 == top8) {
            if (col1 != top1)
                fail("inconsistent use of tabs and spaces in indentation");
            return;
        }
        if (col8 > top8) {
            if (col1 <= top1)
                fail("inconsistent use of tabs and spaces in indentation");
            indents_.emplace_back(col8, col1);
            emit(TokType::Indent, "");
            return;
        }
        while (indents_.back().first > col8) {
            indents_.pop_back();
            emit(TokType::Dedent, "");
        }
        if (indents_.back().first != col8)
            fail("unindent does not match any outer indentation level");
        if (indents_.back().second != col1)
            fail("inconsistent use of tabs and spaces in indentation");
    }

    void lex_name_or_string() {
        int tline = line_, tcol = col_;
        std::size_t start = pos_;
        while (!eof() && is_ident_cont(static_cast<unsigned char>(peek())))
            advance();
        std::string name(src_.substr(start, pos_ - start));
        if (!eof() && (peek() == '\'' || peek() == '"') && is_string_prefix(name)) {
            lex_string(name, tline, tcol);
            return;
        }
        out_.push_back(Token{TokType::Name, std::move(name), tline, tcol, StringFlavor::None});
        line_has_tokens_ = true;
    }

    static bool is_string_prefix(const std::string& p) {
        if (p.size() > 2)
            return false;
        bool r = false, b = false, f = false, u = false;
        for (char ch : p) {
            switch (std::tolower(static_cast<unsigned char>(ch))) {
            case 'r':
                if (r)
                    return false;
                r = true;
                break;
            case 'b':
                if (b)
                    return false;
                b = true;
                break;
            case 'f':
                if (f)
                    return false;
                f = true;
                break;
            case 'u':
                if (u)
                    return false;
                u = true;
                break;
            default:
                return false;
            }
        }
        if (u && p.size() > 1)
            return false;
        if (b && f)
            return false;
        return true;
    }

    void lex_string(const std::string& prefix, int tline, int tcol) {
        StringFlavor flavor = StringFlavor::Str;
        for (char ch : prefix) {
            char l = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (l == 'b')
                flavor = StringFlavor::Bytes;
            else if (l == 'f')
                flavor = StringFlavor::FStr;
        }
        std::size_t start = pos_ - prefix.size();
        char quote = peek();
        advance();
        bool triple = false;
        if (pos_ + 1 < src_.size() && src_[pos_] == quote && src_[pos_ + 1] == quote) {
            triple = true;
            advance();
            advance();
        } else if (pos_ < src_.size() && src_[pos_] == quote) {
            // Empty string.
            advance();
            out_.push_back(Token{TokType::String, std::string(src_.substr(start, pos_ - start)),
                                 tline, tcol, flavor});
            line_has_tokens_ = true;
            return;
        }
        for (;;) {
            if (eof()) {
                fail(triple ? "unterminated triple-quoted string literal"
                            : "unterminated string literal");
            }
            char c = peek();
            if (c == '\\') {
                advance();
                if (eof())
                    fail("unterminated string literal");
                if (peek() == '\n' || peek() == '\r')
                    consume_newline();
                else
                    advance();
                continue;
            }
            if (c == '\n' || c == '\r') {
                if (!triple)
                    fail("unterminated string literal");
                consume_newline();
                continue;
            }
            if (c == quote) {
                if (!triple) {
                    advance();
                    break;
                }
                if (pos_ + 2 < src_.size() && src_[pos_ + 1] == quote &&
                    src_[pos_ + 2] == quote) {
                    advance();
                    advance();
                    advance();
                    break;
                }
                advance();
                continue;
            }
            advance();
        }
        out_.push_back(Token{TokType::String, std::string(src_.substr(start, pos_ - start)), tline,
                             tcol, flavor});
        line_has_tokens_ = true;
    }

    void lex_number() {
        int tline = line_, tcol = col_;
        std::size_t start = pos_;
        bool is_int = true;
        bool has_exp = false;
        bool imaginary = false;

        auto digits_run = [&](auto pred, const char* what) {
            bool any = false;
            for (;;) {
                if (!eof() && pred(static_cast<unsigned char>(peek()))) {
                    advance();
                    any = true;
                } else if (!eof() && peek() == '_') {
                    if (pos_ + 1 >= src_.size() ||
                        !pred(static_cast<unsigned char>(src_[pos_ + 1])))
                        fail(std::string("invalid ") + what + " literal");
                    advance();
                } else {
                    break;
                }
            }
            return any;
        };

        if (peek() == '0' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X' || src_[pos_ + 1] == 'o' ||
             src_[pos_ + 1] == 'O' || src_[pos_ + 1] == 'b' || src_[pos_ + 1] == 'B')) {
            char base = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ + 1])));
            advance();
            advance();
            bool any = false;
            if (base == 'x')
                any = digits_run([](unsigned char c) { return is_hex(c); }, "hexadecimal");
            else if (base == 'o')
                any = digits_run([](unsigned char c) { return c >= '0' && c <= '7'; }, "octal");
            else
                any = digits_run([](unsigned char c) { return c == '0' || c == '1'; }, "binary");
            if (!any)
                fail("invalid number literal");
        } else {
            bool leading_digits = false;
            if (peek() != '.')
                leading_digits = digits_run(is_digit, "decimal");
            if (!eof() && peek() == '.') {
                is_int = false;
                advance();
                digits_run(is_digit, "decimal");
            }
            if (!eof() && (peek() == 'e' || peek() == 'E')) {
                std::size_t mark = pos_;
                int mcol = col_;
                advance();
                if (!eof() && (peek() == '+' || peek() == '-'))
                    advance();
                if (!eof() && is_digit(static_cast<unsigned char>(peek()))) {
                    digits_run(is_digit, "decimal");
                    is_int = false;
                    has_exp = true;
                } else {
                    pos_ = mark; // not an exponent; 'e' starts a following name
                    col_ = mcol;
                }
            }
            (void)has_exp;
            if (!eof() && (peek() == 'j' || peek() == 'J')) {
                advance();
                imaginary = true;
                is_int = false;
            }
            if (is_int && leading_digits) {
                std::string_view body = src_.substr(start, pos_ - start);
                if (body.size() > 1 && body[0] == '0') {
                    for (char d : body)
                        if (d != '0' && d != '_')
                            fail("leading zeros in decimal integer literals are not permitted");
                }
            }
        }
        (void)imaginary;
        if (!eof() && is_ident_start(static_cast<unsigned char>(peek())))
            fail("invalid decimal literal");
        out_.push_back(Token{TokType::Number, std::string(src_.substr(start, pos_ - start)), tline,
                             tcol, StringFlavor::None});
        line_has_tokens_ = true;
    }

    void lex_operator() {
        static const std::array<std::string_view, 24> multi = {
            "**=", "//=", ">>=", "<<=", "...", "**", "//", ">>", "<<", "<=", ">=", "==",
            "!=",  "->",  ":=",  "+=",  "-=",  "*=", "/=", "%=", "@=", "&=", "|=", "^=",
        };
        int tline = line_, tcol = col_;
        for (std::string_view op : multi) {
            if (src_.substr(pos_).substr(0, op.size()) == op) {
                pos_ += op.size();
                col_ += static_cast<int>(op.size());
                out_.push_back(
                    Token{TokType::Op, std::string(op), tline, tcol, StringFlavor::None});
                line_has_tokens_ = true;
                return;
            }
        }
        char c = peek();
        static const std::string_view singles = "+-*/%@&|^~<>=,:.;()[]{}";
        if (singles.find(c) == std::string_view::npos)
            fail(std::string("invalid character '") + c + "'");
        if (c == '(' || c == '[' || c == '{') {
            bracket_stack_.push_back(c);
        } else if (c == ')' || c == ']' || c == '}') {
            char open = c == ')' ? '(' : (c == ']' ? '[' : '{');
            if (bracket_stack_.empty() || bracket_stack_.back() != open)
                fail(std::string("unmatched '") + c + "'");
            bracket_stack_.pop_back();
        }
        advance();
        out_.push_back(Token{TokType::Op, std::string(1, c), tline, tcol, StringFlavor::None});
        line_has_tokens_ = true;
    }

    void finish() {
        if (!bracket_stack_.empty())
            fail(std::string("'") + bracket_stack_.back() + "' was never closed");
        if (line_has_tokens_)
            emit(TokType::Newline, "");
        while (indents_.size() > 1) {
            indents_.pop_back();
            emit(TokType::Dedent, "");
        }
        emit(TokType::EndMarker, "");
    }
};

} // namespace

bool tokenize(std::string_view source, std::vector<Token>& out, LexError& error) {
    out.clear();
    try {
        Lexer lexer(source, out);
        lexer.run();
        return true;
    } catch (const Failure& f) {
        error = f.error;
        out.clear();
        return false;
    }
}

} // namespace cotrap::py
