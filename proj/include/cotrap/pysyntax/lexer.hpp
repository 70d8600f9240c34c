#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cotrap::py {

enum class TokType {
    EndMarker,
    Newline,
    Indent,
    Dedent,
    Name,
    Number,
    String,
    Op,
};

enum class StringFlavor { None, Str, Bytes, FStr };

struct Token {
    TokType type;
    std::string text; // raw text for Name/Number/Op; empty for structural tokens
    int line = 0;
    int col = 0;
    StringFlavor flavor = StringFlavor::None;
};

struct LexError {
    int line = 0;
    int col = 0;
    std::string message;
};

/// Tokenizes a module. Returns false and fills `error` on any lexical error
/// (unterminated string, bad indentation, stray characters, unbalanced
/// brackets). On success the stream ends with Newline? Dedent* EndMarker.
bool tokenize(std::string_view source, std::vector<Token>& out, LexError& error);

} // namespace cotrap::py
