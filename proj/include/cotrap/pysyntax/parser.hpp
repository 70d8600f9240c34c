#pragma once

#include "cotrap/pysyntax/ast.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace cotrap::py {

/// Parses a module. Any lexical or grammatical error yields nullopt: failure
/// is a value, not an exception. Empty input is a module with no statements.
std::optional<Module> parse_module(std::string_view source);

/// Like parse_module, but reports the rejection reason (for diagnostics).
std::optional<Module> parse_module(std::string_view source, std::string* error_message);

} // namespace cotrap::py
