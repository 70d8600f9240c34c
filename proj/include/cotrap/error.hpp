#pragma once

#include <stdexcept>
#include <string>

namespace cotrap {

/// Base class for all toolkit errors. Pipeline failures surface as exceptions;
/// expected per-item failures (skips, parse misses) travel as values instead.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

} // namespace cotrap
