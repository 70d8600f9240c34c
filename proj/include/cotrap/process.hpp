#pragma once

#include <string>

namespace cotrap {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

/// Runs a shell command, capturing stdout/stderr. The process group is killed
/// when the timeout (seconds) elapses; timeout <= 0 means no limit.
CommandResult run_command(const std::string& shell_command, double timeout_seconds);

} // namespace cotrap
