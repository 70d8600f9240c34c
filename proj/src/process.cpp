#include "cotrap/process.hpp"

#include "cotrap/error.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace cotrap {

namespace {

void drain(int fd, std::string& sink) {
    char buf[4096];
    for (;;) {
        ssize_t n = ::read(fd, buf, sizeof buf);
        if (n > 0)
            sink.append(buf, static_cast<std::size_t>(n));
        else
            return;
    }
}

} // namespace

CommandResult run_command(const std::string& shell_command, double timeout_seconds) {
    int out_pipe[2], err_pipe[2];
    if (::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0)
        throw Error("pipe() failed: " + std::string(std::strerror(errno)));

    pid_t pid = ::fork();
    if (pid < 0)
        throw Error("fork() failed: " + std::string(std::strerror(errno)));

    if (pid == 0) {
        ::setpgid(0, 0); // own process group so the whole tree can be killed
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[0]);
        ::close(err_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", shell_command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    CommandResult result;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(static_cast<long long>(timeout_seconds * 1000.0));
    bool use_deadline = timeout_seconds > 0;

    struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    bool out_open = true, err_open = true;

    while (out_open || err_open) {
        int timeout_ms = -1;
        if (use_deadline) {
            auto now = std::chrono::steady_clock::now();
            auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            if (left <= 0) {
                result.timed_out = true;
                ::kill(-pid, SIGKILL);
                break;
            }
            timeout_ms = static_cast<int>(std::min<long long>(left, 200));
        } else {
            timeout_ms = 200;
        }
        fds[0].fd = out_open ? out_pipe[0] : -1;
        fds[1].fd = err_open ? err_pipe[0] : -1;
        int rc = ::poll(fds, 2, timeout_ms);
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        if (fds[0].revents & (POLLIN | POLLHUP)) {
            char buf[4096];
            ssize_t n;
            while ((n = ::read(out_pipe[0], buf, sizeof buf)) > 0)
                result.out.append(buf, static_cast<std::size_t>(n));
            if (n == 0 || (n < 0 && errno != EAGAIN))
                out_open = false;
        }
        if (fds[1].revents & (POLLIN | POLLHUP)) {
            char buf[4096];
            ssize_t n;
            while ((n = ::read(err_pipe[0], buf, sizeof buf)) > 0)
                result.err.append(buf, static_cast<std::size_t>(n));
            if (n == 0 || (n < 0 && errno != EAGAIN))
                err_open = false;
        }
    }

    // Pick up any output that raced the close.
    drain(out_pipe[0], result.out);
    drain(err_pipe[0], result.err);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);

    int status = 0;
    ::waitpid(pid, &status, 0);
    if (result.timed_out)
        result.exit_code = -1;
    else if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

} // namespace cotrap
