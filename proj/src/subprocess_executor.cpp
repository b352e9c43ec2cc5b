#include "dynact/executor.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

namespace dynact {

namespace {

using Clock = std::chrono::steady_clock;

// Grace period on top of the snippet timeout before the client gives up on
// the worker and kills it.
constexpr std::chrono::seconds kill_grace{2};
constexpr int load_timeout_s = 30;

void ignore_sigpipe()
{
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

enum class ReadStatus { line, timeout, eof };

class SubprocessExecutor final : public Executor {
public:
    SubprocessExecutor(std::vector<std::string> argv, std::vector<ActionRecord> human,
                       std::chrono::milliseconds handshake_timeout)
        : argv_(std::move(argv)), human_(std::move(human)), handshake_timeout_(handshake_timeout)
    {
        if (argv_.empty())
            throw WorkerSpawnError("empty worker command");
        ignore_sigpipe();
        start();
    }

    ~SubprocessExecutor() override
    {
        try {
            shutdown();
        } catch (...) {
        }
    }

    ExecResult execute(const std::string& code, int timeout_s) override
    {
        if (!alive() && !try_restart())
            return failure("WorkerCrashed", "worker is not running and could not be restarted");
        ExecRequest req{next_id(), Op::exec, code, timeout_s};
        auto deadline = Clock::now() + std::chrono::seconds(timeout_s) + kill_grace;
        ExecResult r = round_trip(req, deadline, timeout_s);
        if (r.error && r.error->type == "Timeout" && !r.session_reset) {
            // The worker stopped the snippet itself; still start from a clean process.
            try_restart();
            r.session_reset = true;
        }
        return r;
    }

    ExecResult load(const std::string& code) override
    {
        if (!alive() && !try_restart())
            return failure("WorkerCrashed", "worker is not running and could not be restarted");
        ExecRequest req{next_id(), Op::load, code, load_timeout_s};
        return round_trip(req, Clock::now() + std::chrono::seconds(load_timeout_s) + kill_grace, load_timeout_s);
    }

    AnalyzeResult analyze(const std::string& code) override
    {
        AnalyzeResult out;
        if (!alive() && !try_restart()) {
            out.ok = false;
            out.error = ExecErrorInfo{"WorkerCrashed", "worker is not running", ""};
            return out;
        }
        ExecRequest req{next_id(), Op::analyze, code, load_timeout_s};
        Json reply;
        if (auto err = exchange(req, Clock::now() + std::chrono::seconds(load_timeout_s), reply)) {
            out.ok = false;
            out.error = err;
            try_restart();
            return out;
        }
        out.ok = reply.value("ok", false);
        if (auto it = reply.find("error"); it != reply.end() && it->is_object())
            out.error = it->get<ExecErrorInfo>();
        if (!out.ok && !out.error)
            out.error = ExecErrorInfo{"ProtocolError", "analysis failed without an error object", ""};
        out.functions = reply.value("defined_functions", std::vector<DefinedFunction>{});
        out.definitions = reply.value("definitions", std::vector<std::string>{});
        out.calls = reply.value("calls", std::vector<std::string>{});
        return out;
    }

    void reset() override
    {
        if (alive()) {
            ExecRequest req{next_id(), Op::reset, std::nullopt, load_timeout_s};
            Json reply;
            if (!exchange(req, Clock::now() + std::chrono::seconds(load_timeout_s), reply) &&
                reply.value("ok", false)) {
                load_human_actions();
                return;
            }
        }
        restart();
    }

    void set_retrieval_handler(RetrievalHandler handler) override { handler_ = std::move(handler); }

    void shutdown() override
    {
        if (!alive())
            return;
        ExecRequest req{next_id(), Op::shutdown, std::nullopt, 5};
        write_line(encode_line(Json(req)));
        auto deadline = Clock::now() + std::chrono::seconds(2);
        while (Clock::now() < deadline) {
            int status = 0;
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            ::usleep(10000);
        }
        kill_worker();
    }

private:
    bool alive() const { return pid_ > 0; }

    std::string next_id() { return fmt::format("r{}", ++seq_); }

    static ExecResult failure(std::string type, std::string message)
    {
        ExecResult r;
        r.ok = false;
        r.error = ExecErrorInfo{std::move(type), std::move(message), ""};
        return r;
    }

    void start()
    {
        spawn();
        handshake();
        load_human_actions();
    }

    void restart()
    {
        kill_worker();
        start();
    }

    bool try_restart()
    {
        try {
            restart();
            return true;
        } catch (const Error&) {
            kill_worker();
            return false;
        }
    }

    void spawn()
    {
        int in_pipe[2], out_pipe[2], err_pipe[2];
        if (pipe2(in_pipe, O_CLOEXEC) != 0)
            throw WorkerSpawnError(fmt::format("pipe: {}", std::strerror(errno)));
        if (pipe2(out_pipe, O_CLOEXEC) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw WorkerSpawnError(fmt::format("pipe: {}", std::strerror(errno)));
        }
        std::vector<char*> cargv;
        for (auto& a : argv_)
            cargv.push_back(a.data());
        cargv.push_back(nullptr);

        pid_t pid = fork();
        if (pid < 0)
            throw WorkerSpawnError(fmt::format("fork: {}", std::strerror(errno)));
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            execvp(cargv[0], cargv.data());
            int e = errno;
            (void)!::write(err_pipe[1], &e, sizeof e);
            _exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[1]);
        int child_errno = 0;
        ssize_t n;
        do {
            n = ::read(err_pipe[0], &child_errno, sizeof child_errno);
        } while (n < 0 && errno == EINTR);
        ::close(err_pipe[0]);
        if (n > 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            waitpid(pid, nullptr, 0);
            throw WorkerSpawnError(fmt::format("cannot start worker '{}': {}", argv_[0], std::strerror(child_errno)));
        }
        pid_ = pid;
        to_fd_ = in_pipe[1];
        from_fd_ = out_pipe[0];
        buf_.clear();
    }

    void handshake()
    {
        ExecRequest req{next_id(), Op::ping, std::nullopt, 10};
        if (!write_line(encode_line(Json(req)))) {
            kill_worker();
            throw WorkerSpawnError("worker closed its input before the handshake");
        }
        std::string line;
        switch (read_line(Clock::now() + handshake_timeout_, line)) {
        case ReadStatus::timeout:
            kill_worker();
            throw HandshakeTimeout(fmt::format("worker did not answer ping within {} ms", handshake_timeout_.count()));
        case ReadStatus::eof:
            kill_worker();
            throw WorkerSpawnError("worker exited during the handshake");
        case ReadStatus::line:
            break;
        }
        Json reply = Json::parse(line, nullptr, false);
        if (reply.is_discarded() || !reply.is_object() || reply.value("id", std::string{}) != req.id) {
            kill_worker();
            throw WorkerSpawnError(fmt::format("malformed handshake reply: {}", line.substr(0, 200)));
        }
        if (reply.value("v", 0) != protocol_version) {
            kill_worker();
            throw WorkerSpawnError(fmt::format("unsupported protocol version {}", reply.value("v", 0)));
        }
    }

    void load_human_actions()
    {
        for (const auto& a : human_) {
            if (is_framework_hook(a.name))
                continue;
            ExecRequest req{next_id(), Op::load, a.source, load_timeout_s};
            Json reply;
            if (auto err = exchange(req, Clock::now() + std::chrono::seconds(load_timeout_s), reply)) {
                kill_worker();
                throw WorkerSpawnError(fmt::format("loading {} failed: {}", a.name, err->message));
            }
            if (!reply.value("ok", false)) {
                kill_worker();
                throw WorkerSpawnError(fmt::format("loading {} failed: {}", a.name, reply.dump()));
            }
        }
    }

    // Sends one request and waits for the matching response, serving any
    // retrieval callbacks in between. Returns an error on transport failure.
    std::optional<ExecErrorInfo> exchange(const ExecRequest& req, Clock::time_point deadline, Json& reply)
    {
        if (!write_line(encode_line(Json(req))))
            return crash_info();
        for (;;) {
            std::string line;
            switch (read_line(deadline, line)) {
            case ReadStatus::timeout:
                return ExecErrorInfo{"Timeout", "", ""};
            case ReadStatus::eof:
                return crash_info();
            case ReadStatus::line:
                break;
            }
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                return ExecErrorInfo{"ProtocolError", fmt::format("worker wrote a non-JSON line: {}", line.substr(0, 200)),
                                     ""};
            if (j.value("op", std::string{}) == "callback") {
                if (!write_line(encode_line(serve_callback(j))))
                    return crash_info();
                continue;
            }
            if (j.value("id", std::string{}) != req.id)
                return ExecErrorInfo{"ProtocolError",
                                     fmt::format("response id '{}' does not match request id '{}'",
                                                 j.value("id", std::string{}), req.id),
                                     ""};
            reply = std::move(j);
            return std::nullopt;
        }
    }

    Json serve_callback(const Json& j)
    {
        Json reply{{"id", j.value("id", std::string{})}};
        try {
            if (j.value("kind", std::string{}) != "retrieve")
                throw Error(fmt::format("unsupported callback kind '{}'", j.value("kind", std::string{})));
            if (!handler_)
                throw Error("no retrieval handler is attached to this session");
            std::optional<int> k;
            if (auto it = j.find("k"); it != j.end() && it->is_number_integer())
                k = it->get<int>();
            CallbackReply cb = handler_(j.value("query", std::string{}), k);
            reply["results"] = cb.results;
            reply["text"] = cb.text;
        } catch (const Error& e) {
            reply["results"] = Json::array();
            reply["error"] = e.what();
        }
        return reply;
    }

    ExecResult round_trip(const ExecRequest& req, Clock::time_point deadline, int timeout_s)
    {
        Json reply;
        if (auto err = exchange(req, deadline, reply)) {
            if (err->type == "Timeout")
                err->message = fmt::format("execution exceeded the time limit of {} s", timeout_s);
            ExecResult r;
            r.id = req.id;
            r.ok = false;
            r.error = std::move(*err);
            try_restart();
            r.session_reset = true;
            return r;
        }
        ExecResult r;
        try {
            r = reply.get<ExecResult>();
        } catch (const std::exception& e) {
            r = failure("ProtocolError", fmt::format("malformed response: {}", e.what()));
            r.id = req.id;
        }
        if (r.error && r.error->type == "Timeout")
            r.error->message = fmt::format("execution exceeded the time limit of {} s", timeout_s);
        return r;
    }

    ExecErrorInfo crash_info()
    {
        int status = 0;
        std::string how = "worker exited";
        if (pid_ > 0) {
            // Give the process a moment to finish exiting after closing its pipes.
            for (int i = 0; i < 100; ++i) {
                if (waitpid(pid_, &status, WNOHANG) == pid_) {
                    pid_ = -1;
                    if (WIFEXITED(status))
                        how = fmt::format("worker exited with code {}", WEXITSTATUS(status));
                    else if (WIFSIGNALED(status))
                        how = fmt::format("worker was killed by signal {}", WTERMSIG(status));
                    break;
                }
                ::usleep(10000);
            }
        }
        return ExecErrorInfo{"WorkerCrashed", how, ""};
    }

    bool write_line(const std::string& line)
    {
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::write(to_fd_, line.data() + off, line.size() - off);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                return false;
            }
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    ReadStatus read_line(Clock::time_point deadline, std::string& line)
    {
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return ReadStatus::line;
            }
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (left <= 0)
                return ReadStatus::timeout;
            pollfd p{from_fd_, POLLIN, 0};
            int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1000)));
            if (rc < 0 && errno != EINTR)
                return ReadStatus::eof;
            if (rc <= 0)
                continue;
            char chunk[65536];
            ssize_t n = ::read(from_fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                return ReadStatus::eof;
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void kill_worker()
    {
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
        if (to_fd_ >= 0)
            ::close(to_fd_);
        if (from_fd_ >= 0)
            ::close(from_fd_);
        to_fd_ = from_fd_ = -1;
        buf_.clear();
    }

    std::vector<std::string> argv_;
    std::vector<ActionRecord> human_;
    std::chrono::milliseconds handshake_timeout_;
    RetrievalHandler handler_;
    pid_t pid_ = -1;
    int to_fd_ = -1;
    int from_fd_ = -1;
    std::string buf_;
    std::uint64_t seq_ = 0;
};

}  // namespace

std::unique_ptr<Executor> start_subprocess_session(const std::vector<std::string>& worker_cmd,
                                                   const std::vector<ActionRecord>& human_actions,
                                                   std::chrono::milliseconds handshake_timeout)
{
    return std::make_unique<SubprocessExecutor>(worker_cmd, human_actions, handshake_timeout);
}

}  // namespace dynact
