#pragma once

// Client side of the kernel protocol. An Executor owns one stateful session:
// snippets run in a persistent namespace, human actions are preloaded, and
// timeouts or crashes restart the session with a fresh namespace.
//
// Two implementations share the interface: an in-process one backed by the
// bundled interpreter, and a subprocess client speaking newline-delimited JSON
// over a worker's stdin/stdout.

#include "dynact/core.hpp"
#include "dynact/serialize.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dynact {

class WorkerSpawnError : public Error {
public:
    using Error::Error;
};

class HandshakeTimeout : public Error {
public:
    using Error::Error;
};

inline constexpr int protocol_version = 1;
inline constexpr std::chrono::seconds default_handshake_timeout{10};

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

enum class Op { exec, analyze, load, reset, ping, shutdown };

std::string_view to_string(Op op);
Op op_from_string(std::string_view text);

struct ExecRequest {
    std::string id;
    Op op = Op::exec;
    std::optional<std::string> code;
    int timeout_s = 120;
};

struct ExecErrorInfo {
    std::string type;
    std::string message;
    std::string traceback;

    bool operator==(const ExecErrorInfo&) const = default;
};

struct DefinedFunction {
    std::string name;
    std::string docstring;
    std::string source;
    int complexity = 1;

    bool operator==(const DefinedFunction&) const = default;
};

struct ExecResult {
    std::string id;
    bool ok = true;
    std::string stdout_text;
    std::optional<std::string> result_repr;
    std::optional<std::string> final_answer;
    std::optional<ExecErrorInfo> error;
    std::vector<DefinedFunction> defined_functions;
    // Client-side only: the session was restarted while serving this request,
    // so earlier variables are gone.
    bool session_reset = false;
};

struct AnalyzeResult {
    bool ok = true;
    std::optional<ExecErrorInfo> error;
    std::vector<DefinedFunction> functions;  // top-level definitions
    std::vector<std::string> definitions;    // every def or lambda at any depth
    std::vector<std::string> calls;          // call targets, dotted for attributes
};

struct RetrievalHit {
    std::string name;
    std::string docstring;
    std::string source;
    double score = 0.0;
};

struct CallbackReply {
    std::vector<RetrievalHit> results;
    std::string text;  // observation text printed by the hook
};

// Serves get_relevant_actions(query, k) calls issued by running code.
using RetrievalHandler = std::function<CallbackReply(const std::string& query, std::optional<int> k)>;

void to_json(Json& j, const ExecRequest& r);
void from_json(const Json& j, ExecRequest& r);
void to_json(Json& j, const ExecErrorInfo& e);
void from_json(const Json& j, ExecErrorInfo& e);
void to_json(Json& j, const DefinedFunction& f);
void from_json(const Json& j, DefinedFunction& f);
void to_json(Json& j, const ExecResult& r);
void from_json(const Json& j, ExecResult& r);
void to_json(Json& j, const RetrievalHit& h);
void from_json(const Json& j, RetrievalHit& h);

/// Single-line JSON encoding used on the wire.
std::string encode_line(const Json& j);

// ---------------------------------------------------------------------------
// Executor interface
// ---------------------------------------------------------------------------

class Executor {
public:
    virtual ~Executor() = default;

    /// Runs `code` in the session namespace. Never throws for user-code
    /// failures; they come back as ok=false with a structured error.
    virtual ExecResult execute(const std::string& code, int timeout_s) = 0;

    /// Installs definitions (human or retrieved actions) into the namespace.
    virtual ExecResult load(const std::string& code) = 0;

    /// Static inspection without running anything.
    virtual AnalyzeResult analyze(const std::string& code) = 0;

    /// Clears the namespace and reloads the human actions.
    virtual void reset() = 0;

    virtual void set_retrieval_handler(RetrievalHandler handler) = 0;

    virtual void shutdown() = 0;
};

/// Names provided by the kernel itself; their records are documentation only
/// and are never sent as load requests.
bool is_framework_hook(const std::string& name);

std::unique_ptr<Executor> start_mock_session(const std::vector<ActionRecord>& human_actions);

/// Spawns `worker_cmd` (argv form), waits for the ping handshake, then loads
/// the human actions. Throws WorkerSpawnError or HandshakeTimeout.
std::unique_ptr<Executor> start_subprocess_session(const std::vector<std::string>& worker_cmd,
                                                   const std::vector<ActionRecord>& human_actions,
                                                   std::chrono::milliseconds handshake_timeout = default_handshake_timeout);

/// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command(const std::string& command);

/// Renders a result as the agent-facing observation, truncated to
/// `limit_chars` code points plus a "...[truncated N chars]" suffix.
std::string to_observation(const ExecResult& res, std::size_t limit_chars);

// ---------------------------------------------------------------------------
// Worker side
// ---------------------------------------------------------------------------

/// Request loop of a protocol worker backed by the bundled interpreter. Reads
/// requests from `in`, writes one response line per request to `out`, and
/// returns the process exit code once shutdown is requested or input ends.
int serve_worker(std::istream& in, std::ostream& out);

}  // namespace dynact
