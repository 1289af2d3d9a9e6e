#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace curio {

using Json = nlohmann::json;

enum class Role { System, User, Assistant };

const char* to_string(Role role);
Role role_from_string(const std::string& s);

struct Message {
  Role role = Role::User;
  std::string content;

  static Message system(std::string text) { return {Role::System, std::move(text)}; }
  static Message user(std::string text) { return {Role::User, std::move(text)}; }
  static Message assistant(std::string text) { return {Role::Assistant, std::move(text)}; }

  bool operator==(const Message&) const = default;
};

using Conversation = std::vector<Message>;

// Non-empty contents; optional leading system message, then strictly
// alternating user/assistant starting with user. Throws PreconditionError.
void validate_conversation(std::span<const Message> messages);

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.85;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;

  void validate() const;
  bool operator==(const SamplingParams&) const = default;
};

// Canonical request object used for cassette keys: sorted keys, message
// contents whitespace-normalized, seed always present (null when unset).
Json canonical_request(std::span<const Message> messages, const SamplingParams& params);
std::string request_hash(std::span<const Message> messages, const SamplingParams& params);

enum class BackendKind { Live, Scripted, Replay, Record };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

// A chat endpoint. Implementations are safe for concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const = 0;
  virtual std::string id() const = 0;
  // Returns one assistant message. Validates the conversation first.
  Message chat(std::span<const Message> messages, const SamplingParams& params);

 protected:
  virtual std::string complete(std::span<const Message> messages,
                               const SamplingParams& params) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

// ---- scripted ------------------------------------------------------------

// Matches the last user message. A pattern of "*" matches everything; regex
// rules use ECMAScript syntax and match anywhere in the message (icase).
struct ScriptRule {
  std::string pattern;
  std::string reply;
  bool regex = false;

  static ScriptRule substring(std::string pattern, std::string reply) {
    return {std::move(pattern), std::move(reply), false};
  }
  static ScriptRule re(std::string pattern, std::string reply) {
    return {std::move(pattern), std::move(reply), true};
  }
  static ScriptRule fallback(std::string reply) { return {"*", std::move(reply), false}; }
};

// First matching rule wins. The script must be non-empty and must contain a
// "*" rule; otherwise ConfigError.
BackendPtr make_scripted(std::vector<ScriptRule> script, std::string id = "scripted");

// Scripted agent driven by a callable over the whole conversation.
using Responder = std::function<std::string(std::span<const Message>)>;
BackendPtr make_agent(Responder responder, std::string id = "agent");

// ---- cassettes -----------------------------------------------------------

struct CassetteEntry {
  std::string hash;
  Json request;
  std::string content;
  std::string timestamp;
};

// JSON Lines log of exchanges. Appends are serialized and flushed per line.
class Cassette {
 public:
  // Loads an existing file; a missing file yields an empty cassette.
  static std::shared_ptr<Cassette> open(const std::string& path);

  const std::string& path() const { return path_; }
  std::optional<std::string> find(const std::string& hash) const;
  void append(const std::string& hash, const Json& request, const std::string& content);
  std::size_t size() const;
  // Hash over the sorted (hash, content) pairs; independent of line order
  // and timestamps.
  std::string content_hash() const;

 private:
  explicit Cassette(std::string path) : path_(std::move(path)) {}
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> responses_;
};

using CassettePtr = std::shared_ptr<Cassette>;

// Never touches the network; unknown requests raise CassetteMiss.
BackendPtr make_replay(CassettePtr cassette, std::string id = "replay");
// Forwards to `inner` and persists every exchange verbatim. Requests already
// present in the cassette are answered from it.
BackendPtr make_recorder(BackendPtr inner, CassettePtr cassette);

// ---- live HTTP -----------------------------------------------------------

struct Endpoint {
  std::string base_url;     // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env;  // empty: no Authorization header
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  // Delay before retry number `retry` (1-based). Nondecreasing in `retry`.
  std::chrono::milliseconds delay_for(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// OpenAI-style chat-completions client. The credential is read from the
// environment variable at construction; a missing variable is a ConfigError.
BackendPtr make_http(Endpoint endpoint, RetryPolicy retry = {}, Sleeper sleeper = {},
                     std::chrono::seconds timeout = std::chrono::seconds(120));

// Request body sent to the chat-completions endpoint.
Json chat_completions_body(const std::string& model, std::span<const Message> messages,
                           const SamplingParams& params);
// Extracts choices[0].message.content; throws ProtocolError on any other shape.
std::string parse_chat_completions_reply(const std::string& body);

// ---- descriptors ---------------------------------------------------------

struct BackendSpec {
  BackendKind kind = BackendKind::Scripted;
  std::string id;
  Endpoint endpoint;
  std::vector<ScriptRule> script;
  std::string cassette;
  RetryPolicy retry;
  std::shared_ptr<BackendSpec> inner;  // record mode only

  static BackendSpec from_json(const Json& j);
  Json to_json() const;
  // Label used in reports: model name for live endpoints, id otherwise.
  std::string label() const;
};

// Shares one Cassette per path within a run.
class CassetteRegistry {
 public:
  CassettePtr get(const std::string& path);
  std::vector<CassettePtr> all() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CassettePtr> cassettes_;
};

BackendPtr make_backend(const BackendSpec& spec, CassetteRegistry& cassettes);

}  // namespace curio
