#include "curio/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/text.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace curio {

const char* to_string(Role role) {
  switch (role) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw ConfigError("unknown message role '" + s + "'");
}

void validate_conversation(std::span<const Message> messages) {
  if (messages.empty()) throw PreconditionError("conversation is empty");
  std::size_t i = 0;
  if (messages[0].role == Role::System) i = 1;
  if (i == messages.size()) throw PreconditionError("conversation has no user message");
  Role expected = Role::User;
  for (std::size_t k = 0; k < messages.size(); ++k) {
    if (messages[k].content.empty()) {
      throw PreconditionError("message " + std::to_string(k) + " has empty content");
    }
    if (k < i) continue;
    if (messages[k].role != expected) {
      throw PreconditionError("message " + std::to_string(k) + " should have role " +
                              to_string(expected));
    }
    expected = expected == Role::User ? Role::Assistant : Role::User;
  }
  if (messages.back().role != Role::User) {
    throw PreconditionError("conversation must end with a user message");
  }
}

void SamplingParams::validate() const {
  if (!(temperature >= 0.0)) throw PreconditionError("temperature must be non-negative");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("top_p must lie in (0, 1]");
  if (max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

Json canonical_request(std::span<const Message> messages, const SamplingParams& params) {
  Json msgs = Json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", text::normalize_whitespace(m.content)}});
  }
  Json p = {{"temperature", params.temperature},
            {"top_p", params.top_p},
            {"max_tokens", params.max_tokens},
            {"seed", params.seed ? Json(*params.seed) : Json(nullptr)}};
  return {{"messages", std::move(msgs)}, {"params", std::move(p)}};
}

std::string request_hash(std::span<const Message> messages, const SamplingParams& params) {
  return sha256_hex(canonical_request(messages, params).dump());
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Live:
      return "live";
    case BackendKind::Scripted:
      return "scripted";
    case BackendKind::Replay:
      return "replay";
    case BackendKind::Record:
      return "record";
  }
  return "scripted";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "live") return BackendKind::Live;
  if (s == "scripted") return BackendKind::Scripted;
  if (s == "replay") return BackendKind::Replay;
  if (s == "record") return BackendKind::Record;
  throw ConfigError("unknown backend kind '" + s + "' (expected live, scripted, replay, record)");
}

Message Backend::chat(std::span<const Message> messages, const SamplingParams& params) {
  validate_conversation(messages);
  params.validate();
  auto reply = complete(messages, params);
  if (reply.empty()) throw ProtocolError("backend " + id() + " returned an empty reply");
  return Message::assistant(std::move(reply));
}

// ---- scripted --------------------------------------------------------------

namespace {

const Message& last_user(std::span<const Message> messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return *it;
  }
  return messages.back();
}

class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(std::vector<ScriptRule> rules, std::string id)
      : rules_(std::move(rules)), id_(std::move(id)) {
    compiled_.reserve(rules_.size());
    for (const auto& r : rules_) {
      if (r.regex) {
        try {
          compiled_.emplace_back(std::regex(r.pattern, std::regex::ECMAScript | std::regex::icase));
        } catch (const std::regex_error& e) {
          throw ConfigError("invalid script pattern '" + r.pattern + "': " + e.what());
        }
      } else {
        compiled_.emplace_back(std::nullopt);
      }
    }
  }

  BackendKind kind() const override { return BackendKind::Scripted; }
  std::string id() const override { return id_; }

 protected:
  std::string complete(std::span<const Message> messages, const SamplingParams&) override {
    const auto& text = last_user(messages).content;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& r = rules_[i];
      if (r.pattern == "*") return r.reply;
      if (compiled_[i]) {
        if (std::regex_search(text, *compiled_[i])) return r.reply;
      } else if (text::contains_icase(text, r.pattern)) {
        return r.reply;
      }
    }
    // unreachable: construction guarantees a wildcard rule
    throw ConfigError("script has no matching rule");
  }

 private:
  std::vector<ScriptRule> rules_;
  std::vector<std::optional<std::regex>> compiled_;
  std::string id_;
};

class AgentBackend final : public Backend {
 public:
  AgentBackend(Responder responder, std::string id)
      : responder_(std::move(responder)), id_(std::move(id)) {}
  BackendKind kind() const override { return BackendKind::Scripted; }
  std::string id() const override { return id_; }

 protected:
  std::string complete(std::span<const Message> messages, const SamplingParams&) override {
    return responder_(messages);
  }

 private:
  Responder responder_;
  std::string id_;
};

}  // namespace

BackendPtr make_scripted(std::vector<ScriptRule> script, std::string id) {
  if (script.empty()) throw ConfigError("scripted backend needs at least one rule");
  bool has_default = false;
  for (const auto& r : script) has_default = has_default || r.pattern == "*";
  if (!has_default) throw ConfigError("scripted backend needs a fall-through \"*\" rule");
  return std::make_shared<ScriptedBackend>(std::move(script), std::move(id));
}

BackendPtr make_agent(Responder responder, std::string id) {
  if (!responder) throw ConfigError("agent backend needs a responder");
  return std::make_shared<AgentBackend>(std::move(responder), std::move(id));
}

// ---- cassettes -------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::shared_ptr<Cassette> Cassette::open(const std::string& path) {
  std::shared_ptr<Cassette> c(new Cassette(path));
  std::ifstream in(path);
  if (!in) return c;
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::size_t last = lines.size();
  while (last > 0 && text::trim(lines[last - 1]).empty()) --last;
  for (std::size_t i = 0; i < last; ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      const Json j = Json::parse(lines[i]);
      auto hash = j.at("hash").get<std::string>();
      auto content = j.at("response").at("content").get<std::string>();
      c->responses_.emplace(std::move(hash), std::move(content));
    } catch (const Json::exception& e) {
      // A write cut short by a crash leaves a partial final line.
      if (i + 1 == last) break;
      throw ConfigError("cassette " + path + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return c;
}

std::optional<std::string> Cassette::find(const std::string& hash) const {
  std::lock_guard lock(mu_);
  auto it = responses_.find(hash);
  if (it == responses_.end()) return std::nullopt;
  return it->second;
}

void Cassette::append(const std::string& hash, const Json& request, const std::string& content) {
  Json line = {{"hash", hash},
               {"request", request},
               {"response", {{"content", content}}},
               {"timestamp", utc_timestamp()}};
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to cassette " + path_);
  out << line.dump() << '\n';
  out.flush();
  responses_.emplace(hash, content);
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mu_);
  return responses_.size();
}

std::string Cassette::content_hash() const {
  std::lock_guard lock(mu_);
  std::string acc;
  for (const auto& [hash, content] : responses_) {
    acc += hash;
    acc += '\t';
    acc += sha256_hex(content);
    acc += '\n';
  }
  return sha256_hex(acc);
}

namespace {

class ReplayBackend final : public Backend {
 public:
  ReplayBackend(CassettePtr cassette, std::string id)
      : cassette_(std::move(cassette)), id_(std::move(id)) {}
  BackendKind kind() const override { return BackendKind::Replay; }
  std::string id() const override { return id_; }

 protected:
  std::string complete(std::span<const Message> messages, const SamplingParams& params) override {
    auto hash = request_hash(messages, params);
    auto hit = cassette_->find(hash);
    if (!hit) throw CassetteMiss(hash);
    return *hit;
  }

 private:
  CassettePtr cassette_;
  std::string id_;
};

class RecordBackend final : public Backend {
 public:
  RecordBackend(BackendPtr inner, CassettePtr cassette)
      : inner_(std::move(inner)), cassette_(std::move(cassette)) {}
  BackendKind kind() const override { return BackendKind::Record; }
  std::string id() const override { return inner_->id(); }

 protected:
  std::string complete(std::span<const Message> messages, const SamplingParams& params) override {
    auto hash = request_hash(messages, params);
    if (auto hit = cassette_->find(hash)) return *hit;
    auto reply = inner_->chat(messages, params);
    Json request = {{"messages", Json::array()},
                    {"params", canonical_request({}, params)["params"]}};
    for (const auto& m : messages) {
      request["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    cassette_->append(hash, request, reply.content);
    return reply.content;
  }

 private:
  BackendPtr inner_;
  CassettePtr cassette_;
};

}  // namespace

BackendPtr make_replay(CassettePtr cassette, std::string id) {
  if (!cassette) throw ConfigError("replay backend needs a cassette");
  return std::make_shared<ReplayBackend>(std::move(cassette), std::move(id));
}

BackendPtr make_recorder(BackendPtr inner, CassettePtr cassette) {
  if (!inner || !cassette) throw ConfigError("record backend needs an inner backend and a cassette");
  return std::make_shared<RecordBackend>(std::move(inner), std::move(cassette));
}

// ---- live HTTP -------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  double ms = static_cast<double>(initial_delay.count());
  for (int i = 1; i < retry; ++i) ms *= multiplier;
  auto capped = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

Json chat_completions_body(const std::string& model, std::span<const Message> messages,
                           const SamplingParams& params) {
  Json msgs = Json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  Json body = {{"model", model},
               {"messages", std::move(msgs)},
               {"temperature", params.temperature},
               {"top_p", params.top_p},
               {"max_tokens", params.max_tokens}};
  if (params.seed) body["seed"] = *params.seed;
  return body;
}

std::string parse_chat_completions_reply(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw ProtocolError("reply has no choices");
  }
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw ProtocolError("reply choice has no message");
  }
  const auto& content = choice["message"].value("content", Json());
  if (!content.is_string()) throw ProtocolError("reply message content is not a string");
  return content.get<std::string>();
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

class HttpBackend final : public Backend {
 public:
  HttpBackend(Endpoint endpoint, RetryPolicy retry, Sleeper sleeper, std::chrono::seconds timeout)
      : endpoint_(std::move(endpoint)),
        retry_(retry),
        sleeper_(std::move(sleeper)),
        timeout_(timeout),
        url_(split_url(endpoint_.base_url)) {
    if (endpoint_.model.empty()) throw ConfigError("live backend needs a model name");
    if (retry_.max_attempts < 1) throw ConfigError("retry max_attempts must be at least 1");
    if (!endpoint_.api_key_env.empty()) {
      const char* key = std::getenv(endpoint_.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + endpoint_.api_key_env + " is not set");
      }
      api_key_ = key;
    }
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  BackendKind kind() const override { return BackendKind::Live; }
  std::string id() const override { return endpoint_.model; }

 protected:
  std::string complete(std::span<const Message> messages, const SamplingParams& params) override {
    auto body = chat_completions_body(endpoint_.model, messages, params).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    std::string last_failure;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      if (attempt > 1) sleeper_(retry_.delay_for(attempt - 1));
      httplib::Client client(url_.origin);
      client.set_connection_timeout(timeout_);
      client.set_read_timeout(timeout_);
      client.set_write_timeout(timeout_);
      auto res = client.Post(url_.path + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_failure = "http status " + std::to_string(res->status);
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw BackendUnavailable("credential rejected by " + endpoint_.base_url + " (http " +
                                 std::to_string(res->status) + ")");
      }
      if (res->status != 200) {
        throw ProtocolError("http status " + std::to_string(res->status) + ": " + res->body);
      }
      return parse_chat_completions_reply(res->body);
    }
    throw BackendUnavailable("backend " + endpoint_.base_url + " unavailable after " +
                             std::to_string(retry_.max_attempts) + " attempts (" + last_failure +
                             ")");
  }

 private:
  Endpoint endpoint_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::chrono::seconds timeout_;
  SplitUrl url_;
  std::string api_key_;
};

}  // namespace

BackendPtr make_http(Endpoint endpoint, RetryPolicy retry, Sleeper sleeper,
                     std::chrono::seconds timeout) {
  return std::make_shared<HttpBackend>(std::move(endpoint), retry, std::move(sleeper), timeout);
}

// ---- descriptors -----------------------------------------------------------

namespace {

ScriptRule rule_from_json(const Json& j) {
  if (j.is_array() && j.size() == 2) {
    return ScriptRule::substring(j[0].get<std::string>(), j[1].get<std::string>());
  }
  if (!j.is_object()) throw ConfigError("script rule must be an object or [pattern, reply]");
  auto reply = j.at("reply").get<std::string>();
  if (j.contains("regex")) return ScriptRule::re(j["regex"].get<std::string>(), reply);
  if (j.contains("match")) return ScriptRule::substring(j["match"].get<std::string>(), reply);
  return ScriptRule::fallback(reply);
}

Json rule_to_json(const ScriptRule& r) {
  if (r.regex) return {{"regex", r.pattern}, {"reply", r.reply}};
  return {{"match", r.pattern}, {"reply", r.reply}};
}

}  // namespace

BackendSpec BackendSpec::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("backend descriptor must be an object");
  static const std::vector<std::string> kKeys = {"kind",   "id",       "base_url", "model",
                                                 "api_key_env", "script", "cassette", "inner",
                                                 "retry"};
  std::vector<std::string> unknown;
  for (const auto& [k, _] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) unknown.push_back(k);
  }
  if (!unknown.empty()) throw ConfigError("unknown backend keys: " + text::join(unknown, ", "));
  BackendSpec s;
  try {
    s.kind = backend_kind_from_string(j.value("kind", std::string("scripted")));
    s.id = j.value("id", std::string());
    s.endpoint.base_url = j.value("base_url", std::string());
    s.endpoint.model = j.value("model", std::string());
    s.endpoint.api_key_env = j.value("api_key_env", std::string());
    s.cassette = j.value("cassette", std::string());
    if (j.contains("script")) {
      for (const auto& r : j["script"]) s.script.push_back(rule_from_json(r));
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      s.retry.max_attempts = r.value("max_attempts", s.retry.max_attempts);
      s.retry.initial_delay = std::chrono::milliseconds(
          r.value("initial_delay_ms", static_cast<std::int64_t>(s.retry.initial_delay.count())));
      s.retry.multiplier = r.value("multiplier", s.retry.multiplier);
      s.retry.max_delay = std::chrono::milliseconds(
          r.value("max_delay_ms", static_cast<std::int64_t>(s.retry.max_delay.count())));
    }
    if (j.contains("inner")) s.inner = std::make_shared<BackendSpec>(from_json(j["inner"]));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("backend descriptor: ") + e.what());
  }
  if (j.contains("api_key")) throw ConfigError("credentials must come from api_key_env");
  return s;
}

Json BackendSpec::to_json() const {
  Json j = {{"kind", to_string(kind)}};
  if (!id.empty()) j["id"] = id;
  if (!endpoint.base_url.empty()) j["base_url"] = endpoint.base_url;
  if (!endpoint.model.empty()) j["model"] = endpoint.model;
  if (!endpoint.api_key_env.empty()) j["api_key_env"] = endpoint.api_key_env;
  if (!script.empty()) {
    j["script"] = Json::array();
    for (const auto& r : script) j["script"].push_back(rule_to_json(r));
  }
  if (!cassette.empty()) j["cassette"] = cassette;
  if (inner) j["inner"] = inner->to_json();
  return j;
}

std::string BackendSpec::label() const {
  if (!id.empty()) return id;
  if (kind == BackendKind::Record && inner) return inner->label();
  if (!endpoint.model.empty()) return endpoint.model;
  return to_string(kind);
}

CassettePtr CassetteRegistry::get(const std::string& path) {
  std::lock_guard lock(mu_);
  auto it = cassettes_.find(path);
  if (it != cassettes_.end()) return it->second;
  auto c = Cassette::open(path);
  cassettes_.emplace(path, c);
  return c;
}

std::vector<CassettePtr> CassetteRegistry::all() const {
  std::lock_guard lock(mu_);
  std::vector<CassettePtr> out;
  for (const auto& [_, c] : cassettes_) out.push_back(c);
  return out;
}

BackendPtr make_backend(const BackendSpec& spec, CassetteRegistry& cassettes) {
  auto label = spec.label();
  switch (spec.kind) {
    case BackendKind::Live:
      if (spec.endpoint.base_url.empty()) throw ConfigError("live backend needs base_url");
      return make_http(spec.endpoint, spec.retry);
    case BackendKind::Scripted:
      return make_scripted(spec.script, label);
    case BackendKind::Replay:
      if (spec.cassette.empty()) throw ConfigError("replay backend needs a cassette path");
      return make_replay(cassettes.get(spec.cassette), label);
    case BackendKind::Record:
      if (spec.cassette.empty()) throw ConfigError("record backend needs a cassette path");
      if (!spec.inner) throw ConfigError("record backend needs an inner backend");
      return make_recorder(make_backend(*spec.inner, cassettes), cassettes.get(spec.cassette));
  }
  throw ConfigError("unsupported backend kind");
}

}  // namespace curio
