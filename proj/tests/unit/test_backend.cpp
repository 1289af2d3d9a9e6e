#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "curio/backend.hpp"
#include "curio/errors.hpp"
#include "support/testing.hpp"

using namespace curio;
using curio::testing::TempDir;

namespace {

Conversation ask(const std::string& text) { return {Message::user(text)}; }

// Chat-completions stub on a random local port.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string ok_body(const std::string& content) {
  return Json({{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}).dump();
}

}  // namespace

TEST(Conversation, ValidationRules) {
  EXPECT_NO_THROW(validate_conversation(ask("hi")));
  Conversation sys = {Message::system("s"), Message::user("u"), Message::assistant("a"), Message::user("u2")};
  EXPECT_NO_THROW(validate_conversation(sys));
  Conversation starts_wrong = {Message::assistant("a")};
  EXPECT_THROW(validate_conversation(starts_wrong), PreconditionError);
  Conversation twice = {Message::user("a"), Message::user("b")};
  EXPECT_THROW(validate_conversation(twice), PreconditionError);
  Conversation empty_content = {Message::user("")};
  EXPECT_THROW(validate_conversation(empty_content), PreconditionError);
  EXPECT_THROW(validate_conversation(Conversation{}), PreconditionError);
}

TEST(Conversation, RequestHashIgnoresWhitespaceRuns) {
  SamplingParams p;
  p.seed = 3;
  EXPECT_EQ(request_hash(ask("a  b\n c"), p), request_hash(ask("a b c"), p));
  EXPECT_NE(request_hash(ask("a b c"), p), request_hash(ask("a b d"), p));
  SamplingParams q = p;
  q.seed = 4;
  EXPECT_NE(request_hash(ask("a"), p), request_hash(ask("a"), q));
}

TEST(Scripted, FirstMatchingRuleWins) {
  auto b = make_scripted({ScriptRule::substring("apple", "fruit"), ScriptRule::re("^\\d+$", "number"),
                          ScriptRule::fallback("other")});
  EXPECT_EQ(b->chat(ask("An APPLE a day"), {}).content, "fruit");
  EXPECT_EQ(b->chat(ask("12345"), {}).content, "number");
  EXPECT_EQ(b->chat(ask("pear"), {}).content, "other");
}

TEST(Scripted, NeedsFallbackRule) {
  EXPECT_THROW(make_scripted({ScriptRule::substring("x", "y")}), ConfigError);
  EXPECT_THROW(make_scripted({}), ConfigError);
}

TEST(Agent, SeesWholeConversation) {
  auto b = make_agent([](std::span<const Message> m) { return std::to_string(m.size()); });
  Conversation c = {Message::user("a"), Message::assistant("b"), Message::user("c")};
  EXPECT_EQ(b->chat(c, {}).content, "3");
}

TEST(Cassette, RecordThenReplay) {
  TempDir dir;
  const std::string path = dir.str("tape.jsonl");
  std::atomic<int> calls{0};
  auto inner = make_agent([&](std::span<const Message> m) {
    calls++;
    return "echo: " + m.back().content;
  });
  {
    auto rec = make_recorder(inner, Cassette::open(path));
    SamplingParams p;
    EXPECT_EQ(rec->chat(ask("one"), p).content, "echo: one");
    EXPECT_EQ(rec->chat(ask("two"), p).content, "echo: two");
    EXPECT_EQ(rec->chat(ask("one"), p).content, "echo: one");
    EXPECT_EQ(calls.load(), 2);
  }
  auto tape = Cassette::open(path);
  EXPECT_EQ(tape->size(), 2u);
  auto replay = make_replay(tape);
  EXPECT_EQ(replay->chat(ask("two"), {}).content, "echo: two");
  EXPECT_THROW(replay->chat(ask("three"), {}), CassetteMiss);
}

TEST(Cassette, ContentHashIgnoresLineOrder) {
  TempDir dir;
  auto a = Cassette::open(dir.str("a.jsonl"));
  auto b = Cassette::open(dir.str("b.jsonl"));
  a->append("h1", Json::object(), "x");
  a->append("h2", Json::object(), "y");
  b->append("h2", Json::object(), "y");
  b->append("h1", Json::object(), "x");
  EXPECT_EQ(a->content_hash(), b->content_hash());
  EXPECT_EQ(Cassette::open(dir.str("a.jsonl"))->content_hash(), a->content_hash());
}

TEST(Cassette, TruncatedLastLineIsSkipped) {
  TempDir dir;
  const std::string path = dir.str("t.jsonl");
  {
    auto c = Cassette::open(path);
    c->append("h1", Json::object(), "x");
  }
  std::ofstream(path, std::ios::app) << "{\"hash\": \"h2\", \"cont";
  EXPECT_EQ(Cassette::open(path)->size(), 1u);
}

TEST(Descriptor, RoundTripAndLabel) {
  const Json j = {{"kind", "record"},
                  {"cassette", "/tmp/x.jsonl"},
                  {"inner", {{"kind", "scripted"}, {"id", "bot"}, {"script", {{{"reply", "7"}}}}}}};
  const auto spec = BackendSpec::from_json(j);
  EXPECT_EQ(spec.kind, BackendKind::Record);
  EXPECT_EQ(spec.label(), "bot");
  EXPECT_EQ(BackendSpec::from_json(spec.to_json()).to_json(), spec.to_json());
  EXPECT_THROW(BackendSpec::from_json({{"kind", "live"}, {"api_key", "sk-123"}}), ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "scripted"}, {"colour", "red"}}), ConfigError);
}

TEST(Descriptor, RegistrySharesCassettes) {
  TempDir dir;
  CassetteRegistry reg;
  const Json j = {{"kind", "record"},
                  {"cassette", dir.str("c.jsonl")},
                  {"inner", {{"kind", "scripted"}, {"script", {{{"reply", "ok"}}}}}}};
  auto a = make_backend(BackendSpec::from_json(j), reg);
  auto b = make_backend(BackendSpec::from_json(j), reg);
  a->chat(ask("q1"), {});
  b->chat(ask("q2"), {});
  ASSERT_EQ(reg.all().size(), 1u);
  EXPECT_EQ(reg.all()[0]->size(), 2u);
}

TEST(Retry, DelaysAreNondecreasingAndCapped) {
  RetryPolicy p;
  for (int r = 1; r < 20; ++r) {
    EXPECT_LE(p.delay_for(r), p.delay_for(r + 1));
    EXPECT_LE(p.delay_for(r + 1), p.max_delay);
  }
  EXPECT_EQ(p.delay_for(1), p.initial_delay);
}

TEST(Http, RetriesTransientFailuresThenSucceeds) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = hits == 1 ? 429 : 503;
      return;
    }
    const auto body = Json::parse(req.body);
    EXPECT_EQ(body["model"], "stub-model");
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer secret-token");
    res.set_content(ok_body("hello"), "application/json");
  });
  setenv("CURIO_TEST_KEY", "secret-token", 1);
  std::vector<std::chrono::milliseconds> slept;
  auto b = make_http({server.base_url(), "stub-model", "CURIO_TEST_KEY"}, {},
                     [&](std::chrono::milliseconds d) { slept.push_back(d); });
  EXPECT_EQ(b->chat(ask("hi"), {}).content, "hello");
  EXPECT_EQ(hits.load(), 3);
  ASSERT_EQ(slept.size(), 2u);
  EXPECT_LE(slept[0], slept[1]);
}

TEST(Http, ExhaustedRetriesAreUnavailable) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  RetryPolicy retry;
  retry.max_attempts = 3;
  auto b = make_http({server.base_url(), "m", ""}, retry, [](std::chrono::milliseconds) {});
  EXPECT_THROW(b->chat(ask("hi"), {}), BackendUnavailable);
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, RejectedCredentialStopsImmediately) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  auto b = make_http({server.base_url(), "m", ""}, {}, [](std::chrono::milliseconds) {});
  EXPECT_THROW(b->chat(ask("hi"), {}), BackendUnavailable);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, MalformedReplyIsProtocolError) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  auto b = make_http({server.base_url(), "m", ""}, {}, [](std::chrono::milliseconds) {});
  EXPECT_THROW(b->chat(ask("hi"), {}), ProtocolError);
}

TEST(Http, MissingCredentialVariableIsConfigError) {
  unsetenv("CURIO_TEST_ABSENT");
  EXPECT_THROW(make_http({"http://127.0.0.1:1/v1", "m", "CURIO_TEST_ABSENT"}), ConfigError);
}

TEST(Http, UnreachableHostIsUnavailable) {
  RetryPolicy retry;
  retry.max_attempts = 2;
  auto b = make_http({"http://127.0.0.1:1/v1", "m", ""}, retry, [](std::chrono::milliseconds) {},
                     std::chrono::seconds(2));
  EXPECT_THROW(b->chat(ask("hi"), {}), BackendUnavailable);
}

TEST(Http, RequestBodyCarriesSampling) {
  SamplingParams p;
  p.temperature = 0.3;
  p.seed = 9;
  const Json body = chat_completions_body("m", ask("hi"), p);
  EXPECT_EQ(body["model"], "m");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.3);
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["messages"][0]["role"], "user");
}
