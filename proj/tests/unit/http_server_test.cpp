#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <thread>

#include <httplib.h>

#include "fake_backend.hpp"
#include "generators.hpp"
#include "recap/service/http_server.hpp"
#include "recap/service/service.hpp"
#include "recap/service/store.hpp"

namespace recap::service {
namespace {

using nlohmann::json;
using recap::testing::plain_meeting_body;
using recap::testing::TempDir;

struct Harness {
  explicit Harness(std::optional<std::string> bearer = std::nullopt, AppConfig cfg = {},
                   std::shared_ptr<Backend> backend = std::make_shared<StubBackend>())
      : dir("http"),
        service(std::move(cfg), std::make_shared<FileStore>(dir.path()), std::move(backend)),
        server(service, std::move(bearer)) {
    port = server.start("127.0.0.1", 0);
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }

  TempDir dir;
  Service service;
  HttpServer server;
  int port = 0;
};

struct Ingested {
  std::string id;
  std::string owner_token;
};

Ingested ingest(httplib::Client& c, std::size_t n = 12) {
  auto res = c.Post("/v1/meetings", {{"X-Actor", "amy"}}, plain_meeting_body(n), "text/plain");
  EXPECT_TRUE(res);
  EXPECT_EQ(res->status, 201) << res->body;
  const auto body = json::parse(res->body);
  return {body["meeting_id"], body["owner_token"]};
}

json edit_body(std::uint64_t base, const std::string& event_id, const std::string& summary,
               const std::string& actor = "amy") {
  return {{"event_id", event_id},
          {"actor", actor},
          {"at_ms", 1},
          {"base_version", base},
          {"action", "edit_note"},
          {"payload", {{"note_id", "kp-1"}, {"summary", summary}}}};
}

httplib::Result post_event(httplib::Client& c, const std::string& id, const json& body,
                           const std::string& actor = "amy") {
  return c.Post(("/v1/meetings/" + id + "/events").c_str(), {{"X-Actor", actor}}, body.dump(),
                "application/json");
}

TEST(Http, IngestRecapAndProjections) {
  Harness h;
  auto c = h.client();
  auto res = c.Get("/v1/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);

  res = c.Post("/v1/meetings", plain_meeting_body(12), "text/plain");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto created = json::parse(res->body);
  const std::string id = created["meeting_id"];
  EXPECT_EQ(created["status"], "ready");
  EXPECT_EQ(created["version"], 1);
  EXPECT_EQ(res->get_header_value("Location"), "/v1/meetings/" + id);

  res = c.Get(("/v1/meetings/" + id + "/recap").c_str());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("ETag"), "\"1\"");
  auto doc = json::parse(res->body);
  EXPECT_TRUE(doc.contains("highlights"));
  EXPECT_TRUE(doc.contains("chapters"));
  EXPECT_EQ(doc["meeting_id"], id);

  res = c.Get(("/v1/meetings/" + id + "/recap?view=highlights").c_str());
  doc = json::parse(res->body);
  EXPECT_TRUE(doc.contains("highlights"));
  EXPECT_FALSE(doc.contains("chapters"));
  res = c.Get(("/v1/meetings/" + id + "/recap?view=hierarchical").c_str());
  doc = json::parse(res->body);
  EXPECT_FALSE(doc.contains("highlights"));
  EXPECT_TRUE(doc.contains("chapters"));
  res = c.Get(("/v1/meetings/" + id + "/recap?view=tree").c_str());
  EXPECT_EQ(res->status, 400);

  res = c.Get(("/v1/meetings/" + id + "/recap").c_str(), {{"If-None-Match", "\"1\""}});
  EXPECT_EQ(res->status, 304);
  EXPECT_TRUE(res->body.empty());
  res = c.Get(("/v1/meetings/" + id + "/recap").c_str(), {{"If-None-Match", "W/\"7\", \"1\""}});
  EXPECT_EQ(res->status, 304);
  res = c.Get(("/v1/meetings/" + id + "/recap").c_str(), {{"If-None-Match", "\"2\""}});
  EXPECT_EQ(res->status, 200);

  res = c.Get("/v1/meetings/mtg-none/recap");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "NotFound");
  res = c.Get("/v1/meetings/mtg-none/status");
  EXPECT_EQ(res->status, 404);
}

TEST(Http, IngestErrors) {
  AppConfig cfg;
  cfg.max_body_bytes = 4096;
  Harness h(std::nullopt, cfg);
  auto c = h.client();
  auto res = c.Post("/v1/meetings", "", "text/plain");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  res = c.Post("/v1/meetings", "Amy: caf\xC3\x28", "text/plain");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/v1/meetings?format=docx", "Amy: hi", "text/plain");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/v1/meetings", std::string(5000, 'a'), "text/plain");
  EXPECT_EQ(res->status, 413);
  res = c.Post("/v1/meetings?format=srt",
               "1\n00:00:01,000 --> 00:00:02,000\nAmy: I will send the deck by Monday.\n",
               "text/plain");
  EXPECT_EQ(res->status, 201);
}

TEST(Http, AsyncIngestWalksStatus) {
  std::promise<void> gate;
  auto released = gate.get_future().share();
  auto backend = std::make_shared<recap::testing::FakeBackend>([released](const BackendRequest& req) {
    released.wait();
    StubBackend stub;
    return stub.invoke(req);
  });
  Harness h(std::nullopt, AppConfig{}, backend);
  auto c = h.client();
  auto res = c.Post("/v1/meetings", plain_meeting_body(300), "text/plain");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 202);
  const std::string id = json::parse(res->body)["meeting_id"];
  EXPECT_FALSE(json::parse(res->body).contains("version"));

  res = c.Get(("/v1/meetings/" + id + "/status").c_str());
  ASSERT_EQ(res->status, 200);
  const std::string first = json::parse(res->body)["status"];
  EXPECT_TRUE(first == "pending" || first == "running") << first;
  res = c.Get(("/v1/meetings/" + id + "/recap").c_str());
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"], "NotReady");

  gate.set_value();
  std::string state;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  while (std::chrono::steady_clock::now() < deadline) {
    res = c.Get(("/v1/meetings/" + id + "/status").c_str());
    state = json::parse(res->body)["status"];
    if (state == "ready" || state == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  EXPECT_EQ(state, "ready");
  EXPECT_EQ(json::parse(res->body)["version"], 1);
  res = c.Get(("/v1/meetings/" + id + "/recap").c_str());
  EXPECT_EQ(res->status, 200);
}

TEST(Http, EventsVersioningAndConflicts) {
  Harness h;
  auto c = h.client();
  const auto m = ingest(c);
  auto res = post_event(c, m.id, edit_body(1, "e1", "Edited once."));
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["new_version"], 2);
  EXPECT_EQ(res->get_header_value("ETag"), "\"2\"");

  res = post_event(c, m.id, edit_body(1, "e2", "Too late."));
  EXPECT_EQ(res->status, 409);
  auto err = json::parse(res->body);
  EXPECT_EQ(err["error"], "StaleVersion");
  EXPECT_EQ(err["current_version"], 2);

  res = post_event(c, m.id, edit_body(2, "e3", "Impostor."), "bob");
  EXPECT_EQ(res->status, 403);
  res = c.Post(("/v1/meetings/" + m.id + "/events").c_str(), edit_body(2, "e3", "x").dump(),
               "application/json");
  EXPECT_EQ(res->status, 403);

  res = c.Post(("/v1/meetings/" + m.id + "/events").c_str(), {{"X-Actor", "amy"}}, "{not json",
               "application/json");
  EXPECT_EQ(res->status, 400);
  auto bad = edit_body(2, "e4", "x");
  bad["action"] = "Explode";
  res = post_event(c, m.id, bad);
  EXPECT_EQ(res->status, 400);
  res = post_event(c, m.id, edit_body(2, "e1", "Duplicate id."));
  EXPECT_EQ(res->status, 400);
  json rolling_delete = {{"event_id", "e5"},    {"actor", "amy"},
                         {"at_ms", 1},          {"base_version", 2},
                         {"action", "delete_note"},
                         {"payload", {{"chapter_id", "ch-0"}, {"rolling_index", 0}}},
                         {"delete_reason", "done"}};
  res = post_event(c, m.id, rolling_delete);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "IllegalAction");
  res = post_event(c, "mtg-none", edit_body(1, "e6", "x"));
  EXPECT_EQ(res->status, 404);

  res = c.Get(("/v1/meetings/" + m.id + "/recap").c_str(), {{"If-None-Match", "\"1\""}});
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["version"], 2);
  res = c.Get(("/v1/meetings/" + m.id + "/status").c_str());
  EXPECT_EQ(json::parse(res->body)["event_count"], 1);
}

TEST(Http, TwoClientRaceOneWins) {
  Harness h;
  auto setup = h.client();
  const auto m = ingest(setup);
  for (int round = 0; round < 5; ++round) {
    const std::uint64_t base = 1 + round;
    std::promise<void> go;
    auto start = go.get_future().share();
    auto racer = [&, start](std::string tag) {
      auto c = h.client();
      start.wait();
      return post_event(c, m.id, edit_body(base, tag + std::to_string(round), "By " + tag))->status;
    };
    auto a = std::async(std::launch::async, racer, "a");
    auto b = std::async(std::launch::async, racer, "b");
    go.set_value();
    const int sa = a.get();
    const int sb = b.get();
    EXPECT_TRUE((sa == 200 && sb == 409) || (sa == 409 && sb == 200)) << sa << " " << sb;
  }
  auto res = setup.Get(("/v1/meetings/" + m.id + "/status").c_str());
  const auto st = json::parse(res->body);
  EXPECT_EQ(st["version"], 6);
  EXPECT_EQ(st["event_count"], 5);
}

TEST(Http, ExportsShareAndTranscriptPrivacy) {
  Harness h;
  auto c = h.client();
  const auto m = ingest(c);
  ASSERT_EQ(post_event(c, m.id, edit_body(1, "e1", "The team chose a beta launch."))->status, 200);

  auto res = c.Get(("/v1/meetings/" + m.id + "/export/training").c_str());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/x-ndjson");
  auto line = json::parse(res->body.substr(0, res->body.find('\n')));
  EXPECT_EQ(line["signal"], "quality_improvement");
  EXPECT_EQ(line["context_text"], "");
  res = c.Get(("/v1/meetings/" + m.id + "/export/training").c_str(),
              {{"X-Owner-Token", m.owner_token}});
  line = json::parse(res->body.substr(0, res->body.find('\n')));
  EXPECT_NE(line["context_text"].get<std::string>().find("We decided"), std::string::npos);

  res = c.Get(("/v1/meetings/" + m.id + "/export/markdown?view=highlights").c_str());
  ASSERT_EQ(res->status, 200);
  EXPECT_TRUE(res->body.starts_with("# Highlights\n"));
  EXPECT_NE(res->body.find("The team chose a beta launch."), std::string::npos);
  EXPECT_EQ(res->body.find("# Chapters"), std::string::npos);

  res = c.Get(("/v1/meetings/" + m.id + "/share?node=kp-1&depth=full").c_str());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body.find("We decided"), std::string::npos);
  res = c.Get(("/v1/meetings/" + m.id + "/share?node=kp-1&depth=full").c_str(),
              {{"X-Owner-Token", m.owner_token}});
  EXPECT_NE(res->body.find("We decided"), std::string::npos);
  res = c.Get(("/v1/meetings/" + m.id + "/share?node=ch-0&depth=one_liner").c_str());
  EXPECT_EQ(res->status, 200);
  EXPECT_TRUE(res->body.starts_with("- **"));
  res = c.Get(("/v1/meetings/" + m.id + "/share?depth=full").c_str());
  EXPECT_EQ(res->status, 400);
  res = c.Get(("/v1/meetings/" + m.id + "/share?node=kp-404").c_str());
  EXPECT_EQ(res->status, 400);

  res = c.Get(("/v1/meetings/" + m.id + "/transcript").c_str());
  EXPECT_EQ(res->status, 403);
  EXPECT_EQ(res->body.find("We decided"), std::string::npos);
  res = c.Get(("/v1/meetings/" + m.id + "/transcript").c_str(), {{"X-Owner-Token", "nope"}});
  EXPECT_EQ(res->status, 403);
  res = c.Get(("/v1/meetings/" + m.id + "/transcript").c_str(),
              {{"X-Owner-Token", m.owner_token}});
  ASSERT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("We decided"), std::string::npos);

  // Recap and status never carry raw transcript text.
  res = c.Get(("/v1/meetings/" + m.id + "/status").c_str());
  EXPECT_EQ(res->body.find("Status line"), std::string::npos);
  res = c.Get(("/v1/meetings/" + m.id + "/recap").c_str());
  EXPECT_EQ(res->body.find("Status line 5 covers"), std::string::npos);
}

TEST(Http, BearerTokenGuardsEverythingButHealth) {
  Harness h(std::string("deploy-secret"));
  auto c = h.client();
  auto res = c.Get("/v1/healthz");
  EXPECT_EQ(res->status, 200);
  res = c.Post("/v1/meetings", plain_meeting_body(6), "text/plain");
  EXPECT_EQ(res->status, 401);
  res = c.Get("/v1/meetings/mtg-x/status", {{"Authorization", "Bearer wrong"}});
  EXPECT_EQ(res->status, 401);
  c.set_bearer_token_auth("deploy-secret");
  res = c.Post("/v1/meetings", plain_meeting_body(6), "text/plain");
  EXPECT_EQ(res->status, 201);
}

TEST(Http, ServiceTokenFromEnvironment) {
  AppConfig cfg;
  cfg.service_token_env_var = "RECAP_TEST_SERVICE_TOKEN";
  ::unsetenv("RECAP_TEST_SERVICE_TOKEN");
  EXPECT_FALSE(service_token_from_env(cfg).has_value());
  ::setenv("RECAP_TEST_SERVICE_TOKEN", "abc", 1);
  EXPECT_EQ(service_token_from_env(cfg), "abc");
  ::unsetenv("RECAP_TEST_SERVICE_TOKEN");
  cfg.service_token_env_var.clear();
  EXPECT_FALSE(service_token_from_env(cfg).has_value());
}

}  // namespace
}  // namespace recap::service
