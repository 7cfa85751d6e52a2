#include <doctest.h>

#include <chrono>
#include <thread>

#include "conceptor/service.hpp"
#include "fixtures.hpp"

#include <httplib.h>

using namespace conceptor;

namespace {

struct RunningService {
  testing::TempDir dir;
  std::unique_ptr<LabService> service;
  std::thread thread;
  int port = 0;

  RunningService() {
    service = std::make_unique<LabService>(Workspace(dir.path), testing::tiny_subject(), testing::quick_plan());
    port = service->bind_any_port("127.0.0.1");
    thread = std::thread([this] { service->listen_after_bind(); });
  }
  ~RunningService() {
    service->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120);
    return c;
  }
};

Json body_of(const httplib::Result& r) { return Json::parse(r->body); }

}  // namespace

TEST_CASE("service endpoints") {
  RunningService s;
  auto c = s.client();
  const auto& b = testing::tiny_subject();

  auto list = c.Get("/api/decompositions");
  REQUIRE(list);
  CHECK(list->status == 200);
  CHECK(body_of(list)["subject_hash"] == b.model.weights_hash());
  CHECK(body_of(list)["decompositions"].empty());

  CHECK(c.Get("/api/decompositions/missing")->status == 404);
  CHECK(c.Get("/api/jobs/job-99")->status == 404);

  auto bad = c.Post("/api/jobs/decompose", R"({"concept":"gleeb","config":{"n":0}})", "application/json");
  CHECK(bad->status == 422);
  CHECK(body_of(bad)["field"] == "n");
  CHECK(c.Post("/api/jobs/decompose", R"({"concept":"nope"})", "application/json")->status == 422);
  CHECK(c.Post("/api/jobs/decompose", "not json", "application/json")->status == 422);

  const Json cfg = decomposition_config_to_json(testing::quick_config());
  const Json req{{"concept", "gleeb"}, {"config", cfg}};
  auto accepted = c.Post("/api/jobs/decompose", req.dump(), "application/json");
  REQUIRE(accepted->status == 202);
  const std::string job_id = body_of(accepted)["job"]["job_id"];
  auto dup = c.Post("/api/jobs/decompose", req.dump(), "application/json");
  const auto job_state = body_of(c.Get("/api/jobs/" + job_id))["job"]["state"].get<std::string>();
  if (job_state == "queued" || job_state == "running") CHECK(dup->status == 409);

  Json job;
  for (int i = 0; i < 600; ++i) {
    job = body_of(c.Get("/api/jobs/" + job_id))["job"];
    if (job["state"] == "done" || job["state"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  REQUIRE(job["state"] == "done");
  CHECK(job["progress"] == 1.0);
  const std::string id = job["result_id"];

  auto one = c.Get("/api/decompositions/" + id);
  REQUIRE(one->status == 200);
  const Json dec = body_of(one)["decomposition"];
  CHECK(body_of(c.Get("/api/decompositions"))["decompositions"].size() == 1);

  auto plain = c.Post("/api/decompositions/" + id + "/generate", R"({"seed":5,"count":2,"sampler_steps":10})",
                      "application/json");
  REQUIRE(plain->status == 200);
  Json edits = Json::object();
  for (const auto& r : dec["ranked"]) edits[r["token"].get<std::string>()] = 1.0;
  const Json identity{{"seed", 5}, {"count", 2}, {"sampler_steps", 10}, {"edits", edits}};
  auto same = c.Post("/api/decompositions/" + id + "/generate", identity.dump(), "application/json");
  REQUIRE(same->status == 200);
  CHECK(body_of(same)["images"] == body_of(plain)["images"]);
  CHECK(body_of(plain)["images"][0]["hash"] != body_of(plain)["images"][1]["hash"]);

  const std::string url = body_of(plain)["images"][0]["url"];
  auto png = c.Get(url);
  REQUIRE(png->status == 200);
  CHECK(png->get_header_value("Content-Type") == "image/png");
  CHECK(sha256_hex(png->body) == body_of(plain)["images"][0]["hash"]);
  CHECK(c.Get("/images/" + std::string(64, 'a') + ".png")->status == 404);

  CHECK(c.Post("/api/decompositions/" + id + "/generate", R"({"count":17})", "application/json")->status == 422);
  auto bad_edit = c.Post("/api/decompositions/" + id + "/generate", R"({"edits":{"zzz":0.5}})", "application/json");
  CHECK(bad_edit->status == 422);
  CHECK(body_of(bad_edit)["field"] == "edits");

  auto single = c.Post("/api/decompositions/" + id + "/single-image", R"({"seed":2,"tau":0.9})", "application/json");
  REQUIRE(single->status == 200);
  const Json sj = body_of(single);
  CHECK(sj["images"]["trace"].size() == sj["result"]["trace"].size());
  auto bad_tau = c.Post("/api/decompositions/" + id + "/single-image", R"({"tau":1.5})", "application/json");
  CHECK(bad_tau->status == 422);
  CHECK(body_of(bad_tau)["field"] == "tau");
}
