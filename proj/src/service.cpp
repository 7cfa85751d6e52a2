#include "conceptor/service.hpp"

#include <algorithm>
#include <optional>

#include <httplib.h>

#include "conceptor/png.hpp"

namespace conceptor {

namespace fs = std::filesystem;

std::string_view job_state_name(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "failed";
}

namespace {

constexpr int kMaxGenerateCount = 16;

Json job_to_json(const JobHandle& j) {
  return {{"job_id", j.job_id},
          {"kind", j.kind},
          {"concept", j.concept_name},
          {"state", job_state_name(j.state)},
          {"progress", j.progress},
          {"result_path", j.result_path},
          {"result_id", j.result_id},
          {"error", j.error}};
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(canonical_dump(body), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
  Json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  reply(res, status, body);
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("request body must be a JSON object", "body");
  return j;
}

template <class T>
T body_field(const Json& body, const char* key, T fallback) {
  if (!body.contains(key)) return fallback;
  try {
    return body.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "'", key);
  }
}

std::string image_url(const std::string& hash) { return "/images/" + hash + ".png"; }

}  // namespace

LabService::LabService(Workspace ws, SubjectBundle bundle, ConceptCorpusPlan plan)
    : ws_(std::move(ws)), bundle_(std::move(bundle)), plan_(plan), server_(std::make_unique<httplib::Server>()) {
  fs::create_directories(ws_.decompositions());
  fs::create_directories(ws_.images());
  install_routes();
  worker_ = std::thread([this] { worker_loop(); });
}

LabService::~LabService() {
  stop();
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

bool LabService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int LabService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool LabService::listen_after_bind() { return server_->listen_after_bind(); }
void LabService::stop() { server_->stop(); }

JobHandle LabService::job(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw ValidationError("unknown job '" + job_id + "'", "job_id");
  return it->second;
}

Json LabService::hashes() const {
  return {{"subject_hash", bundle_.model.weights_hash()}, {"vocab_hash", bundle_.vocab.version_hash()}};
}

void LabService::worker_loop() {
  PooledCosineOracle oracle;
  while (true) {
    std::string id;
    DecompositionConfig config;
    std::string concept_name;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      auto& job = jobs_.at(id);
      job.state = JobState::running;
      config = job_configs_.at(id);
      concept_name = job.concept_name;
    }
    try {
      auto progress = [&](double f) {
        std::lock_guard lock(mu_);
        jobs_.at(id).progress = f;
      };
      const auto stored = decompose_and_store(ws_, bundle_, concept_name, config, plan_, oracle, progress);
      std::lock_guard lock(mu_);
      auto& job = jobs_.at(id);
      job.progress = 1.0;
      job.result_id = stored.id;
      job.result_path = fs::relative(stored.path, ws_.root).generic_string();
      job.state = JobState::done;
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      auto& job = jobs_.at(id);
      job.error = e.what();
      job.state = JobState::failed;
    }
  }
}

void LabService::install_routes() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const ValidationError& e) {
      reply_error(res, 422, e.what(), e.field());
    } catch (const IntegrityError& e) {
      reply_error(res, 500, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  });

  srv.Get("/api/decompositions", [this](const httplib::Request&, httplib::Response& res) {
    Json list = Json::array();
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(ws_.decompositions()))
      if (entry.path().extension() == ".json") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
      try {
        const Decomposition dec = load_workspace_decomposition(ws_, bundle_, p.string());
        list.push_back({{"id", p.stem().string()},
                        {"concept", dec.concept_name},
                        {"seed", dec.seed},
                        {"n", dec.n},
                        {"provenance", dec.provenance}});
      } catch (const std::exception&) {
        // Files from other subjects or damaged files are not listed.
      }
    }
    Json body = hashes();
    body["decompositions"] = list;
    reply(res, 200, body);
  });

  const std::string id_pattern = "([A-Za-z0-9_-]+)";

  auto load = [this](const std::string& id, httplib::Response& res) -> std::optional<Decomposition> {
    if (!fs::exists(ws_.decomposition_file(id))) {
      reply_error(res, 404, "unknown decomposition '" + id + "'", "id");
      return std::nullopt;
    }
    return load_workspace_decomposition(ws_, bundle_, ws_.decomposition_file(id).string());
  };

  srv.Get("/api/decompositions/" + id_pattern, [this, load](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto dec = load(id, res);
    if (!dec) return;
    Json body = hashes();
    body["id"] = id;
    body["decomposition"] = decomposition_to_json(*dec, bundle_.vocab);
    reply(res, 200, body);
  });

  srv.Post("/api/decompositions/" + id_pattern + "/generate",
           [this, load](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             auto dec = load(id, res);
             if (!dec) return;
             const Json body = parse_body(req);
             const auto seed = body_field<std::uint64_t>(body, "seed", 0);
             const int count = body_field<int>(body, "count", 1);
             require(count >= 1 && count <= kMaxGenerateCount,
                     "count must lie in [1, " + std::to_string(kMaxGenerateCount) + "]", "count");
             ManipulationRequest request;
             request.guidance_scale = body_field<double>(body, "guidance_scale", dec->config.guidance_scale);
             request.sampler_steps = body_field<int>(body, "sampler_steps", dec->config.sampler_steps);
             if (body.contains("edits")) {
               require(body["edits"].is_object(), "edits must map token to scale", "edits");
               for (const auto& [token, scale] : body["edits"].items()) {
                 require(scale.is_number(), "edit scale for '" + token + "' must be a number", "edits");
                 const auto found = bundle_.vocab.find(token);
                 require(found.has_value(), "unknown token '" + token + "'", "edits");
                 request.edits[*found] = scale.get<double>();
               }
             }
             edited_tokens(*dec, request.edits);
             Json images = Json::array();
             for (int i = 0; i < count; ++i) {
               request.seed = seed + static_cast<std::uint64_t>(i);
               const Image img = manipulate(bundle_.model, bundle_.schedule, bundle_.vocab, *dec, request);
               const std::string hash = save_image_addressed(ws_.images(), img);
               images.push_back({{"seed", request.seed}, {"hash", hash}, {"url", image_url(hash)}});
             }
             Json out = hashes();
             out["id"] = id;
             out["images"] = images;
             Json edits = Json::object();
             for (const auto& [tok, scale] : request.edits) edits[bundle_.vocab.token(tok)] = scale;
             out["edits"] = edits;
             reply(res, 200, out);
           });

  srv.Post("/api/decompositions/" + id_pattern + "/single-image",
           [this, load](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             auto dec = load(id, res);
             if (!dec) return;
             const Json body = parse_body(req);
             SingleImageConfig cfg;
             cfg.tau = body_field<double>(body, "tau", 0.95);
             cfg.guidance_scale = dec->config.guidance_scale;
             cfg.sampler_steps = dec->config.sampler_steps;
             if (body.contains("order")) cfg.order = parse_removal_order(body_field<std::string>(body, "order", ""));
             const auto seed = body_field<std::uint64_t>(body, "seed", 0);
             PooledCosineOracle oracle;
             const auto result =
                 single_image_decompose(bundle_.model, bundle_.schedule, bundle_.vocab, *dec, seed, oracle, cfg);
             Json trace_urls = Json::array();
             for (const auto& img : result.trace_images) trace_urls.push_back(image_url(save_image_addressed(ws_.images(), img)));
             Json out = hashes();
             out["id"] = id;
             out["result"] = single_image_to_json(result, bundle_.vocab, oracle.name());
             out["images"] = {{"reference", image_url(save_image_addressed(ws_.images(), result.reference))},
                              {"final", image_url(save_image_addressed(ws_.images(), result.final_image))},
                              {"trace", trace_urls}};
             reply(res, 200, out);
           });

  srv.Post("/api/jobs/decompose", [this](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto concept_name = body_field<std::string>(body, "concept", "");
    require(!concept_name.empty(), "concept is required", "concept");
    suite_index(bundle_.vocab, concept_name);
    const DecompositionConfig config =
        decomposition_config_from_json(body.contains("config") ? body.at("config") : Json::object());
    validate_decomposition_config(config, bundle_.vocab);

    std::lock_guard lock(mu_);
    for (const auto& [jid, job] : jobs_)
      if (job.concept_name == concept_name && (job.state == JobState::queued || job.state == JobState::running)) {
        reply_error(res, 409, "a decomposition job for '" + concept_name + "' is already " +
                                  std::string(job_state_name(job.state)) + " (" + jid + ")",
                    "concept");
        return;
      }
    JobHandle job;
    job.job_id = "job-" + std::to_string(next_job_++);
    job.kind = "decompose";
    job.concept_name = concept_name;
    jobs_[job.job_id] = job;
    job_configs_[job.job_id] = config;
    queue_.push_back(job.job_id);
    cv_.notify_one();
    Json out = hashes();
    out["job"] = job_to_json(job);
    reply(res, 202, out);
  });

  srv.Get("/api/jobs/([A-Za-z0-9_-]+)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) {
      reply_error(res, 404, "unknown job '" + id + "'", "id");
      return;
    }
    Json out = hashes();
    out["job"] = job_to_json(it->second);
    reply(res, 200, out);
  });

  srv.Get("/images/([0-9a-f]{64})\\.png", [this](const httplib::Request& req, httplib::Response& res) {
    const fs::path path = ws_.images() / (std::string(req.matches[1]) + ".png");
    if (!fs::exists(path)) {
      reply_error(res, 404, "unknown image", "hash");
      return;
    }
    const auto bytes = read_file(path);
    res.set_header("Cache-Control", "public, max-age=31536000, immutable");
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) reply_error(res, res.status, "not found");
  });
}

}  // namespace conceptor
