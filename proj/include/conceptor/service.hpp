#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "conceptor/lab.hpp"

namespace httplib {
class Server;
}

namespace conceptor {

enum class JobState { queued, running, done, failed };
std::string_view job_state_name(JobState state);

struct JobHandle {
  std::string job_id;
  std::string kind;
  std::string concept_name;
  JobState state = JobState::queued;
  double progress = 0.0;
  std::string result_path;
  std::string result_id;
  std::string error;
};

/// HTTP adapter over a workspace and its frozen subject. Training jobs run
/// one at a time on a worker thread; other endpoints are synchronous.
class LabService {
 public:
  LabService(Workspace ws, SubjectBundle bundle, ConceptCorpusPlan plan = {});
  ~LabService();
  LabService(const LabService&) = delete;
  LabService& operator=(const LabService&) = delete;

  /// Blocks serving on host:port until stop().
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

  JobHandle job(const std::string& job_id) const;

 private:
  void install_routes();
  void worker_loop();
  Json hashes() const;

  Workspace ws_;
  SubjectBundle bundle_;
  ConceptCorpusPlan plan_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, JobHandle> jobs_;
  std::map<std::string, DecompositionConfig> job_configs_;
  std::deque<std::string> queue_;
  std::uint64_t next_job_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace conceptor
