#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tcfd/config.hpp"
#include "tcfd/persistence.hpp"
#include "tcfd/promptlab.hpp"

namespace httplib {
class Server;
}

namespace tcfd::service {

enum class JobKind { Ingest, Analyze };
enum class JobState { Queued, Running, Partial, Complete, Failed };
std::string_view to_string(JobKind k);
std::string_view to_string(JobState s);
bool is_terminal(JobState s);

struct JobHandle {
  std::string job_id;
  std::string doc_id;
  JobKind kind = JobKind::Ingest;
  JobState state = JobState::Queued;
  int progress = 0;
  int total = 0;
  std::optional<nlohmann::json> error;  // {code, message, stage}
};

nlohmann::json to_json(const JobHandle& h);

/// Progress reporting handed to a running job.
class JobContext {
 public:
  JobContext(std::function<void(int)> on_progress) : on_progress_(std::move(on_progress)) {}
  void advance(int done) const { on_progress_(done); }

 private:
  std::function<void(int)> on_progress_;
};

/// Runs jobs on background threads. At most one non-terminal job per
/// (doc_id, kind): starting another returns the running job's handle.
class JobManager {
 public:
  /// Returns the final state (Complete or Partial); throwing marks the job
  /// Failed.
  using Work = std::function<JobState(const JobContext&)>;

  explicit JobManager(std::size_t max_active = 16);
  ~JobManager();

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  /// Busy (Error Conflict with stage "busy") when max_active jobs are in
  /// flight. `coalesced` is set when an existing job was returned.
  JobHandle start(JobKind kind, const std::string& doc_id, int total, Work work, bool* coalesced = nullptr);
  std::optional<JobHandle> get(const std::string& job_id) const;
  std::optional<JobHandle> active(const std::string& doc_id, JobKind kind) const;

  /// Blocks until the job is terminal or the timeout expires.
  std::optional<JobHandle> wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

 private:
  void run(const std::string& job_id, Work work);

  std::size_t max_active_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, JobHandle> jobs_;
  std::vector<std::jthread> threads_;
  std::size_t next_id_ = 1;
};

/// Transport-independent request and response, so handlers can be driven
/// in-process as well as through HTTP.
struct ApiRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string content_type;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  std::function<std::string()> clock;  // analysis created_at; default UTC now
  std::ostream* log = nullptr;         // JSON-line request log; nullptr: silent
  std::size_t max_active_jobs = 16;
};

class Service {
 public:
  Service(Runtime& runtime, Workspace& workspace, ServiceOptions options = {});
  ~Service();

  ApiResponse dispatch(const ApiRequest& request);

  /// Registers every route on `server`, forwarding to dispatch().
  void mount(httplib::Server& server);

  JobManager& jobs() { return jobs_; }
  GuidelineStore& guidelines() { return guidelines_; }
  FeedbackStore& feedback() { return feedback_; }

 private:
  ApiResponse route(const ApiRequest& request);

  ApiResponse post_report(const ApiRequest& r);
  ApiResponse list_reports();
  ApiResponse get_analysis(const std::string& doc_id);
  ApiResponse start_analysis(const std::string& doc_id);
  ApiResponse get_job(const std::string& job_id);
  ApiResponse ask(const std::string& doc_id, const ApiRequest& r);
  ApiResponse evidence(const std::string& doc_id, const ApiRequest& r);
  ApiResponse post_feedback(const ApiRequest& r);
  ApiResponse list_feedback(const ApiRequest& r);
  ApiResponse transform(const std::string& feedback_id, const ApiRequest& r);
  ApiResponse promote(const std::string& version);

  AnalysisDeps deps(const GuidelineList& guidelines) const;
  BasicInfo basic_info_for(const std::string& doc_id, const VectorIndex& index);
  void require_document(const std::string& doc_id) const;
  VectorIndex require_index(const std::string& doc_id) const;

  Runtime& rt_;
  Workspace& ws_;
  ServiceOptions options_;
  FeedbackStore feedback_;
  GuidelineStore guidelines_;
  std::mutex info_mutex_;
  std::map<std::string, BasicInfo> info_cache_;
  JobManager jobs_;  // last: joins job threads before the members they use go away
};

/// HTTP status for an error code.
int http_status(ErrorCode code);
nlohmann::json error_body(const Error& e);

/// Blocking HTTP server on host:port. Returns when `stop` is called from
/// another thread or the listener fails.
class HttpServer {
 public:
  HttpServer(Service& service);
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace tcfd::service
