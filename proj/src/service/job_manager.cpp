#include <cstdio>

#include "tcfd/service.hpp"

namespace tcfd::service {

std::string_view to_string(JobKind k) { return k == JobKind::Ingest ? "ingest" : "analyze"; }

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Partial: return "partial";
    case JobState::Complete: return "complete";
    case JobState::Failed: return "failed";
  }
  return "failed";
}

bool is_terminal(JobState s) { return s == JobState::Partial || s == JobState::Complete || s == JobState::Failed; }

nlohmann::json to_json(const JobHandle& h) {
  nlohmann::json j{{"job_id", h.job_id},
                   {"doc_id", h.doc_id},
                   {"kind", to_string(h.kind)},
                   {"state", to_string(h.state)},
                   {"progress", h.progress},
                   {"total", h.total}};
  j["error"] = h.error ? *h.error : nlohmann::json(nullptr);
  return j;
}

JobManager::JobManager(std::size_t max_active) : max_active_(max_active) {}

JobManager::~JobManager() {
  std::vector<std::jthread> threads;
  {
    std::lock_guard lock(mutex_);
    threads.swap(threads_);
  }
  // jthread destructors join.
}

JobHandle JobManager::start(JobKind kind, const std::string& doc_id, int total, Work work, bool* coalesced) {
  std::lock_guard lock(mutex_);
  std::size_t in_flight = 0;
  for (const auto& [id, h] : jobs_) {
    if (is_terminal(h.state)) continue;
    if (h.doc_id == doc_id && h.kind == kind) {
      if (coalesced) *coalesced = true;
      return h;
    }
    ++in_flight;
  }
  if (in_flight >= max_active_) {
    throw Error(ErrorCode::Conflict, "too many jobs in flight; retry later", "busy");
  }
  if (coalesced) *coalesced = false;
  char buf[32];
  std::snprintf(buf, sizeof buf, "job-%06zu", next_id_++);
  JobHandle h;
  h.job_id = buf;
  h.doc_id = doc_id;
  h.kind = kind;
  h.total = total;
  jobs_[h.job_id] = h;
  threads_.emplace_back([this, id = h.job_id, work = std::move(work)]() mutable { run(id, std::move(work)); });
  return h;
}

void JobManager::run(const std::string& job_id, Work work) {
  {
    std::lock_guard lock(mutex_);
    jobs_[job_id].state = JobState::Running;
  }
  changed_.notify_all();
  const JobContext ctx([this, job_id](int done) {
    {
      std::lock_guard lock(mutex_);
      auto& h = jobs_[job_id];
      h.progress = std::max(h.progress, done);
    }
    changed_.notify_all();
  });
  JobState final_state = JobState::Failed;
  std::optional<nlohmann::json> error;
  try {
    final_state = work(ctx);
  } catch (const Error& e) {
    error = nlohmann::json{{"code", to_string(e.code())}, {"message", e.what()}, {"stage", e.stage()}};
  } catch (const std::exception& e) {
    error = nlohmann::json{{"code", "AnalysisFailed"}, {"message", e.what()}, {"stage", ""}};
  }
  {
    std::lock_guard lock(mutex_);
    auto& h = jobs_[job_id];
    h.state = error ? JobState::Failed : final_state;
    if (!error && h.state == JobState::Complete) h.progress = h.total;
    h.error = error;
  }
  changed_.notify_all();
}

std::optional<JobHandle> JobManager::get(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::optional<JobHandle> JobManager::active(const std::string& doc_id, JobKind kind) const {
  std::lock_guard lock(mutex_);
  for (const auto& [id, h] : jobs_) {
    if (h.doc_id == doc_id && h.kind == kind && !is_terminal(h.state)) return h;
  }
  return std::nullopt;
}

std::optional<JobHandle> JobManager::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  changed_.wait_for(lock, timeout, [&] { return is_terminal(jobs_.at(job_id).state); });
  return jobs_.at(job_id);
}

}  // namespace tcfd::service
