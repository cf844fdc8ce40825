#pragma once

#include <nlohmann/json.hpp>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lithoquery::service {

enum class JobStatus { queued, running, done, failed };

const char* to_string(JobStatus s) noexcept;

struct JobRecord {
    std::string job_id;
    std::string kind;
    std::string project_id;
    JobStatus status = JobStatus::queued;
    double progress = 0.0;
    std::string result_ref;
    nlohmann::ordered_json result;
    std::string error_code;
    std::string error_message;

    nlohmann::ordered_json to_json() const;
    static JobRecord from_json(const nlohmann::ordered_json& j);
};

struct JobOutcome {
    std::string result_ref;
    nlohmann::ordered_json result;
};

/// Bounded worker pool for long operations. Job records are mirrored to
/// `<dir>/<job_id>.json` whenever their status changes.
class JobRunner {
public:
    using Progress = std::function<void(double)>;
    using Task = std::function<JobOutcome(const Progress&)>;

    JobRunner(std::filesystem::path dir, unsigned threads);
    ~JobRunner();
    JobRunner(const JobRunner&) = delete;
    JobRunner& operator=(const JobRunner&) = delete;

    std::string submit(std::string kind, std::string project_id, Task task);
    std::optional<JobRecord> get(const std::string& job_id) const;
    /// Blocks until the job is done or failed.
    JobRecord wait(const std::string& job_id);

private:
    void worker();
    void persist(const JobRecord& rec) const;

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable done_cv_;
    std::deque<std::pair<std::string, Task>> queue_;
    std::map<std::string, JobRecord> jobs_;
    std::vector<std::thread> workers_;
    std::size_t sequence_ = 0;
    bool stopping_ = false;
};

}  // namespace lithoquery::service
