#include "lithoquery/service/jobs.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/io.hpp"

#include <algorithm>
#include <chrono>

namespace lithoquery::service {

const char* to_string(JobStatus s) noexcept {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "unknown";
}

nlohmann::ordered_json JobRecord::to_json() const {
    nlohmann::ordered_json j;
    j["job_id"] = job_id;
    j["kind"] = kind;
    j["project_id"] = project_id;
    j["status"] = to_string(status);
    j["progress"] = progress;
    j["result_ref"] = result_ref.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(result_ref);
    if (!result.is_null()) j["result"] = result;
    if (status == JobStatus::failed) j["error"] = {{"code", error_code}, {"message", error_message}};
    return j;
}

JobRecord JobRecord::from_json(const nlohmann::ordered_json& j) {
    JobRecord r;
    r.job_id = j.value("job_id", "");
    r.kind = j.value("kind", "");
    r.project_id = j.value("project_id", "");
    const auto status = j.value("status", "failed");
    r.status = status == "queued" ? JobStatus::queued
               : status == "running" ? JobStatus::running
               : status == "done" ? JobStatus::done
                                  : JobStatus::failed;
    r.progress = j.value("progress", 0.0);
    if (j.contains("result_ref") && j["result_ref"].is_string()) r.result_ref = j["result_ref"].get<std::string>();
    if (j.contains("result")) r.result = j["result"];
    if (j.contains("error")) {
        r.error_code = j["error"].value("code", "");
        r.error_message = j["error"].value("message", "");
    }
    return r;
}

JobRunner::JobRunner(std::filesystem::path dir, unsigned threads) : dir_(std::move(dir)) {
    if (threads == 0) threads = 1;
    for (unsigned i = 0; i < threads; ++i) workers_.emplace_back([this] { worker(); });
}

JobRunner::~JobRunner() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& w : workers_) w.join();
}

void JobRunner::persist(const JobRecord& rec) const {
    try {
        io::write_atomic(dir_ / (rec.job_id + ".json"), rec.to_json().dump(2));
    } catch (const std::exception&) {
        // The in-memory record stays authoritative for this process.
    }
}

std::string JobRunner::submit(std::string kind, std::string project_id, Task task) {
    JobRecord rec;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
        rec.job_id = stable_id("job-", kind + '\n' + project_id + '\n' + std::to_string(++sequence_) + '\n' +
                                           std::to_string(now) + '\n' + io::utc_timestamp());
        rec.kind = std::move(kind);
        rec.project_id = std::move(project_id);
        jobs_[rec.job_id] = rec;
        queue_.emplace_back(rec.job_id, std::move(task));
        persist(rec);
    }
    queue_cv_.notify_one();
    return rec.job_id;
}

void JobRunner::worker() {
    for (;;) {
        std::pair<std::string, Task> item;
        {
            std::unique_lock lock(mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            item = std::move(queue_.front());
            queue_.pop_front();
            jobs_[item.first].status = JobStatus::running;
            persist(jobs_[item.first]);
        }
        const auto& id = item.first;
        Progress progress = [this, &id](double p) {
            std::lock_guard lock(mutex_);
            jobs_[id].progress = std::clamp(p, 0.0, 1.0);
        };
        // Records are persisted under the lock so the file never lags behind
        // what wait() and get() report.
        try {
            auto outcome = item.second(progress);
            std::lock_guard lock(mutex_);
            auto& rec = jobs_[id];
            rec.status = JobStatus::done;
            rec.progress = 1.0;
            rec.result_ref = std::move(outcome.result_ref);
            rec.result = std::move(outcome.result);
            persist(rec);
        } catch (const Error& e) {
            std::lock_guard lock(mutex_);
            auto& rec = jobs_[id];
            rec.status = JobStatus::failed;
            rec.error_code = to_string(e.code());
            rec.error_message = e.what();
            persist(rec);
        } catch (const std::exception& e) {
            std::lock_guard lock(mutex_);
            auto& rec = jobs_[id];
            rec.status = JobStatus::failed;
            rec.error_code = "internal_error";
            rec.error_message = e.what();
            persist(rec);
        }
        done_cv_.notify_all();
    }
}

std::optional<JobRecord> JobRunner::get(const std::string& job_id) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = jobs_.find(job_id); it != jobs_.end()) return it->second;
    }
    const auto file = dir_ / (job_id + ".json");
    if (job_id.find('/') != std::string::npos || !std::filesystem::exists(file)) return std::nullopt;
    auto rec = JobRecord::from_json(nlohmann::ordered_json::parse(io::read_text(file)));
    // A job persisted as queued or running by an earlier process never finished.
    if (rec.status == JobStatus::queued || rec.status == JobStatus::running) {
        rec.status = JobStatus::failed;
        rec.error_code = "state_error";
        rec.error_message = "job was interrupted by a restart";
    }
    return rec;
}

JobRecord JobRunner::wait(const std::string& job_id) {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) {
        lock.unlock();
        if (auto rec = get(job_id)) return *rec;
        throw Error(ErrorCode::not_found, "no job " + job_id);
    }
    done_cv_.wait(lock, [&] {
        const auto s = jobs_[job_id].status;
        return s == JobStatus::done || s == JobStatus::failed;
    });
    return jobs_[job_id];
}

}  // namespace lithoquery::service
