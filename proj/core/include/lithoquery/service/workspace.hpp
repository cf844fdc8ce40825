#pragma once

#include "lithoquery/depositmodel.hpp"
#include "lithoquery/embed.hpp"
#include "lithoquery/evidence.hpp"
#include "lithoquery/geodata.hpp"
#include "lithoquery/service/config.hpp"
#include "lithoquery/service/jobs.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace lithoquery::service {

using Json = nlohmann::ordered_json;

/// File-backed project store and the operations exposed over HTTP and the
/// command line. Every operation takes and returns JSON so both front ends
/// share one code path.
///
/// Layout under data_dir:
///   projects/<pid>/project.json, projects/<pid>/focus-areas/<name>.geojson
///   datasets/<id>/{manifest.json, records.geojson}
///   layers/<id>/{manifest.json, scores.csv, layer.geojson, native.geojson}
///   results/<id>.json, jobs/<id>.json, requests/<pid>/<request id>.json
///   deposit-models/<slug>.json (+ versioned sidecars), cache/embeddings/
class Workspace {
public:
    explicit Workspace(ServiceConfig config);
    ~Workspace();

    const ServiceConfig& config() const { return config_; }

    void register_provider(std::shared_ptr<embed::EmbeddingProvider> provider);
    void set_llm(std::shared_ptr<depositmodel::LlmProvider> llm);
    embed::EmbeddingCache& cache() { return *cache_; }

    // Projects
    Json create_project(const Json& body);
    Json get_project(const std::string& project_id) const;
    /// Creates the project with defaults if it does not exist yet.
    void ensure_project(const std::string& project_id);

    // Datasets. Ingest body: geojson_path | geojson | geojson_url (+ geojson_sha256),
    // optional csv_path | csv | csv_url (+ csv_sha256), dataset_id, signature_columns,
    // key_columns, join_column, min_desc_length, focus_area, dissolve, project.
    Json list_datasets(const std::string& project_id) const;
    Json ingest_dataset(const std::string& project_id, const Json& body,
                        const JobRunner::Progress& progress = {});
    Json dissolve_dataset(const std::string& project_id, const Json& body);
    Json project_dataset(const std::string& project_id, const Json& body);
    Json clip_dataset(const std::string& project_id, const Json& body);
    geodata::GeoDataset dataset(const std::string& dataset_id) const;

    // Evidence layers
    Json run_query(const std::string& project_id, const Json& body);
    Json layer_manifest(const std::string& layer_id) const;
    Json layer_geojson(const std::string& layer_id) const;
    Json layer_histogram(const std::string& layer_id, int bins) const;
    Json export_layer(const std::string& layer_id, std::optional<double> score_min,
                      std::optional<double> score_max) const;
    evidence::ScoredLayer scored_layer(const std::string& layer_id) const;
    geometry::LayerGeometry layer_geometry(const std::string& layer_id) const;

    // Contact and evaluation
    Json derive_contact(const std::string& project_id, const Json& body);
    Json evaluate_sites(const std::string& project_id, const Json& body);
    Json evaluate_tracts(const std::string& project_id, const Json& body);
    Json grid_search(const std::string& project_id, const Json& body, const JobRunner::Progress& progress = {});
    Json result(const std::string& result_id) const;

    // Deposit models
    Json list_models() const;
    Json get_model(const std::string& deposit_type) const;
    Json put_model(const std::string& deposit_type, const Json& body);
    Json validate_model(const Json& body) const;
    Json summarize(const Json& body);

    // Focus areas
    Json list_focus_areas(const std::string& project_id) const;
    Json add_focus_area(const std::string& project_id, const Json& body);

    // Jobs
    JobRunner& jobs() { return *jobs_; }
    Json submit_job(const std::string& kind, const std::string& project_id, std::function<Json(const JobRunner::Progress&)> fn,
                    std::function<std::string(const Json&)> result_ref);
    Json job(const std::string& job_id) const;

    /// Replays a stored response for (project, request id) or runs `fn` and
    /// stores its response. An empty request id disables replay.
    Json idempotent(const std::string& project_id, const std::string& request_id, const std::string& operation,
                    const std::function<Json()>& fn);

private:
    std::filesystem::path project_dir(const std::string& project_id) const;
    std::filesystem::path dataset_dir(const std::string& dataset_id) const;
    std::filesystem::path layer_dir(const std::string& layer_id) const;
    Json read_project(const std::string& project_id) const;
    void append_to_project(const std::string& project_id, const std::string& list, const std::string& value);
    std::mutex& project_mutex(const std::string& project_id);
    void require_dataset_in_project(const std::string& project_id, const std::string& dataset_id) const;
    std::string store_dataset(const std::string& project_id, const geodata::GeoDataset& ds, const Json& extra);
    embed::EmbeddingProvider& provider(const std::string& provider_id) const;
    geodata::FocusArea focus_area(const std::string& project_id, const std::string& name) const;
    geometry::LayerGeometry truth_geometry(const Json& body, const projection::AlbersParams& albers) const;
    geodata::GeoDataset dataset_for_layers(const std::vector<std::string>& layer_ids) const;

    ServiceConfig config_;
    std::unique_ptr<embed::EmbeddingCache> cache_;
    std::unique_ptr<depositmodel::ModelStore> models_;
    std::unique_ptr<JobRunner> jobs_;
    std::map<std::string, std::shared_ptr<embed::EmbeddingProvider>> providers_;
    std::shared_ptr<depositmodel::LlmProvider> llm_;

    mutable std::mutex datasets_mutex_;
    mutable std::map<std::string, geodata::GeoDataset> dataset_cache_;
    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> project_locks_;
    std::mutex requests_mutex_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;
Json error_body(ErrorCode code, const std::string& message);

}  // namespace lithoquery::service
