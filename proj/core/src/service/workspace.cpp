#include "lithoquery/service/workspace.hpp"

#include "lithoquery/contact.hpp"
#include "lithoquery/csv.hpp"
#include "lithoquery/error.hpp"
#include "lithoquery/evaluate.hpp"
#include "lithoquery/geojson.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/io.hpp"

#include "../http_url.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <random>
#include <set>

namespace lithoquery::service {

namespace fs = std::filesystem;

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::input:
        case ErrorCode::config:
        case ErrorCode::parse:
        case ErrorCode::shape:
        case ErrorCode::validation: return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::state: return 409;
        case ErrorCode::ingest:
        case ErrorCode::geometry:
        case ErrorCode::undefined_similarity: return 422;
        case ErrorCode::provider: return 502;
        case ErrorCode::cache:
        case ErrorCode::io: return 500;
    }
    return 500;
}

Json error_body(ErrorCode code, const std::string& message) {
    return Json{{"error", {{"code", to_string(code)}, {"message", message}}}};
}

namespace {

void check_id(const std::string& id, const char* what) {
    const bool ok = !id.empty() && id.size() <= 128 && id.front() != '.' &&
                    std::all_of(id.begin(), id.end(), [](unsigned char c) {
                        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                    });
    if (!ok) throw Error(ErrorCode::input, std::string("invalid ") + what + " id '" + id + "'");
}

// Typed accessors for request bodies.
std::optional<std::string> opt_string(const Json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || body[key].is_null()) return std::nullopt;
    if (!body[key].is_string()) throw Error(ErrorCode::input, std::string("'") + key + "' must be a string");
    return body[key].get<std::string>();
}

std::string req_string(const Json& body, const char* key) {
    auto v = opt_string(body, key);
    if (!v || v->empty()) throw Error(ErrorCode::input, std::string("'") + key + "' is required");
    return *v;
}

std::optional<double> opt_number(const Json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || body[key].is_null()) return std::nullopt;
    if (!body[key].is_number()) throw Error(ErrorCode::input, std::string("'") + key + "' must be a number");
    const double v = body[key].get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::input, std::string("'") + key + "' must be finite");
    return v;
}

std::optional<bool> opt_bool(const Json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || body[key].is_null()) return std::nullopt;
    if (!body[key].is_boolean()) throw Error(ErrorCode::input, std::string("'") + key + "' must be a boolean");
    return body[key].get<bool>();
}

std::vector<std::string> string_list(const Json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || body[key].is_null()) return {};
    const auto& v = body[key];
    if (v.is_string()) {
        std::vector<std::string> out;
        std::string s = v.get<std::string>();
        std::size_t start = 0;
        while (start <= s.size()) {
            auto end = s.find(',', start);
            if (end == std::string::npos) end = s.size();
            if (end > start) out.push_back(s.substr(start, end - start));
            start = end + 1;
        }
        return out;
    }
    if (!v.is_array()) throw Error(ErrorCode::input, std::string("'") + key + "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw Error(ErrorCode::input, std::string("'") + key + "' must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::vector<double> number_list(const Json& v, const std::string& key) {
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::input, "'" + key + "' must be a non-empty list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw Error(ErrorCode::input, "'" + key + "' must be a non-empty list of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

Json albers_json(const projection::AlbersParams& a) {
    return Json{{"standard_parallel_1", a.standard_parallel_1},
                {"standard_parallel_2", a.standard_parallel_2},
                {"latitude_of_origin", a.latitude_of_origin},
                {"central_meridian", a.central_meridian},
                {"radius", a.radius}};
}

projection::AlbersParams albers_from_json(const Json& j) {
    return {j.at("standard_parallel_1").get<double>(), j.at("standard_parallel_2").get<double>(),
            j.at("latitude_of_origin").get<double>(), j.at("central_meridian").get<double>(),
            j.at("radius").get<double>()};
}

Json read_json(const fs::path& p) { return geojson::parse(io::read_text(p), p.string()); }

std::string random_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    thread_local std::mt19937_64 rng(std::random_device{}());
    return std::to_string(rng()) + "-" + std::to_string(++counter);
}

/// Writes every file into a temporary sibling directory and renames it into
/// place. Returns false if `target` already existed (the new copy is dropped).
bool write_dir_atomic(const fs::path& target, const std::vector<std::pair<std::string, std::string>>& files) {
    if (fs::exists(target)) return false;
    fs::create_directories(target.parent_path());
    const auto tmp = target.parent_path() / (".tmp-" + target.filename().string() + "-" + random_suffix());
    fs::create_directories(tmp);
    try {
        for (const auto& [name, content] : files) io::write_atomic(tmp / name, content);
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) {
            fs::remove_all(tmp);
            if (fs::exists(target)) return false;
            throw Error(ErrorCode::io, "cannot create " + target.string() + ": " + ec.message());
        }
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
    return true;
}

std::string fetch_url(const std::string& url) {
    const auto target = detail::split_url(url);
    httplib::Client client(target.origin);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    auto path = target.base_path.empty() ? std::string("/") : target.base_path;
    auto res = client.Get(path);
    if (!res) throw Error(ErrorCode::ingest, "download of " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::ingest, "download of " + url + " answered HTTP " + std::to_string(res->status));
    return res->body;
}

std::string fetch_verified(const std::string& url, const std::optional<std::string>& sha256) {
    if (!sha256 || sha256->size() != 64)
        throw Error(ErrorCode::input, "URL ingest of " + url + " needs a 64-digit sha256 checksum");
    auto body = fetch_url(url);
    std::string expected = *sha256;
    std::transform(expected.begin(), expected.end(), expected.begin(), [](unsigned char c) { return std::tolower(c); });
    if (sha256_hex(body) != expected)
        throw Error(ErrorCode::ingest, "checksum mismatch for " + url + ": got " + sha256_hex(body));
    return body;
}

Json histogram_json(const std::vector<evidence::HistogramBin>& bins) {
    Json out = Json::array();
    for (const auto& b : bins) out.push_back({{"low", b.low}, {"high", b.high}, {"count", b.count}});
    return out;
}

Json metrics_json(const evaluate::AreaMetrics& m) {
    return Json{{"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1},
                {"iou", m.iou},
                {"empty_prediction", m.empty_prediction},
                {"pred_area", m.pred_area},
                {"truth_area", m.truth_area},
                {"intersection_area", m.intersection_area}};
}

}  // namespace

Workspace::Workspace(ServiceConfig config) : config_(std::move(config)) {
    fs::create_directories(config_.data_dir);
    cache_ = std::make_unique<embed::EmbeddingCache>(config_.data_dir / "cache" / "embeddings");
    models_ = std::make_unique<depositmodel::ModelStore>(config_.data_dir / "deposit-models", config_.models_dirs);
    jobs_ = std::make_unique<JobRunner>(config_.data_dir / "jobs", config_.job_threads);
    register_provider(std::make_shared<embed::ReferenceProvider>(config_.reference_dims));
    for (const auto& [id, entry] : config_.providers)
        register_provider(std::make_shared<embed::RemoteProvider>(
            embed::RemoteProviderConfig{id, entry.endpoint, entry.model, entry.dims}));
    if (!config_.llm_endpoint.empty()) llm_ = std::make_shared<depositmodel::RemoteLlmProvider>(config_.llm_endpoint);
}

Workspace::~Workspace() = default;

void Workspace::register_provider(std::shared_ptr<embed::EmbeddingProvider> provider) {
    providers_[provider->provider_id()] = std::move(provider);
}

void Workspace::set_llm(std::shared_ptr<depositmodel::LlmProvider> llm) { llm_ = std::move(llm); }

embed::EmbeddingProvider& Workspace::provider(const std::string& provider_id) const {
    auto it = providers_.find(provider_id);
    if (it == providers_.end()) throw Error(ErrorCode::input, "unknown embedding provider '" + provider_id + "'");
    return *it->second;
}

fs::path Workspace::project_dir(const std::string& project_id) const {
    check_id(project_id, "project");
    return config_.data_dir / "projects" / project_id;
}

fs::path Workspace::dataset_dir(const std::string& dataset_id) const {
    check_id(dataset_id, "dataset");
    return config_.data_dir / "datasets" / dataset_id;
}

fs::path Workspace::layer_dir(const std::string& layer_id) const {
    check_id(layer_id, "layer");
    return config_.data_dir / "layers" / layer_id;
}

std::mutex& Workspace::project_mutex(const std::string& project_id) {
    std::lock_guard lock(locks_mutex_);
    auto& m = project_locks_[project_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

// ---------------------------------------------------------------- projects

Json Workspace::create_project(const Json& body) {
    const auto name = opt_string(body, "name").value_or("");
    std::string id;
    if (auto given = opt_string(body, "project_id")) id = *given;
    else id = stable_id("pj-", name + '\x1f' + io::utc_timestamp() + '\x1f' + random_suffix());
    check_id(id, "project");
    const auto dir = project_dir(id);
    Json project{{"project_id", id},
                 {"name", name.empty() ? id : name},
                 {"created_at", io::utc_timestamp()},
                 {"config",
                  {{"default_provider", config_.default_provider},
                   {"default_tau", config_.default_tau},
                   {"default_r1", config_.default_r1},
                   {"default_r2", config_.default_r2},
                   {"albers", albers_json(config_.albers)}}},
                 {"datasets", Json::array()},
                 {"layers", Json::array()},
                 {"focus_areas", Json::array()},
                 {"results", Json::array()}};
    std::lock_guard lock(project_mutex(id));
    if (fs::exists(dir / "project.json")) throw Error(ErrorCode::state, "project " + id + " already exists");
    io::write_atomic(dir / "project.json", project.dump(2));
    return project;
}

void Workspace::ensure_project(const std::string& project_id) {
    if (fs::exists(project_dir(project_id) / "project.json")) return;
    try {
        create_project(Json{{"project_id", project_id}});
    } catch (const Error& e) {
        if (e.code() != ErrorCode::state) throw;
    }
}

Json Workspace::read_project(const std::string& project_id) const {
    const auto file = project_dir(project_id) / "project.json";
    if (!fs::exists(file)) throw Error(ErrorCode::not_found, "no project " + project_id);
    return read_json(file);
}

Json Workspace::get_project(const std::string& project_id) const { return read_project(project_id); }

void Workspace::append_to_project(const std::string& project_id, const std::string& list, const std::string& value) {
    std::lock_guard lock(project_mutex(project_id));
    auto project = read_project(project_id);
    auto& arr = project[list];
    if (std::find(arr.begin(), arr.end(), Json(value)) != arr.end()) return;
    arr.push_back(value);
    io::write_atomic(project_dir(project_id) / "project.json", project.dump(2));
}

void Workspace::require_dataset_in_project(const std::string& project_id, const std::string& dataset_id) const {
    const auto project = read_project(project_id);
    const auto& list = project["datasets"];
    if (std::find(list.begin(), list.end(), Json(dataset_id)) == list.end())
        throw Error(ErrorCode::not_found, "project " + project_id + " has no dataset " + dataset_id);
}

// ---------------------------------------------------------------- datasets

Json Workspace::list_datasets(const std::string& project_id) const {
    const auto project = read_project(project_id);
    Json out = Json::array();
    for (const auto& id : project["datasets"]) {
        const auto file = dataset_dir(id.get<std::string>()) / "manifest.json";
        if (fs::exists(file)) out.push_back(read_json(file));
    }
    return Json{{"project_id", project_id}, {"datasets", out}};
}

geodata::GeoDataset Workspace::dataset(const std::string& dataset_id) const {
    {
        std::lock_guard lock(datasets_mutex_);
        if (auto it = dataset_cache_.find(dataset_id); it != dataset_cache_.end()) return it->second;
    }
    const auto file = dataset_dir(dataset_id) / "records.geojson";
    if (!fs::exists(file)) throw Error(ErrorCode::not_found, "no dataset " + dataset_id);
    auto ds = geodata::from_storage_json(read_json(file));
    std::lock_guard lock(datasets_mutex_);
    return dataset_cache_.emplace(dataset_id, std::move(ds)).first->second;
}

std::string Workspace::store_dataset(const std::string& project_id, const geodata::GeoDataset& ds, const Json& extra) {
    const auto records = geodata::to_storage_json(ds).dump();
    const auto digest = sha256_hex(records);
    const auto dir = dataset_dir(ds.id());
    Json manifest{{"dataset_id", ds.id()},
                  {"crs", geometry::to_string(ds.crs())},
                  {"count", ds.count()},
                  {"content_sha256", digest},
                  {"provenance", ds.metadata().provenance},
                  {"created_at", io::utc_timestamp()}};
    if (ds.crs() == geometry::Crs::albers_projected) manifest["albers"] = albers_json(ds.metadata().albers);
    for (const auto& [k, v] : extra.items()) manifest[k] = v;
    if (!write_dir_atomic(dir, {{"records.geojson", records}, {"manifest.json", manifest.dump(2)}})) {
        const auto existing = read_json(dir / "manifest.json");
        if (existing.value("content_sha256", "") != digest)
            throw Error(ErrorCode::state, "dataset " + ds.id() + " already exists with different content");
    } else {
        std::lock_guard lock(datasets_mutex_);
        dataset_cache_.insert_or_assign(ds.id(), ds);
    }
    append_to_project(project_id, "datasets", ds.id());
    return ds.id();
}

Json Workspace::ingest_dataset(const std::string& project_id, const Json& body, const JobRunner::Progress& progress) {
    read_project(project_id);
    auto report_progress = [&](double p) {
        if (progress) progress(p);
    };

    geodata::IngestConfig cfg;
    if (auto cols = string_list(body, "signature_columns"); !cols.empty()) cfg.signature_columns = cols;
    if (body.contains("key_columns")) cfg.key_columns = string_list(body, "key_columns");
    if (auto j = opt_string(body, "join_column")) cfg.join_column = *j;
    if (auto m = opt_number(body, "min_desc_length")) {
        if (*m < 0) throw Error(ErrorCode::input, "min_desc_length must be non-negative");
        cfg.min_desc_length = static_cast<std::size_t>(*m);
    }

    std::optional<std::string> csv_text;
    std::string provenance;
    if (auto inline_csv = opt_string(body, "csv")) {
        csv_text = *inline_csv;
        provenance = "attributes=inline:" + sha256_hex(*inline_csv).substr(0, 16) + ";";
    } else if (auto p = opt_string(body, "csv_path")) {
        csv_text = io::read_text(*p);
        provenance = "attributes=" + *p + ";";
    } else if (auto u = opt_string(body, "csv_url")) {
        csv_text = fetch_verified(*u, opt_string(body, "csv_sha256"));
        provenance = "attributes=" + *u + ";";
    }

    Json doc;
    if (body.contains("geojson") && body["geojson"].is_object()) {
        doc = body["geojson"];
        provenance += "geometry=inline:" + sha256_hex(doc.dump()).substr(0, 16);
    } else if (auto p = opt_string(body, "geojson_path")) {
        doc = geojson::read_file(*p);
        provenance += "geometry=" + *p;
    } else if (auto u = opt_string(body, "geojson_url")) {
        doc = geojson::parse(fetch_verified(*u, opt_string(body, "geojson_sha256")), *u);
        provenance += "geometry=" + *u;
    } else {
        throw Error(ErrorCode::input, "ingest needs geojson, geojson_path or geojson_url");
    }
    report_progress(0.2);

    auto report = geodata::load_dataset_from_json(csv_text, doc, cfg, provenance);
    auto ds = report.dataset;
    std::vector<std::string> warnings = report.warnings;
    report_progress(0.5);

    if (auto focus = opt_string(body, "focus_area")) ds = geodata::clip_to_focus(ds, focus_area(project_id, *focus));
    if (opt_bool(body, "dissolve").value_or(false)) {
        auto d = geodata::dissolve(ds);
        ds = d.dataset;
        warnings.insert(warnings.end(), d.warnings.begin(), d.warnings.end());
    }
    report_progress(0.7);
    if (opt_bool(body, "project").value_or(true)) ds = geodata::project_dataset(ds, config_.albers);
    if (auto id = opt_string(body, "dataset_id")) {
        check_id(*id, "dataset");
        auto meta = ds.metadata();
        meta.dataset_id = *id;
        ds = ds.with_metadata(std::move(meta));
    }
    report_progress(0.9);
    Json extra{{"dropped", report.dropped}, {"warnings", warnings}};
    store_dataset(project_id, ds, extra);
    return Json{{"dataset_id", ds.id()},
                {"count", ds.count()},
                {"dropped", report.dropped},
                {"crs", geometry::to_string(ds.crs())},
                {"warnings", warnings}};
}

Json Workspace::dissolve_dataset(const std::string& project_id, const Json& body) {
    const auto source = req_string(body, "dataset_id");
    require_dataset_in_project(project_id, source);
    auto report = geodata::dissolve(dataset(source), opt_string(body, "new_id").value_or(""));
    store_dataset(project_id, report.dataset, Json{{"source_dataset_id", source}, {"operation", "dissolve"}});
    return Json{{"dataset_id", report.dataset.id()}, {"count", report.dataset.count()}, {"warnings", report.warnings}};
}

Json Workspace::project_dataset(const std::string& project_id, const Json& body) {
    const auto source = req_string(body, "dataset_id");
    require_dataset_in_project(project_id, source);
    auto ds = geodata::project_dataset(dataset(source), config_.albers, opt_string(body, "new_id").value_or(""));
    store_dataset(project_id, ds, Json{{"source_dataset_id", source}, {"operation", "project"}});
    return Json{{"dataset_id", ds.id()}, {"count", ds.count()}, {"crs", geometry::to_string(ds.crs())}};
}

Json Workspace::clip_dataset(const std::string& project_id, const Json& body) {
    const auto source = req_string(body, "dataset_id");
    require_dataset_in_project(project_id, source);
    const auto focus = focus_area(project_id, req_string(body, "focus_area"));
    auto ds = geodata::clip_to_focus(dataset(source), focus, opt_string(body, "new_id").value_or(""));
    store_dataset(project_id, ds, Json{{"source_dataset_id", source}, {"operation", "clip"}, {"focus_area", focus.name}});
    return Json{{"dataset_id", ds.id()}, {"count", ds.count()}};
}

// ---------------------------------------------------------------- layers

Json Workspace::run_query(const std::string& project_id, const Json& body) {
    const bool has_query = body.contains("query") && !body["query"].is_null();
    const bool has_model = (body.contains("deposit_type") && !body["deposit_type"].is_null()) ||
                           (body.contains("characteristic") && !body["characteristic"].is_null());
    if (has_query == has_model)
        throw Error(ErrorCode::input, "supply either 'query' or 'deposit_type' with 'characteristic'");

    std::string query_text;
    Json origin;
    if (has_query) {
        query_text = req_string(body, "query");
        origin = {{"mode", "custom"}};
    } else {
        const auto type = req_string(body, "deposit_type");
        const auto heading = req_string(body, "characteristic");
        const auto model = models_->get(type);
        if (!model) throw Error(ErrorCode::not_found, "no deposit model '" + type + "'");
        const auto* text = model->characteristic(heading);
        if (!text) throw Error(ErrorCode::not_found, "deposit model '" + type + "' has no characteristic '" + heading + "'");
        query_text = *text;
        origin = {{"mode", "deposit_model"}, {"deposit_type", model->deposit_type}, {"characteristic", heading}};
    }

    const double tau = opt_number(body, "tau").value_or(config_.default_tau);
    if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::input, "tau must be in (0, 1]");
    const int bins = static_cast<int>(opt_number(body, "bins").value_or(10));
    if (bins < 1) throw Error(ErrorCode::input, "bins must be positive");
    const auto provider_id = opt_string(body, "provider_id").value_or(config_.default_provider);
    const auto dataset_id = req_string(body, "dataset_id");
    require_dataset_in_project(project_id, dataset_id);
    const auto ds = dataset(dataset_id);

    auto& prov = provider(provider_id);
    evidence::ScoreOptions options{cache_.get(), config_.embed_batch_size};
    const auto scored = evidence::score_dataset(ds, query_text, prov, options);
    const auto layer = evidence::select_top(scored, tau, ds);
    const auto bins_out = histogram_json(evidence::layer_histogram(scored, bins));

    Json response{{"layer_id", layer.layer_id},
                  {"scored_layer_id", scored.layer_id},
                  {"dataset_id", ds.id()},
                  {"query", query_text},
                  {"tau", tau},
                  {"selected_count", layer.selected.size()},
                  {"eligible_count", scored.eligible()},
                  {"excluded_count", scored.excluded_count},
                  {"histogram", bins_out}};
    for (const auto& [k, v] : origin.items()) response[k] = v;

    const auto dir = layer_dir(layer.layer_id);
    if (!fs::exists(dir)) {
        const auto ranking = evidence::rank_records(scored);
        std::map<geodata::RecordId, std::size_t> rank_of;
        for (std::size_t i = 0; i < ranking.size(); ++i) rank_of[ranking[i]] = i + 1;
        const std::set<geodata::RecordId> selected(layer.selected.begin(), layer.selected.end());

        std::string scores_csv = "record_id,score,rank,selected\n";
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < scored.scores.size(); ++i) {
            const auto& s = scored.scores[i];
            if (i == 0 || s.score < lo) lo = s.score;
            if (i == 0 || s.score > hi) hi = s.score;
            scores_csv += std::to_string(s.record_id) + "," + format_double(s.score) + "," +
                          std::to_string(rank_of[s.record_id]) + "," + (selected.count(s.record_id) ? "1" : "0") + "\n";
        }

        std::vector<Json> features;
        std::map<geodata::RecordId, double> score_of;
        for (const auto& s : scored.scores) score_of[s.record_id] = s.score;
        for (auto id : layer.selected) {
            const auto& rec = ds.record(id);
            Json props{{"score", score_of[id]}, {"rank", rank_of[id]}, {"layer_id", layer.layer_id}, {"record_id", id}};
            for (const auto& [h, v] : rec.attributes) props[h] = v;
            props["full_desc"] = rec.full_desc;
            features.push_back(geojson::make_feature(std::move(props), geodata::to_wgs84(rec.geometry, ds.metadata())));
        }

        Json manifest{{"layer_id", layer.layer_id},
                      {"kind", "evidence"},
                      {"project_id", project_id},
                      {"dataset_id", ds.id()},
                      {"scored_layer_id", scored.layer_id},
                      {"query", query_text},
                      {"origin", origin},
                      {"provider_id", scored.provider_id},
                      {"model_name", scored.model_name},
                      {"tau", tau},
                      {"selected_count", layer.selected.size()},
                      {"eligible_count", scored.eligible()},
                      {"excluded_count", scored.excluded_count},
                      {"score_min", lo},
                      {"score_max", hi},
                      {"crs", geometry::to_string(ds.crs())},
                      {"albers", albers_json(ds.metadata().albers)},
                      {"area", geometry::area(layer.geometry.shape)},
                      {"created_at", scored.created_at}};
        write_dir_atomic(dir, {{"scores.csv", scores_csv},
                               {"native.geojson", geojson::to_geometry(layer.geometry.shape).dump()},
                               {"layer.geojson", geojson::make_collection(std::move(features)).dump()},
                               {"manifest.json", manifest.dump(2)}});
    }
    append_to_project(project_id, "layers", layer.layer_id);
    return response;
}

Json Workspace::layer_manifest(const std::string& layer_id) const {
    const auto file = layer_dir(layer_id) / "manifest.json";
    if (!fs::exists(file)) throw Error(ErrorCode::not_found, "no layer " + layer_id);
    return read_json(file);
}

Json Workspace::layer_geojson(const std::string& layer_id) const {
    layer_manifest(layer_id);
    return read_json(layer_dir(layer_id) / "layer.geojson");
}

evidence::ScoredLayer Workspace::scored_layer(const std::string& layer_id) const {
    const auto manifest = layer_manifest(layer_id);
    if (manifest.value("kind", "") != "evidence")
        throw Error(ErrorCode::state, "layer " + layer_id + " is not a scored evidence layer");
    evidence::ScoredLayer out;
    out.layer_id = manifest["scored_layer_id"].get<std::string>();
    out.dataset_id = manifest["dataset_id"].get<std::string>();
    out.query = manifest["query"].get<std::string>();
    out.provider_id = manifest["provider_id"].get<std::string>();
    out.model_name = manifest["model_name"].get<std::string>();
    out.excluded_count = manifest["excluded_count"].get<std::size_t>();
    out.created_at = manifest.value("created_at", "");
    const auto table = csv::parse(io::read_text(layer_dir(layer_id) / "scores.csv"));
    const auto id_col = *table.column("record_id");
    const auto score_col = *table.column("score");
    for (const auto& row : table.rows) {
        evidence::RecordScore s;
        const auto& id_text = row.fields[id_col];
        const auto& score_text = row.fields[score_col];
        std::from_chars(id_text.data(), id_text.data() + id_text.size(), s.record_id);
        std::from_chars(score_text.data(), score_text.data() + score_text.size(), s.score);
        out.scores.push_back(s);
    }
    return out;
}

geometry::LayerGeometry Workspace::layer_geometry(const std::string& layer_id) const {
    const auto manifest = layer_manifest(layer_id);
    geometry::LayerGeometry g;
    g.crs = geometry::crs_from_string(manifest["crs"].get<std::string>());
    g.shape = geojson::read_multipolygon_trusted(read_json(layer_dir(layer_id) / "native.geojson"));
    return g;
}

Json Workspace::layer_histogram(const std::string& layer_id, int bins) const {
    if (bins < 1) throw Error(ErrorCode::input, "bins must be positive");
    const auto scored = scored_layer(layer_id);
    return Json{{"layer_id", layer_id}, {"bins", histogram_json(evidence::layer_histogram(scored, bins))}};
}

Json Workspace::export_layer(const std::string& layer_id, std::optional<double> score_min,
                             std::optional<double> score_max) const {
    const auto manifest = layer_manifest(layer_id);
    if (manifest.value("kind", "") != "evidence") return layer_geojson(layer_id);

    const auto scored = scored_layer(layer_id);
    const auto ds = dataset(manifest["dataset_id"].get<std::string>());
    const auto ranking = evidence::rank_records(scored);
    std::map<geodata::RecordId, double> score_of;
    for (const auto& s : scored.scores) score_of[s.record_id] = s.score;
    std::vector<Json> features;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const double score = score_of[ranking[i]];
        if (score_min && score < *score_min) continue;
        if (score_max && score > *score_max) continue;
        const auto& rec = ds.record(ranking[i]);
        Json props{{"score", score}, {"rank", i + 1}, {"record_id", rec.record_id}};
        for (const auto& [h, v] : rec.attributes) props[h] = v;
        props["full_desc"] = rec.full_desc;
        features.push_back(geojson::make_feature(std::move(props), geodata::to_wgs84(rec.geometry, ds.metadata())));
    }
    auto doc = geojson::make_collection(std::move(features));
    doc["layer_id"] = layer_id;
    return doc;
}

// ---------------------------------------------------------------- contact and evaluation

Json Workspace::derive_contact(const std::string& project_id, const Json& body) {
    read_project(project_id);
    const auto ids = string_list(body, "layer_ids");
    if (ids.size() < 2) throw Error(ErrorCode::input, "contact needs at least two layer_ids");
    contact::ContactParams params;
    params.r1 = opt_number(body, "r1").value_or(config_.default_r1);
    params.r2 = opt_number(body, "r2").value_or(config_.default_r2);
    params.arc_segments = static_cast<int>(opt_number(body, "arc_segments").value_or(geometry::kDefaultArcSegments));
    params.validate();

    std::vector<geometry::LayerGeometry> inputs;
    for (const auto& id : ids) inputs.push_back(layer_geometry(id));
    auto derived = contact::find_contact(inputs, params, ids);
    const auto first = layer_manifest(ids.front());
    const auto albers = albers_from_json(first["albers"]);
    const double area = geometry::area(derived.geometry.shape);

    const auto dir = layer_dir(derived.layer_id);
    if (!fs::exists(dir)) {
        geodata::GeoDataset::Metadata meta;
        meta.crs = derived.geometry.crs;
        meta.albers = albers;
        auto wgs = geodata::to_wgs84(derived.geometry.shape, meta);
        Json props{{"layer_id", derived.layer_id}, {"kind", "contact"}, {"r1", params.r1}, {"r2", params.r2}};
        std::vector<Json> features;
        if (!geometry::is_empty(wgs)) features.push_back(geojson::make_feature(props, wgs));
        Json manifest{{"layer_id", derived.layer_id},
                      {"kind", "contact"},
                      {"project_id", project_id},
                      {"input_layer_ids", ids},
                      {"dataset_id", first.value("dataset_id", "")},
                      {"r1", params.r1},
                      {"r2", params.r2},
                      {"arc_segments", params.arc_segments},
                      {"crs", geometry::to_string(derived.geometry.crs)},
                      {"albers", albers_json(albers)},
                      {"area", area},
                      {"created_at", io::utc_timestamp()}};
        write_dir_atomic(dir, {{"native.geojson", geojson::to_geometry(derived.geometry.shape).dump()},
                               {"layer.geojson", geojson::make_collection(std::move(features)).dump()},
                               {"manifest.json", manifest.dump(2)}});
    }
    append_to_project(project_id, "layers", derived.layer_id);
    return Json{{"layer_id", derived.layer_id},
                {"input_layer_ids", ids},
                {"r1", params.r1},
                {"r2", params.r2},
                {"area", area},
                {"empty", geometry::is_empty(derived.geometry.shape)}};
}

geodata::GeoDataset Workspace::dataset_for_layers(const std::vector<std::string>& layer_ids) const {
    std::string dataset_id;
    for (const auto& id : layer_ids) {
        const auto m = layer_manifest(id);
        if (m.value("kind", "") != "evidence") throw Error(ErrorCode::state, "layer " + id + " is not an evidence layer");
        const auto ds = m["dataset_id"].get<std::string>();
        if (dataset_id.empty()) dataset_id = ds;
        else if (dataset_id != ds) throw Error(ErrorCode::state, "layers come from different datasets");
    }
    if (dataset_id.empty()) throw Error(ErrorCode::input, "no layer_ids given");
    return dataset(dataset_id);
}

Json Workspace::evaluate_sites(const std::string& project_id, const Json& body) {
    read_project(project_id);
    const auto ids = string_list(body, "layer_ids");
    const auto ds = dataset_for_layers(ids);

    geodata::SitesReport sites;
    if (body.contains("sites") && body["sites"].is_object()) sites = geodata::parse_sites(body["sites"].dump(), "sites");
    else if (auto text = opt_string(body, "sites")) sites = geodata::parse_sites(*text, "sites");
    else if (auto path = opt_string(body, "sites_path")) sites = geodata::load_sites(*path);
    else throw Error(ErrorCode::input, "evaluation needs sites or sites_path");

    std::vector<double> buffers{0.0};
    if (body.contains("buffer_m")) buffers = number_list(body["buffer_m"], "buffer_m");
    const int trials = static_cast<int>(opt_number(body, "trials").value_or(10));
    const auto seed = static_cast<std::uint64_t>(opt_number(body, "seed").value_or(0));
    const bool greedy = opt_bool(body, "greedy_oracle").value_or(false);

    std::vector<std::vector<geodata::RecordId>> rankings;
    for (const auto& id : ids) rankings.push_back(evidence::rank_records(scored_layer(id)));

    Json curves = Json::array();
    for (double b : buffers) {
        const evaluate::SiteCoverage coverage(ds, sites.sites, b);
        const auto method = evaluate::union_recall_curve(rankings, coverage);
        const auto base = evaluate::baseline_curves(ds, coverage, trials, seed, greedy);
        curves.push_back({{"buffer_m", b},
                          {"method", method.recall},
                          {"random_mean", base.random_mean.recall},
                          {"random_std", base.random_std.recall},
                          {"oracle", base.oracle.recall},
                          {"selected_counts", method.selected_counts}});
    }
    std::vector<int> cutoffs(100);
    for (int p = 1; p <= 100; ++p) cutoffs[static_cast<std::size_t>(p - 1)] = p;
    Json out{{"dataset_id", ds.id()},
             {"layer_ids", ids},
             {"site_count", sites.sites.size()},
             {"skipped", sites.skipped},
             {"trials", trials},
             {"seed", seed},
             {"greedy_oracle", greedy},
             {"cutoff_percentiles", cutoffs},
             {"curves", curves}};
    const auto result_id = stable_id("rs-", "sites\x1f" + out.dump());
    out["result_id"] = result_id;
    io::write_atomic(config_.data_dir / "results" / (result_id + ".json"), out.dump(2));
    append_to_project(project_id, "results", result_id);
    return out;
}

geometry::LayerGeometry Workspace::truth_geometry(const Json& body, const projection::AlbersParams& albers) const {
    if (auto id = opt_string(body, "truth_layer_id")) return layer_geometry(*id);
    Json doc;
    if (body.contains("truth") && body["truth"].is_object()) doc = body["truth"];
    else if (auto path = opt_string(body, "truth_path")) doc = geojson::read_file(*path);
    else throw Error(ErrorCode::input, "evaluation needs truth, truth_path or truth_layer_id");
    auto shape = geojson::read_area(doc);
    if (opt_string(body, "truth_crs").value_or("geographic-wgs84") == geometry::to_string(geometry::Crs::albers_projected))
        return {shape, geometry::Crs::albers_projected};
    shape = projection::forward(projection::Albers(albers), shape);
    geometry::normalize(shape);
    return {shape, geometry::Crs::albers_projected};
}

Json Workspace::evaluate_tracts(const std::string& project_id, const Json& body) {
    read_project(project_id);
    const auto layer_id = req_string(body, "layer_id");
    const auto manifest = layer_manifest(layer_id);
    const auto pred = layer_geometry(layer_id);
    const auto truth = truth_geometry(body, albers_from_json(manifest["albers"]));
    auto out = metrics_json(evaluate::area_metrics(pred, truth));
    out["layer_id"] = layer_id;
    return out;
}

Json Workspace::grid_search(const std::string& project_id, const Json& body, const JobRunner::Progress& progress) {
    read_project(project_id);
    const auto ids = string_list(body, "layer_ids");
    if (ids.size() < 2) throw Error(ErrorCode::input, "grid search needs at least two layer_ids");
    const auto ds = dataset_for_layers(ids);
    std::vector<evidence::ScoredLayer> layers;
    for (const auto& id : ids) layers.push_back(scored_layer(id));
    const auto truth = truth_geometry(body, ds.metadata().albers);

    evaluate::GridSpec grid;
    if (!body.contains("taus")) throw Error(ErrorCode::input, "'taus' is required");
    const auto& taus = body["taus"];
    if (taus.is_array() && !taus.empty() && taus[0].is_array()) {
        for (const auto& t : taus) grid.taus.push_back(number_list(t, "taus"));
    } else {
        grid.taus.assign(ids.size(), number_list(taus, "taus"));
    }
    if (!body.contains("r1") || !body.contains("r2")) throw Error(ErrorCode::input, "'r1' and 'r2' are required");
    grid.r1 = number_list(body["r1"], "r1");
    grid.r2 = number_list(body["r2"], "r2");
    grid.arc_segments = static_cast<int>(opt_number(body, "arc_segments").value_or(geometry::kDefaultArcSegments));

    evaluate::GridOptions options;
    options.threads = static_cast<unsigned>(opt_number(body, "threads").value_or(0));
    if (progress) options.progress = [&](std::size_t done, std::size_t total) {
        progress(static_cast<double>(done) / static_cast<double>(total));
    };
    const auto result = evaluate::grid_search(ds, layers, truth, grid, options);

    Json surface = Json::array();
    for (const auto& cell : result.surface) {
        Json c{{"taus", cell.taus}, {"r1", cell.r1}, {"r2", cell.r2}, {"selected_area", cell.selected_area}};
        if (cell.metrics) {
            c["precision"] = cell.metrics->precision;
            c["recall"] = cell.metrics->recall;
            c["f1"] = cell.metrics->f1;
            c["iou"] = cell.metrics->iou;
        } else {
            c["error"] = cell.error;
        }
        surface.push_back(std::move(c));
    }
    Json out{{"layer_ids", ids},
             {"dataset_id", ds.id()},
             {"grid", {{"taus", grid.taus}, {"r1", grid.r1}, {"r2", grid.r2}, {"arc_segments", grid.arc_segments}}},
             {"best", nullptr},
             {"surface", surface}};
    if (result.best_index) out["best"] = surface[*result.best_index];
    const auto result_id = stable_id("gs-", out.dump());
    out["result_id"] = result_id;
    io::write_atomic(config_.data_dir / "results" / (result_id + ".json"), out.dump(2));
    append_to_project(project_id, "results", result_id);
    return out;
}

Json Workspace::result(const std::string& result_id) const {
    check_id(result_id, "result");
    const auto file = config_.data_dir / "results" / (result_id + ".json");
    if (!fs::exists(file)) throw Error(ErrorCode::not_found, "no result " + result_id);
    return read_json(file);
}

// ---------------------------------------------------------------- deposit models

namespace {

Json diagnostics_json(const std::vector<depositmodel::Diagnostic>& diags) {
    Json out = Json::array();
    for (const auto& d : diags)
        out.push_back({{"kind", depositmodel::to_string(d.kind)}, {"heading", d.heading}, {"message", d.message}});
    return out;
}

Json model_json(const depositmodel::DepositModel& m) {
    return Json::parse(depositmodel::serialize_model(m));
}

}  // namespace

Json Workspace::list_models() const { return Json{{"deposit_types", models_->list()}}; }

Json Workspace::get_model(const std::string& deposit_type) const {
    const auto model = models_->get(deposit_type);
    if (!model) throw Error(ErrorCode::not_found, "no deposit model '" + deposit_type + "'");
    auto out = model_json(*model);
    out["diagnostics"] = diagnostics_json(depositmodel::validate_model(*model));
    return out;
}

Json Workspace::put_model(const std::string& deposit_type, const Json& body) {
    Json doc = body;
    if (!doc.is_object()) throw Error(ErrorCode::input, "model body must be an object");
    if (!doc.contains("deposit_type")) doc["deposit_type"] = deposit_type;
    doc.erase("request_id");
    doc.erase("diagnostics");
    auto model = depositmodel::parse_model(doc.dump(), "request body");
    if (depositmodel::slug(model.deposit_type) != depositmodel::slug(deposit_type))
        throw Error(ErrorCode::input, "body deposit_type '" + model.deposit_type + "' does not match '" + deposit_type + "'");
    const auto stored = models_->put(std::move(model));
    auto out = model_json(stored);
    out["diagnostics"] = diagnostics_json(depositmodel::validate_model(stored));
    out["versions"] = models_->versions(deposit_type).size();
    return out;
}

Json Workspace::validate_model(const Json& body) const {
    const auto model = depositmodel::parse_model(body.dump(), "request body");
    return Json{{"deposit_type", model.deposit_type}, {"diagnostics", diagnostics_json(depositmodel::validate_model(model))}};
}

Json Workspace::summarize(const Json& body) {
    if (!llm_) throw Error(ErrorCode::config, "no LLM provider configured (llm.endpoint)");
    const auto type = req_string(body, "deposit_type");
    std::string document;
    if (auto d = opt_string(body, "document")) document = *d;
    else if (auto p = opt_string(body, "document_path")) document = io::read_text(*p);
    std::string tmpl = depositmodel::default_prompt_template();
    if (auto t = opt_string(body, "template")) tmpl = *t;
    else if (auto p = opt_string(body, "template_path")) tmpl = io::read_text(*p);
    try {
        const auto result = depositmodel::summarize_document(document, type, *llm_, tmpl);
        return Json{{"model", model_json(result.model)}, {"diagnostics", diagnostics_json(result.diagnostics)}};
    } catch (const depositmodel::CompletionParseError& e) {
        throw Error(ErrorCode::parse, std::string(e.what()) + "; raw completion: " + e.completion());
    }
}

// ---------------------------------------------------------------- focus areas

geodata::FocusArea Workspace::focus_area(const std::string& project_id, const std::string& name) const {
    const auto file = project_dir(project_id) / "focus-areas" / (depositmodel::slug(name) + ".geojson");
    if (!fs::exists(file)) throw Error(ErrorCode::not_found, "project " + project_id + " has no focus area '" + name + "'");
    const auto doc = read_json(file);
    return geodata::focus_from_geojson(doc["properties"].value("name", name), doc);
}

Json Workspace::list_focus_areas(const std::string& project_id) const {
    const auto project = read_project(project_id);
    Json out = Json::array();
    for (const auto& name : project["focus_areas"])
        out.push_back(geodata::focus_to_geojson(focus_area(project_id, name.get<std::string>())));
    return Json{{"project_id", project_id}, {"focus_areas", out}};
}

Json Workspace::add_focus_area(const std::string& project_id, const Json& body) {
    read_project(project_id);
    const auto name = req_string(body, "name");
    if (!body.contains("geometry") || !body["geometry"].is_object())
        throw Error(ErrorCode::input, "'geometry' must be a GeoJSON object");
    const auto focus = geodata::focus_from_geojson(name, body["geometry"]);
    const auto doc = geodata::focus_to_geojson(focus);
    io::write_atomic(project_dir(project_id) / "focus-areas" / (depositmodel::slug(name) + ".geojson"), doc.dump(2));
    append_to_project(project_id, "focus_areas", name);
    return doc;
}

// ---------------------------------------------------------------- jobs and replay

Json Workspace::submit_job(const std::string& kind, const std::string& project_id,
                           std::function<Json(const JobRunner::Progress&)> fn,
                           std::function<std::string(const Json&)> result_ref) {
    const auto id = jobs_->submit(kind, project_id, [fn = std::move(fn), ref = std::move(result_ref)](const auto& progress) {
        auto result = fn(progress);
        return JobOutcome{ref(result), std::move(result)};
    });
    return Json{{"job_id", id}, {"status", "queued"}};
}

Json Workspace::job(const std::string& job_id) const {
    check_id(job_id, "job");
    auto rec = jobs_->get(job_id);
    if (!rec) throw Error(ErrorCode::not_found, "no job " + job_id);
    return rec->to_json();
}

Json Workspace::idempotent(const std::string& project_id, const std::string& request_id, const std::string& operation,
                           const std::function<Json()>& fn) {
    if (request_id.empty()) return fn();
    const auto file = config_.data_dir / "requests" / (project_id.empty() ? "_global" : project_id) /
                      (sha256_hex(request_id).substr(0, 32) + ".json");
    {
        std::lock_guard lock(requests_mutex_);
        if (fs::exists(file)) {
            const auto stored = read_json(file);
            if (stored.value("operation", "") != operation)
                throw Error(ErrorCode::state, "request id '" + request_id + "' was used for a different operation");
            return stored["response"];
        }
    }
    auto response = fn();
    std::lock_guard lock(requests_mutex_);
    if (fs::exists(file)) return read_json(file)["response"];
    io::write_atomic(file, Json{{"request_id", request_id}, {"operation", operation}, {"response", response}}.dump(2));
    return response;
}

}  // namespace lithoquery::service
