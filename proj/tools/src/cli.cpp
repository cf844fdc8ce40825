#include "lithoquery/cli.hpp"

#include "lithoquery/geojson.hpp"
#include "lithoquery/io.hpp"
#include "lithoquery/service/server.hpp"
#include "lithoquery/service/workspace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <iostream>
#include <optional>

namespace lithoquery::cli {

using service::Json;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::input:
        case ErrorCode::config:
        case ErrorCode::validation:
        case ErrorCode::not_found:
        case ErrorCode::shape:
        case ErrorCode::undefined_similarity: return exit_input;
        case ErrorCode::parse:
        case ErrorCode::ingest:
        case ErrorCode::geometry: return exit_parse;
        case ErrorCode::provider: return exit_provider;
        case ErrorCode::state: return exit_state;
        case ErrorCode::cache:
        case ErrorCode::io: return exit_failure;
    }
    return exit_failure;
}

const std::vector<Capability>& capabilities() {
    static const std::vector<Capability> table{
        {"POST", "/projects", "projects create"},
        {"GET", "/projects/{id}", "projects show"},
        {"GET", "/projects/{id}/datasets", "datasets"},
        {"POST", "/projects/{id}/datasets", "ingest"},
        {"POST", "/projects/{id}/datasets/dissolve", "dissolve"},
        {"POST", "/projects/{id}/datasets/project", "project"},
        {"POST", "/projects/{id}/datasets/clip", "clip"},
        {"POST", "/projects/{id}/queries", "query"},
        {"GET", "/layers/{id}", "layer show"},
        {"GET", "/layers/{id}/geojson", "layer geojson"},
        {"GET", "/layers/{id}/histogram", "layer histogram"},
        {"GET", "/layers/{id}/export", "export"},
        {"POST", "/projects/{id}/contact", "contact"},
        {"POST", "/projects/{id}/evaluate/sites", "eval-sites"},
        {"POST", "/projects/{id}/evaluate/tracts", "eval-tracts"},
        {"POST", "/projects/{id}/gridsearch", "gridsearch"},
        {"GET", "/results/{id}", "result"},
        {"GET", "/deposit-models", "models list"},
        {"POST", "/deposit-models/validate", "models validate"},
        {"GET", "/deposit-models/{type}", "models get"},
        {"PUT", "/deposit-models/{type}", "models put"},
        {"POST", "/deposit-models/{type}/summarize", "models summarize"},
        {"GET", "/projects/{id}/focus-areas", "focus-areas list"},
        {"POST", "/projects/{id}/focus-areas", "focus-areas add"},
        {"GET", "/jobs/{id}", "jobs show"},
    };
    return table;
}

namespace {

std::string scalar_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Human-readable rendering: scalars as "key: value", lists of scalars joined,
// lists of objects as one compact line per element.
void print_human(const Json& doc, std::ostream& out, const std::string& indent = "") {
    if (!doc.is_object()) {
        out << indent << doc.dump() << '\n';
        return;
    }
    for (const auto& [k, v] : doc.items()) {
        if (v.is_object()) {
            out << indent << k << ":\n";
            print_human(v, out, indent + "  ");
        } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); })) {
            out << indent << k << ": ";
            for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << scalar_text(v[i]);
            out << '\n';
        } else if (v.is_array()) {
            out << indent << k << ": (" << v.size() << ")\n";
            for (const auto& e : v) out << indent << "  " << e.dump() << '\n';
        } else {
            out << indent << k << ": " << scalar_text(v) << '\n';
        }
    }
}

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const auto part = text.substr(start, end - start);
        if (!part.empty()) {
            double v = 0;
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
            if (ec != std::errc() || p != part.data() + part.size())
                throw Error(ErrorCode::input, flag + ": '" + part + "' is not a number");
            out.push_back(v);
        }
        start = end + 1;
    }
    if (out.empty()) throw Error(ErrorCode::input, flag + " needs at least one number");
    return out;
}

Json read_json_file(const std::string& path) { return geojson::read_file(path); }

// Model files are parsed from raw text first so duplicate headings, which a
// JSON object would silently collapse, are reported against the file.
Json read_model_file(const std::string& path) {
    depositmodel::parse_model(io::read_text(path), path);
    return read_json_file(path);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semantic evidence layers from geologic map polygons", "lithoquery"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string data_dir;
    std::string project = "default";
    std::string config_path;
    bool as_json = false;
    std::uint64_t seed = 0;
    app.add_option("--data-dir", data_dir, "Project store directory (overrides data_dir)");
    app.add_option("--project", project, "Project id")->capture_default_str();
    app.add_option("--config", config_path, "key = value config file; explicit flags win")->check(CLI::ExistingFile);
    app.add_flag("--json", as_json, "Print machine-readable JSON");
    app.add_option("--seed", seed, "Seed for every randomized step")->capture_default_str();

    // projects
    auto* projects = app.add_subcommand("projects", "Create or show projects");
    projects->require_subcommand(1);
    auto* projects_create = projects->add_subcommand("create", "Create a project");
    std::string project_name;
    projects_create->add_option("--name", project_name, "Display name");
    auto* projects_show = projects->add_subcommand("show", "Show the project manifest");

    // datasets
    auto* datasets = app.add_subcommand("datasets", "List datasets of the project");

    auto* ingest = app.add_subcommand("ingest", "Ingest polygons (GeoJSON) and an optional attribute table (CSV)");
    std::string geojson_path, csv_path, dataset_id, join_column, focus_name, geojson_url, geojson_sha, csv_url, csv_sha;
    std::vector<std::string> signature_columns, key_columns;
    std::optional<std::size_t> min_desc_length;
    bool do_dissolve = false, no_project = false;
    ingest->add_option("--geojson", geojson_path, "Polygon FeatureCollection");
    ingest->add_option("--csv", csv_path, "Attribute table joined on --join-column");
    ingest->add_option("--geojson-url", geojson_url, "Download the polygons instead");
    ingest->add_option("--geojson-sha256", geojson_sha, "Checksum of the downloaded polygons");
    ingest->add_option("--csv-url", csv_url, "Download the attribute table instead");
    ingest->add_option("--csv-sha256", csv_sha, "Checksum of the downloaded table");
    ingest->add_option("--dataset-id", dataset_id, "Explicit dataset id");
    ingest->add_option("--signature-columns", signature_columns, "Columns joined into descriptions")->delimiter(',');
    ingest->add_option("--key-columns", key_columns, "Columns defining dissolve groups")->delimiter(',');
    ingest->add_option("--join-column", join_column, "Join column (default UNIT_LINK)");
    ingest->add_option("--min-desc-length", min_desc_length, "Drop descriptions shorter than this");
    ingest->add_option("--focus-area", focus_name, "Clip to a stored focus area");
    ingest->add_flag("--dissolve", do_dissolve, "Dissolve by key columns");
    ingest->add_flag("--no-project", no_project, "Keep geographic coordinates");

    std::string source_dataset, new_id;
    auto* dissolve = app.add_subcommand("dissolve", "Merge records with identical key columns");
    dissolve->add_option("--dataset", source_dataset, "Dataset id")->required();
    dissolve->add_option("--new-id", new_id, "Id of the result");
    auto* project_cmd = app.add_subcommand("project", "Project a dataset to the Albers equal-area CRS");
    project_cmd->add_option("--dataset", source_dataset, "Dataset id")->required();
    project_cmd->add_option("--new-id", new_id, "Id of the result");
    auto* clip = app.add_subcommand("clip", "Clip a dataset to a focus area");
    clip->add_option("--dataset", source_dataset, "Dataset id")->required();
    clip->add_option("--focus-area", focus_name, "Focus area name")->required();
    clip->add_option("--new-id", new_id, "Id of the result");

    // focus areas
    auto* focus = app.add_subcommand("focus-areas", "Manage focus areas");
    focus->require_subcommand(1);
    auto* focus_list = focus->add_subcommand("list", "List focus areas");
    auto* focus_add = focus->add_subcommand("add", "Store a single-ring polygon as a focus area");
    std::string focus_file;
    focus_add->add_option("--name", focus_name, "Name")->required();
    focus_add->add_option("--geojson", focus_file, "Polygon, Feature or one-feature collection")->required()->check(CLI::ExistingFile);

    // query
    auto* query = app.add_subcommand("query", "Score a dataset against a query and keep the top fraction");
    std::string query_text, deposit_type, characteristic, provider_id;
    std::optional<double> tau;
    int bins = 10;
    query->add_option("--dataset", source_dataset, "Dataset id")->required();
    auto* text_opt = query->add_option("--text", query_text, "Custom query text");
    auto* type_opt = query->add_option("--deposit-type", deposit_type, "Deposit model to draw the query from");
    auto* char_opt = query->add_option("--characteristic", characteristic, "Model heading, e.g. \"Rock types\"");
    text_opt->excludes(type_opt)->excludes(char_opt);
    type_opt->needs(char_opt);
    char_opt->needs(type_opt);
    query->add_option("--tau", tau, "Kept fraction in (0, 1]");
    query->add_option("--provider", provider_id, "Embedding provider id");
    query->add_option("--bins", bins, "Histogram bins")->capture_default_str();

    // layers
    auto* layer = app.add_subcommand("layer", "Inspect stored layers");
    layer->require_subcommand(1);
    std::string layer_id;
    auto* layer_show = layer->add_subcommand("show", "Print a layer manifest");
    layer_show->add_option("layer", layer_id, "Layer id")->required();
    auto* layer_geo = layer->add_subcommand("geojson", "Print a layer's GeoJSON");
    layer_geo->add_option("layer", layer_id, "Layer id")->required();
    auto* layer_hist = layer->add_subcommand("histogram", "Score histogram of an evidence layer");
    layer_hist->add_option("layer", layer_id, "Layer id")->required();
    layer_hist->add_option("--bins", bins, "Histogram bins")->capture_default_str();

    auto* export_cmd = app.add_subcommand("export", "Export a layer as WGS84 GeoJSON");
    std::optional<double> score_min, score_max;
    std::string output_path;
    export_cmd->add_option("--layer", layer_id, "Layer id")->required();
    export_cmd->add_option("--score-min", score_min, "Lowest score kept");
    export_cmd->add_option("--score-max", score_max, "Highest score kept");
    export_cmd->add_option("--output,-o", output_path, "Write to a file instead of stdout");

    // contact
    auto* contact = app.add_subcommand("contact", "Buffered intersection of evidence layers");
    std::vector<std::string> layer_ids;
    std::optional<double> r1, r2;
    std::optional<int> arc_segments;
    contact->add_option("--layers", layer_ids, "Layer ids, comma separated")->delimiter(',')->required();
    contact->add_option("--r1", r1, "Buffer applied to each layer (m)");
    contact->add_option("--r2", r2, "Buffer applied to the intersection (m)");
    contact->add_option("--arc-segments", arc_segments, "Segments per quarter circle");

    // evaluation
    auto* eval_sites = app.add_subcommand("eval-sites", "Recall of known sites across score cutoffs");
    std::string sites_path, buffer_list = "0";
    int trials = 10;
    bool greedy = false;
    eval_sites->add_option("--layers", layer_ids, "Evidence layer ids")->delimiter(',')->required();
    eval_sites->add_option("--sites", sites_path, "Sites CSV or GeoJSON")->required()->check(CLI::ExistingFile);
    eval_sites->add_option("--buffer", buffer_list, "Buffer distances in meters, comma separated")->capture_default_str();
    eval_sites->add_option("--trials", trials, "Random baseline trials")->capture_default_str();
    eval_sites->add_flag("--greedy-oracle", greedy, "Greedy marginal-coverage oracle");

    auto* eval_tracts = app.add_subcommand("eval-tracts", "Area precision, recall, F1 and IoU against tracts");
    std::string truth_path, truth_layer, truth_crs;
    eval_tracts->add_option("--pred", layer_id, "Predicted layer id")->required();
    auto* truth_opt = eval_tracts->add_option("--truth", truth_path, "Truth polygons (GeoJSON)");
    auto* truth_layer_opt = eval_tracts->add_option("--truth-layer", truth_layer, "Stored layer used as truth");
    truth_opt->excludes(truth_layer_opt);
    eval_tracts->add_option("--truth-crs", truth_crs, "geographic-wgs84 (default) or albers-conic-projected");

    auto* grid = app.add_subcommand("gridsearch", "Sweep tau, r1 and r2 against truth polygons");
    std::string taus_text, r1_list, r2_list;
    unsigned threads = 0;
    grid->add_option("--layers", layer_ids, "Evidence layer ids")->delimiter(',')->required();
    auto* grid_truth = grid->add_option("--truth", truth_path, "Truth polygons (GeoJSON)");
    auto* grid_truth_layer = grid->add_option("--truth-layer", truth_layer, "Stored layer used as truth");
    grid_truth->excludes(grid_truth_layer);
    grid->add_option("--truth-crs", truth_crs, "geographic-wgs84 (default) or albers-conic-projected");
    grid->add_option("--taus", taus_text, "Comma-separated taus; separate per-layer lists with ';'")->required();
    grid->add_option("--r1", r1_list, "Comma-separated r1 values")->required();
    grid->add_option("--r2", r2_list, "Comma-separated r2 values")->required();
    grid->add_option("--arc-segments", arc_segments, "Segments per quarter circle");
    grid->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::string result_id;
    auto* result_cmd = app.add_subcommand("result", "Print a stored evaluation or grid search result");
    result_cmd->add_option("id", result_id, "Result id")->required();

    // deposit models
    auto* models = app.add_subcommand("models", "Descriptive deposit models");
    models->require_subcommand(1);
    std::string model_file, document_path, template_path, llm_endpoint;
    auto* models_list = models->add_subcommand("list", "List stored deposit types");
    auto* models_get = models->add_subcommand("get", "Print a model");
    models_get->add_option("type", deposit_type, "Deposit type")->required();
    auto* models_put = models->add_subcommand("put", "Store an edited model (keeps the previous version)");
    models_put->add_option("type", deposit_type, "Deposit type")->required();
    models_put->add_option("--file", model_file, "Model JSON")->required()->check(CLI::ExistingFile);
    auto* models_validate = models->add_subcommand("validate", "Check a model file for missing or oversized entries");
    models_validate->add_option("file", model_file, "Model JSON")->required()->check(CLI::ExistingFile);
    auto* models_summarize = models->add_subcommand("summarize", "Distill a document into a model with an LLM");
    models_summarize->add_option("--deposit-type", deposit_type, "Deposit type")->required();
    models_summarize->add_option("--document", document_path, "Plain-text document")->required()->check(CLI::ExistingFile);
    models_summarize->add_option("--template", template_path, "Prompt template")->check(CLI::ExistingFile);
    models_summarize->add_option("--llm-endpoint", llm_endpoint, "LLM endpoint (overrides llm.endpoint)");

    // jobs
    auto* jobs = app.add_subcommand("jobs", "Inspect service jobs");
    jobs->require_subcommand(1);
    std::string job_id;
    auto* jobs_show = jobs->add_subcommand("show", "Print a job record");
    jobs_show->add_option("id", job_id, "Job id")->required();

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string bind_address;
    std::optional<int> port;
    serve->add_option("--bind", bind_address, "Address to listen on");
    serve->add_option("--port", port, "Port (0 picks a free one)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        auto cfg = service::load_config(config_path.empty() ? std::nullopt
                                                            : std::optional<std::filesystem::path>(config_path));
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        if (*models_summarize && !llm_endpoint.empty()) cfg.llm_endpoint = llm_endpoint;
        if (!bind_address.empty()) cfg.bind_address = bind_address;
        if (port) cfg.port = *port;
        service::Workspace ws(cfg);

        auto emit = [&](const Json& doc) {
            if (as_json) out << doc.dump(2) << '\n';
            else print_human(doc, out);
        };
        auto scoped = [&]() -> const std::string& {
            ws.ensure_project(project);
            return project;
        };

        if (*projects_create) {
            Json body{{"project_id", project}};
            if (!project_name.empty()) body["name"] = project_name;
            emit(ws.create_project(body));
        } else if (*projects_show) {
            emit(ws.get_project(project));
        } else if (*datasets) {
            emit(ws.list_datasets(scoped()));
        } else if (*ingest) {
            Json body = Json::object();
            if (!geojson_path.empty()) body["geojson_path"] = geojson_path;
            if (!geojson_url.empty()) body["geojson_url"] = geojson_url;
            if (!geojson_sha.empty()) body["geojson_sha256"] = geojson_sha;
            if (!csv_path.empty()) body["csv_path"] = csv_path;
            if (!csv_url.empty()) body["csv_url"] = csv_url;
            if (!csv_sha.empty()) body["csv_sha256"] = csv_sha;
            if (!dataset_id.empty()) body["dataset_id"] = dataset_id;
            if (!signature_columns.empty()) body["signature_columns"] = signature_columns;
            if (!key_columns.empty()) body["key_columns"] = key_columns;
            if (!join_column.empty()) body["join_column"] = join_column;
            if (min_desc_length) body["min_desc_length"] = *min_desc_length;
            if (!focus_name.empty()) body["focus_area"] = focus_name;
            body["dissolve"] = do_dissolve;
            body["project"] = !no_project;
            emit(ws.ingest_dataset(scoped(), body));
        } else if (*dissolve || *project_cmd || *clip) {
            Json body{{"dataset_id", source_dataset}};
            if (!new_id.empty()) body["new_id"] = new_id;
            if (*clip) body["focus_area"] = focus_name;
            const auto& pid = scoped();
            emit(*dissolve ? ws.dissolve_dataset(pid, body)
                           : *project_cmd ? ws.project_dataset(pid, body) : ws.clip_dataset(pid, body));
        } else if (*focus_list) {
            emit(ws.list_focus_areas(scoped()));
        } else if (*focus_add) {
            emit(ws.add_focus_area(scoped(), Json{{"name", focus_name}, {"geometry", read_json_file(focus_file)}}));
        } else if (*query) {
            Json body{{"dataset_id", source_dataset}, {"bins", bins}};
            if (!query_text.empty()) body["query"] = query_text;
            if (!deposit_type.empty()) {
                body["deposit_type"] = deposit_type;
                body["characteristic"] = characteristic;
            }
            if (tau) body["tau"] = *tau;
            if (!provider_id.empty()) body["provider_id"] = provider_id;
            const auto res = ws.run_query(scoped(), body);
            if (as_json) emit(res);
            else {
                out << res["layer_id"].get<std::string>() << '\n';
                out << "selected " << res["selected_count"] << " of " << res["eligible_count"] << " eligible records ("
                    << res["excluded_count"] << " excluded)\n";
            }
        } else if (*layer_show) {
            emit(ws.layer_manifest(layer_id));
        } else if (*layer_geo) {
            out << ws.layer_geojson(layer_id).dump() << '\n';
        } else if (*layer_hist) {
            emit(ws.layer_histogram(layer_id, bins));
        } else if (*export_cmd) {
            const auto doc = ws.export_layer(layer_id, score_min, score_max);
            if (output_path.empty()) out << doc.dump() << '\n';
            else {
                io::write_atomic(output_path, doc.dump());
                if (!as_json) out << "wrote " << doc["features"].size() << " features to " << output_path << '\n';
                else out << Json{{"output", output_path}, {"features", doc["features"].size()}}.dump(2) << '\n';
            }
        } else if (*contact) {
            Json body{{"layer_ids", layer_ids}};
            if (r1) body["r1"] = *r1;
            if (r2) body["r2"] = *r2;
            if (arc_segments) body["arc_segments"] = *arc_segments;
            emit(ws.derive_contact(scoped(), body));
        } else if (*eval_sites) {
            Json body{{"layer_ids", layer_ids},
                      {"sites_path", sites_path},
                      {"buffer_m", parse_numbers(buffer_list, "--buffer")},
                      {"trials", trials},
                      {"seed", seed},
                      {"greedy_oracle", greedy}};
            emit(ws.evaluate_sites(scoped(), body));
        } else if (*eval_tracts) {
            Json body{{"layer_id", layer_id}};
            if (!truth_path.empty()) body["truth_path"] = truth_path;
            if (!truth_layer.empty()) body["truth_layer_id"] = truth_layer;
            if (!truth_crs.empty()) body["truth_crs"] = truth_crs;
            emit(ws.evaluate_tracts(scoped(), body));
        } else if (*grid) {
            Json taus = Json::array();
            std::size_t start = 0;
            while (start <= taus_text.size()) {
                auto end = taus_text.find(';', start);
                if (end == std::string::npos) end = taus_text.size();
                taus.push_back(parse_numbers(taus_text.substr(start, end - start), "--taus"));
                start = end + 1;
            }
            if (taus.size() == 1) taus = taus[0];
            Json body{{"layer_ids", layer_ids},
                      {"taus", taus},
                      {"r1", parse_numbers(r1_list, "--r1")},
                      {"r2", parse_numbers(r2_list, "--r2")},
                      {"threads", threads}};
            if (!truth_path.empty()) body["truth_path"] = truth_path;
            if (!truth_layer.empty()) body["truth_layer_id"] = truth_layer;
            if (!truth_crs.empty()) body["truth_crs"] = truth_crs;
            if (arc_segments) body["arc_segments"] = *arc_segments;
            const auto res = ws.grid_search(scoped(), body);
            if (as_json) emit(res);
            else {
                out << "result_id: " << res["result_id"].get<std::string>() << '\n';
                out << "cells: " << res["surface"].size() << '\n';
                if (!res["best"].is_null()) {
                    out << "best:\n";
                    print_human(res["best"], out, "  ");
                }
            }
        } else if (*result_cmd) {
            emit(ws.result(result_id));
        } else if (*models_list) {
            emit(ws.list_models());
        } else if (*models_get) {
            emit(ws.get_model(deposit_type));
        } else if (*models_put) {
            emit(ws.put_model(deposit_type, read_model_file(model_file)));
        } else if (*models_validate) {
            emit(ws.validate_model(read_model_file(model_file)));
        } else if (*models_summarize) {
            Json body{{"deposit_type", deposit_type}, {"document_path", document_path}};
            if (!template_path.empty()) body["template_path"] = template_path;
            emit(ws.summarize(body));
        } else if (*jobs_show) {
            emit(ws.job(job_id));
        } else if (*serve) {
            service::Server server(ws);
            const int bound = server.bind(cfg.bind_address, cfg.port);
            err << "listening on " << cfg.bind_address << ":" << bound << std::endl;
            server.listen();
        }
        return exit_ok;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

}  // namespace lithoquery::cli
