#include "lithoquery/service/server.hpp"

#include "lithoquery/error.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>

namespace lithoquery::service {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        auto j = Json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::input, "request body must be a JSON object");
        return j;
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::parse, "request body is not valid JSON (byte " + std::to_string(e.byte) + ")");
    }
}

std::string request_id(const httplib::Request& req, const Json& body) {
    if (body.contains("request_id") && body["request_id"].is_string()) return body["request_id"].get<std::string>();
    return req.get_header_value("Idempotency-Key");
}

std::optional<double> query_number(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    const auto text = req.get_param_value(key);
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v))
        throw Error(ErrorCode::input, std::string("query parameter '") + key + "' is not a number");
    return v;
}

bool wants_wait(const httplib::Request& req, const Json& body) {
    if (body.contains("wait") && body["wait"].is_boolean()) return body["wait"].get<bool>();
    return req.has_param("wait") && req.get_param_value("wait") == "true";
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_json(res, http_status(e.code()), error_body(e.code(), e.what()));
        } catch (const std::exception& e) {
            send_json(res, 500, Json{{"error", {{"code", "internal_error"}, {"message", e.what()}}}});
        }
    };
}

}  // namespace

const std::vector<Route>& routes() {
    static const std::vector<Route> table{
        {"POST", "/projects"},
        {"GET", "/projects/{id}"},
        {"GET", "/projects/{id}/datasets"},
        {"POST", "/projects/{id}/datasets"},
        {"POST", "/projects/{id}/datasets/dissolve"},
        {"POST", "/projects/{id}/datasets/project"},
        {"POST", "/projects/{id}/datasets/clip"},
        {"POST", "/projects/{id}/queries"},
        {"GET", "/layers/{id}"},
        {"GET", "/layers/{id}/geojson"},
        {"GET", "/layers/{id}/histogram"},
        {"GET", "/layers/{id}/export"},
        {"POST", "/projects/{id}/contact"},
        {"POST", "/projects/{id}/evaluate/sites"},
        {"POST", "/projects/{id}/evaluate/tracts"},
        {"POST", "/projects/{id}/gridsearch"},
        {"GET", "/results/{id}"},
        {"GET", "/deposit-models"},
        {"POST", "/deposit-models/validate"},
        {"GET", "/deposit-models/{type}"},
        {"PUT", "/deposit-models/{type}"},
        {"POST", "/deposit-models/{type}/summarize"},
        {"GET", "/projects/{id}/focus-areas"},
        {"POST", "/projects/{id}/focus-areas"},
        {"GET", "/jobs/{id}"},
    };
    return table;
}

struct Server::Impl {
    Workspace& ws;
    httplib::Server http;

    explicit Impl(Workspace& w) : ws(w) { routes(); }

    // Runs a mutation with replay support; `run` produces the response.
    Json mutate(const httplib::Request& req, const Json& body, const std::string& project_id,
                const std::string& operation, const std::function<Json()>& run) {
        return ws.idempotent(project_id, request_id(req, body), operation, run);
    }

    void routes() {
        http.Post("/projects", guarded([this](const auto& req, auto& res) {
            const auto body = parse_body(req);
            send_json(res, 201, mutate(req, body, "", "create_project", [&] { return ws.create_project(body); }));
        }));
        http.Get(R"(/projects/([^/]+))", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.get_project(req.matches[1]));
        }));

        http.Get(R"(/projects/([^/]+)/datasets)", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.list_datasets(req.matches[1]));
        }));
        http.Post(R"(/projects/([^/]+)/datasets)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            ws.get_project(pid);
            if (wants_wait(req, body)) {
                send_json(res, 200, mutate(req, body, pid, "ingest", [&] { return ws.ingest_dataset(pid, body); }));
                return;
            }
            send_json(res, 202, mutate(req, body, pid, "ingest", [&] {
                return ws.submit_job(
                    "ingest", pid, [this, pid, body](const auto& progress) { return ws.ingest_dataset(pid, body, progress); },
                    [](const Json& r) { return r["dataset_id"].get<std::string>(); });
            }));
        }));
        for (const char* op : {"dissolve", "project", "clip"}) {
            http.Post(std::string(R"(/projects/([^/]+)/datasets/)") + op, guarded([this, op = std::string(op)](const auto& req, auto& res) {
                const std::string pid = req.matches[1];
                const auto body = parse_body(req);
                send_json(res, 200, mutate(req, body, pid, op, [&] {
                    if (op == "dissolve") return ws.dissolve_dataset(pid, body);
                    if (op == "project") return ws.project_dataset(pid, body);
                    return ws.clip_dataset(pid, body);
                }));
            }));
        }

        http.Post(R"(/projects/([^/]+)/queries)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 200, mutate(req, body, pid, "query", [&] { return ws.run_query(pid, body); }));
        }));

        http.Get(R"(/layers/([^/]+))", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.layer_manifest(req.matches[1]));
        }));
        http.Get(R"(/layers/([^/]+)/geojson)", guarded([this](const auto& req, auto& res) {
            res.status = 200;
            res.set_content(ws.layer_geojson(req.matches[1]).dump(), "application/geo+json");
        }));
        http.Get(R"(/layers/([^/]+)/histogram)", guarded([this](const auto& req, auto& res) {
            const auto bins = query_number(req, "bins").value_or(10);
            send_json(res, 200, ws.layer_histogram(req.matches[1], static_cast<int>(bins)));
        }));
        http.Get(R"(/layers/([^/]+)/export)", guarded([this](const auto& req, auto& res) {
            const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("geojson");
            if (format != "geojson") throw Error(ErrorCode::input, "unsupported export format '" + format + "'");
            const auto doc = ws.export_layer(req.matches[1], query_number(req, "score_min"), query_number(req, "score_max"));
            res.status = 200;
            res.set_content(doc.dump(), "application/geo+json");
        }));

        http.Post(R"(/projects/([^/]+)/contact)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 200, mutate(req, body, pid, "contact", [&] { return ws.derive_contact(pid, body); }));
        }));
        http.Post(R"(/projects/([^/]+)/evaluate/sites)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 200, mutate(req, body, pid, "evaluate_sites", [&] { return ws.evaluate_sites(pid, body); }));
        }));
        http.Post(R"(/projects/([^/]+)/evaluate/tracts)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 200, mutate(req, body, pid, "evaluate_tracts", [&] { return ws.evaluate_tracts(pid, body); }));
        }));
        http.Post(R"(/projects/([^/]+)/gridsearch)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            ws.get_project(pid);
            if (wants_wait(req, body)) {
                send_json(res, 200, mutate(req, body, pid, "gridsearch", [&] { return ws.grid_search(pid, body); }));
                return;
            }
            send_json(res, 202, mutate(req, body, pid, "gridsearch", [&] {
                return ws.submit_job(
                    "gridsearch", pid, [this, pid, body](const auto& progress) { return ws.grid_search(pid, body, progress); },
                    [](const Json& r) { return r["result_id"].get<std::string>(); });
            }));
        }));
        http.Get(R"(/results/([^/]+))", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.result(req.matches[1]));
        }));

        http.Get("/deposit-models", guarded([this](const auto&, auto& res) { send_json(res, 200, ws.list_models()); }));
        http.Post("/deposit-models/validate", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.validate_model(parse_body(req)));
        }));
        http.Get(R"(/deposit-models/([^/]+))", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.get_model(req.matches[1]));
        }));
        http.Put(R"(/deposit-models/([^/]+))", guarded([this](const auto& req, auto& res) {
            const std::string type = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 200, mutate(req, body, "", "put_model:" + type, [&] { return ws.put_model(type, body); }));
        }));
        http.Post(R"(/deposit-models/([^/]+)/summarize)", guarded([this](const auto& req, auto& res) {
            auto body = parse_body(req);
            body["deposit_type"] = std::string(req.matches[1]);
            send_json(res, 200, ws.summarize(body));
        }));

        http.Get(R"(/projects/([^/]+)/focus-areas)", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.list_focus_areas(req.matches[1]));
        }));
        http.Post(R"(/projects/([^/]+)/focus-areas)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            const auto body = parse_body(req);
            send_json(res, 201, mutate(req, body, pid, "focus_area", [&] { return ws.add_focus_area(pid, body); }));
        }));

        http.Get(R"(/jobs/([^/]+))", guarded([this](const auto& req, auto& res) {
            send_json(res, 200, ws.job(req.matches[1]));
        }));

        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            const auto code = res.status == 404 ? "not_found" : "http_error";
            send_json(res, res.status, Json{{"error", {{"code", code}, {"message", "no such endpoint"}}}});
        });
    }
};

Server::Server(Workspace& workspace) : impl_(std::make_unique<Impl>(workspace)) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::config, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void Server::listen() { impl_->http.listen_after_bind(); }

int Server::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    thread_ = std::thread([this] { listen(); });
    impl_->http.wait_until_ready();
    return bound;
}

void Server::stop() {
    impl_->http.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace lithoquery::service
