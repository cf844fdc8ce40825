#include "lithoquery/service/config.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

extern char** environ;

namespace lithoquery::service {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
        throw Error(ErrorCode::config, "config " + key + ": '" + v + "' is not a number");
    return out;
}

long long to_int(const std::string& key, const std::string& v, long long lo, long long hi) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || out < lo || out > hi)
        throw Error(ErrorCode::config, "config " + key + ": '" + v + "' is not an integer in [" + std::to_string(lo) +
                                           ", " + std::to_string(hi) + "]");
    return out;
}

}  // namespace

const std::vector<std::string>& documented_keys() {
    static const std::vector<std::string> keys{
        "data_dir",         "default_provider",         "embed_batch_size",         "reference_dims",
        "albers.standard_parallel_1", "albers.standard_parallel_2", "albers.latitude_of_origin",
        "albers.central_meridian",    "albers.radius",   "default_tau", "default_r1", "default_r2",
        "bind_address",     "port",                     "job_threads",              "models_dir",
        "llm.endpoint"};
    return keys;
}

void ServiceConfig::set(const std::string& key, const std::string& raw) {
    const auto value = trim(raw);
    if (key == "data_dir") data_dir = value;
    else if (key == "default_provider") default_provider = value;
    else if (key == "embed_batch_size") embed_batch_size = static_cast<std::size_t>(to_int(key, value, 1, 1 << 20));
    else if (key == "reference_dims") reference_dims = static_cast<std::size_t>(to_int(key, value, 1, 1 << 20));
    else if (key == "albers.standard_parallel_1") albers.standard_parallel_1 = to_double(key, value);
    else if (key == "albers.standard_parallel_2") albers.standard_parallel_2 = to_double(key, value);
    else if (key == "albers.latitude_of_origin") albers.latitude_of_origin = to_double(key, value);
    else if (key == "albers.central_meridian") albers.central_meridian = to_double(key, value);
    else if (key == "albers.radius") albers.radius = to_double(key, value);
    else if (key == "default_tau") {
        default_tau = to_double(key, value);
        if (!(default_tau > 0.0 && default_tau <= 1.0)) throw Error(ErrorCode::config, "default_tau must be in (0, 1]");
    } else if (key == "default_r1") {
        default_r1 = to_double(key, value);
        if (default_r1 < 0) throw Error(ErrorCode::config, "default_r1 must be non-negative");
    } else if (key == "default_r2") {
        default_r2 = to_double(key, value);
        if (default_r2 < 0) throw Error(ErrorCode::config, "default_r2 must be non-negative");
    } else if (key == "bind_address") bind_address = value;
    else if (key == "port") port = static_cast<int>(to_int(key, value, 0, 65535));
    else if (key == "job_threads") job_threads = static_cast<unsigned>(to_int(key, value, 1, 256));
    else if (key == "models_dir") {
        models_dirs.clear();
        std::size_t start = 0;
        while (start <= value.size()) {
            auto end = value.find(':', start);
            if (end == std::string::npos) end = value.size();
            if (auto part = trim(value.substr(start, end - start)); !part.empty()) models_dirs.emplace_back(part);
            start = end + 1;
        }
    } else if (key == "llm.endpoint") llm_endpoint = value;
    else if (key.rfind("provider.", 0) == 0) {
        const auto rest = key.substr(9);
        const auto dot = rest.rfind('.');
        if (dot == std::string::npos || dot == 0) throw Error(ErrorCode::config, "malformed provider key '" + key + "'");
        const auto id = rest.substr(0, dot);
        const auto field = rest.substr(dot + 1);
        auto& entry = providers[id];
        if (field == "endpoint") entry.endpoint = value;
        else if (field == "model") entry.model = value;
        else if (field == "dims") entry.dims = static_cast<std::size_t>(to_int(key, value, 1, 1 << 20));
        else throw Error(ErrorCode::config, "unknown provider field '" + field + "'");
    } else {
        throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    }
}

std::string env_name(const std::string& key) {
    std::string out = kEnvPrefix;
    for (char c : key) {
        if (c == '.') out += "__";
        else out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

void apply_file(ServiceConfig& config, const std::filesystem::path& file) {
    const auto text = io::read_text(file);
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const auto line = trim(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::config, file.string() + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(ErrorCode::config, file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_environment(ServiceConfig& config) {
    for (const auto& key : documented_keys())
        if (const char* v = std::getenv(env_name(key).c_str())) config.set(key, v);
    // provider.<id>.<field> entries: LITHOQUERY_PROVIDER__<ID>__<FIELD>, id lower-cased.
    const std::string prefix = std::string(kEnvPrefix) + "PROVIDER__";
    for (char** e = environ; e && *e; ++e) {
        std::string_view entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        auto name = std::string(entry.substr(prefix.size(), eq - prefix.size()));
        const auto sep = name.rfind("__");
        if (sep == std::string::npos) continue;
        std::string id = name.substr(0, sep);
        std::string field = name.substr(sep + 2);
        std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::tolower(c); });
        std::transform(field.begin(), field.end(), field.begin(), [](unsigned char c) { return std::tolower(c); });
        config.set("provider." + id + "." + field, std::string(entry.substr(eq + 1)));
    }
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& file) {
    ServiceConfig config;
    if (file) apply_file(config, *file);
    apply_environment(config);
    return config;
}

}  // namespace lithoquery::service
