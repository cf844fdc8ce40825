#pragma once

#include "lithoquery/projection.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lithoquery::service {

struct RemoteProviderEntry {
    std::string endpoint;
    std::string model;
    std::size_t dims = 0;
};

/// Settings read from a `key = value` file. Every key can be overridden by an
/// environment variable named LITHOQUERY_ followed by the upper-cased key with
/// dots written as double underscores (albers.radius -> LITHOQUERY_ALBERS__RADIUS).
struct ServiceConfig {
    std::filesystem::path data_dir = "lithoquery-data";
    std::string default_provider = "reference";
    std::size_t embed_batch_size = 64;
    std::size_t reference_dims = 256;
    projection::AlbersParams albers;
    double default_tau = 0.2;
    double default_r1 = 500.0;
    double default_r2 = 500.0;
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    unsigned job_threads = 2;
    std::vector<std::filesystem::path> models_dirs;
    std::map<std::string, RemoteProviderEntry> providers;  // provider.<id>.endpoint|model|dims
    std::string llm_endpoint;

    /// Applies one setting; throws Error(config) for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
};

inline constexpr const char* kEnvPrefix = "LITHOQUERY_";

/// Environment variable name for a config key.
std::string env_name(const std::string& key);

/// Defaults, then `file` (if given), then environment overrides.
ServiceConfig load_config(const std::optional<std::filesystem::path>& file);
void apply_file(ServiceConfig& config, const std::filesystem::path& file);
void apply_environment(ServiceConfig& config);

/// Keys accepted by ServiceConfig::set, excluding provider.* entries.
const std::vector<std::string>& documented_keys();

}  // namespace lithoquery::service
