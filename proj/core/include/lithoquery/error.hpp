#pragma once

#include <stdexcept>
#include <string>

namespace lithoquery {

// Error classes shared by every module. The CLI maps them to exit codes and
// the service maps them to HTTP statuses.
enum class ErrorCode {
    input,
    config,
    parse,
    ingest,
    state,
    geometry,
    provider,
    cache,
    not_found,
    shape,
    undefined_similarity,
    validation,
    io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lithoquery
