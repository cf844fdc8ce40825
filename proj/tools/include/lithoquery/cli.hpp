#pragma once

#include "lithoquery/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lithoquery::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_usage = 2,
    exit_input = 3,
    exit_parse = 4,
    exit_provider = 5,
    exit_state = 6,
};

int exit_code_for(ErrorCode code) noexcept;

/// Runs one invocation; `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Which subcommand covers each service endpoint.
struct Capability {
    const char* method;
    const char* path;
    const char* command;  // space-separated subcommand path
};

const std::vector<Capability>& capabilities();

}  // namespace lithoquery::cli
