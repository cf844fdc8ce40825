#pragma once

#include "lithoquery/service/workspace.hpp"

#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace lithoquery::service {

struct Route {
    const char* method;
    const char* path;  // {name} marks a path parameter
};

/// Every endpoint the server answers.
const std::vector<Route>& routes();

/// HTTP/1.1 front end over a Workspace. Errors are answered as
/// {"error": {"code", "message"}} with a matching status. Mutation requests
/// replay their first response when they carry a "request_id" body member
/// or an Idempotency-Key header.
class Server {
public:
    explicit Server(Workspace& workspace);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds without serving; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves on the bound socket until stop().
    void listen();
    /// bind + listen on a background thread.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace lithoquery::service
