#pragma once

#include "nbmvc/protocol.hpp"

#include <memory>
#include <mutex>
#include <string>

namespace nbmvc {

struct HttpReply {
    unsigned status = 200;
    Json body;
};

/// The REST part, without sockets:
///   GET /api/domains, GET|POST /api/projects, GET|DELETE /api/projects/{id},
///   GET /api/projects/{id}/code.
/// `disk` serialises access to the workspace with the hub.
HttpReply handle_api(Workspace& workspace, std::mutex& disk, const std::string& method, const std::string& target,
                     const std::string& body);

struct ServerOptions {
    std::string address = "127.0.0.1";
    /// 0 picks a free port; see Server::port().
    unsigned short port = 8080;
    HubOptions hub;
    std::chrono::milliseconds sweep_interval = std::chrono::seconds(30);
};

/// HTTP on /api/..., the session channel as a WebSocket on /ws. One thread
/// per connection, so a connection's messages are handled in order.
class Server {
public:
    Server(Workspace& workspace, ServerOptions options = {});
    ~Server();

    unsigned short port() const { return port_; }
    ProtocolHub& hub() { return hub_; }

    /// Accepts connections until stop().
    void run();
    /// Safe from any thread; open sessions are flushed.
    void stop();

private:
    struct Impl;

    ProtocolHub hub_;
    std::unique_ptr<Impl> impl_;
    unsigned short port_ = 0;
};

} // namespace nbmvc
