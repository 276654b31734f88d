#include "nbmvc/server.hpp"

#include "nbmvc/error.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <set>
#include <sys/socket.h>
#include <thread>

namespace nbmvc {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

unsigned status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::CannotGenerate: return 422;
    case ErrorCode::IoError: return 500;
    default: return 400;
    }
}

HttpReply error_reply(unsigned status, const std::string& code, const std::string& message) {
    return {status, Json{{"code", code}, {"message", message}}};
}

std::vector<std::string> split_path(const std::string& target) {
    auto path = target.substr(0, target.find('?'));
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        auto j = path.find('/', i);
        if (j == std::string::npos)
            j = path.size();
        if (j > i)
            parts.push_back(path.substr(i, j - i));
        i = j + 1;
    }
    return parts;
}

Json domain_json(const std::string& name) {
    auto profile = load_profile(name);
    Json palette = Json::array();
    for (const auto& e : profile.palette)
        palette.push_back(palette_entry_to_json(e));
    return Json{{"name", name}, {"root_kind", profile.root_kind}, {"palette", palette}};
}

} // namespace

HttpReply handle_api(Workspace& workspace, std::mutex& disk, const std::string& method, const std::string& target,
                     const std::string& body) {
    auto parts = split_path(target);
    if (parts.size() < 2 || parts[0] != "api")
        return error_reply(404, "not-found", "no route " + target);
    try {
        std::lock_guard lock(disk);
        if (parts[1] == "domains" && parts.size() == 2) {
            if (method != "GET")
                return error_reply(405, "invalid-argument", "use GET");
            Json out = Json::array();
            for (const char* n : kBuiltinProfiles)
                out.push_back(domain_json(n));
            return {200, out};
        }
        if (parts[1] != "projects")
            return error_reply(404, "not-found", "no route " + target);
        if (parts.size() == 2) {
            if (method == "GET") {
                Json out = Json::array();
                for (const auto& p : workspace.list())
                    out.push_back(project_to_json(p));
                return {200, out};
            }
            if (method == "POST") {
                Json req;
                try {
                    req = Json::parse(body);
                } catch (const nlohmann::json::exception& e) {
                    return error_reply(400, "parse-error", e.what());
                }
                if (!req.is_object() || !req.contains("name") || !req["name"].is_string() ||
                    !req.contains("domain") || !req["domain"].is_string())
                    return error_reply(400, "invalid-argument", "body needs string name and domain");
                return {201, project_to_json(workspace.create(req["name"], req["domain"]))};
            }
            return error_reply(405, "invalid-argument", "use GET or POST");
        }
        const auto& id = parts[2];
        if (parts.size() == 3) {
            if (method == "GET")
                return {200, project_to_json(workspace.info(id))};
            if (method == "DELETE") {
                workspace.remove(id);
                return {204, Json()};
            }
            return error_reply(405, "invalid-argument", "use GET or DELETE");
        }
        if (parts.size() == 4 && parts[3] == "code") {
            if (method != "GET")
                return error_reply(405, "invalid-argument", "use GET");
            try {
                Json arts = Json::array();
                for (const auto& a : workspace.export_code(id))
                    arts.push_back(artifact_to_json(a));
                return {200, Json{{"artifacts", arts}}};
            } catch (const GenerateError& e) {
                Json diags = Json::array();
                for (const auto& d : e.diagnostics())
                    diags.push_back(diagnostic_to_json(d));
                return {422, Json{{"code", "cannot-generate"}, {"message", e.what()}, {"diagnostics", diags}}};
            }
        }
        return error_reply(404, "not-found", "no route " + target);
    } catch (const Error& e) {
        return error_reply(status_for(e.code()), std::string(to_string(e.code())), e.what());
    }
}

struct Server::Impl {
    ServerOptions options;
    Workspace& workspace;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::mutex mutex;
    std::condition_variable wake;
    bool stopping = false;
    std::set<int> sockets;
    int active = 0;

    Impl(Workspace& ws, ServerOptions opts) : options(std::move(opts)), workspace(ws) {}

    void connection(ProtocolHub& hub, tcp::socket socket);
    void websocket_loop(ProtocolHub& hub, tcp::socket socket, const http::request<http::string_body>& req);
};

Server::Server(Workspace& workspace, ServerOptions options)
    : hub_(workspace, options.hub), impl_(std::make_unique<Impl>(workspace, options)) {
    auto& a = impl_->acceptor;
    tcp::endpoint ep(asio::ip::make_address(impl_->options.address), impl_->options.port);
    beast::error_code ec;
    a.open(ep.protocol(), ec);
    if (!ec)
        a.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec)
        a.bind(ep, ec);
    if (!ec)
        a.listen(asio::socket_base::max_listen_connections, ec);
    if (ec)
        fail(ErrorCode::IoError, "cannot listen on " + impl_->options.address + ":" +
                                     std::to_string(impl_->options.port) + ": " + ec.message());
    port_ = a.local_endpoint().port();
}

Server::~Server() {
    stop();
}

void Server::run() {
    std::thread sweeper([this] {
        std::unique_lock lock(impl_->mutex);
        while (!impl_->stopping) {
            impl_->wake.wait_for(lock, impl_->options.sweep_interval);
            if (impl_->stopping)
                break;
            lock.unlock();
            hub_.expire_idle();
            lock.lock();
        }
    });
    for (;;) {
        tcp::socket socket(impl_->io);
        beast::error_code ec;
        impl_->acceptor.accept(socket, ec);
        std::lock_guard lock(impl_->mutex);
        if (impl_->stopping)
            break;
        if (ec)
            continue;
        impl_->sockets.insert(socket.native_handle());
        ++impl_->active;
        std::thread([this, s = std::move(socket)]() mutable {
            impl_->connection(hub_, std::move(s));
            std::lock_guard done(impl_->mutex);
            --impl_->active;
            impl_->wake.notify_all();
        }).detach();
    }
    sweeper.join();
    std::unique_lock lock(impl_->mutex);
    impl_->wake.wait(lock, [this] { return impl_->active == 0; });
}

void Server::stop() {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopping)
        return;
    impl_->stopping = true;
    impl_->wake.notify_all();
    // shutdown(2) wakes blocking accept and read calls in other threads.
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
    for (int fd : impl_->sockets)
        ::shutdown(fd, SHUT_RDWR);
}

void Server::Impl::connection(ProtocolHub& hub, tcp::socket socket) {
    const int fd = socket.native_handle();
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
        http::request<http::string_body> req;
        http::read(socket, buffer, req, ec);
        if (ec)
            break;
        if (websocket::is_upgrade(req)) {
            if (req.target() == "/ws") {
                websocket_loop(hub, std::move(socket), req);
                break;
            }
        }
        auto reply = handle_api(workspace, hub.disk_mutex(), std::string(req.method_string()),
                                std::string(req.target()), req.body());
        http::response<http::string_body> res{static_cast<http::status>(reply.status), req.version()};
        res.set(http::field::server, "nbmvc");
        if (reply.status != 204) {
            res.set(http::field::content_type, "application/json");
            res.body() = reply.body.dump();
        }
        res.keep_alive(req.keep_alive());
        res.prepare_payload();
        http::write(socket, res, ec);
        if (ec || !req.keep_alive())
            break;
    }
    socket.shutdown(tcp::socket::shutdown_both, ec);
    std::lock_guard lock(mutex);
    sockets.erase(fd);
}

void Server::Impl::websocket_loop(ProtocolHub& hub, tcp::socket socket, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    std::vector<std::string> opened;
    beast::error_code ec;
    ws.accept(req, ec);
    while (!ec) {
        beast::flat_buffer buffer;
        ws.read(buffer, ec);
        if (ec)
            break;
        auto reply = hub.handle_text(beast::buffers_to_string(buffer.data()));
        if (reply.find("\"type\":\"snapshot\"") != std::string::npos) {
            auto j = Json::parse(reply);
            opened.push_back(j["session"].get<std::string>());
        }
        ws.text(true);
        ws.write(asio::buffer(reply), ec);
    }
    {
        std::lock_guard lock(mutex);
        sockets.erase(ws.next_layer().native_handle());
    }
    // The channel is gone, so are its sessions.
    for (const auto& id : opened) {
        try {
            hub.close(id);
        } catch (const Error&) {
        }
    }
}

} // namespace nbmvc
