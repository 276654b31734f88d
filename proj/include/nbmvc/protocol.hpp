#pragma once

#include "nbmvc/workspace.hpp"

#include <chrono>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace nbmvc {

/// Message envelope shared by both directions:
///   {"type": ..., "session": id, "seq": n, "body": {...}}
///
/// Client types: open_session {project, profile?}, raw_event {RawEvent},
/// wizard_answers {wizard, answers}, undo, redo, save, export_code {node?}.
/// Server types: snapshot {project, domain, version, undo_depth,
/// redo_depth, tree, scene, palette, wizards}, applied {change_events,
/// view_patch}, rejected {diagnostics}, noop, needs_wizard {spec},
/// code {artifacts}, saved {events}, error {code, message}. Cycle replies
/// (applied, rejected, noop, needs_wizard) also carry steps, version,
/// undo_depth and redo_depth.
///
/// Every client message gets exactly one reply carrying the same seq.
/// open_session starts a session at seq 0; later messages must count up by
/// one, otherwise the reply is an error and the message is dropped.
Json make_message(const std::string& type, const std::string& session, std::uint64_t seq, Json body = Json::object());

struct HubOptions {
    std::chrono::steady_clock::duration idle_timeout = std::chrono::minutes(30);
    std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

/// Sessions by id, independent of any transport. Thread safe; messages for
/// one session are handled one at a time in arrival order.
class ProtocolHub {
public:
    explicit ProtocolHub(Workspace& workspace, HubOptions options = {});
    ~ProtocolHub();

    /// Handles one client message and returns the reply. Never throws.
    Json handle(const Json& message);
    /// Convenience wrapper: parses text, replies with an error on bad JSON.
    std::string handle_text(const std::string& text);

    /// Closes a session, flushing unsaved history to disk.
    void close(const std::string& session);
    /// Closes sessions idle for longer than the timeout; returns their ids.
    std::vector<std::string> expire_idle();
    std::vector<std::string> sessions() const;
    /// Held around every workspace read or write the hub makes.
    std::mutex& disk_mutex() { return disk_; }

private:
    struct Slot;

    Json open(const Json& message);
    Json dispatch(Slot& slot, const std::string& type, std::uint64_t seq, const Json& body);
    std::shared_ptr<Slot> find(const std::string& id) const;

    Workspace& workspace_;
    HubOptions options_;
    mutable std::mutex mutex_;
    std::mutex disk_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::uint64_t next_id_ = 1;
};

/// Replays a script through a fresh session on `project`, the way
/// `nbmvc apply-event` does. One client message per line, without session
/// or seq; a bare RawEvent object stands for a raw_event. Blank lines and
/// lines starting with '#' are skipped. Returns every reply, the snapshot
/// first; a line that is not JSON yields an error reply naming the line.
/// The session is closed, and so saved, at the end.
std::vector<Json> run_script(ProtocolHub& hub, const std::string& project, std::istream& lines,
                             const std::optional<std::string>& profile = {});

} // namespace nbmvc
