#include "nbmvc/protocol.hpp"

#include "nbmvc/error.hpp"

namespace nbmvc {

struct ProtocolHub::Slot {
    std::mutex mutex;
    OpenProject project;
    std::uint64_t seq = 0;
    std::chrono::steady_clock::time_point last;
    bool closed = false;
};

namespace {

Json error_body(ErrorCode code, const std::string& message) {
    return Json{{"code", std::string(to_string(code))}, {"message", message}};
}

Json diagnostics_json(const std::vector<Diagnostic>& diags) {
    Json out = Json::array();
    for (const auto& d : diags)
        out.push_back(diagnostic_to_json(d));
    return out;
}

Json steps_json(const CycleTrace& t) {
    Json out = Json::array();
    for (int s : t.step_numbers())
        out.push_back(s);
    return out;
}

/// Cycle outcome plus where the session stands afterwards.
Json trace_reply(const Session& s, std::uint64_t seq, const CycleTrace& t) {
    std::string type = "noop";
    Json body = Json::object();
    if (t.wizard) {
        type = "needs_wizard";
        body["spec"] = wizard_to_json(*t.wizard);
    } else if (t.outcome == Outcome::Applied) {
        type = "applied";
        Json changes = Json::array();
        for (const auto& c : t.changes)
            changes.push_back(change_to_json(c));
        body["change_events"] = changes;
        body["view_patch"] = t.patch ? patch_to_json(*t.patch) : Json();
    } else if (t.outcome == Outcome::Rejected) {
        type = "rejected";
        body["diagnostics"] = diagnostics_json(t.diagnostics);
    }
    body["steps"] = steps_json(t);
    body["version"] = s.tree().version();
    body["undo_depth"] = s.undo_stack().cursor();
    body["redo_depth"] = s.undo_stack().size() - s.undo_stack().cursor();
    return make_message(type, s.id(), seq, std::move(body));
}

Json snapshot_body(const OpenProject& op) {
    const auto& s = *op.session;
    Json palette = Json::array();
    for (const auto& e : s.palette())
        palette.push_back(palette_entry_to_json(e));
    Json wizards = Json::array();
    for (const auto& [id, w] : s.profile().wizards)
        wizards.push_back(wizard_to_json(w));
    return Json{{"project", op.project},
                {"domain", s.profile().name},
                {"version", s.tree().version()},
                {"undo_depth", s.undo_stack().cursor()},
                {"redo_depth", s.undo_stack().size() - s.undo_stack().cursor()},
                {"tree", tree_to_json(s.tree())},
                {"scene", scene_to_json(s.scene())},
                {"palette", palette},
                {"wizards", wizards}};
}

} // namespace

Json make_message(const std::string& type, const std::string& session, std::uint64_t seq, Json body) {
    return Json{{"type", type}, {"session", session}, {"seq", seq}, {"body", std::move(body)}};
}

ProtocolHub::ProtocolHub(Workspace& workspace, HubOptions options)
    : workspace_(workspace), options_(std::move(options)) {}

ProtocolHub::~ProtocolHub() {
    for (const auto& id : sessions()) {
        try {
            close(id);
        } catch (...) {
        }
    }
}

std::vector<std::string> ProtocolHub::sessions() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, slot] : slots_)
        out.push_back(id);
    return out;
}

std::shared_ptr<ProtocolHub::Slot> ProtocolHub::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(id);
    return it == slots_.end() ? nullptr : it->second;
}

std::string ProtocolHub::handle_text(const std::string& text) {
    Json message;
    try {
        message = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        return make_message("error", "", 0, error_body(ErrorCode::ParseError, e.what())).dump();
    }
    return handle(message).dump();
}

Json ProtocolHub::handle(const Json& message) {
    std::string session;
    std::uint64_t seq = 0;
    try {
        if (!message.is_object() || !message.contains("type") || !message["type"].is_string())
            fail(ErrorCode::ParseError, "message needs a string \"type\"");
        const auto type = message["type"].get<std::string>();
        if (message.contains("seq")) {
            if (!message["seq"].is_number_unsigned())
                fail(ErrorCode::ParseError, "\"seq\" must be a non-negative integer");
            seq = message["seq"].get<std::uint64_t>();
        }
        if (type == "open_session")
            return open(message);
        if (!message.contains("session") || !message["session"].is_string())
            fail(ErrorCode::ParseError, "message needs a string \"session\"");
        session = message["session"].get<std::string>();
        auto slot = find(session);
        if (!slot)
            fail(ErrorCode::SessionGone, "session " + session + " is not open");
        std::lock_guard lock(slot->mutex);
        if (slot->closed)
            fail(ErrorCode::SessionGone, "session " + session + " is closed");
        if (seq != slot->seq + 1)
            fail(ErrorCode::SequenceGap,
                 "expected seq " + std::to_string(slot->seq + 1) + ", got " + std::to_string(seq));
        slot->seq = seq;
        slot->last = options_.clock();
        const Json body = message.contains("body") ? message["body"] : Json::object();
        if (!body.is_object())
            fail(ErrorCode::ParseError, "\"body\" must be an object");
        return dispatch(*slot, type, seq, body);
    } catch (const Error& e) {
        return make_message("error", session, seq, error_body(e.code(), e.what()));
    } catch (const std::exception& e) {
        return make_message("error", session, seq, error_body(ErrorCode::InvalidArgument, e.what()));
    }
}

Json ProtocolHub::open(const Json& message) {
    const Json body = message.contains("body") ? message["body"] : Json::object();
    if (!body.is_object() || !body.contains("project") || !body["project"].is_string())
        fail(ErrorCode::ParseError, "open_session needs body.project");
    std::optional<std::string> override_name;
    if (body.contains("profile") && !body["profile"].is_null())
        override_name = body["profile"].get<std::string>();

    std::string id;
    {
        std::lock_guard lock(mutex_);
        id = "s" + std::to_string(next_id_++);
    }
    auto slot = std::make_shared<Slot>();
    {
        std::lock_guard disk(disk_);
        slot->project = workspace_.open(body["project"].get<std::string>(), id, override_name);
    }
    slot->last = options_.clock();
    auto reply = make_message("snapshot", id, 0, snapshot_body(slot->project));
    std::lock_guard lock(mutex_);
    slots_[id] = std::move(slot);
    return reply;
}

Json ProtocolHub::dispatch(Slot& slot, const std::string& type, std::uint64_t seq, const Json& body) {
    auto& s = *slot.project.session;
    const auto& id = s.id();
    // A refusal before the session saw the event, reported like a cycle.
    auto refuse = [&](int step, const Error& e) {
        CycleTrace t;
        t.outcome = Outcome::Rejected;
        t.steps.push_back({step, std::string(to_string(e.code())), {}});
        Diagnostic d;
        d.rule = std::string(to_string(e.code()));
        d.message = e.what();
        t.diagnostics.push_back(d);
        return trace_reply(s, seq, t);
    };
    if (type == "raw_event") {
        RawEvent ev;
        try {
            ev = raw_event_from_json(body);
        } catch (const Error& e) {
            return refuse(1, e);
        }
        return trace_reply(s, seq, s.run_cycle(ev));
    }
    if (type == "wizard_answers") {
        if (!body.contains("wizard") || !body["wizard"].is_string())
            fail(ErrorCode::ParseError, "wizard_answers needs body.wizard");
        std::map<std::string, Scalar> answers;
        if (body.contains("answers")) {
            if (!body["answers"].is_object())
                fail(ErrorCode::ParseError, "body.answers must be an object");
            for (const auto& [k, v] : body["answers"].items())
                answers[k] = plain_scalar_from_json(v);
        }
        try {
            return trace_reply(s, seq, s.run_model_event(s.wizard_complete(body["wizard"].get<std::string>(), answers)));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InvalidAnswer)
                throw;
            return refuse(3, e);
        }
    }
    if (type == "undo")
        return trace_reply(s, seq, s.undo());
    if (type == "redo")
        return trace_reply(s, seq, s.redo());
    if (type == "save") {
        auto before = slot.project.saved;
        {
            std::lock_guard disk(disk_);
            workspace_.save(slot.project);
        }
        return make_message("saved", id, seq, Json{{"events", slot.project.saved - before}});
    }
    if (type == "export_code") {
        std::optional<std::string> node;
        if (body.contains("node") && !body["node"].is_null())
            node = body["node"].get<std::string>();
        try {
            std::vector<CodeArtifact> arts;
            {
                std::lock_guard disk(disk_);
                arts = workspace_.export_code(s.tree(), s.profile(), node);
            }
            Json out = Json::array();
            for (const auto& a : arts)
                out.push_back(artifact_to_json(a));
            return make_message("code", id, seq, Json{{"artifacts", out}});
        } catch (const GenerateError& e) {
            auto diags = e.diagnostics();
            if (diags.empty()) {
                Diagnostic d;
                d.rule = std::string(to_string(e.code()));
                d.message = e.what();
                diags.push_back(d);
            }
            return make_message("rejected", id, seq, Json{{"diagnostics", diagnostics_json(diags)}});
        }
    }
    fail(ErrorCode::ParseError, "unknown message type '" + type + "'");
}

void ProtocolHub::close(const std::string& session) {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(mutex_);
        auto it = slots_.find(session);
        if (it == slots_.end())
            return;
        slot = it->second;
        slots_.erase(it);
    }
    std::lock_guard lock(slot->mutex);
    if (slot->closed)
        return;
    slot->closed = true;
    std::lock_guard disk(disk_);
    workspace_.save(slot->project);
}

std::vector<std::string> ProtocolHub::expire_idle() {
    auto now = options_.clock();
    std::vector<std::string> idle;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, slot] : slots_) {
            std::unique_lock slot_lock(slot->mutex, std::try_to_lock);
            if (slot_lock.owns_lock() && now - slot->last > options_.idle_timeout)
                idle.push_back(id);
        }
    }
    for (const auto& id : idle) {
        try {
            close(id);
        } catch (const Error&) {
            // Diverged log: the session is dropped without writing.
        }
    }
    return idle;
}

std::vector<Json> run_script(ProtocolHub& hub, const std::string& project, std::istream& lines,
                             const std::optional<std::string>& profile) {
    std::vector<Json> replies;
    Json open{{"type", "open_session"}, {"body", {{"project", project}}}};
    if (profile)
        open["body"]["profile"] = *profile;
    replies.push_back(hub.handle(open));
    if (replies.back()["type"] != "snapshot")
        return replies;
    const std::string session = replies.back()["session"];
    std::uint64_t seq = 0;
    std::string line;
    for (std::size_t n = 1; std::getline(lines, line); ++n) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        Json msg;
        try {
            msg = Json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            replies.push_back(make_message("error", session, seq,
                                           error_body(ErrorCode::ParseError, "line " + std::to_string(n) + ": " + e.what())));
            continue;
        }
        if (msg.is_object() && !msg.contains("type") && msg.contains("source"))
            msg = Json{{"type", "raw_event"}, {"body", msg}};
        if (msg.is_object()) {
            msg["session"] = session;
            msg["seq"] = ++seq;
        }
        replies.push_back(hub.handle(msg));
    }
    hub.close(session);
    return replies;
}

} // namespace nbmvc
