#include "nbmvc/session.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>

namespace nbmvc {

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
    case Outcome::Applied: return "applied";
    case Outcome::Rejected: return "rejected";
    case Outcome::NoOp: return "no-op";
    }
    return "";
}

std::vector<int> CycleTrace::step_numbers() const {
    std::vector<int> out;
    for (const auto& s : steps)
        out.push_back(s.step);
    return out;
}

Json trace_to_json(const CycleTrace& trace) {
    Json steps = Json::array();
    for (const auto& s : trace.steps)
        steps.push_back({{"step", s.step}, {"description", s.description}, {"seqs", s.seqs}});
    Json diags = Json::array();
    for (const auto& d : trace.diagnostics)
        diags.push_back(diagnostic_to_json(d));
    Json changes = Json::array();
    for (const auto& c : trace.changes)
        changes.push_back(change_to_json(c));
    Json j{{"outcome", std::string(to_string(trace.outcome))},
           {"steps", steps},
           {"diagnostics", diags},
           {"change_events", changes}};
    if (trace.model_event)
        j["model_event"] = model_event_to_json(*trace.model_event);
    if (trace.patch)
        j["view_patch"] = patch_to_json(*trace.patch);
    if (trace.wizard)
        j["wizard"] = wizard_to_json(*trace.wizard);
    return j;
}

namespace {

[[noreturn]] void malformed(const std::string& msg) { fail(ErrorCode::MalformedRawEvent, msg); }

Diagnostic diag_of(const Error& e, std::optional<NodeId> node = std::nullopt) {
    return Diagnostic{Severity::Error, node, std::string(to_string(e.cause())), e.what()};
}

const std::string* field(const RawEvent& ev, const std::string& key) {
    auto it = ev.payload.find(key);
    return it == ev.payload.end() ? nullptr : &it->second;
}

std::string required(const RawEvent& ev, const std::string& key) {
    auto* v = field(ev, key);
    if (!v)
        malformed(std::string(to_string(ev.kind)) + " needs payload '" + key + "'");
    return *v;
}

} // namespace

NodeId resolve_ref(const AsltTree& tree, std::string_view ref) {
    if (auto id = NodeId::parse(ref)) {
        if (!tree.contains(*id))
            malformed("no node " + std::string(ref));
        return *id;
    }
    std::vector<NodeId> hits;
    try {
        hits = tree.query(ref);
    } catch (const Error& e) {
        malformed(e.what());
    }
    if (hits.size() != 1)
        malformed("'" + std::string(ref) + "' matches " + std::to_string(hits.size()) + " nodes");
    return hits.front();
}

Session::Session(std::string id, AsltTree tree, DomainProfile profile)
    : id_(std::move(id)), tree_(std::move(tree)), profile_(std::move(profile)) {
    if (tree_.domain() != profile_.name)
        fail(ErrorCode::ProfileMismatch,
             "model belongs to domain '" + tree_.domain() + "', not '" + profile_.name + "'");
    if (tree_.node(tree_.root()).kind != profile_.root_kind)
        fail(ErrorCode::ProfileMismatch, "root kind " + tree_.node(tree_.root()).kind + " does not fit profile " +
                                             profile_.name);
    scene_ = construct_scene(tree_, profile_);
}

void Session::select(std::optional<NodeId> node) {
    if (node && !tree_.contains(*node))
        fail(ErrorCode::NotFound, "no node " + node->hex());
    selection_ = node;
}

NodeId Session::subject_of(const RawEvent& ev) const {
    if (auto* ref = field(ev, "node"))
        return resolve_ref(tree_, *ref);
    if (selection_ && tree_.contains(*selection_))
        return *selection_;
    malformed(std::string(to_string(ev.kind)) + " needs a node or a selection");
}

ModelEvent Session::classify_drop(const RawEvent& ev) {
    auto item = required(ev, "palette_item");
    auto palette = effective_palette(profile_, tree_);
    auto entry = std::find_if(palette.begin(), palette.end(), [&](const PaletteEntry& e) { return e.id == item; });
    if (entry == palette.end())
        malformed("unknown palette item '" + item + "'");

    NodeId target = tree_.root();
    if (auto* ref = field(ev, "target")) {
        target = resolve_ref(tree_, *ref);
    } else if (entry->container != profile_.root_kind) {
        if (selection_ && tree_.contains(*selection_) && tree_.node(*selection_).kind == entry->container) {
            target = *selection_;
        } else {
            std::vector<NodeId> hits;
            for (auto id : tree_.document_order())
                if (tree_.node(id).kind == entry->container)
                    hits.push_back(id);
            if (hits.size() != 1)
                malformed("drop of " + item + " needs a target " + entry->container);
            target = hits.front();
        }
    }

    ModelEvent me;
    me.kind = ModelEventKind::ElementDropped;
    for (const auto& [k, v] : ev.payload)
        if (k != "target")
            me.payload[k] = text(v);
    for (const auto& [k, v] : entry->payload)
        me.payload[k] = v;
    me.payload["palette_item"] = text(item);
    me.payload["kind"] = text(entry->kind);
    me.payload["container"] = text(entry->container);
    me.payload["target"] = text(target.hex());
    me.payload["wizard"] = text(entry->wizard);
    me.payload["placed"] = integer(ev.position ? 1 : 0);
    me.payload["x"] = real(ev.position ? ev.position->x : 0.0);
    me.payload["y"] = real(ev.position ? ev.position->y : 0.0);
    return me;
}

ModelEvent Session::classify_edit(const RawEvent& ev) {
    auto name = required(ev, "field");
    auto value = required(ev, "value");
    auto node = subject_of(ev);
    const auto& n = tree_.node(node);
    FieldTarget target;
    if (name == "layer") {
        target = {"meta", "view.layer", "text"};
    } else {
        auto kind = profile_.fields.find(n.kind);
        if (kind == profile_.fields.end() || !kind->second.count(name))
            malformed(n.kind + " has no field '" + name + "'");
        target = kind->second.at(name);
    }
    std::string type = target.type;
    if (auto* t = field(ev, "type")) {
        type = *t;
    } else if (type == "same") {
        ScalarType current = ScalarType::None;
        if (target.target == "value") {
            current = type_of(n.value);
        } else if (auto m = tree_.meta(node, target.key); m && !m->is_list()) {
            current = type_of(m->scalar());
        }
        type = current == ScalarType::None ? "text" : std::string(type_tag(current));
    }
    ModelEvent me;
    me.kind = ModelEventKind::PropertyEdited;
    me.subject = node;
    me.payload = {{"field", text(name)},
                  {"target", text(target.target)},
                  {"key", text(target.key)},
                  {"type", text(type)},
                  {"value", text(value)}};
    return me;
}

std::optional<ModelEvent> Session::classify_pane(const RawEvent& ev) {
    switch (ev.kind) {
    case RawKind::Click: {
        auto* ref = field(ev, "node");
        selection_ = ref ? std::optional{resolve_ref(tree_, *ref)} : std::nullopt;
        return std::nullopt;
    }
    case RawKind::DragEnd: {
        if (field(ev, "from_node") || field(ev, "to_node")) {
            auto from = resolve_ref(tree_, required(ev, "from_node"));
            auto to = resolve_ref(tree_, required(ev, "to_node"));
            if (from == tree_.root())
                malformed("the root has no ports");
            ModelEvent me;
            me.kind = ModelEventKind::BindingCreated;
            me.payload = {{"from_node", text(from.hex())},
                          {"from_port", text(required(ev, "from_port"))},
                          {"to_node", text(to.hex())},
                          {"to_port", text(required(ev, "to_port"))},
                          {"target", text(tree_.node(from).parent->hex())}};
            return me;
        }
        if (!field(ev, "node"))
            return std::nullopt;
        if (!ev.position)
            malformed("DragEnd of a symbol needs a position");
        ModelEvent me;
        me.kind = ModelEventKind::ElementMoved;
        me.subject = resolve_ref(tree_, *field(ev, "node"));
        me.payload = {{"x", real(ev.position->x)}, {"y", real(ev.position->y)}};
        return me;
    }
    case RawKind::KeyCommand: {
        auto command = required(ev, "command");
        if (command == "delete") {
            auto node = subject_of(ev);
            if (node == tree_.root())
                malformed("the root cannot be deleted");
            ModelEvent me;
            me.subject = node;
            if (profile_.is_relation(tree_.node(node).kind)) {
                me.kind = ModelEventKind::BindingRemoved;
                return me;
            }
            // Relations outside the subtree that touch it go first.
            me.kind = ModelEventKind::ElementRemoved;
            std::int64_t count = 0;
            for (auto id : tree_.document_order()) {
                if (!profile_.is_relation(tree_.node(id).kind) || tree_.in_subtree(id, node))
                    continue;
                bool touches = false;
                for (const char* key : {keys::FromNode, keys::ToNode}) {
                    auto m = tree_.meta(id, key);
                    auto end = m && m->get_if<std::string>() ? NodeId::parse(*m->get_if<std::string>()) : std::nullopt;
                    touches = touches || (end && tree_.contains(*end) && tree_.in_subtree(*end, node));
                }
                if (touches)
                    me.payload["wire." + std::to_string(count++)] = text(id.hex());
            }
            me.payload["wire_count"] = integer(count);
            return me;
        }
        if (command == "group") {
            ModelEvent me;
            me.kind = ModelEventKind::GroupCreated;
            auto members = required(ev, "members");
            std::int64_t count = 0;
            std::size_t start = 0;
            while (start <= members.size()) {
                auto comma = members.find(',', start);
                auto ref = members.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                if (!ref.empty()) {
                    me.payload["member." + std::to_string(count++)] = text(resolve_ref(tree_, ref).hex());
                }
                if (comma == std::string::npos)
                    break;
                start = comma + 1;
            }
            if (count == 0)
                malformed("group needs members");
            me.payload["count"] = integer(count);
            me.payload["group"] = text(required(ev, "group"));
            return me;
        }
        if (command == "collapse") {
            ModelEvent me;
            me.kind = ModelEventKind::SubmodelToggled;
            me.subject = subject_of(ev);
            auto current = tree_.meta(*me.subject, "view.collapsed");
            bool collapsed = current && current->get_if<bool>() && *current->get_if<bool>();
            me.payload["collapsed"] = boolean(!collapsed);
            return me;
        }
        return std::nullopt;
    }
    case RawKind::Drop:
    case RawKind::FieldEdit: break;
    }
    return std::nullopt;
}

std::optional<ModelEvent> Session::ingest_raw(const RawEvent& ev) {
    switch (ev.source) {
    case RawSource::Toolbar:
        if (ev.kind != RawKind::Drop)
            return std::nullopt;
        return classify_drop(ev);
    case RawSource::PropertyInspector:
        if (ev.kind != RawKind::FieldEdit)
            return std::nullopt;
        return classify_edit(ev);
    case RawSource::LayerPanel: {
        auto spec = required(ev, "filter");
        if (!filter_kind(spec))
            malformed("bad filter '" + spec + "'");
        bool active = true;
        if (auto* a = field(ev, "active"))
            active = *a == "true" || *a == "1";
        ModelEvent me;
        me.kind = ModelEventKind::FilterToggled;
        me.payload = {{"filter", text(spec)}, {"active", boolean(active)}};
        return me;
    }
    case RawSource::ModellingPane:
    case RawSource::External:
        if (ev.kind == RawKind::Drop)
            malformed("Drop must come from the toolbar");
        return classify_pane(ev);
    }
    return std::nullopt;
}

std::optional<ModelEvent> prepare_event(const DomainProfile& profile, const ModelEvent& ev) {
    ModelEvent bound = ev;
    auto w = ev.payload.find("wizard");
    if (w == ev.payload.end())
        return bound;
    const auto* spec = profile.wizard(to_text(w->second));
    if (!spec)
        return bound;
    for (const auto& f : spec->fields) {
        auto it = bound.payload.find(f.name);
        if (it == bound.payload.end()) {
            if (f.required())
                return std::nullopt;
            bound.payload[f.name] = f.default_value;
        } else {
            it->second = check_answer(f, it->second);
        }
    }
    return bound;
}

ControllerResult Session::controller_handle(const ModelEvent& ev) {
    ControllerResult r;
    const DomainProcessor* proc = profile_.registry.find(profile_.name, ev.kind);
    if (!proc) {
        std::string why = profile_.registry.is_unsupported(profile_.name, ev.kind) ? " is not supported in "
                                                                                    : " has no processor in ";
        r.diagnostics.push_back({Severity::Error, ev.subject, "no-processor",
                                 std::string(to_string(ev.kind)) + why + profile_.name});
        return r;
    }
    std::optional<ModelEvent> bound;
    try {
        bound = prepare_event(profile_, ev);
    } catch (const Error& e) {
        r.diagnostics.push_back(diag_of(e, ev.subject));
        return r;
    }
    if (!bound) {
        const auto* spec = profile_.wizard(to_text(ev.payload.at("wizard")));
        parked_[spec->id] = ev;
        r.wizard = *spec;
        return r;
    }
    try {
        ApplyOptions opts;
        opts.undo = &undo_;
        r.changes = apply_processor(tree_, *proc, *bound, opts);
    } catch (const Error& e) {
        r.diagnostics.push_back(diag_of(e, ev.subject));
    }
    return r;
}

ModelEvent Session::wizard_complete(const std::string& wizard_id, const std::map<std::string, Scalar>& answers) {
    auto parked = parked_.find(wizard_id);
    if (parked == parked_.end())
        fail(ErrorCode::NotFound, "no event waits for wizard " + wizard_id);
    const auto* spec = profile_.wizard(wizard_id);
    if (!spec)
        fail(ErrorCode::NotFound, "no wizard " + wizard_id);
    ModelEvent ev = parked->second;
    for (const auto& [k, v] : answers)
        if (std::none_of(spec->fields.begin(), spec->fields.end(), [&](const WizardField& f) { return f.name == k; }))
            fail(ErrorCode::InvalidAnswer, "wizard " + wizard_id + " has no field '" + k + "'");
    for (const auto& f : spec->fields) {
        auto a = answers.find(f.name);
        if (a != answers.end())
            ev.payload[f.name] = check_answer(f, a->second);
        else if (auto p = ev.payload.find(f.name); p != ev.payload.end())
            p->second = check_answer(f, p->second);
        else if (f.required())
            fail(ErrorCode::InvalidAnswer, "field '" + f.name + "' is required");
        else
            ev.payload[f.name] = f.default_value;
    }
    parked_.erase(parked);
    return ev;
}

CycleTrace Session::finish(CycleTrace trace, std::vector<ChangeEvent> changes, const std::string& what) {
    if (changes.empty()) {
        trace.outcome = Outcome::NoOp;
        return trace;
    }
    std::vector<std::uint64_t> seqs;
    for (const auto& c : changes)
        seqs.push_back(c.seq);
    trace.steps.push_back({4, what + " changed the model", seqs});
    trace.steps.push_back({5, "change events published", seqs});
    history_.insert(history_.end(), changes.begin(), changes.end());
    auto patch = apply_change_to_scene(scene_, changes, tree_, profile_);
    trace.steps.push_back({6, "View Constructor updated the scene", {patch.to_version}});
    auto listeners = listeners_;
    for (const auto& [id, fn] : listeners)
        fn(changes, patch);
    trace.steps.push_back({7, "patch delivered to " + std::to_string(listeners.size()) + " view listener(s)",
                           {patch.to_version}});
    trace.outcome = Outcome::Applied;
    trace.changes = std::move(changes);
    trace.patch = std::move(patch);
    return trace;
}

CycleTrace Session::run_model_event(const ModelEvent& ev) {
    CycleTrace trace;
    trace.model_event = ev;
    auto r = controller_handle(ev);
    if (r.wizard) {
        trace.steps.push_back({3, "controller needs wizard " + r.wizard->id, {}});
        trace.wizard = std::move(r.wizard);
        trace.outcome = Outcome::NoOp;
        return trace;
    }
    if (!r.diagnostics.empty()) {
        trace.steps.push_back({3, "controller refused: " + r.diagnostics.front().message, {}});
        trace.diagnostics = std::move(r.diagnostics);
        trace.outcome = Outcome::Rejected;
        return trace;
    }
    trace.steps.push_back({3, "controller ran the " + std::string(to_string(ev.kind)) + " processor", {}});
    return finish(std::move(trace), std::move(r.changes), "processor");
}

CycleTrace Session::run_cycle(const RawEvent& ev) {
    CycleTrace trace;
    trace.steps.push_back({1, std::string(to_string(ev.source)) + " " + std::string(to_string(ev.kind)), {}});
    std::optional<ModelEvent> me;
    try {
        me = ingest_raw(ev);
    } catch (const Error& e) {
        trace.diagnostics.push_back(diag_of(e));
        trace.outcome = Outcome::Rejected;
        return trace;
    }
    if (!me) {
        trace.outcome = Outcome::NoOp;
        return trace;
    }
    trace.steps.push_back({2, "classified as " + std::string(to_string(me->kind)), {}});
    auto rest = run_model_event(*me);
    trace.steps.insert(trace.steps.end(), rest.steps.begin(), rest.steps.end());
    rest.steps = std::move(trace.steps);
    return rest;
}

CycleTrace Session::undo() {
    CycleTrace trace;
    trace.steps.push_back({1, "undo requested", {}});
    std::vector<ChangeEvent> changes;
    try {
        changes = undo_.undo(tree_);
    } catch (const Error& e) {
        trace.diagnostics.push_back(diag_of(e));
        trace.outcome = Outcome::Rejected;
        return trace;
    }
    trace.steps.push_back({3, "controller replays the inverse of the last entry", {}});
    return finish(std::move(trace), std::move(changes), "undo");
}

CycleTrace Session::redo() {
    CycleTrace trace;
    trace.steps.push_back({1, "redo requested", {}});
    std::vector<ChangeEvent> changes;
    try {
        changes = undo_.redo(tree_);
    } catch (const Error& e) {
        trace.diagnostics.push_back(diag_of(e));
        trace.outcome = Outcome::Rejected;
        return trace;
    }
    trace.steps.push_back({3, "controller replays the next entry", {}});
    return finish(std::move(trace), std::move(changes), "redo");
}

CycleTrace Session::layout() {
    CycleTrace trace;
    trace.steps.push_back({1, "layout requested", {}});
    trace.steps.push_back({3, "controller places unplaced symbols", {}});
    auto changes = nbmvc::layout(tree_, scene_, &undo_);
    return finish(std::move(trace), std::move(changes), "layout");
}

SubscriptionId Session::subscribe_view(ViewListener listener) {
    auto id = next_listener_++;
    listeners_.emplace_back(id, std::move(listener));
    return id;
}

void Session::unsubscribe_view(SubscriptionId id) {
    std::erase_if(listeners_, [&](const auto& l) { return l.first == id; });
}

} // namespace nbmvc
