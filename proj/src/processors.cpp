#include "nbmvc/processors.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace nbmvc {

namespace {

constexpr std::size_t kMaxRepeat = 4096;

[[noreturn]] void anchor_error(std::string_view anchor, const std::string& why) {
    fail(ErrorCode::AnchorError, "anchor '" + std::string(anchor) + "' " + why);
}

std::optional<std::size_t> parse_index(std::string_view text) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        return std::nullopt;
    return v;
}

/// Like scalar_from_json, but also accepts a string `v` for any type; that
/// is what placeholder substitution produces.
Scalar typed_scalar(const Json& j) {
    if (j.is_object() && j.contains("t") && j.at("t").is_string() && j.contains("v") &&
        j.at("v").is_string()) {
        auto type = parse_type_tag(j.at("t").get<std::string>());
        if (!type)
            fail(ErrorCode::InvalidArgument, "unknown value type '" + j.at("t").get<std::string>() + "'");
        return parse_scalar(*type, j.at("v").get<std::string>());
    }
    try {
        return scalar_from_json(j);
    } catch (const Error& e) {
        fail(ErrorCode::InvalidArgument, e.what());
    }
}

MetaValue typed_meta(const Json& j) {
    if (j.is_object() && j.value("t", "") == "list") {
        MetaValue::List items;
        if (!j.contains("v") || !j.at("v").is_array())
            fail(ErrorCode::InvalidArgument, "list meta needs an array");
        for (const auto& item : j.at("v"))
            items.push_back(typed_scalar(item));
        MetaValue mv(std::move(items));
        mv.check();
        return mv;
    }
    return MetaValue::from_scalar(typed_scalar(j));
}

std::optional<std::size_t> index_arg(const Json& args) {
    if (!args.contains("index"))
        return std::nullopt;
    const Json& v = args.at("index");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "end"))
        return std::nullopt;
    if (v.is_number_unsigned())
        return v.get<std::size_t>();
    if (v.is_string())
        if (auto i = parse_index(v.get<std::string>()))
            return i;
    fail(ErrorCode::InvalidArgument, "index must be a non-negative integer or \"end\"");
}

std::string string_arg(const Json& args, const char* field) {
    if (!args.contains(field) || !args.at(field).is_string())
        fail(ErrorCode::InvalidArgument, std::string("missing argument '") + field + "'");
    return args.at(field).get<std::string>();
}

Json substitute_json(const Json& j, const std::map<std::string, std::string>& vars) {
    if (j.is_string())
        return substitute(j.get<std::string>(), vars);
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& item : j)
            out.push_back(substitute_json(item, vars));
        return out;
    }
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : j.items())
            out[k] = substitute_json(v, vars);
        return out;
    }
    return j;
}

std::string scalar_arg_text(const Json& v, const std::map<std::string, std::string>& vars) {
    if (v.is_string())
        return substitute(v.get<std::string>(), vars);
    if (v.is_number_integer())
        return std::to_string(v.get<std::int64_t>());
    fail(ErrorCode::InvalidArgument, "expected text or integer template argument");
}

void expand(const Json& templates, std::map<std::string, std::string>& vars,
            std::vector<Json>& out) {
    if (!templates.is_array())
        fail(ErrorCode::InvalidArgument, "instruction list must be an array");
    for (const auto& item : templates) {
        if (!item.is_object() || !item.contains("op") || !item.at("op").is_string())
            fail(ErrorCode::InvalidArgument, "instruction without op");
        const std::string op = item.at("op").get<std::string>();
        const Json args = item.value("args", Json::object());
        if (op == "Repeat") {
            auto count_text = scalar_arg_text(args.value("count", Json("0")), vars);
            auto count = parse_index(count_text);
            if (!count || *count > kMaxRepeat)
                fail(ErrorCode::InvalidArgument, "bad repeat count '" + count_text + "'");
            std::string var = args.value("var", "i");
            auto saved = vars.find(var) != vars.end() ? std::optional(vars[var]) : std::nullopt;
            for (std::size_t k = 0; k < *count; ++k) {
                vars[var] = std::to_string(k);
                expand(item.value("body", Json::array()), vars, out);
            }
            if (saved)
                vars[var] = *saved;
            else
                vars.erase(var);
        } else if (op == "When") {
            auto value = scalar_arg_text(args.value("value", Json("")), vars);
            bool match = true;
            if (args.contains("equals"))
                match = value == scalar_arg_text(args.at("equals"), vars);
            if (args.contains("differs"))
                match = match && value != scalar_arg_text(args.at("differs"), vars);
            if (match)
                expand(item.value("body", Json::array()), vars, out);
        } else {
            out.push_back(substitute_json(item, vars));
        }
    }
}

void check_template(const Json& item, const std::string& where) {
    if (!item.is_object() || !item.contains("op") || !item.at("op").is_string())
        fail(ErrorCode::ProfileError, where + ": instruction without op");
    auto op = item.at("op").get<std::string>();
    if (op == "Repeat" || op == "When") {
        if (!item.contains("body") || !item.at("body").is_array())
            fail(ErrorCode::ProfileError, where + ": " + op + " needs a body array");
        for (std::size_t i = 0; i < item.at("body").size(); ++i)
            check_template(item.at("body")[i], where + ".body[" + std::to_string(i) + "]");
        return;
    }
    if (!parse_atomic_op(op))
        fail(ErrorCode::ProfileError, where + ": unknown op '" + op + "'");
    if (!item.contains("anchor") || !item.at("anchor").is_string())
        fail(ErrorCode::ProfileError, where + ": missing anchor");
}

} // namespace

std::string_view to_string(AtomicOp op) {
    switch (op) {
    case AtomicOp::Insert: return "Insert";
    case AtomicOp::Remove: return "Remove";
    case AtomicOp::Move: return "Move";
    case AtomicOp::SetValue: return "SetValue";
    case AtomicOp::SetMeta: return "SetMeta";
    case AtomicOp::RemoveMeta: return "RemoveMeta";
    case AtomicOp::AssertKind: return "AssertKind";
    }
    return "";
}

std::optional<AtomicOp> parse_atomic_op(std::string_view text) {
    static constexpr std::array all{AtomicOp::Insert,  AtomicOp::Remove,     AtomicOp::Move,
                                    AtomicOp::SetValue, AtomicOp::SetMeta,   AtomicOp::RemoveMeta,
                                    AtomicOp::AssertKind};
    for (auto op : all)
        if (to_string(op) == text)
            return op;
    return std::nullopt;
}

Json instruction_to_json(const AtomicInstruction& instr) {
    Json j;
    j["op"] = std::string(to_string(instr.op));
    j["anchor"] = instr.anchor;
    Json args = Json::object();
    switch (instr.op) {
    case AtomicOp::Insert:
        args["kind"] = instr.kind;
        args["index"] = instr.index ? Json(*instr.index) : Json("end");
        args["value"] = scalar_to_json(instr.value);
        break;
    case AtomicOp::Move:
        args["parent"] = instr.target;
        args["index"] = instr.index ? Json(*instr.index) : Json("end");
        break;
    case AtomicOp::SetValue:
        args["value"] = scalar_to_json(instr.value);
        break;
    case AtomicOp::SetMeta:
        args["key"] = instr.key;
        args["value"] = meta_to_json(instr.meta);
        break;
    case AtomicOp::RemoveMeta:
        args["key"] = instr.key;
        break;
    case AtomicOp::AssertKind:
        args["kind"] = instr.kind;
        break;
    case AtomicOp::Remove:
        break;
    }
    j["args"] = std::move(args);
    return j;
}

AtomicInstruction instruction_from_json(const Json& j) {
    if (!j.is_object())
        fail(ErrorCode::InvalidArgument, "instruction must be an object");
    AtomicInstruction instr;
    auto op = parse_atomic_op(require_string(j, "op", "op"));
    if (!op)
        fail(ErrorCode::InvalidArgument, "unknown op '" + j.at("op").get<std::string>() + "'");
    instr.op = *op;
    instr.anchor = require_string(j, "anchor", "anchor");
    const Json args = j.value("args", Json::object());
    switch (instr.op) {
    case AtomicOp::Insert:
        instr.kind = string_arg(args, "kind");
        instr.index = index_arg(args);
        instr.value = args.contains("value") ? typed_scalar(args.at("value")) : Scalar{};
        break;
    case AtomicOp::Move:
        instr.target = string_arg(args, "parent");
        instr.index = index_arg(args);
        break;
    case AtomicOp::SetValue:
        if (!args.contains("value"))
            fail(ErrorCode::InvalidArgument, "SetValue needs a value");
        instr.value = typed_scalar(args.at("value"));
        break;
    case AtomicOp::SetMeta:
        instr.key = string_arg(args, "key");
        if (!args.contains("value"))
            fail(ErrorCode::InvalidArgument, "SetMeta needs a value");
        instr.meta = typed_meta(args.at("value"));
        break;
    case AtomicOp::RemoveMeta:
        instr.key = string_arg(args, "key");
        break;
    case AtomicOp::AssertKind:
        instr.kind = string_arg(args, "kind");
        break;
    case AtomicOp::Remove:
        break;
    }
    return instr;
}

NodeId resolve_anchor(const AsltTree& tree, std::string_view anchor, const ApplyContext& ctx) {
    auto existing = [&](NodeId id) {
        if (!tree.contains(id))
            anchor_error(anchor, "names a node that no longer exists");
        return id;
    };
    if (anchor == "@last") {
        if (ctx.inserted.empty())
            anchor_error(anchor, "used before any insert");
        return existing(ctx.inserted.back());
    }
    if (anchor.starts_with("@new[") && anchor.ends_with("]")) {
        auto k = parse_index(anchor.substr(5, anchor.size() - 6));
        if (!k || *k >= ctx.inserted.size())
            anchor_error(anchor, "has no such insert");
        return existing(ctx.inserted[*k]);
    }
    if (auto id = NodeId::parse(anchor))
        return existing(*id);
    if (!anchor.starts_with("/"))
        anchor_error(anchor, "is neither a path nor a node id");
    std::vector<NodeId> hits;
    try {
        hits = tree.query(anchor);
    } catch (const Error& e) {
        anchor_error(anchor, e.what());
    }
    if (hits.size() != 1)
        anchor_error(anchor, "matched " + std::to_string(hits.size()) + " nodes");
    return hits.front();
}

std::optional<ChangeEvent> apply_atomic(AsltTree& tree, const AtomicInstruction& instr,
                                        ApplyContext& ctx) {
    NodeId node = resolve_anchor(tree, instr.anchor, ctx);
    switch (instr.op) {
    case AtomicOp::Insert: {
        std::size_t index = instr.index.value_or(tree.node(node).children.size());
        ctx.inserted.push_back(tree.insert_node(node, index, instr.kind, instr.value));
        break;
    }
    case AtomicOp::Remove:
        tree.remove_subtree(node);
        break;
    case AtomicOp::Move: {
        NodeId parent = resolve_anchor(tree, instr.target, ctx);
        std::size_t index = instr.index.value_or(
            tree.node(parent).children.size() - (tree.node(node).parent == parent ? 1 : 0));
        tree.move_node(node, parent, index);
        break;
    }
    case AtomicOp::SetValue:
        tree.set_value(node, instr.value);
        break;
    case AtomicOp::SetMeta:
        tree.set_meta(node, instr.key, instr.meta);
        break;
    case AtomicOp::RemoveMeta:
        tree.remove_meta(node, instr.key);
        break;
    case AtomicOp::AssertKind:
        if (tree.node(node).kind != instr.kind)
            fail(ErrorCode::GuardFailed, "expected kind '" + instr.kind + "' at '" + instr.anchor +
                                             "', found '" + tree.node(node).kind + "'");
        return std::nullopt;
    }
    return tree.last_change();
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    // Returns the expansion of the placeholder whose body starts at `pos`
    // (just past "${"), leaving `pos` after the closing brace.
    std::function<std::string()> placeholder = [&]() -> std::string {
        std::string body;
        while (pos < text.size() && text[pos] != '}') {
            if (text.compare(pos, 2, "${") == 0) {
                pos += 2;
                body += placeholder();
            } else {
                body += text[pos++];
            }
        }
        if (pos >= text.size())
            fail(ErrorCode::InvalidArgument, "unterminated placeholder in '" + std::string(text) + "'");
        ++pos;
        std::string name = body;
        std::optional<std::string> fallback;
        if (auto bar = body.find('|'); bar != std::string::npos) {
            name = body.substr(0, bar);
            fallback = body.substr(bar + 1);
        }
        if (auto it = vars.find(name); it != vars.end())
            return it->second;
        if (fallback)
            return *fallback;
        fail(ErrorCode::InvalidArgument, "unresolved placeholder '${" + name + "}'");
    };
    while (pos < text.size()) {
        if (text.compare(pos, 2, "${") == 0) {
            pos += 2;
            out += placeholder();
        } else {
            out += text[pos++];
        }
    }
    return out;
}

std::vector<AtomicInstruction> bind_processor(const DomainProcessor& proc, const ModelEvent& event,
                                              const AsltTree& tree) {
    std::map<std::string, std::string> vars;
    for (const auto& [k, v] : event.payload)
        vars["payload." + k] = to_text(v);
    if (event.subject)
        vars["subject"] = event.subject->hex();
    vars["root"] = tree.root().hex();
    vars["domain"] = proc.domain;
    std::vector<Json> concrete;
    expand(proc.instructions, vars, concrete);
    std::vector<AtomicInstruction> out;
    out.reserve(concrete.size());
    for (const auto& j : concrete)
        out.push_back(instruction_from_json(j));
    return out;
}

Json processor_to_json(const DomainProcessor& proc) {
    return Json{{"name", proc.name},
                {"trigger", std::string(to_string(proc.trigger))},
                {"instructions", proc.instructions}};
}

DomainProcessor processor_from_json(const Json& j, const std::string& domain) {
    if (!j.is_object())
        fail(ErrorCode::ProfileError, "processor must be an object");
    DomainProcessor proc;
    proc.domain = domain;
    if (!j.contains("name") || !j.at("name").is_string())
        fail(ErrorCode::ProfileError, "processor without name");
    proc.name = j.at("name").get<std::string>();
    auto trigger = j.contains("trigger") && j.at("trigger").is_string()
                       ? parse_model_event_kind(j.at("trigger").get<std::string>())
                       : std::nullopt;
    if (!trigger)
        fail(ErrorCode::ProfileError, "processor '" + proc.name + "': bad trigger");
    proc.trigger = *trigger;
    if (!j.contains("instructions") || !j.at("instructions").is_array())
        fail(ErrorCode::ProfileError, "processor '" + proc.name + "': instructions must be an array");
    proc.instructions = j.at("instructions");
    for (std::size_t i = 0; i < proc.instructions.size(); ++i)
        check_template(proc.instructions[i],
                       "processor '" + proc.name + "' instructions[" + std::to_string(i) + "]");
    return proc;
}

void ProcessorRegistry::add(DomainProcessor proc) {
    auto key = std::pair{proc.domain, proc.trigger};
    if (processors_.count(key))
        fail(ErrorCode::ReplaceRejected, "a processor for (" + proc.domain + ", " +
                                             std::string(to_string(proc.trigger)) +
                                             ") is already registered");
    processors_.emplace(std::move(key), std::move(proc));
}

void ProcessorRegistry::mark_unsupported(const std::string& domain, ModelEventKind kind) {
    unsupported_.emplace(domain, kind);
}

const DomainProcessor* ProcessorRegistry::find(const std::string& domain, ModelEventKind kind) const {
    auto it = processors_.find(std::pair{domain, kind});
    return it == processors_.end() ? nullptr : &it->second;
}

const DomainProcessor& ProcessorRegistry::resolve(const std::string& domain, ModelEventKind kind) const {
    if (auto* p = find(domain, kind))
        return *p;
    fail(ErrorCode::NoProcessor, "no processor for " + std::string(to_string(kind)) + " in domain '" +
                                     domain + "'" +
                                     (is_unsupported(domain, kind) ? " (unsupported)" : ""));
}

bool ProcessorRegistry::is_unsupported(const std::string& domain, ModelEventKind kind) const {
    return unsupported_.count(std::pair{domain, kind}) != 0;
}

std::vector<const DomainProcessor*> ProcessorRegistry::all() const {
    std::vector<const DomainProcessor*> out;
    for (const auto& [key, proc] : processors_)
        out.push_back(&proc);
    return out;
}

std::vector<ChangeEvent> commit_transaction(AsltTree& tree,
                                            const std::vector<ChangeEvent>& mutations) {
    AsltTree shadow = tree;
    std::vector<ChangeEvent> events;
    events.reserve(mutations.size());
    for (const auto& m : mutations)
        events.push_back(shadow.perform(m));
    for (const auto& ev : events)
        tree.apply_change(ev);
    return events;
}

void UndoStack::push(std::string label, std::vector<ChangeEvent> forward) {
    entries_.resize(cursor_);
    UndoEntry entry;
    entry.label = std::move(label);
    for (auto it = forward.rbegin(); it != forward.rend(); ++it)
        entry.inverse.push_back(invert(*it));
    entry.forward = std::move(forward);
    entries_.push_back(std::move(entry));
    cursor_ = entries_.size();
}

std::vector<ChangeEvent> UndoStack::undo(AsltTree& tree) {
    if (!can_undo())
        fail(ErrorCode::NothingToUndo, "nothing to undo");
    auto events = commit_transaction(tree, entries_[cursor_ - 1].inverse);
    --cursor_;
    return events;
}

UndoStack UndoStack::restore(std::vector<UndoEntry> entries, std::size_t cursor) {
    if (cursor > entries.size())
        fail(ErrorCode::InvalidArgument, "undo cursor past the end");
    UndoStack s;
    s.entries_ = std::move(entries);
    s.cursor_ = cursor;
    return s;
}

Json undo_stack_to_json(const UndoStack& stack) {
    auto events = [](const std::vector<ChangeEvent>& v) {
        Json out = Json::array();
        for (const auto& e : v)
            out.push_back(change_to_json(e));
        return out;
    };
    Json entries = Json::array();
    for (const auto& e : stack.entries())
        entries.push_back(Json{{"label", e.label}, {"forward", events(e.forward)}, {"inverse", events(e.inverse)}});
    return Json{{"cursor", stack.cursor()}, {"entries", entries}};
}

UndoStack undo_stack_from_json(const Json& j) {
    try {
        std::vector<UndoEntry> entries;
        for (const auto& ej : j.at("entries")) {
            UndoEntry e;
            e.label = ej.at("label").get<std::string>();
            for (const auto& c : ej.at("forward"))
                e.forward.push_back(change_from_json(c));
            for (const auto& c : ej.at("inverse"))
                e.inverse.push_back(change_from_json(c));
            entries.push_back(std::move(e));
        }
        return UndoStack::restore(std::move(entries), j.at("cursor").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("undo stack: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, std::string("undo stack: ") + e.what());
    }
}

std::vector<ChangeEvent> UndoStack::redo(AsltTree& tree) {
    if (!can_redo())
        fail(ErrorCode::NothingToRedo, "nothing to redo");
    auto& entry = entries_[cursor_];
    std::vector<ChangeEvent> mutations = entry.forward;
    for (auto& m : mutations)
        m.seq = 0;
    auto events = commit_transaction(tree, mutations);
    entry.forward = events;
    ++cursor_;
    return events;
}

std::vector<ChangeEvent> apply_instructions(AsltTree& tree,
                                            const std::vector<AtomicInstruction>& instructions,
                                            const ApplyOptions& options, const std::string& label) {
    AsltTree shadow = tree;
    ApplyContext ctx;
    std::vector<ChangeEvent> events;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        const auto& instr = instructions[i];
        try {
            if (options.inject_fault_at == i)
                fail(ErrorCode::GuardFailed, "injected fault");
            if (auto ev = apply_atomic(shadow, instr, ctx))
                events.push_back(std::move(*ev));
        } catch (const Error& e) {
            throw Error(ErrorCode::TransactionRolledBack, e.code(),
                        "rolled back at instruction " + std::to_string(i) + " (" +
                            std::string(to_string(instr.op)) + "): " +
                            std::string(to_string(e.code())) + ": " + e.what());
        }
    }
    for (const auto& ev : events)
        tree.apply_change(ev);
    tree.minter().restore(shadow.minter().seed(), shadow.minter().counter());
    if (options.undo && !events.empty())
        options.undo->push(label, events);
    return events;
}

std::vector<ChangeEvent> apply_processor(AsltTree& tree, const DomainProcessor& proc,
                                         const ModelEvent& event, const ApplyOptions& options) {
    if (proc.trigger != event.kind)
        fail(ErrorCode::InvalidArgument, "processor '" + proc.name + "' serves " +
                                             std::string(to_string(proc.trigger)) + ", not " +
                                             std::string(to_string(event.kind)));
    std::vector<AtomicInstruction> instructions;
    try {
        instructions = bind_processor(proc, event, tree);
    } catch (const Error& e) {
        throw Error(ErrorCode::TransactionRolledBack, e.code(),
                    "processor '" + proc.name + "' could not bind: " + e.what());
    }
    return apply_instructions(tree, instructions, options, proc.name);
}

namespace {

std::string meta_key(std::string_view ns, std::string_view key) {
    if (ns.empty() || ns.find('.') != std::string_view::npos)
        fail(ErrorCode::InvalidArgument, "meta namespace must be non-empty and dot-free");
    if (key.empty())
        fail(ErrorCode::InvalidArgument, "meta key must be non-empty");
    return std::string(ns) + "." + std::string(key);
}

} // namespace

std::optional<MetaValue> mipt_get(const AsltTree& tree, NodeId node, std::string_view ns,
                                  std::string_view key) {
    return tree.meta(node, meta_key(ns, key));
}

ChangeEvent mipt_set(AsltTree& tree, NodeId node, std::string_view ns, std::string_view key,
                     MetaValue value) {
    tree.set_meta(node, meta_key(ns, key), std::move(value));
    return tree.last_change();
}

std::vector<MiptHit> mipt_query(const AsltTree& tree, std::string_view ns,
                                const MiptPredicate& predicate) {
    std::string prefix = meta_key(ns, "x");
    prefix.pop_back();
    std::vector<MiptHit> hits;
    for (NodeId id : tree.document_order()) {
        for (const auto& [k, v] : tree.node(id).meta) {
            if (!k.starts_with(prefix))
                continue;
            std::string_view local = std::string_view(k).substr(prefix.size());
            if (!predicate || predicate(local, v))
                hits.push_back(MiptHit{id, std::string(local), v});
        }
    }
    return hits;
}

} // namespace nbmvc
