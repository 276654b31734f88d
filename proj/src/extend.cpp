#include "nbmvc/domain.hpp"

#include "nbmvc/build.hpp"
#include "nbmvc/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace nbmvc {

namespace {

[[noreturn]] void reject(const std::string& msg) { fail(ErrorCode::SelectionError, msg); }

std::string text_of(const AsltTree& tree, NodeId id, const char* key) {
    auto m = tree.meta(id, key);
    return m && m->get_if<std::string>() ? *m->get_if<std::string>() : std::string{};
}

struct WireInfo {
    NodeId wire;
    std::optional<NodeId> from;
    std::string from_port;
    std::optional<NodeId> to;
    std::string to_port;
};

/// Hands out identifiers not yet in `taken`.
std::string fresh(std::set<std::string>& taken, std::string base) {
    if (!is_identifier(base))
        base = "p_" + base;
    std::string name = base;
    for (int i = 2; taken.count(name) || !is_identifier(name); ++i)
        name = base + "_" + std::to_string(i);
    taken.insert(name);
    return name;
}

} // namespace

NodeId derive_extended_element(AsltTree& tree, const std::vector<NodeId>& selection, const std::string& name,
                               UndoStack* undo) {
    if (selection.empty())
        reject("empty selection");
    if (!is_identifier(name))
        reject("'" + name + "' is not a valid macro name");
    std::set<NodeId> chosen(selection.begin(), selection.end());
    if (chosen.size() != selection.size())
        reject("selection lists a node twice");
    std::optional<NodeId> macro;
    for (auto id : selection) {
        if (!tree.contains(id))
            reject("unknown node " + id.hex());
        const auto& n = tree.node(id);
        if (n.kind != kinds::MacroOp && n.kind != kinds::MacroUse)
            reject(n.kind + " " + node_name(tree, id) + " cannot be folded; select ops and uses");
        if (!n.parent || tree.node(*n.parent).kind != kinds::Macro)
            reject("selected nodes must sit inside a macro");
        if (macro && *macro != *n.parent)
            reject("selected nodes span more than one macro");
        macro = n.parent;
    }
    for (auto c : tree.node(tree.root()).children)
        if (tree.node(c).kind == kinds::Macro && node_name(tree, c) == name)
            reject("macro " + name + " already exists");

    static const DomainProfile profile = load_profile("macro");
    auto types = infer_port_types(tree, profile, *macro);

    std::vector<WireInfo> wires;
    std::set<std::string> outer_names;
    for (auto c : tree.node(*macro).children) {
        const auto& n = tree.node(c);
        if (n.kind != kinds::MacroWire) {
            outer_names.insert(node_name(tree, c));
            continue;
        }
        auto end = [&](const char* key) -> std::optional<NodeId> {
            auto id = NodeId::parse(text_of(tree, c, key));
            if (!id || !tree.contains(*id) || tree.node(*id).parent != *macro)
                return std::nullopt;
            return id;
        };
        wires.push_back({c, end(keys::FromNode), text_of(tree, c, keys::FromPort), end(keys::ToNode),
                         text_of(tree, c, keys::ToPort)});
    }

    // A path that leaves the selection and comes back would become a cycle
    // through the use node.
    std::map<NodeId, std::vector<NodeId>> succ;
    for (const auto& w : wires)
        if (w.from && w.to)
            succ[*w.from].push_back(*w.to);
    std::set<NodeId> outside;
    std::vector<NodeId> todo;
    for (auto id : selection)
        for (auto next : succ[id])
            if (!chosen.count(next) && outside.insert(next).second)
                todo.push_back(next);
    while (!todo.empty()) {
        auto id = todo.back();
        todo.pop_back();
        for (auto next : succ[id]) {
            if (chosen.count(next))
                reject("selection is not convex: " + node_name(tree, id) + " lies between selected nodes");
            if (outside.insert(next).second)
                todo.push_back(next);
        }
    }

    AsltTree shadow = tree;
    std::vector<ChangeEvent> events;
    shadow.subscribe([&](const ChangeEvent& ev) { events.push_back(ev); });

    auto index_of_macro = tree.index_in_parent(*macro);
    auto derived = shadow.insert_node(shadow.root(), index_of_macro + 1, std::string(kinds::Macro), text(name));

    auto use_name = [&] {
        std::string base = name;
        base[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(base[0])));
        return fresh(outer_names, base);
    }();
    auto first = std::min_element(selection.begin(), selection.end(), [&](NodeId a, NodeId b) {
        return tree.index_in_parent(a) < tree.index_in_parent(b);
    });
    auto use = shadow.insert_node(*macro, tree.index_in_parent(*first), std::string(kinds::MacroUse), text(name));
    shadow.set_meta(use, keys::Name, MetaValue(use_name));

    // Selected nodes keep their ids, so internal wires stay valid after the move.
    std::vector<NodeId> ordered(selection.begin(), selection.end());
    std::sort(ordered.begin(), ordered.end(),
              [&](NodeId a, NodeId b) { return tree.index_in_parent(a) < tree.index_in_parent(b); });
    for (auto id : ordered)
        shadow.move_node(id, derived, shadow.node(derived).children.size());

    std::set<std::string> port_names;
    for (auto id : ordered)
        port_names.insert(node_name(tree, id));
    std::map<std::pair<NodeId, std::string>, std::pair<std::string, NodeId>> inputs; // outer source -> port
    std::map<std::pair<NodeId, std::string>, std::pair<std::string, NodeId>> outputs; // inner source -> port
    auto port_type = [&](NodeId node, const std::string& port) {
        auto it = types.find({node, port});
        if (it == types.end())
            reject("cannot infer the type of " + node_name(tree, node) + "." + port);
        return it->second;
    };
    auto rewire = [&](NodeId wire, const char* node_key, NodeId node, const char* port_key, const std::string& port) {
        shadow.set_meta(wire, node_key, MetaValue(node.hex()));
        shadow.set_meta(wire, port_key, MetaValue(port));
    };

    for (const auto& w : wires) {
        bool from_in = w.from && chosen.count(*w.from);
        bool to_in = w.to && chosen.count(*w.to);
        if (from_in && to_in) {
            shadow.move_node(w.wire, derived, shadow.node(derived).children.size());
        } else if (to_in) {
            if (!w.from)
                reject("a wire into the selection has no source");
            auto key = std::pair{*w.from, w.from_port};
            auto it = inputs.find(key);
            bool shared = it != inputs.end();
            if (!shared) {
                auto type = port_type(*w.from, w.from_port);
                auto base = tree.node(*w.from).kind == kinds::MacroPort ? node_name(tree, *w.from)
                                                                        : node_name(tree, *w.from) + "_" + w.from_port;
                auto pname = fresh(port_names, base);
                auto port = build::port(shadow, derived, pname, PortDir::In, type);
                it = inputs.emplace(key, std::pair{pname, port}).first;
            }
            build::wire(shadow, derived, it->second.second, "out", *w.to, w.to_port);
            // One outer wire per port; the port fans out inside.
            if (shared)
                shadow.remove_subtree(w.wire);
            else
                rewire(w.wire, keys::ToNode, use, keys::ToPort, it->second.first);
        } else if (from_in) {
            auto key = std::pair{*w.from, w.from_port};
            auto it = outputs.find(key);
            if (it == outputs.end()) {
                auto type = port_type(*w.from, w.from_port);
                auto pname = fresh(port_names, node_name(tree, *w.from) + "_" + w.from_port);
                auto port = build::port(shadow, derived, pname, PortDir::Out, type);
                build::wire(shadow, derived, *w.from, w.from_port, port, "in");
                it = outputs.emplace(key, std::pair{pname, port}).first;
            }
            rewire(w.wire, keys::FromNode, use, keys::FromPort, it->second.first);
        }
    }

    for (const auto& ev : events)
        tree.apply_change(ev);
    if (undo)
        undo->push("derive " + name, events);
    return derived;
}

} // namespace nbmvc
