#include "nbmvc/component.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <set>

namespace nbmvc {

std::string_view to_string(PortDir dir) { return dir == PortDir::In ? "in" : "out"; }

std::optional<PortDir> parse_port_dir(std::string_view text) {
    if (text == "in")
        return PortDir::In;
    if (text == "out")
        return PortDir::Out;
    return std::nullopt;
}

std::optional<ScalarType> parse_port_type(std::string_view text) {
    auto t = parse_type_tag(text);
    if (t == ScalarType::Bool || t == ScalarType::Int || t == ScalarType::Float)
        return t;
    return std::nullopt;
}

const PortDecl* ComponentDef::port(std::string_view n) const {
    for (const auto& p : ports)
        if (p.name == n)
            return &p;
    return nullptr;
}

bool is_primitive_op(std::string_view op) {
    return std::find(std::begin(kPrimitiveOps), std::end(kPrimitiveOps), op) != std::end(kPrimitiveOps);
}

std::size_t op_arity(std::string_view op) {
    if (op == "CONST")
        return 0;
    if (op == "NOT" || op == "PASS")
        return 1;
    return 2;
}

std::string op_input_port(std::size_t i) { return "in" + std::to_string(i); }

namespace {

bool numeric(ScalarType t) { return t == ScalarType::Int || t == ScalarType::Float; }
bool port_type(ScalarType t) { return t == ScalarType::Bool || numeric(t); }

[[noreturn]] void input_error(const std::string& msg) { fail(ErrorCode::InputError, msg); }

std::int64_t wrap(std::uint64_t v) { return static_cast<std::int64_t>(v); }

} // namespace

std::optional<ScalarType> op_result_type(std::string_view op, std::span<const ScalarType> in,
                                         const std::optional<Scalar>& literal) {
    if (!is_primitive_op(op) || in.size() != op_arity(op))
        return std::nullopt;
    if (op == "CONST") {
        if (!literal || !port_type(type_of(*literal)))
            return std::nullopt;
        return type_of(*literal);
    }
    if (op == "NOT")
        return in[0] == ScalarType::Bool ? std::optional(ScalarType::Bool) : std::nullopt;
    if (op == "PASS")
        return port_type(in[0]) ? std::optional(in[0]) : std::nullopt;
    if (in[0] != in[1])
        return std::nullopt;
    if (op == "AND" || op == "OR" || op == "XOR")
        return in[0] == ScalarType::Bool ? std::optional(ScalarType::Bool) : std::nullopt;
    if (op == "ADD" || op == "SUB" || op == "MUL")
        return numeric(in[0]) ? std::optional(in[0]) : std::nullopt;
    if (op == "LT")
        return numeric(in[0]) ? std::optional(ScalarType::Bool) : std::nullopt;
    // EQ
    return port_type(in[0]) ? std::optional(ScalarType::Bool) : std::nullopt;
}

Scalar eval_op(std::string_view op, std::span<const Scalar> in, const std::optional<Scalar>& literal) {
    std::vector<ScalarType> types;
    for (const auto& v : in)
        types.push_back(type_of(v));
    if (!op_result_type(op, types, literal))
        input_error("ill-typed inputs for " + std::string(op));
    if (op == "CONST")
        return *literal;
    if (op == "PASS")
        return in[0];
    if (op == "NOT")
        return !std::get<bool>(in[0]);
    if (op == "AND")
        return std::get<bool>(in[0]) && std::get<bool>(in[1]);
    if (op == "OR")
        return std::get<bool>(in[0]) || std::get<bool>(in[1]);
    if (op == "XOR")
        return std::get<bool>(in[0]) != std::get<bool>(in[1]);
    if (op == "EQ")
        return in[0] == in[1];
    if (types[0] == ScalarType::Int) {
        auto a = static_cast<std::uint64_t>(std::get<std::int64_t>(in[0]));
        auto b = static_cast<std::uint64_t>(std::get<std::int64_t>(in[1]));
        if (op == "ADD")
            return wrap(a + b);
        if (op == "SUB")
            return wrap(a - b);
        if (op == "MUL")
            return wrap(a * b);
        return std::get<std::int64_t>(in[0]) < std::get<std::int64_t>(in[1]);
    }
    double a = std::get<double>(in[0]);
    double b = std::get<double>(in[1]);
    if (op == "ADD")
        return a + b;
    if (op == "SUB")
        return a - b;
    if (op == "MUL")
        return a * b;
    return a < b;
}

std::string node_name(const AsltTree& tree, NodeId id) {
    const auto& n = tree.node(id);
    if (n.kind == kinds::MacroOp || n.kind == kinds::MacroUse || n.kind == kinds::Instance) {
        auto m = tree.meta(id, keys::Name);
        return m && !m->is_list() ? m->to_text() : std::string{};
    }
    if (auto s = std::get_if<std::string>(&n.value))
        return *s;
    return {};
}

namespace {

[[noreturn]] void cannot(const std::string& msg) { fail(ErrorCode::CannotGenerate, msg); }

std::string meta_text(const AsltTree& tree, NodeId id, const char* key) {
    auto m = tree.meta(id, key);
    if (!m || !m->get_if<std::string>())
        cannot("node " + id.hex() + " lacks text meta " + key);
    return *m->get_if<std::string>();
}

PortDecl port_of(const AsltTree& tree, NodeId id, const char* dir_key) {
    PortDecl p;
    p.name = node_name(tree, id);
    auto dir = parse_port_dir(meta_text(tree, id, dir_key));
    auto type = parse_port_type(meta_text(tree, id, keys::PortType));
    if (p.name.empty() || !dir || !type)
        cannot("port " + id.hex() + " is incomplete");
    p.dir = *dir;
    p.type = *type;
    return p;
}

} // namespace

ComponentDef extract_component(const AsltTree& tree, NodeId node) {
    const auto& n = tree.node(node);
    ComponentDef def;
    def.kind = n.kind;
    def.name = node_name(tree, node);
    if (n.kind == kinds::Device) {
        for (auto c : n.children)
            if (tree.node(c).kind == kinds::Pin)
                def.ports.push_back(port_of(tree, c, keys::PinDirection));
        return def;
    }
    if (n.kind != kinds::Macro)
        fail(ErrorCode::InvalidArgument, "not a device or macro: " + n.kind);
    auto endpoint = [&](const std::string& hex, const std::string& port) {
        auto id = NodeId::parse(hex);
        if (!id || !tree.contains(*id) || tree.node(*id).parent != node)
            cannot("wire endpoint " + hex + " is not a member of " + def.name);
        if (tree.node(*id).kind == kinds::MacroPort)
            return Endpoint{"", node_name(tree, *id)};
        return Endpoint{node_name(tree, *id), port};
    };
    for (auto c : n.children) {
        const auto& child = tree.node(c);
        if (child.kind == kinds::MacroPort) {
            def.ports.push_back(port_of(tree, c, keys::PortDirection));
        } else if (child.kind == kinds::MacroOp || child.kind == kinds::MacroUse) {
            NodeDecl d;
            d.name = node_name(tree, c);
            auto op = std::get_if<std::string>(&child.value);
            if (!op)
                cannot("node " + c.hex() + " has no op");
            d.op = *op;
            if (auto lit = tree.meta(c, keys::Const); lit && !lit->is_list())
                d.literal = lit->scalar();
            def.nodes.push_back(std::move(d));
        } else if (child.kind == kinds::MacroWire) {
            def.wires.push_back({endpoint(meta_text(tree, c, keys::FromNode), meta_text(tree, c, keys::FromPort)),
                                 endpoint(meta_text(tree, c, keys::ToNode), meta_text(tree, c, keys::ToPort))});
        }
    }
    return def;
}

TypeLibrary extract_library(const AsltTree& tree) {
    TypeLibrary lib;
    for (auto c : tree.node(tree.root()).children) {
        const auto& k = tree.node(c).kind;
        if (k == kinds::Device || k == kinds::Macro) {
            auto def = extract_component(tree, c);
            auto name = def.name;
            lib.emplace(std::move(name), std::move(def));
        }
    }
    return lib;
}

TypeLibrary qualify_library(const TypeLibrary& library, const std::string& prefix) {
    TypeLibrary out;
    for (const auto& [name, def] : library) {
        ComponentDef q = def;
        q.name = prefix + "." + name;
        for (auto& n : q.nodes)
            if (!is_primitive_op(n.op))
                n.op = prefix + "." + n.op;
        out.emplace(q.name, std::move(q));
    }
    return out;
}

std::vector<std::size_t> component_order(const ComponentDef& def) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < def.nodes.size(); ++i)
        index.emplace(def.nodes[i].name, i);
    std::vector<std::set<std::size_t>> succ(def.nodes.size());
    std::vector<std::size_t> indeg(def.nodes.size(), 0);
    for (const auto& w : def.wires) {
        if (w.from.node.empty() || w.to.node.empty())
            continue;
        auto a = index.find(w.from.node);
        auto b = index.find(w.to.node);
        if (a == index.end() || b == index.end())
            continue;
        if (succ[a->second].insert(b->second).second)
            ++indeg[b->second];
    }
    std::set<std::pair<std::string, std::size_t>> ready;
    for (std::size_t i = 0; i < def.nodes.size(); ++i)
        if (indeg[i] == 0)
            ready.emplace(def.nodes[i].name, i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        auto [name, i] = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (auto j : succ[i])
            if (--indeg[j] == 0)
                ready.emplace(def.nodes[j].name, j);
    }
    if (order.size() != def.nodes.size()) {
        std::string names;
        for (std::size_t i = 0; i < def.nodes.size(); ++i)
            if (indeg[i] != 0)
                names += (names.empty() ? "" : ", ") + def.nodes[i].name;
        fail(ErrorCode::CycleError, "cycle in " + def.name + " through " + names);
    }
    return order;
}

namespace {

std::map<std::string, Scalar> evaluate_impl(const ComponentDef& def, const TypeLibrary& library,
                                            const std::map<std::string, Scalar>& inputs,
                                            std::vector<std::string>& stack) {
    if (std::find(stack.begin(), stack.end(), def.name) != stack.end())
        fail(ErrorCode::CycleError, "recursive composite " + def.name);
    stack.push_back(def.name);

    std::map<std::string, Scalar> values; // endpoint text -> value
    for (const auto& p : def.ports) {
        if (p.dir != PortDir::In)
            continue;
        auto it = inputs.find(p.name);
        if (it == inputs.end())
            input_error("missing input " + p.name + " for " + def.name);
        if (type_of(it->second) != p.type)
            input_error("input " + p.name + " of " + def.name + " must be " +
                        std::string(type_tag(p.type)));
        values[p.name] = it->second;
    }
    std::map<std::string, const Endpoint*> driver; // sink text -> source
    for (const auto& w : def.wires)
        driver[w.to.text()] = &w.from;
    auto read = [&](const Endpoint& sink) -> const Scalar& {
        auto d = driver.find(sink.text());
        if (d == driver.end())
            input_error("undriven " + sink.text() + " in " + def.name);
        auto v = values.find(d->second->text());
        if (v == values.end())
            input_error("no value at " + d->second->text() + " in " + def.name);
        return v->second;
    };

    for (auto i : component_order(def)) {
        const auto& n = def.nodes[i];
        if (is_primitive_op(n.op)) {
            std::vector<Scalar> in;
            for (std::size_t k = 0; k < op_arity(n.op); ++k)
                in.push_back(read({n.name, op_input_port(k)}));
            values[n.name + "." + std::string(kOpOutputPort)] = eval_op(n.op, in, n.literal);
            continue;
        }
        auto callee = library.find(n.op);
        if (callee == library.end() || callee->second.is_device())
            input_error("unknown composite " + n.op);
        std::map<std::string, Scalar> sub;
        for (const auto& p : callee->second.ports)
            if (p.dir == PortDir::In)
                sub[p.name] = read({n.name, p.name});
        for (auto& [port, v] : evaluate_impl(callee->second, library, sub, stack))
            values[n.name + "." + port] = std::move(v);
    }

    std::map<std::string, Scalar> out;
    for (const auto& p : def.ports)
        if (p.dir == PortDir::Out)
            out[p.name] = read({"", p.name});
    stack.pop_back();
    return out;
}

} // namespace

std::map<std::string, Scalar> evaluate_component(const ComponentDef& def, const TypeLibrary& library,
                                                 const std::map<std::string, Scalar>& inputs) {
    std::vector<std::string> stack;
    return evaluate_impl(def, library, inputs, stack);
}

} // namespace nbmvc
