#include "nbmvc/codegen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace nbmvc {

std::string content_hash(std::string_view content) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
    return buf;
}

Json artifact_to_json(const CodeArtifact& a) {
    return Json{{"path", a.path},
                {"language", a.language},
                {"content", a.content},
                {"source", a.source.hex()},
                {"hash", a.hash}};
}

namespace {

const std::string& tmpl(const DomainProfile& profile, const std::string& key) {
    auto it = profile.templates.find(key);
    if (it == profile.templates.end())
        fail(ErrorCode::CannotGenerate, "profile " + profile.name + " has no template '" + key + "'");
    return it->second;
}

CodeArtifact make_artifact(std::string path, std::string content, NodeId source) {
    CodeArtifact a;
    a.path = std::move(path);
    a.hash = content_hash(content);
    a.content = std::move(content);
    a.source = source;
    return a;
}

std::vector<WireDecl> sorted_wires(std::vector<WireDecl> wires) {
    std::sort(wires.begin(), wires.end(), [](const WireDecl& a, const WireDecl& b) {
        return std::pair{a.from.text(), a.to.text()} < std::pair{b.from.text(), b.to.text()};
    });
    return wires;
}

} // namespace

std::string render_component(const ComponentDef& def, const DomainProfile& profile) {
    std::string out = substitute(tmpl(profile, "component_open"), {{"name", def.name}, {"kind", def.kind}}) + "\n";
    auto line = [&](const std::string& text) { out += "  " + text + "\n"; };
    for (const auto& p : def.ports)
        line(substitute(tmpl(profile, "port"),
                        {{"dir", std::string(to_string(p.dir))}, {"name", p.name}, {"type", std::string(type_tag(p.type))}}));
    for (const auto& n : def.nodes)
        line(substitute(tmpl(profile, "node"), {{"name", n.name},
                                                {"op", n.op},
                                                {"literal", n.literal ? "(" + to_text(*n.literal) + ")" : ""}}));
    for (const auto& w : sorted_wires(def.wires))
        line(substitute(tmpl(profile, "wire"), {{"from", w.from.text()}, {"to", w.to.text()}}));
    out += substitute(tmpl(profile, "component_close"), {}) + "\n";
    return out;
}

CodeArtifact generate_component_code(const AsltTree& tree, NodeId node, const DomainProfile& profile) {
    if (!tree.contains(node))
        fail(ErrorCode::NotFound, "no node " + node.hex());
    const auto& kind = tree.node(node).kind;
    if (kind != kinds::Device && kind != kinds::Macro)
        fail(ErrorCode::CannotGenerate, kind + " is not a component");
    auto diags = validate_subtree(tree, profile, node);
    if (has_errors(diags))
        throw GenerateError("component " + node_name(tree, node) + " has validation errors", std::move(diags));
    auto def = extract_component(tree, node);
    return make_artifact(def.name + ".ndl", render_component(def, profile), node);
}

ApplicationDecl extract_application(const AsltTree& tree) {
    ApplicationDecl app;
    auto root = tree.root();
    app.name = to_text(tree.node(root).value);
    if (app.name.empty())
        app.name = "app";
    std::map<NodeId, std::string> names;
    for (auto c : tree.node(root).children) {
        if (tree.node(c).kind != kinds::Instance)
            continue;
        auto type = std::get_if<std::string>(&tree.node(c).value);
        app.instances.push_back({node_name(tree, c), type ? *type : std::string{}, c});
        names[c] = app.instances.back().name;
    }
    std::sort(app.instances.begin(), app.instances.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    for (auto c : tree.node(root).children) {
        if (tree.node(c).kind != kinds::TaskWire)
            continue;
        auto end = [&](const char* node_key, const char* port_key) {
            auto m = tree.meta(c, node_key);
            auto id = m && m->get_if<std::string>() ? NodeId::parse(*m->get_if<std::string>()) : std::nullopt;
            if (!id || !names.count(*id))
                fail(ErrorCode::CannotGenerate, "bind " + c.hex() + " does not connect two instances");
            auto p = tree.meta(c, port_key);
            return Endpoint{names[*id], p && p->get_if<std::string>() ? *p->get_if<std::string>() : ""};
        };
        app.binds.push_back({end(keys::FromNode, keys::FromPort), end(keys::ToNode, keys::ToPort)});
    }
    app.binds = sorted_wires(std::move(app.binds));
    return app;
}

std::vector<CodeArtifact> generate_application(const AsltTree& tree, const DomainProfile& profile) {
    auto diags = validate_model(tree, profile);
    if (has_errors(diags))
        throw GenerateError("application has validation errors", std::move(diags));
    auto app = extract_application(tree);

    std::vector<CodeArtifact> out;
    std::set<std::string> emitted;
    for (const auto& inst : app.instances) {
        std::vector<std::string> pending{inst.type};
        while (!pending.empty()) {
            auto type = pending.back();
            pending.pop_back();
            if (!emitted.insert(type).second)
                continue;
            auto it = profile.types.find(type);
            if (it == profile.types.end())
                fail(ErrorCode::CannotGenerate, "instance " + inst.name + " refers to unknown type '" + type + "'");
            for (const auto& n : it->second.nodes)
                if (!is_primitive_op(n.op))
                    pending.push_back(n.op);
            out.push_back(make_artifact(type + ".ndl", render_component(it->second, profile), inst.node));
        }
    }

    std::string text = substitute(tmpl(profile, "application_open"), {{"name", app.name}}) + "\n";
    for (const auto& inst : app.instances)
        text += "  " + substitute(tmpl(profile, "instance"), {{"name", inst.name}, {"type", inst.type}}) + "\n";
    for (const auto& b : app.binds)
        text += "  " + substitute(tmpl(profile, "bind"), {{"from", b.from.text()}, {"to", b.to.text()}}) + "\n";
    text += substitute(tmpl(profile, "application_close"), {}) + "\n";
    out.push_back(make_artifact(app.name + ".app.ndl", std::move(text), tree.root()));

    std::sort(out.begin(), out.end(), [](const CodeArtifact& a, const CodeArtifact& b) { return a.path < b.path; });
    return out;
}

} // namespace nbmvc
