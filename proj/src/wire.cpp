#include "nbmvc/wire.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <map>

namespace nbmvc {

namespace {

[[noreturn]] void malformed(std::string_view what) {
    fail(ErrorCode::ParseError, "malformed document: " + std::string(what));
}

NodeId id_field(const Json& j, const char* field) {
    auto text = require_string(j, field, field);
    auto id = NodeId::parse(text);
    if (!id)
        malformed(std::string("bad id in '") + field + "'");
    return *id;
}

std::uint64_t uint_field(const Json& j, const char* field) {
    if (!j.is_object() || !j.contains(field) || !j.at(field).is_number_unsigned())
        malformed(std::string("missing or negative '") + field + "'");
    return j.at(field).get<std::uint64_t>();
}

Json placement_to_json(const Placement& p) {
    return Json{{"parent", p.parent.hex()}, {"index", p.index}};
}

Placement placement_from_json(const Json& j) {
    return Placement{id_field(j, "parent"), uint_field(j, "index")};
}

Json fragment_to_json(const Fragment& f) {
    Json j = Json::object();
    if (f.placement)
        j["placement"] = placement_to_json(*f.placement);
    if (!f.subtree.empty()) {
        Json nodes = Json::array();
        for (const auto& n : f.subtree) {
            Json nj = node_to_json(n);
            nj.erase("index");
            Json kids = Json::array();
            for (NodeId c : n.children)
                kids.push_back(c.hex());
            nj["children"] = std::move(kids);
            nodes.push_back(std::move(nj));
        }
        j["subtree"] = std::move(nodes);
    }
    if (f.value)
        j["value"] = scalar_to_json(*f.value);
    if (f.meta)
        j["meta"] = meta_to_json(*f.meta);
    return j;
}

Fragment fragment_from_json(const Json& j) {
    if (!j.is_object())
        malformed("fragment is not an object");
    Fragment f;
    if (j.contains("placement"))
        f.placement = placement_from_json(j.at("placement"));
    if (j.contains("subtree")) {
        if (!j.at("subtree").is_array())
            malformed("subtree is not an array");
        for (const auto& nj : j.at("subtree")) {
            AsltNode n = node_from_json(nj);
            if (!nj.contains("children") || !nj.at("children").is_array())
                malformed("subtree node without children");
            for (const auto& c : nj.at("children")) {
                auto id = c.is_string() ? NodeId::parse(c.get<std::string>()) : std::nullopt;
                if (!id)
                    malformed("bad child id");
                n.children.push_back(*id);
            }
            f.subtree.push_back(std::move(n));
        }
    }
    if (j.contains("value"))
        f.value = scalar_from_json(j.at("value"));
    if (j.contains("meta"))
        f.meta = meta_from_json(j.at("meta"));
    return f;
}

} // namespace

std::string require_string(const Json& j, const char* field, std::string_view what) {
    if (!j.is_object() || !j.contains(field) || !j.at(field).is_string())
        fail(ErrorCode::ParseError,
             "malformed document: missing string '" + std::string(what) + "'");
    return j.at(field).get<std::string>();
}

Json scalar_to_json(const Scalar& value) {
    Json j;
    j["t"] = std::string(type_tag(type_of(value)));
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                j["v"] = nullptr;
            else
                j["v"] = v;
        },
        value);
    return j;
}

Scalar scalar_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("t") || !j.at("t").is_string() || !j.contains("v"))
        malformed("value must be {\"t\",\"v\"}");
    auto type = parse_type_tag(j.at("t").get<std::string>());
    if (!type)
        malformed("unknown value type '" + j.at("t").get<std::string>() + "'");
    const Json& v = j.at("v");
    switch (*type) {
    case ScalarType::None:
        if (!v.is_null())
            malformed("none value must be null");
        return Scalar{};
    case ScalarType::Bool:
        if (!v.is_boolean())
            malformed("bool value expected");
        return Scalar{v.get<bool>()};
    case ScalarType::Int:
        if (!v.is_number_integer())
            malformed("int value expected");
        if (v.is_number_unsigned() &&
            v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            malformed("int value out of range");
        return Scalar{v.get<std::int64_t>()};
    case ScalarType::Float:
        if (!v.is_number())
            malformed("float value expected");
        return Scalar{v.get<double>()};
    case ScalarType::Text:
        if (!v.is_string())
            malformed("text value expected");
        return Scalar{v.get<std::string>()};
    }
    malformed("unreachable value type");
}

Json meta_to_json(const MetaValue& value) {
    if (!value.is_list())
        return scalar_to_json(value.scalar());
    Json items = Json::array();
    for (const auto& s : value.list())
        items.push_back(scalar_to_json(s));
    return Json{{"t", "list"}, {"v", std::move(items)}};
}

MetaValue meta_from_json(const Json& j) {
    if (j.is_object() && j.contains("t") && j.at("t") == "list") {
        if (!j.contains("v") || !j.at("v").is_array())
            malformed("list meta needs an array");
        MetaValue::List items;
        for (const auto& item : j.at("v"))
            items.push_back(scalar_from_json(item));
        MetaValue mv(std::move(items));
        try {
            mv.check();
        } catch (const Error& e) {
            malformed(e.what());
        }
        return mv;
    }
    Scalar s = scalar_from_json(j);
    if (type_of(s) == ScalarType::None)
        malformed("meta value cannot be none");
    return MetaValue::from_scalar(s);
}

Json node_to_json(const AsltNode& node) {
    Json j;
    j["id"] = node.id.hex();
    j["kind"] = node.kind;
    j["parent"] = node.parent ? Json(node.parent->hex()) : Json(nullptr);
    j["index"] = 0;
    j["value"] = scalar_to_json(node.value);
    Json meta = Json::object();
    for (const auto& [k, v] : node.meta)
        meta[k] = meta_to_json(v);
    j["meta"] = std::move(meta);
    return j;
}

AsltNode node_from_json(const Json& j) {
    if (!j.is_object())
        malformed("node is not an object");
    AsltNode n;
    n.id = id_field(j, "id");
    n.kind = require_string(j, "kind", "kind");
    if (n.kind.empty())
        malformed("empty kind");
    if (!j.contains("parent"))
        malformed("node without parent field");
    if (!j.at("parent").is_null())
        n.parent = id_field(j, "parent");
    if (!j.contains("value"))
        malformed("node without value");
    n.value = scalar_from_json(j.at("value"));
    if (j.contains("meta")) {
        if (!j.at("meta").is_object())
            malformed("meta is not an object");
        for (const auto& [k, v] : j.at("meta").items()) {
            if (!is_meta_key(k))
                malformed("bad meta key '" + k + "'");
            n.meta.emplace(k, meta_from_json(v));
        }
    }
    return n;
}

Json change_to_json(const ChangeEvent& event) {
    Json j;
    j["seq"] = event.seq;
    j["kind"] = std::string(to_string(event.kind));
    j["node"] = event.node.hex();
    if (event.kind == ChangeKind::MetaChanged)
        j["key"] = event.key;
    j["before"] = fragment_to_json(event.before);
    j["after"] = fragment_to_json(event.after);
    return j;
}

ChangeEvent change_from_json(const Json& j) {
    ChangeEvent ev;
    ev.seq = uint_field(j, "seq");
    auto kind = parse_change_kind(require_string(j, "kind", "kind"));
    if (!kind)
        malformed("unknown change kind");
    ev.kind = *kind;
    ev.node = id_field(j, "node");
    if (ev.kind == ChangeKind::MetaChanged)
        ev.key = require_string(j, "key", "key");
    if (!j.contains("before") || !j.contains("after"))
        malformed("change without before/after");
    ev.before = fragment_from_json(j.at("before"));
    ev.after = fragment_from_json(j.at("after"));
    return ev;
}

Json tree_to_json(const AsltTree& tree) {
    Json j;
    j["schema"] = std::string(kNbmSchema);
    j["domain"] = tree.domain();
    j["root"] = tree.root().hex();
    j["version"] = tree.version();
    Json nodes = Json::array();
    for (NodeId id : tree.document_order()) {
        const auto& n = tree.node(id);
        Json nj = node_to_json(n);
        nj["index"] = tree.index_in_parent(id);
        nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

AsltTree tree_from_json(const Json& j) {
    if (!j.is_object())
        malformed("top level is not an object");
    auto schema = require_string(j, "schema", "schema");
    if (schema != kNbmSchema)
        fail(ErrorCode::UnsupportedVersion, "unsupported schema '" + schema + "'");
    std::string domain = require_string(j, "domain", "domain");
    NodeId root = id_field(j, "root");
    std::uint64_t version = uint_field(j, "version");
    if (!j.contains("nodes") || !j.at("nodes").is_array())
        malformed("missing nodes array");

    std::vector<AsltNode> nodes;
    std::map<NodeId, std::map<std::uint64_t, NodeId>> slots;
    for (const auto& nj : j.at("nodes")) {
        AsltNode n = node_from_json(nj);
        std::uint64_t index = uint_field(nj, "index");
        if (n.parent && !slots[*n.parent].emplace(index, n.id).second)
            malformed("two children share index " + std::to_string(index));
        nodes.push_back(std::move(n));
    }
    for (auto& n : nodes) {
        auto it = slots.find(n.id);
        if (it == slots.end())
            continue;
        std::uint64_t expect = 0;
        for (const auto& [index, child] : it->second) {
            if (index != expect++)
                malformed("child indices of " + n.id.hex() + " are not gap-free");
            n.children.push_back(child);
        }
    }
    auto root_it = std::find_if(nodes.begin(), nodes.end(),
                                [&](const AsltNode& n) { return n.id == root; });
    if (root_it == nodes.end() || root_it->parent)
        malformed("root node missing or has a parent");
    IdMinter minter(splitmix64(root.hi ^ splitmix64(root.lo ^ version)));
    try {
        return AsltTree::from_parts(root, std::move(domain), version, std::move(nodes), minter);
    } catch (const Error& e) {
        malformed(e.what());
    }
}

std::string serialize(const AsltTree& tree) {
    return tree_to_json(tree).dump(1) + "\n";
}

AsltTree deserialize(std::string_view bytes) {
    Json j;
    try {
        j = Json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("parse error: ") + e.what());
    }
    return tree_from_json(j);
}

} // namespace nbmvc
