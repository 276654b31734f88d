#include "nbmvc/domain.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <functional>

namespace nbmvc {

namespace detail {
std::string_view builtin_profile_text(std::string_view name);
}

namespace {

[[noreturn]] void profile_error(const std::string& where, const std::string& msg) {
    fail(ErrorCode::ProfileError, "profile " + where + ": " + msg);
}

std::string str_field(const Json& j, const char* key, const std::string& where, bool required = true) {
    if (!j.is_object())
        profile_error(where, "expected an object");
    if (!j.contains(key)) {
        if (required)
            profile_error(where, std::string("missing '") + key + "'");
        return {};
    }
    if (!j.at(key).is_string())
        profile_error(where + "." + key, "expected text");
    return j.at(key).get<std::string>();
}

WizardField field_from_json(const Json& j, const std::string& where) {
    WizardField f;
    f.name = str_field(j, "name", where);
    auto type = parse_type_tag(str_field(j, "type", where));
    if (!type || *type == ScalarType::None)
        profile_error(where + ".type", "unknown type");
    f.type = *type;
    f.constraint = str_field(j, "constraint", where, false);
    if (!f.constraint.empty() && f.constraint != "identifier")
        profile_error(where + ".constraint", "unknown constraint '" + f.constraint + "'");
    if (j.contains("options"))
        for (const auto& o : j.at("options")) {
            if (!o.is_string())
                profile_error(where + ".options", "expected text");
            f.options.push_back(o.get<std::string>());
        }
    if (j.contains("min"))
        f.min = j.at("min").get<std::int64_t>();
    if (j.contains("max"))
        f.max = j.at("max").get<std::int64_t>();
    if (j.contains("default")) {
        try {
            f.default_value = check_answer(f, plain_scalar_from_json(j.at("default")));
        } catch (const Error& e) {
            profile_error(where + ".default", e.what());
        }
    }
    return f;
}

std::vector<std::string> string_list(const Json& j, const std::string& where) {
    std::vector<std::string> out;
    if (!j.is_array())
        profile_error(where, "expected a list");
    for (const auto& s : j) {
        if (!s.is_string())
            profile_error(where, "expected text items");
        out.push_back(s.get<std::string>());
    }
    return out;
}

const std::set<std::string> kKnownValidators = {"structure", "names",    "pins",   "arity", "dangling",
                                                 "types",     "acyclic", "composites", "instances", "drive"};

} // namespace

Json wizard_to_json(const WizardSpec& spec) {
    Json fields = Json::array();
    for (const auto& f : spec.fields) {
        Json jf{{"name", f.name}, {"type", std::string(type_tag(f.type))}};
        jf["required"] = f.required();
        if (!f.required())
            jf["default"] = plain_scalar_to_json(f.default_value);
        if (!f.constraint.empty())
            jf["constraint"] = f.constraint;
        if (!f.options.empty())
            jf["options"] = f.options;
        if (f.min)
            jf["min"] = *f.min;
        if (f.max)
            jf["max"] = *f.max;
        fields.push_back(std::move(jf));
    }
    return Json{{"id", spec.id}, {"produced_for", std::string(to_string(spec.produced_for))}, {"fields", fields}};
}

Scalar check_answer(const WizardField& field, const Scalar& answer) {
    auto bad = [&](const std::string& why) -> Scalar {
        throw Error(ErrorCode::InvalidAnswer, "invalid answer for '" + field.name + "': " + why);
    };
    Scalar v = answer;
    if (auto s = std::get_if<std::string>(&answer); s && field.type != ScalarType::Text) {
        try {
            v = parse_scalar(field.type, *s);
        } catch (const Error&) {
            return bad("expected " + std::string(type_tag(field.type)));
        }
    }
    if (field.type == ScalarType::Float && std::holds_alternative<std::int64_t>(v))
        v = static_cast<double>(std::get<std::int64_t>(v));
    if (type_of(v) != field.type)
        return bad("expected " + std::string(type_tag(field.type)));
    if (field.constraint == "identifier" && !is_identifier(std::get<std::string>(v)))
        return bad("not an identifier");
    if (!field.options.empty() &&
        std::find(field.options.begin(), field.options.end(), to_text(v)) == field.options.end())
        return bad("not one of the allowed options");
    if (auto i = std::get_if<std::int64_t>(&v)) {
        if (field.min && *i < *field.min)
            return bad("below minimum " + std::to_string(*field.min));
        if (field.max && *i > *field.max)
            return bad("above maximum " + std::to_string(*field.max));
    }
    return v;
}

Json palette_entry_to_json(const PaletteEntry& e) {
    Json payload = Json::object();
    for (const auto& [k, v] : e.payload)
        payload[k] = plain_scalar_to_json(v);
    return Json{{"id", e.id},           {"glyph", e.glyph},   {"kind", e.kind},
                {"container", e.container}, {"wizard", e.wizard.empty() ? Json(nullptr) : Json(e.wizard)},
                {"payload", payload}};
}

std::string PortType::text() const { return std::string(type_tag(tag)) + "/" + std::string(to_string(dir)); }

std::optional<PortType> parse_port_type_decl(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos)
        return std::nullopt;
    auto tag = parse_port_type(text.substr(0, slash));
    auto dir = parse_port_dir(text.substr(slash + 1));
    if (!tag || !dir)
        return std::nullopt;
    return PortType{*tag, *dir};
}

const PaletteEntry* DomainProfile::entry(std::string_view id) const {
    for (const auto& e : palette)
        if (e.id == id)
            return &e;
    return nullptr;
}

const WizardSpec* DomainProfile::wizard(std::string_view id) const {
    auto it = wizards.find(std::string(id));
    return it == wizards.end() ? nullptr : &it->second;
}

const SymbolStyle* DomainProfile::style(std::string_view kind) const {
    auto it = symbols.find(std::string(kind));
    return it == symbols.end() ? nullptr : &it->second;
}

bool DomainProfile::binding_allowed(const PortType& from, const PortType& to) const {
    auto it = binding_rules.find({from, to});
    return it != binding_rules.end() && it->second;
}

const Json& builtin_profile_document(const std::string& name) {
    static const std::map<std::string, Json> docs = [] {
        std::map<std::string, Json> m;
        for (auto n : kBuiltinProfiles)
            m.emplace(n, Json::parse(detail::builtin_profile_text(n)));
        return m;
    }();
    auto it = docs.find(name);
    if (it == docs.end())
        fail(ErrorCode::ProfileError, "unknown profile '" + name + "'");
    return it->second;
}

DomainProfile load_profile(const std::string& name, const TypeLibrary& types) {
    return load_profile_document(builtin_profile_document(name), types);
}

DomainProfile load_profile_document(const Json& doc, const TypeLibrary& types) {
    DomainProfile p;
    p.document = doc;
    p.name = str_field(doc, "name", "document");
    if (p.name.empty() || p.name.find('.') != std::string::npos)
        profile_error("name", "must be non-empty and dot-free");
    p.root_kind = str_field(doc, "root_kind", p.name);
    const std::string at = p.name;

    if (doc.contains("symbols")) {
        for (const auto& [kind, s] : doc.at("symbols").items()) {
            const std::string where = at + ".symbols." + kind;
            SymbolStyle st;
            st.glyph = str_field(s, "glyph", where);
            st.w = s.value("w", 80.0);
            st.h = s.value("h", 40.0);
            st.label = str_field(s, "label", where, false);
            st.connectors = str_field(s, "connectors", where, false);
            st.submodel = s.value("submodel", false);
            static const std::set<std::string> rules = {"", "macro.port", "op", "use", "instance"};
            if (!rules.count(st.connectors))
                profile_error(where + ".connectors", "unknown rule '" + st.connectors + "'");
            if (!(st.label.empty() || st.label == "value" || st.label.starts_with("meta:")))
                profile_error(where + ".label", "expected value or meta:<key>");
            p.symbols.emplace(kind, std::move(st));
        }
    }
    if (doc.contains("relations"))
        for (auto& r : string_list(doc.at("relations"), at + ".relations"))
            p.relations.insert(r);
    if (doc.contains("fields")) {
        for (const auto& [kind, fields] : doc.at("fields").items())
            for (const auto& [field, t] : fields.items()) {
                const std::string where = at + ".fields." + kind + "." + field;
                FieldTarget ft{str_field(t, "target", where), str_field(t, "key", where, false),
                               str_field(t, "type", where)};
                if (ft.target != "value" && !(ft.target == "meta" && is_meta_key(ft.key)))
                    profile_error(where, "target must be value or meta with a key");
                if (ft.type != "same" && !parse_type_tag(ft.type))
                    profile_error(where + ".type", "unknown type");
                p.fields[kind][field] = ft;
            }
    }

    if (doc.contains("wizards")) {
        const auto& ws = doc.at("wizards");
        for (std::size_t i = 0; i < ws.size(); ++i) {
            const std::string where = at + ".wizards[" + std::to_string(i) + "]";
            WizardSpec spec;
            spec.id = str_field(ws[i], "id", where);
            auto kind = parse_model_event_kind(str_field(ws[i], "produced_for", where));
            if (!kind)
                profile_error(where + ".produced_for", "unknown event kind");
            spec.produced_for = *kind;
            if (ws[i].contains("fields"))
                for (std::size_t k = 0; k < ws[i].at("fields").size(); ++k)
                    spec.fields.push_back(
                        field_from_json(ws[i].at("fields")[k], where + ".fields[" + std::to_string(k) + "]"));
            if (!p.wizards.emplace(spec.id, spec).second)
                profile_error(where, "duplicate wizard '" + spec.id + "'");
        }
    }

    auto add_entry = [&](PaletteEntry e, const std::string& where) {
        if (e.id.empty() || e.glyph.empty() || e.kind.empty())
            profile_error(where, "palette entries need id, glyph and kind");
        if (p.entry(e.id))
            profile_error(where, "duplicate palette id '" + e.id + "'");
        if (!p.style(e.kind))
            profile_error(where, "kind '" + e.kind + "' has no symbol");
        if (!e.wizard.empty() && !p.wizard(e.wizard))
            profile_error(where, "unknown wizard '" + e.wizard + "'");
        p.palette.push_back(std::move(e));
    };
    if (doc.contains("palette")) {
        const auto& pal = doc.at("palette");
        for (std::size_t i = 0; i < pal.size(); ++i) {
            const std::string where = at + ".palette[" + std::to_string(i) + "]";
            PaletteEntry e;
            e.id = str_field(pal[i], "id", where);
            e.glyph = str_field(pal[i], "glyph", where);
            e.kind = str_field(pal[i], "kind", where);
            e.container = str_field(pal[i], "container", where, false);
            e.wizard = str_field(pal[i], "wizard", where, false);
            if (pal[i].contains("payload"))
                for (const auto& [k, v] : pal[i].at("payload").items())
                    e.payload[k] = plain_scalar_from_json(v);
            add_entry(std::move(e), where);
        }
    }
    if (p.style(kinds::Instance)) {
        for (const auto& [type, def] : types) {
            PaletteEntry e;
            e.id = "type." + type;
            e.glyph = std::string(kinds::Instance);
            e.kind = std::string(kinds::Instance);
            e.container = p.root_kind;
            e.wizard = p.wizard(kinds::Instance) ? std::string(kinds::Instance) : std::string{};
            e.payload["value"] = type;
            add_entry(std::move(e), at + ".types." + type);
        }
        p.types = types;
    }

    if (doc.contains("port_types"))
        for (auto& t : string_list(doc.at("port_types"), at + ".port_types")) {
            auto pt = parse_port_type_decl(t);
            if (!pt)
                profile_error(at + ".port_types", "bad port type '" + t + "'");
            p.port_types.push_back(*pt);
        }
    if (doc.contains("binding_rules")) {
        const auto& rs = doc.at("binding_rules");
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const std::string where = at + ".binding_rules[" + std::to_string(i) + "]";
            auto from = parse_port_type_decl(str_field(rs[i], "from", where));
            auto to = parse_port_type_decl(str_field(rs[i], "to", where));
            if (!from || !to || !rs[i].contains("allowed") || !rs[i].at("allowed").is_boolean())
                profile_error(where, "expected {from, to, allowed}");
            p.binding_rules[{*from, *to}] = rs[i].at("allowed").get<bool>();
        }
    }
    for (const auto& a : p.port_types)
        for (const auto& b : p.port_types)
            if (!p.binding_rules.count({a, b}))
                profile_error(at + ".binding_rules", "no rule for " + a.text() + " -> " + b.text());

    if (doc.contains("processors")) {
        const auto& ps = doc.at("processors");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            try {
                p.registry.add(processor_from_json(ps[i], p.name));
            } catch (const Error& e) {
                profile_error(at + ".processors[" + std::to_string(i) + "]", e.what());
            }
        }
    }
    if (doc.contains("unsupported"))
        for (auto& k : string_list(doc.at("unsupported"), at + ".unsupported")) {
            auto kind = parse_model_event_kind(k);
            if (!kind)
                profile_error(at + ".unsupported", "unknown event kind '" + k + "'");
            p.registry.mark_unsupported(p.name, *kind);
        }
    for (auto kind : kAllModelEventKinds)
        if (!p.registry.find(p.name, kind) && !p.registry.is_unsupported(p.name, kind))
            profile_error(at + ".processors",
                          "no processor and no unsupported marker for " + std::string(to_string(kind)));

    if (doc.contains("validators"))
        for (auto& v : string_list(doc.at("validators"), at + ".validators")) {
            if (!kKnownValidators.count(v))
                profile_error(at + ".validators", "unknown rule '" + v + "'");
            p.validators.push_back(v);
        }
    if (doc.contains("templates"))
        for (const auto& [k, v] : doc.at("templates").items()) {
            if (!v.is_string())
                profile_error(at + ".templates." + k, "expected text");
            p.templates[k] = v.get<std::string>();
        }
    return p;
}

std::vector<PaletteEntry> effective_palette(const DomainProfile& profile, const AsltTree& tree) {
    auto out = profile.palette;
    if (tree.node(tree.root()).kind == kinds::TaskApp) {
        // One entry per known component type.
        for (const auto& [type, def] : profile.types) {
            PaletteEntry e;
            e.id = "inst." + type;
            e.glyph = std::string(kinds::Instance);
            e.kind = std::string(kinds::Instance);
            e.container = std::string(kinds::TaskApp);
            e.wizard = profile.wizard("task.instance") ? "task.instance" : "";
            e.payload["value"] = type;
            out.push_back(std::move(e));
        }
        return out;
    }
    if (!profile.style(kinds::MacroUse) || tree.node(tree.root()).kind != kinds::MacroLibrary)
        return out;
    std::vector<std::string> names;
    for (auto c : tree.node(tree.root()).children)
        if (tree.node(c).kind == kinds::Macro && is_identifier(node_name(tree, c)))
            names.push_back(node_name(tree, c));
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    for (const auto& n : names) {
        PaletteEntry e;
        e.id = "use." + n;
        e.glyph = std::string(kinds::MacroUse);
        e.kind = std::string(kinds::MacroUse);
        e.container = std::string(kinds::Macro);
        e.wizard = profile.wizard("macro.node") ? "macro.node" : "";
        e.payload["value"] = n;
        e.payload["name_in"] = "meta";
        out.push_back(std::move(e));
    }
    return out;
}

std::set<std::string> palette_glyphs(const std::vector<PaletteEntry>& palette) {
    std::set<std::string> out{kFallbackGlyph};
    for (const auto& e : palette)
        out.insert(e.glyph);
    return out;
}

namespace {

std::optional<std::string> text_meta(const AsltTree& tree, NodeId id, const char* key) {
    auto m = tree.meta(id, key);
    if (!m)
        return std::nullopt;
    if (auto s = m->get_if<std::string>())
        return *s;
    return std::nullopt;
}

std::optional<NodeId> find_macro(const AsltTree& tree, const std::string& name) {
    for (auto c : tree.node(tree.root()).children)
        if (tree.node(c).kind == kinds::Macro && node_name(tree, c) == name)
            return c;
    return std::nullopt;
}

ScalarType meta_port_type(const AsltTree& tree, NodeId id) {
    auto t = text_meta(tree, id, keys::PortType);
    auto pt = t ? parse_port_type(*t) : std::nullopt;
    return pt.value_or(ScalarType::None);
}

} // namespace

std::vector<Connector> connectors(const AsltTree& tree, NodeId node, const DomainProfile& profile) {
    const auto& n = tree.node(node);
    const auto* style = profile.style(n.kind);
    std::vector<Connector> out;
    if (!style)
        return out;
    const auto* value = std::get_if<std::string>(&n.value);
    if (style->connectors == "macro.port") {
        auto dir = text_meta(tree, node, keys::PortDirection);
        auto d = dir ? parse_port_dir(*dir) : std::nullopt;
        if (d == PortDir::In)
            out.push_back({"out", PortDir::Out, meta_port_type(tree, node)});
        else if (d == PortDir::Out)
            out.push_back({"in", PortDir::In, meta_port_type(tree, node)});
    } else if (style->connectors == "op") {
        if (!value || !is_primitive_op(*value))
            return out;
        for (std::size_t i = 0; i < op_arity(*value); ++i)
            out.push_back({op_input_port(i), PortDir::In, ScalarType::None});
        ScalarType t = ScalarType::None;
        if (*value == "CONST")
            if (auto lit = tree.meta(node, keys::Const); lit && !lit->is_list())
                t = type_of(lit->scalar());
        out.push_back({std::string(kOpOutputPort), PortDir::Out, t});
    } else if (style->connectors == "use") {
        if (!value)
            return out;
        auto m = find_macro(tree, *value);
        if (!m)
            return out;
        for (auto c : tree.node(*m).children) {
            if (tree.node(c).kind != kinds::MacroPort)
                continue;
            auto dir = text_meta(tree, c, keys::PortDirection);
            auto d = dir ? parse_port_dir(*dir) : std::nullopt;
            if (d)
                out.push_back({node_name(tree, c), *d, meta_port_type(tree, c)});
        }
    } else if (style->connectors == "instance") {
        if (!value)
            return out;
        auto it = profile.types.find(*value);
        if (it == profile.types.end())
            return out;
        bool device = it->second.is_device();
        for (const auto& port : it->second.ports) {
            PortDir d = port.dir;
            if (device)
                d = port.dir == PortDir::In ? PortDir::Out : PortDir::In;
            out.push_back({port.name, d, port.type});
        }
    }
    return out;
}

PortTypeMap infer_port_types(const AsltTree& tree, const DomainProfile& profile, NodeId container) {
    // Op outputs are typed in wiring order; polymorphic ports stay unknown
    // until their drivers are.
    PortTypeMap known;
    std::map<std::pair<NodeId, std::string>, std::pair<NodeId, std::string>> driver;
    const auto& children = tree.node(container).children;
    for (auto c : children) {
        if (!profile.is_relation(tree.node(c).kind)) {
            for (const auto& conn : connectors(tree, c, profile))
                if (conn.type != ScalarType::None)
                    known[{c, conn.name}] = conn.type;
            continue;
        }
        auto end = [&](const char* key) -> std::optional<NodeId> {
            auto t = text_meta(tree, c, key);
            auto id = t ? NodeId::parse(*t) : std::nullopt;
            if (!id || !tree.contains(*id) || tree.node(*id).parent != container)
                return std::nullopt;
            return id;
        };
        auto from = end(keys::FromNode);
        auto to = end(keys::ToNode);
        if (from && to)
            driver[{*to, text_meta(tree, c, keys::ToPort).value_or("")}] = {
                *from, text_meta(tree, c, keys::FromPort).value_or("")};
    }
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto c : children) {
            const auto* op = std::get_if<std::string>(&tree.node(c).value);
            if (tree.node(c).kind != kinds::MacroOp || !op || !is_primitive_op(*op) || *op == "CONST" ||
                known.count({c, std::string(kOpOutputPort)}))
                continue;
            std::vector<ScalarType> in;
            for (std::size_t i = 0; i < op_arity(*op); ++i) {
                auto d = driver.find({c, op_input_port(i)});
                if (d == driver.end() || !known.count(d->second))
                    break;
                in.push_back(known[d->second]);
            }
            if (in.size() != op_arity(*op))
                continue;
            if (auto r = op_result_type(*op, in, std::nullopt)) {
                known[{c, std::string(kOpOutputPort)}] = *r;
                progress = true;
            }
        }
    }
    return known;
}

std::string_view to_string(Severity severity) { return severity == Severity::Error ? "error" : "warning"; }

Json diagnostic_to_json(const Diagnostic& d) {
    return Json{{"severity", std::string(to_string(d.severity))},
                {"node", d.node ? Json(d.node->hex()) : Json(nullptr)},
                {"rule", d.rule},
                {"message", d.message}};
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

bool is_identifier(std::string_view text) {
    if (text.empty() || is_primitive_op(text))
        return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    if (!alpha(text[0]))
        return false;
    return std::all_of(text.begin(), text.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

namespace {

struct WireEnds {
    NodeId wire;
    std::optional<NodeId> from, to;
    std::string from_port, to_port;
};

class Validator {
public:
    Validator(const AsltTree& tree, const DomainProfile& profile) : tree_(tree), profile_(profile) {}

    std::vector<Diagnostic> run() {
        for (const auto& rule : profile_.validators) {
            rule_ = rule;
            if (rule == "structure")
                structure();
            else if (rule == "names")
                names();
            else if (rule == "pins")
                pins();
            else if (rule == "arity")
                each_container([&](NodeId c) { arity(c); });
            else if (rule == "dangling")
                each_container([&](NodeId c) { dangling(c); });
            else if (rule == "types")
                each_container([&](NodeId c) { types(c); });
            else if (rule == "acyclic")
                each_container([&](NodeId c) { acyclic(c); });
            else if (rule == "composites")
                composites();
            else if (rule == "instances")
                instances();
            else if (rule == "drive")
                each_container([&](NodeId c) { drive(c); });
        }
        std::map<NodeId, std::size_t> order;
        auto doc = tree_.document_order();
        for (std::size_t i = 0; i < doc.size(); ++i)
            order[doc[i]] = i;
        std::stable_sort(out_.begin(), out_.end(), [&](const Diagnostic& a, const Diagnostic& b) {
            auto ka = a.node ? order[*a.node] : 0;
            auto kb = b.node ? order[*b.node] : 0;
            return ka < kb;
        });
        return std::move(out_);
    }

private:
    void report(std::optional<NodeId> node, std::string msg, Severity sev = Severity::Error) {
        out_.push_back({sev, node, rule_, std::move(msg)});
    }

    /// Nodes holding relation children: macros, or the task root.
    void each_container(const std::function<void(NodeId)>& fn) {
        const auto& root = tree_.node(tree_.root());
        if (root.kind == kinds::TaskApp) {
            fn(root.id);
            return;
        }
        for (auto c : root.children)
            if (tree_.node(c).kind == kinds::Macro)
                fn(c);
    }

    bool is_member(NodeId n) const { return !profile_.is_relation(tree_.node(n).kind); }

    WireEnds ends(NodeId wire) const {
        WireEnds e{wire, {}, {}, {}, {}};
        auto resolve = [&](const char* key) -> std::optional<NodeId> {
            auto t = text_meta(tree_, wire, key);
            if (!t)
                return std::nullopt;
            auto id = NodeId::parse(*t);
            if (!id || !tree_.contains(*id) || tree_.node(*id).parent != tree_.node(wire).parent ||
                !is_member(*id))
                return std::nullopt;
            return id;
        };
        e.from = resolve(keys::FromNode);
        e.to = resolve(keys::ToNode);
        e.from_port = text_meta(tree_, wire, keys::FromPort).value_or("");
        e.to_port = text_meta(tree_, wire, keys::ToPort).value_or("");
        return e;
    }

    std::vector<WireEnds> wires(NodeId container) const {
        std::vector<WireEnds> out;
        for (auto c : tree_.node(container).children)
            if (profile_.is_relation(tree_.node(c).kind))
                out.push_back(ends(c));
        return out;
    }

    std::optional<Connector> connector(NodeId node, const std::string& port) const {
        for (auto& c : connectors(tree_, node, profile_))
            if (c.name == port)
                return c;
        return std::nullopt;
    }

    std::string label(NodeId n) const {
        auto name = node_name(tree_, n);
        return name.empty() ? tree_.node(n).kind + " " + n.hex() : name;
    }

    void structure() {
        if (tree_.node(tree_.root()).kind != profile_.root_kind)
            report(tree_.root(), "root must be " + profile_.root_kind);
        std::map<std::string, std::vector<std::string>> containment;
        if (profile_.document.contains("containment"))
            for (const auto& [k, v] : profile_.document.at("containment").items())
                for (const auto& p : v)
                    containment[k].push_back(p.get<std::string>());
        for (auto id : tree_.document_order()) {
            if (id == tree_.root())
                continue;
            const auto& n = tree_.node(id);
            auto it = containment.find(n.kind);
            if (it == containment.end()) {
                report(id, "unknown kind '" + n.kind + "'", Severity::Warning);
                continue;
            }
            const auto& parent_kind = tree_.node(*n.parent).kind;
            if (std::find(it->second.begin(), it->second.end(), parent_kind) == it->second.end())
                report(id, n.kind + " may not be placed under " + parent_kind);
        }
    }

    void names() {
        for (auto id : tree_.document_order()) {
            const auto& n = tree_.node(id);
            std::map<std::string, std::vector<NodeId>> seen;
            for (auto c : n.children) {
                const auto& k = tree_.node(c).kind;
                if (profile_.is_relation(k) || !profile_.style(k))
                    continue;
                auto name = node_name(tree_, c);
                if (!is_identifier(name)) {
                    report(c, "'" + name + "' is not a valid name");
                    continue;
                }
                // Ports and inner nodes live in separate endpoint namespaces.
                std::string scope = k == kinds::MacroPort ? "port" : "node";
                seen[scope + ":" + name].push_back(c);
            }
            for (const auto& [key, ids] : seen)
                for (std::size_t i = 1; i < ids.size(); ++i)
                    report(ids[i], "duplicate name '" + key.substr(key.find(':') + 1) + "'");
        }
    }

    void pins() {
        for (auto id : tree_.document_order()) {
            if (tree_.node(id).kind != kinds::Pin)
                continue;
            auto dir = text_meta(tree_, id, keys::PinDirection);
            if (!dir || !parse_port_dir(*dir))
                report(id, "pin " + label(id) + " needs io.direction in or out");
            if (meta_port_type(tree_, id) == ScalarType::None)
                report(id, "pin " + label(id) + " needs port.type bool, int or float");
            if (!text_meta(tree_, id, keys::PinAddress))
                report(id, "pin " + label(id) + " needs a text io.address");
        }
    }

    /// Counts drivers per sink connector of members of `container`.
    std::map<std::pair<NodeId, std::string>, int> drivers(NodeId container) const {
        std::map<std::pair<NodeId, std::string>, int> count;
        for (const auto& w : wires(container))
            if (w.to)
                ++count[{*w.to, w.to_port}];
        return count;
    }

    void arity(NodeId macro) {
        for (auto c : tree_.node(macro).children) {
            const auto& n = tree_.node(c);
            if (n.kind == kinds::MacroPort) {
                auto dir = text_meta(tree_, c, keys::PortDirection);
                if (!dir || !parse_port_dir(*dir))
                    report(c, "port " + label(c) + " needs port.direction in or out");
                if (meta_port_type(tree_, c) == ScalarType::None)
                    report(c, "port " + label(c) + " needs port.type bool, int or float");
            } else if (n.kind == kinds::MacroOp) {
                auto op = std::get_if<std::string>(&n.value);
                if (!op || !is_primitive_op(*op)) {
                    report(c, "node " + label(c) + " has unknown op");
                    continue;
                }
                if (*op == "CONST") {
                    auto lit = tree_.meta(c, keys::Const);
                    if (!lit || lit->is_list() || !parse_port_type(type_tag(type_of(lit->scalar()))))
                        report(c, "CONST " + label(c) + " needs a bool, int or float literal");
                }
            }
        }
        driven(macro);
    }

    void dangling(NodeId container) {
        for (const auto& w : wires(container)) {
            if (!w.from || !w.to) {
                report(w.wire, "binding endpoint missing or outside " + label(container));
                continue;
            }
            if (!connector(*w.from, w.from_port))
                report(w.wire, label(*w.from) + " has no port '" + w.from_port + "'");
            if (!connector(*w.to, w.to_port))
                report(w.wire, label(*w.to) + " has no port '" + w.to_port + "'");
        }
    }

    void types(NodeId container) {
        auto known = infer_port_types(tree_, profile_, container);
        std::map<std::pair<NodeId, std::string>, std::pair<NodeId, std::string>> driver;
        auto ws = wires(container);
        for (const auto& w : ws)
            if (w.from && w.to)
                driver[{*w.to, w.to_port}] = {*w.from, w.from_port};
        // Ops whose inputs are all typed but whose output is not reject them.
        for (auto c : tree_.node(container).children) {
            auto op = std::get_if<std::string>(&tree_.node(c).value);
            if (tree_.node(c).kind != kinds::MacroOp || !op || !is_primitive_op(*op) || *op == "CONST" ||
                known.count({c, std::string(kOpOutputPort)}))
                continue;
            std::vector<ScalarType> in;
            for (std::size_t i = 0; i < op_arity(*op); ++i) {
                auto d = driver.find({c, op_input_port(i)});
                if (d == driver.end() || !known.count(d->second))
                    break;
                in.push_back(known[d->second]);
            }
            if (in.size() != op_arity(*op))
                continue;
            std::string sig;
            for (auto t : in)
                sig += (sig.empty() ? "" : ", ") + std::string(type_tag(t));
            report(c, *op + " " + label(c) + " does not accept (" + sig + ")");
        }
        for (const auto& w : ws) {
            if (!w.from || !w.to)
                continue;
            auto a = connector(*w.from, w.from_port);
            auto b = connector(*w.to, w.to_port);
            if (!a || !b)
                continue;
            if (a->dir != PortDir::Out || b->dir != PortDir::In) {
                report(w.wire, "binding " + label(*w.from) + "." + w.from_port + " -> " + label(*w.to) + "." +
                                   w.to_port + " must connect an output to an input");
                continue;
            }
            auto ta = known.find({*w.from, w.from_port});
            auto tb = known.find({*w.to, w.to_port});
            if (ta == known.end() || tb == known.end())
                continue;
            PortType from{ta->second, PortDir::Out}, to{tb->second, PortDir::In};
            if (!profile_.binding_allowed(from, to))
                report(w.wire, "binding " + from.text() + " -> " + to.text() + " is not allowed");
        }
    }

    void acyclic(NodeId container) {
        // Edges between members, skipping device instances whose reads and
        // writes happen in separate phases.
        std::map<NodeId, std::set<NodeId>> succ;
        std::map<NodeId, int> indeg;
        for (auto c : tree_.node(container).children)
            if (is_member(c) && !is_device_instance(c))
                indeg[c] = 0;
        for (const auto& w : wires(container))
            if (w.from && w.to && indeg.count(*w.from) && indeg.count(*w.to))
                if (succ[*w.from].insert(*w.to).second)
                    ++indeg[*w.to];
        std::vector<NodeId> ready;
        for (auto& [n, d] : indeg)
            if (d == 0)
                ready.push_back(n);
        std::size_t done = 0;
        while (!ready.empty()) {
            auto n = ready.back();
            ready.pop_back();
            ++done;
            for (auto s : succ[n])
                if (--indeg[s] == 0)
                    ready.push_back(s);
        }
        if (done == indeg.size())
            return;
        std::string names;
        std::optional<NodeId> first;
        for (auto c : tree_.node(container).children)
            if (indeg.count(c) && indeg[c] > 0) {
                names += (names.empty() ? "" : ", ") + label(c);
                if (!first)
                    first = c;
            }
        report(first, "cycle through " + names);
    }

    bool is_device_instance(NodeId n) const {
        if (tree_.node(n).kind != kinds::Instance)
            return false;
        auto v = std::get_if<std::string>(&tree_.node(n).value);
        auto it = v ? profile_.types.find(*v) : profile_.types.end();
        return it != profile_.types.end() && it->second.is_device();
    }

    void composites() {
        std::map<std::string, std::set<std::string>> uses;
        for (auto m : tree_.node(tree_.root()).children) {
            if (tree_.node(m).kind != kinds::Macro)
                continue;
            auto& u = uses[node_name(tree_, m)];
            for (auto c : tree_.node(m).children) {
                if (tree_.node(c).kind != kinds::MacroUse)
                    continue;
                auto v = std::get_if<std::string>(&tree_.node(c).value);
                if (!v || !find_macro(tree_, *v))
                    report(c, "use " + label(c) + " refers to unknown macro '" + (v ? *v : "") + "'");
                else
                    u.insert(*v);
            }
        }
        std::map<std::string, int> state;
        std::function<bool(const std::string&)> visit = [&](const std::string& n) {
            if (state[n] == 1)
                return true;
            if (state[n] == 2)
                return false;
            state[n] = 1;
            for (const auto& s : uses[n])
                if (visit(s))
                    return true;
            state[n] = 2;
            return false;
        };
        for (auto m : tree_.node(tree_.root()).children) {
            if (tree_.node(m).kind != kinds::Macro)
                continue;
            state.clear();
            auto name = node_name(tree_, m);
            if (visit(name))
                report(m, "macro " + name + " uses itself");
        }
    }

    void instances() {
        for (auto c : tree_.node(tree_.root()).children) {
            if (tree_.node(c).kind != kinds::Instance)
                continue;
            auto v = std::get_if<std::string>(&tree_.node(c).value);
            if (!v || !profile_.types.count(*v))
                report(c, "instance " + label(c) + " has unknown type '" + (v ? *v : "") + "'");
        }
    }

    void drive(NodeId container) { driven(container); }

    void driven(NodeId container) {
        auto count = drivers(container);
        for (auto c : tree_.node(container).children) {
            if (!is_member(c))
                continue;
            for (const auto& conn : connectors(tree_, c, profile_)) {
                if (conn.dir != PortDir::In)
                    continue;
                auto it = count.find({c, conn.name});
                int k = it == count.end() ? 0 : it->second;
                if (k == 0 && tree_.node(container).kind == kinds::TaskApp)
                    // Task inputs left open are fed from outside at evaluation.
                    report(c, label(c) + "." + conn.name + " is not driven and becomes an external input",
                           Severity::Warning);
                else if (k == 0)
                    report(c, label(c) + "." + conn.name + " is not driven");
                else if (k > 1)
                    report(c, label(c) + "." + conn.name + " is driven " + std::to_string(k) + " times");
            }
        }
    }

    const AsltTree& tree_;
    const DomainProfile& profile_;
    std::string rule_;
    std::vector<Diagnostic> out_;
};

} // namespace

std::vector<Diagnostic> validate_model(const AsltTree& tree, const DomainProfile& profile) {
    try {
        return Validator(tree, profile).run();
    } catch (const std::exception& e) {
        return {{Severity::Error, std::nullopt, "internal", e.what()}};
    }
}

std::vector<Diagnostic> validate_subtree(const AsltTree& tree, const DomainProfile& profile, NodeId node) {
    std::vector<Diagnostic> out;
    for (auto& d : validate_model(tree, profile))
        if (!d.node || tree.in_subtree(*d.node, node))
            out.push_back(std::move(d));
    return out;
}

} // namespace nbmvc
