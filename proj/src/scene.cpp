#include "nbmvc/scene.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

namespace nbmvc {

std::optional<FilterKind> filter_kind(std::string_view spec) {
    auto colon = spec.find(':');
    if (colon == std::string_view::npos || colon + 1 == spec.size())
        return std::nullopt;
    auto head = spec.substr(0, colon);
    if (head == "kind")
        return FilterKind::ByKind;
    if (head == "layer")
        return FilterKind::ByLayer;
    if (head == "meta" && spec.find('=', colon) != std::string_view::npos)
        return FilterKind::ByMeta;
    return std::nullopt;
}

std::set<NodeId> Scene::visible_set() const {
    std::set<NodeId> out;
    for (const auto& [id, s] : symbols)
        if (s.visible)
            out.insert(id);
    return out;
}

const Symbol* Scene::symbol(NodeId id) const {
    auto it = symbols.find(id);
    return it == symbols.end() ? nullptr : &it->second;
}

namespace {

bool filter_hides(const Filter& f, const Symbol& s) {
    if (!f.active)
        return false;
    auto kind = filter_kind(f.spec);
    if (!kind)
        return false;
    auto arg = f.spec.substr(f.spec.find(':') + 1);
    switch (*kind) {
    case FilterKind::ByKind: return s.kind == arg;
    case FilterKind::ByLayer: return s.layer == arg;
    case FilterKind::ByMeta: {
        auto eq = arg.find('=');
        auto it = s.props.find(arg.substr(0, eq));
        return it != s.props.end() && it->second == arg.substr(eq + 1);
    }
    }
    return false;
}

} // namespace

void refresh_derived(Scene& scene) {
    std::set<std::string> layer_names{kDefaultLayer};
    for (const auto& [id, s] : scene.symbols)
        layer_names.insert(s.layer);
    for (const auto& f : scene.filters)
        if (filter_kind(f.spec) == FilterKind::ByLayer)
            layer_names.insert(f.spec.substr(f.spec.find(':') + 1));
    scene.layers.clear();
    for (const auto& n : layer_names) {
        bool hidden = std::any_of(scene.filters.begin(), scene.filters.end(), [&](const Filter& f) {
            return f.active && f.spec == "layer:" + n;
        });
        scene.layers.push_back({n, !hidden});
    }

    std::map<NodeId, bool> memo;
    std::function<bool(NodeId)> folded = [&](NodeId id) -> bool {
        // True when some enclosing symbol is collapsed.
        if (auto it = memo.find(id); it != memo.end())
            return it->second;
        const auto& s = scene.symbols.at(id);
        bool r = false;
        if (s.parent) {
            auto p = scene.symbols.find(*s.parent);
            if (p != scene.symbols.end())
                r = p->second.collapsed || folded(*s.parent);
        }
        memo[id] = r;
        return r;
    };
    for (auto& [id, s] : scene.symbols) {
        bool hidden = folded(id);
        for (const auto& f : scene.filters)
            hidden = hidden || filter_hides(f, s);
        s.visible = !hidden;
    }
    for (auto& [id, b] : scene.bindings) {
        auto a = scene.symbols.find(b.from);
        auto c = scene.symbols.find(b.to);
        b.visible = a != scene.symbols.end() && c != scene.symbols.end() && a->second.visible && c->second.visible;
    }

    std::map<std::string, std::vector<NodeId>> groups;
    for (const auto& [id, s] : scene.symbols)
        if (!s.group.empty())
            groups[s.group].push_back(id);
    scene.groups.clear();
    for (auto& [g, members] : groups)
        scene.groups.push_back({g, std::move(members)});
}

std::set<NodeId> toggle_filter(const Scene& scene, const std::string& spec, bool active) {
    Scene copy = scene;
    auto it = std::find_if(copy.filters.begin(), copy.filters.end(), [&](const Filter& f) { return f.spec == spec; });
    if (it == copy.filters.end()) {
        copy.filters.push_back({spec, active});
        std::sort(copy.filters.begin(), copy.filters.end(),
                  [](const Filter& a, const Filter& b) { return a.spec < b.spec; });
    } else {
        it->active = active;
    }
    refresh_derived(copy);
    return copy.visible_set();
}

std::pair<double, double> grid_position(std::size_t i, const GridPolicy& policy) {
    return {policy.x0 + static_cast<double>(i % policy.columns) * policy.dx,
            policy.y0 + static_cast<double>(i / policy.columns) * policy.dy};
}

namespace {

constexpr std::string_view kFilterPrefix = "view.filter:";

std::optional<double> number(const std::optional<MetaValue>& m) {
    if (!m)
        return std::nullopt;
    if (auto d = m->get_if<double>())
        return *d;
    if (auto i = m->get_if<std::int64_t>())
        return static_cast<double>(*i);
    return std::nullopt;
}

class SceneBuilder {
public:
    SceneBuilder(const AsltTree& tree, const DomainProfile& profile)
        : tree_(tree), profile_(profile), glyphs_(palette_glyphs(effective_palette(profile, tree))) {}

    bool wants_symbol(NodeId id) const {
        return id != tree_.root() && !profile_.is_relation(tree_.node(id).kind);
    }

    Symbol symbol(NodeId id) const {
        const auto& n = tree_.node(id);
        Symbol s;
        s.node = id;
        s.kind = n.kind;
        if (n.parent && *n.parent != tree_.root())
            s.parent = n.parent;
        const auto* style = profile_.style(n.kind);
        s.glyph = kFallbackGlyph;
        s.w = 80;
        s.h = 40;
        if (style) {
            s.glyph = substitute(style->glyph, {{"value", to_text(n.value)}});
            if (!glyphs_.count(s.glyph))
                s.glyph = kFallbackGlyph;
            s.w = style->w;
            s.h = style->h;
            if (style->label == "value") {
                s.label = to_text(n.value);
            } else if (style->label.starts_with("meta:")) {
                auto m = tree_.meta(id, style->label.substr(5));
                s.label = m ? m->to_text() : std::string{};
            }
        } else {
            s.label = to_text(n.value);
        }
        auto x = number(tree_.meta(id, "view.x"));
        auto y = number(tree_.meta(id, "view.y"));
        if (x && y) {
            s.placed = true;
            s.x = *x;
            s.y = *y;
        }
        if (auto l = tree_.meta(id, "view.layer"); l && l->get_if<std::string>() && !l->get_if<std::string>()->empty())
            s.layer = *l->get_if<std::string>();
        if (auto g = tree_.meta(id, "view.group"); g && g->get_if<std::string>())
            s.group = *g->get_if<std::string>();
        if (auto c = tree_.meta(id, "view.collapsed"); c && c->get_if<bool>())
            s.collapsed = *c->get_if<bool>();
        s.connectors = connectors(tree_, id, profile_);
        if (!std::holds_alternative<std::monostate>(n.value))
            s.props["value"] = to_text(n.value);
        for (const auto& [k, v] : n.meta)
            if (!k.starts_with("view."))
                s.props[k] = v.to_text();
        return s;
    }

    /// Grid positions, bindings, filters and derived state.
    void finish(Scene& scene) const {
        std::vector<Symbol*> unplaced;
        for (auto& [id, s] : scene.symbols)
            if (!s.placed)
                unplaced.push_back(&s);
        std::sort(unplaced.begin(), unplaced.end(), [](const Symbol* a, const Symbol* b) {
            return std::tie(a->kind, a->node) < std::tie(b->kind, b->node);
        });
        for (std::size_t i = 0; i < unplaced.size(); ++i)
            std::tie(unplaced[i]->x, unplaced[i]->y) = grid_position(i);

        scene.bindings.clear();
        for (auto id : tree_.document_order()) {
            if (!profile_.is_relation(tree_.node(id).kind))
                continue;
            auto end = [&](const char* node_key, const char* port_key) -> std::optional<std::pair<NodeId, std::string>> {
                auto n = tree_.meta(id, node_key);
                auto p = tree_.meta(id, port_key);
                if (!n || !p || !n->get_if<std::string>() || !p->get_if<std::string>())
                    return std::nullopt;
                auto nid = NodeId::parse(*n->get_if<std::string>());
                if (!nid)
                    return std::nullopt;
                auto sym = scene.symbols.find(*nid);
                if (sym == scene.symbols.end())
                    return std::nullopt;
                const auto& cs = sym->second.connectors;
                auto port = *p->get_if<std::string>();
                if (std::none_of(cs.begin(), cs.end(), [&](const Connector& c) { return c.name == port; }))
                    return std::nullopt;
                return std::pair{*nid, port};
            };
            auto from = end(keys::FromNode, keys::FromPort);
            auto to = end(keys::ToNode, keys::ToPort);
            if (from && to)
                scene.bindings[id] = Binding{id, from->first, from->second, to->first, to->second, true};
        }

        scene.filters.clear();
        for (const auto& [k, v] : tree_.node(tree_.root()).meta)
            if (k.starts_with(kFilterPrefix) && v.get_if<bool>())
                scene.filters.push_back({k.substr(kFilterPrefix.size()), *v.get_if<bool>()});
        scene.version = tree_.version();
        refresh_derived(scene);
    }

private:
    const AsltTree& tree_;
    const DomainProfile& profile_;
    std::set<std::string> glyphs_;
};

} // namespace

Scene construct_scene(const AsltTree& tree, const DomainProfile& profile) {
    SceneBuilder b(tree, profile);
    Scene scene;
    for (auto id : tree.document_order())
        if (b.wants_symbol(id))
            scene.symbols.emplace(id, b.symbol(id));
    b.finish(scene);
    return scene;
}

std::string_view to_string(DeltaKind kind) {
    switch (kind) {
    case DeltaKind::AddSymbol: return "AddSymbol";
    case DeltaKind::RemoveSymbol: return "RemoveSymbol";
    case DeltaKind::MoveSymbol: return "MoveSymbol";
    case DeltaKind::Relabel: return "Relabel";
    case DeltaKind::AddBinding: return "AddBinding";
    case DeltaKind::RemoveBinding: return "RemoveBinding";
    case DeltaKind::VisibilityChanged: return "VisibilityChanged";
    }
    return "";
}

namespace {

std::optional<DeltaKind> parse_delta_kind(std::string_view text) {
    for (auto k : {DeltaKind::AddSymbol, DeltaKind::RemoveSymbol, DeltaKind::MoveSymbol, DeltaKind::Relabel,
                   DeltaKind::AddBinding, DeltaKind::RemoveBinding, DeltaKind::VisibilityChanged})
        if (to_string(k) == text)
            return k;
    return std::nullopt;
}

/// Equal apart from position, label, props and visibility.
bool same_shape(Symbol a, Symbol b) {
    a.x = b.x;
    a.y = b.y;
    a.placed = b.placed;
    a.label = b.label;
    a.props = b.props;
    a.visible = b.visible;
    return a == b;
}

bool same_ends(Binding a, Binding b) {
    a.visible = b.visible;
    return a == b;
}

} // namespace

ViewPatch diff_scenes(const Scene& before, const Scene& after) {
    ViewPatch p;
    p.from_version = before.version;
    p.to_version = after.version;
    std::vector<Delta> remove_b, remove_s, add_s, move_s, relabel, add_b, vis;
    auto delta = [](DeltaKind k, NodeId id) {
        Delta d;
        d.kind = k;
        d.node = id;
        return d;
    };

    for (const auto& [id, b] : before.bindings) {
        auto it = after.bindings.find(id);
        if (it == after.bindings.end() || !same_ends(b, it->second))
            remove_b.push_back(delta(DeltaKind::RemoveBinding, id));
    }
    for (const auto& [id, b] : after.bindings) {
        auto it = before.bindings.find(id);
        if (it == before.bindings.end() || !same_ends(it->second, b)) {
            auto d = delta(DeltaKind::AddBinding, id);
            d.binding = b;
            add_b.push_back(std::move(d));
        } else if (it->second.visible != b.visible) {
            auto d = delta(DeltaKind::VisibilityChanged, id);
            d.visible = b.visible;
            vis.push_back(std::move(d));
        }
    }
    for (const auto& [id, s] : before.symbols) {
        auto it = after.symbols.find(id);
        if (it == after.symbols.end() || !same_shape(s, it->second))
            remove_s.push_back(delta(DeltaKind::RemoveSymbol, id));
    }
    for (const auto& [id, s] : after.symbols) {
        auto it = before.symbols.find(id);
        if (it == before.symbols.end() || !same_shape(it->second, s)) {
            auto d = delta(DeltaKind::AddSymbol, id);
            d.symbol = s;
            add_s.push_back(std::move(d));
            continue;
        }
        const auto& old = it->second;
        if (old.x != s.x || old.y != s.y || old.placed != s.placed) {
            auto d = delta(DeltaKind::MoveSymbol, id);
            d.x = s.x;
            d.y = s.y;
            d.placed = s.placed;
            move_s.push_back(std::move(d));
        }
        if (old.label != s.label || old.props != s.props) {
            auto d = delta(DeltaKind::Relabel, id);
            d.label = s.label;
            d.props = s.props;
            relabel.push_back(std::move(d));
        }
        if (old.visible != s.visible) {
            auto d = delta(DeltaKind::VisibilityChanged, id);
            d.visible = s.visible;
            vis.push_back(std::move(d));
        }
    }
    if (before.filters != after.filters) {
        Delta d;
        d.kind = DeltaKind::VisibilityChanged;
        d.filters = after.filters;
        vis.insert(vis.begin(), std::move(d));
    }
    for (auto* part : {&remove_b, &remove_s, &add_s, &move_s, &relabel, &add_b, &vis})
        for (auto& d : *part)
            p.deltas.push_back(std::move(d));
    return p;
}

void apply_patch(Scene& scene, const ViewPatch& patch) {
    auto bad = [](const Delta& d, const char* why) {
        fail(ErrorCode::InvalidArgument,
             std::string(to_string(d.kind)) + " " + d.node.hex() + ": " + why);
    };
    for (const auto& d : patch.deltas) {
        switch (d.kind) {
        case DeltaKind::AddSymbol:
            if (!d.symbol || !scene.symbols.emplace(d.node, *d.symbol).second)
                bad(d, "symbol already present");
            break;
        case DeltaKind::RemoveSymbol:
            if (!scene.symbols.erase(d.node))
                bad(d, "no such symbol");
            break;
        case DeltaKind::MoveSymbol: {
            auto it = scene.symbols.find(d.node);
            if (it == scene.symbols.end())
                bad(d, "no such symbol");
            it->second.x = d.x;
            it->second.y = d.y;
            it->second.placed = d.placed;
            break;
        }
        case DeltaKind::Relabel: {
            auto it = scene.symbols.find(d.node);
            if (it == scene.symbols.end())
                bad(d, "no such symbol");
            it->second.label = d.label;
            it->second.props = d.props;
            break;
        }
        case DeltaKind::AddBinding:
            if (!d.binding || !scene.bindings.emplace(d.node, *d.binding).second)
                bad(d, "binding already present");
            break;
        case DeltaKind::RemoveBinding:
            if (!scene.bindings.erase(d.node))
                bad(d, "no such binding");
            break;
        case DeltaKind::VisibilityChanged:
            if (d.filters) {
                scene.filters = *d.filters;
            } else if (auto s = scene.symbols.find(d.node); s != scene.symbols.end()) {
                s->second.visible = d.visible;
            } else if (auto b = scene.bindings.find(d.node); b != scene.bindings.end()) {
                b->second.visible = d.visible;
            } else {
                bad(d, "no such symbol or binding");
            }
            break;
        }
    }
    scene.version = patch.to_version;
    refresh_derived(scene);
}

ViewPatch apply_change_to_scene(Scene& scene, const std::vector<ChangeEvent>& events, const AsltTree& tree,
                                const DomainProfile& profile) {
    if (events.empty() && scene.version == tree.version())
        return ViewPatch{scene.version, scene.version, {}, false};

    bool contiguous = !events.empty() && events.front().seq == scene.version + 1 &&
                      events.back().seq == tree.version();
    for (std::size_t i = 1; contiguous && i < events.size(); ++i)
        contiguous = events[i].seq == events[i - 1].seq + 1;
    if (!contiguous) {
        Scene fresh = construct_scene(tree, profile);
        auto patch = diff_scenes(scene, fresh);
        patch.rebuilt = true;
        scene = std::move(fresh);
        return patch;
    }

    std::set<NodeId> dirty;
    bool uses_dirty = false;
    auto port_level = [](std::string_view kind) { return kind == kinds::Macro || kind == kinds::MacroPort; };
    for (const auto& ev : events) {
        dirty.insert(ev.node);
        for (const auto* side : {&ev.before, &ev.after})
            for (const auto& n : side->subtree) {
                dirty.insert(n.id);
                uses_dirty = uses_dirty || port_level(n.kind);
            }
        if (tree.contains(ev.node)) {
            uses_dirty = uses_dirty || port_level(tree.node(ev.node).kind);
        }
    }

    SceneBuilder b(tree, profile);
    Scene next = scene;
    if (uses_dirty)
        for (const auto& [id, s] : scene.symbols)
            if (s.kind == kinds::MacroUse)
                dirty.insert(id);
    for (auto id : dirty) {
        next.symbols.erase(id);
        if (tree.contains(id) && b.wants_symbol(id))
            next.symbols.emplace(id, b.symbol(id));
    }
    // Grid slots depend on the unplaced set; reset before re-placing.
    for (auto& [id, s] : next.symbols)
        if (!s.placed)
            s.x = s.y = 0;
    b.finish(next);
    auto patch = diff_scenes(scene, next);
    scene = std::move(next);
    return patch;
}

std::vector<ChangeEvent> layout(AsltTree& tree, const Scene& scene, UndoStack* undo, const GridPolicy& policy) {
    std::vector<const Symbol*> unplaced;
    for (const auto& [id, s] : scene.symbols)
        if (!s.placed && tree.contains(id))
            unplaced.push_back(&s);
    std::sort(unplaced.begin(), unplaced.end(),
              [](const Symbol* a, const Symbol* b) { return std::tie(a->kind, a->node) < std::tie(b->kind, b->node); });
    if (unplaced.empty())
        return {};
    AsltTree shadow = tree;
    std::vector<ChangeEvent> mutations;
    for (std::size_t i = 0; i < unplaced.size(); ++i) {
        auto [x, y] = grid_position(i, policy);
        mutations.push_back(mipt_set(shadow, unplaced[i]->node, "view", "x", MetaValue(x)));
        mutations.push_back(mipt_set(shadow, unplaced[i]->node, "view", "y", MetaValue(y)));
    }
    for (const auto& ev : mutations)
        tree.apply_change(ev);
    if (undo)
        undo->push("layout", mutations);
    return mutations;
}

Json symbol_to_json(const Symbol& s) {
    Json conns = Json::array();
    for (const auto& c : s.connectors)
        conns.push_back({{"name", c.name}, {"dir", std::string(to_string(c.dir))}, {"type", std::string(type_tag(c.type))}});
    Json props = Json::object();
    for (const auto& [k, v] : s.props)
        props[k] = v;
    return Json{{"node", s.node.hex()},
                {"parent", s.parent ? Json(s.parent->hex()) : Json(nullptr)},
                {"kind", s.kind},
                {"glyph", s.glyph},
                {"label", s.label},
                {"x", s.x},
                {"y", s.y},
                {"w", s.w},
                {"h", s.h},
                {"placed", s.placed},
                {"layer", s.layer},
                {"group", s.group.empty() ? Json(nullptr) : Json(s.group)},
                {"collapsed", s.collapsed},
                {"visible", s.visible},
                {"connectors", conns},
                {"props", props}};
}

Symbol symbol_from_json(const Json& j) {
    Symbol s;
    s.node = NodeId::from_hex(j.at("node").get<std::string>());
    if (!j.at("parent").is_null())
        s.parent = NodeId::from_hex(j.at("parent").get<std::string>());
    s.kind = j.at("kind").get<std::string>();
    s.glyph = j.at("glyph").get<std::string>();
    s.label = j.at("label").get<std::string>();
    s.x = j.at("x").get<double>();
    s.y = j.at("y").get<double>();
    s.w = j.at("w").get<double>();
    s.h = j.at("h").get<double>();
    s.placed = j.at("placed").get<bool>();
    s.layer = j.at("layer").get<std::string>();
    s.group = j.at("group").is_null() ? std::string{} : j.at("group").get<std::string>();
    s.collapsed = j.at("collapsed").get<bool>();
    s.visible = j.at("visible").get<bool>();
    for (const auto& c : j.at("connectors"))
        s.connectors.push_back({c.at("name").get<std::string>(),
                                parse_port_dir(c.at("dir").get<std::string>()).value_or(PortDir::In),
                                parse_type_tag(c.at("type").get<std::string>()).value_or(ScalarType::None)});
    for (const auto& [k, v] : j.at("props").items())
        s.props[k] = v.get<std::string>();
    return s;
}

Json binding_to_json(const Binding& b) {
    return Json{{"node", b.node.hex()},         {"from", b.from.hex()}, {"from_port", b.from_port},
                {"to", b.to.hex()},             {"to_port", b.to_port}, {"visible", b.visible}};
}

Binding binding_from_json(const Json& j) {
    return Binding{NodeId::from_hex(j.at("node").get<std::string>()),
                   NodeId::from_hex(j.at("from").get<std::string>()),
                   j.at("from_port").get<std::string>(),
                   NodeId::from_hex(j.at("to").get<std::string>()),
                   j.at("to_port").get<std::string>(),
                   j.at("visible").get<bool>()};
}

namespace {

Json filters_to_json(const std::vector<Filter>& filters) {
    Json out = Json::array();
    for (const auto& f : filters)
        out.push_back({{"spec", f.spec}, {"active", f.active}});
    return out;
}

std::vector<Filter> filters_from_json(const Json& j) {
    std::vector<Filter> out;
    for (const auto& f : j)
        out.push_back({f.at("spec").get<std::string>(), f.at("active").get<bool>()});
    return out;
}

} // namespace

Json scene_to_json(const Scene& scene) {
    Json symbols = Json::array();
    for (const auto& [id, s] : scene.symbols)
        symbols.push_back(symbol_to_json(s));
    Json bindings = Json::array();
    for (const auto& [id, b] : scene.bindings)
        bindings.push_back(binding_to_json(b));
    Json layers = Json::array();
    for (const auto& l : scene.layers)
        layers.push_back({{"name", l.name}, {"visible", l.visible}});
    Json groups = Json::array();
    for (const auto& g : scene.groups) {
        Json members = Json::array();
        for (auto m : g.members)
            members.push_back(m.hex());
        groups.push_back({{"id", g.id}, {"members", members}});
    }
    return Json{{"version", scene.version}, {"symbols", symbols}, {"bindings", bindings},
                {"layers", layers},         {"groups", groups},   {"filters", filters_to_json(scene.filters)}};
}

Scene scene_from_json(const Json& j) {
    Scene scene;
    scene.version = j.at("version").get<std::uint64_t>();
    for (const auto& s : j.at("symbols")) {
        auto sym = symbol_from_json(s);
        scene.symbols.emplace(sym.node, std::move(sym));
    }
    for (const auto& b : j.at("bindings")) {
        auto bind = binding_from_json(b);
        scene.bindings.emplace(bind.node, std::move(bind));
    }
    for (const auto& l : j.at("layers"))
        scene.layers.push_back({l.at("name").get<std::string>(), l.at("visible").get<bool>()});
    for (const auto& g : j.at("groups")) {
        Group group{g.at("id").get<std::string>(), {}};
        for (const auto& m : g.at("members"))
            group.members.push_back(NodeId::from_hex(m.get<std::string>()));
        scene.groups.push_back(std::move(group));
    }
    scene.filters = filters_from_json(j.at("filters"));
    return scene;
}

Json patch_to_json(const ViewPatch& patch) {
    Json deltas = Json::array();
    for (const auto& d : patch.deltas) {
        Json j{{"kind", std::string(to_string(d.kind))}};
        switch (d.kind) {
        case DeltaKind::AddSymbol: j["symbol"] = symbol_to_json(*d.symbol); break;
        case DeltaKind::AddBinding: j["binding"] = binding_to_json(*d.binding); break;
        case DeltaKind::RemoveSymbol:
        case DeltaKind::RemoveBinding: j["node"] = d.node.hex(); break;
        case DeltaKind::MoveSymbol:
            j["node"] = d.node.hex();
            j["x"] = d.x;
            j["y"] = d.y;
            j["placed"] = d.placed;
            break;
        case DeltaKind::Relabel:
            j["node"] = d.node.hex();
            j["label"] = d.label;
            j["props"] = d.props;
            break;
        case DeltaKind::VisibilityChanged:
            if (d.filters) {
                j["filters"] = filters_to_json(*d.filters);
            } else {
                j["node"] = d.node.hex();
                j["visible"] = d.visible;
            }
            break;
        }
        deltas.push_back(std::move(j));
    }
    return Json{{"from_version", patch.from_version},
                {"to_version", patch.to_version},
                {"rebuilt", patch.rebuilt},
                {"deltas", deltas}};
}

ViewPatch patch_from_json(const Json& j) {
    ViewPatch p;
    p.from_version = j.at("from_version").get<std::uint64_t>();
    p.to_version = j.at("to_version").get<std::uint64_t>();
    p.rebuilt = j.value("rebuilt", false);
    for (const auto& jd : j.at("deltas")) {
        Delta d;
        auto kind = parse_delta_kind(jd.at("kind").get<std::string>());
        if (!kind)
            fail(ErrorCode::ParseError, "unknown delta kind");
        d.kind = *kind;
        if (jd.contains("node"))
            d.node = NodeId::from_hex(jd.at("node").get<std::string>());
        switch (d.kind) {
        case DeltaKind::AddSymbol:
            d.symbol = symbol_from_json(jd.at("symbol"));
            d.node = d.symbol->node;
            break;
        case DeltaKind::AddBinding:
            d.binding = binding_from_json(jd.at("binding"));
            d.node = d.binding->node;
            break;
        case DeltaKind::MoveSymbol:
            d.x = jd.at("x").get<double>();
            d.y = jd.at("y").get<double>();
            d.placed = jd.at("placed").get<bool>();
            break;
        case DeltaKind::Relabel:
            d.label = jd.at("label").get<std::string>();
            d.props = jd.at("props").get<std::map<std::string, std::string>>();
            break;
        case DeltaKind::VisibilityChanged:
            if (jd.contains("filters"))
                d.filters = filters_from_json(jd.at("filters"));
            else
                d.visible = jd.at("visible").get<bool>();
            break;
        default: break;
        }
        p.deltas.push_back(std::move(d));
    }
    return p;
}

} // namespace nbmvc
