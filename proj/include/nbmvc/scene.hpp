#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/domain.hpp"
#include "nbmvc/processors.hpp"
#include "nbmvc/wire.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nbmvc {

inline constexpr const char* kDefaultLayer = "default";

struct Symbol {
    NodeId node;
    std::optional<NodeId> parent; // enclosing symbol, if any
    std::string kind;
    std::string glyph;
    std::string label;
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;
    bool placed = false;
    std::string layer = kDefaultLayer;
    std::string group;
    bool collapsed = false;
    bool visible = true;
    std::vector<Connector> connectors;
    /// Text form of the node value ("value") and of its meta entries.
    std::map<std::string, std::string> props;

    friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct Binding {
    NodeId node;
    NodeId from;
    std::string from_port;
    NodeId to;
    std::string to_port;
    bool visible = true;

    friend bool operator==(const Binding&, const Binding&) = default;
};

struct Layer {
    std::string name;
    bool visible = true;
    friend bool operator==(const Layer&, const Layer&) = default;
};

struct Group {
    std::string id;
    std::vector<NodeId> members;
    friend bool operator==(const Group&, const Group&) = default;
};

enum class FilterKind { ByKind, ByLayer, ByMeta };

/// Spec text: "kind:<kind>", "layer:<name>" or "meta:<key>=<text>".
struct Filter {
    std::string spec;
    bool active = false;
    friend bool operator==(const Filter&, const Filter&) = default;
};

std::optional<FilterKind> filter_kind(std::string_view spec);

struct Scene {
    std::uint64_t version = 0;
    std::map<NodeId, Symbol> symbols;
    std::map<NodeId, Binding> bindings;
    std::vector<Layer> layers;
    std::vector<Group> groups;
    std::vector<Filter> filters;

    std::set<NodeId> visible_set() const;
    const Symbol* symbol(NodeId id) const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Recomputes visibility, layers and groups from symbols and filters.
void refresh_derived(Scene& scene);

/// Visible set under `scene` with filter `spec` set to `active`; the scene
/// itself is unchanged.
std::set<NodeId> toggle_filter(const Scene& scene, const std::string& spec, bool active);

Scene construct_scene(const AsltTree& tree, const DomainProfile& profile);

enum class DeltaKind { AddSymbol, RemoveSymbol, MoveSymbol, Relabel, AddBinding, RemoveBinding, VisibilityChanged };

std::string_view to_string(DeltaKind kind);

struct Delta {
    DeltaKind kind = DeltaKind::AddSymbol;
    NodeId node;
    std::optional<Symbol> symbol;   // AddSymbol
    std::optional<Binding> binding; // AddBinding
    double x = 0;                   // MoveSymbol
    double y = 0;
    bool placed = false;
    std::string label;              // Relabel, with the new props
    std::map<std::string, std::string> props;
    bool visible = true;            // VisibilityChanged on a symbol or binding
    /// VisibilityChanged carrying the new filter table instead of a node.
    std::optional<std::vector<Filter>> filters;

    friend bool operator==(const Delta&, const Delta&) = default;
};

struct ViewPatch {
    std::uint64_t from_version = 0;
    std::uint64_t to_version = 0;
    std::vector<Delta> deltas;
    bool rebuilt = false;

    bool empty() const { return deltas.empty() && from_version == to_version; }
};

/// Deltas turning `before` into `after`.
ViewPatch diff_scenes(const Scene& before, const Scene& after);
/// Throws InvalidArgument when a delta does not fit the scene.
void apply_patch(Scene& scene, const ViewPatch& patch);

/// Brings `scene` up to the tree's version and returns the patch applied.
/// Rebuilds fully when `events` do not continue the scene's version.
ViewPatch apply_change_to_scene(Scene& scene, const std::vector<ChangeEvent>& events, const AsltTree& tree,
                                const DomainProfile& profile);

struct GridPolicy {
    double x0 = 40;
    double y0 = 40;
    double dx = 120;
    double dy = 90;
    std::size_t columns = 8;
};

/// Grid slot of the i-th unplaced symbol.
std::pair<double, double> grid_position(std::size_t i, const GridPolicy& policy = {});

/// Writes view.x / view.y for every unplaced symbol as one transaction.
std::vector<ChangeEvent> layout(AsltTree& tree, const Scene& scene, UndoStack* undo = nullptr,
                                const GridPolicy& policy = {});

Json symbol_to_json(const Symbol& s);
Symbol symbol_from_json(const Json& j);
Json binding_to_json(const Binding& b);
Binding binding_from_json(const Json& j);
Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);
Json patch_to_json(const ViewPatch& patch);
ViewPatch patch_from_json(const Json& j);

} // namespace nbmvc
