#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/component.hpp"
#include "nbmvc/events.hpp"
#include "nbmvc/processors.hpp"
#include "nbmvc/wire.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nbmvc {

struct WizardField {
    std::string name;
    ScalarType type = ScalarType::Text;
    /// none means the field is required.
    Scalar default_value;
    /// "identifier" or empty.
    std::string constraint;
    std::vector<std::string> options;
    std::optional<std::int64_t> min;
    std::optional<std::int64_t> max;

    bool required() const { return std::holds_alternative<std::monostate>(default_value); }
};

struct WizardSpec {
    std::string id;
    ModelEventKind produced_for = ModelEventKind::ElementDropped;
    std::vector<WizardField> fields;
};

Json wizard_to_json(const WizardSpec& spec);

/// Throws InvalidAnswer naming the field.
Scalar check_answer(const WizardField& field, const Scalar& answer);

struct PaletteEntry {
    std::string id;
    std::string glyph;
    std::string kind;
    std::string container;
    std::string wizard;
    std::map<std::string, Scalar> payload;
};

Json palette_entry_to_json(const PaletteEntry& entry);

struct PortType {
    ScalarType tag = ScalarType::Bool;
    PortDir dir = PortDir::In;

    std::string text() const;
    friend auto operator<=>(const PortType&, const PortType&) = default;
};

std::optional<PortType> parse_port_type_decl(std::string_view text);

struct SymbolStyle {
    /// May contain ${value}.
    std::string glyph;
    double w = 80;
    double h = 40;
    /// "value", "meta:<key>" or empty.
    std::string label;
    /// How connectors are derived: "", "macro.port", "op", "use", "instance".
    std::string connectors;
    bool submodel = false;
};

struct FieldTarget {
    std::string target; // "value" | "meta"
    std::string key;
    std::string type; // scalar type tag or "same"
};

/// A connection point of a symbol. `type` is None for polymorphic op ports.
struct Connector {
    std::string name;
    PortDir dir = PortDir::In;
    ScalarType type = ScalarType::None;

    friend bool operator==(const Connector&, const Connector&) = default;
};

struct DomainProfile {
    std::string name;
    std::string root_kind;
    std::vector<PaletteEntry> palette;
    std::vector<PortType> port_types;
    std::map<std::pair<PortType, PortType>, bool> binding_rules;
    ProcessorRegistry registry;
    std::vector<std::string> validators;
    std::map<std::string, WizardSpec> wizards;
    std::map<std::string, SymbolStyle> symbols;
    std::set<std::string> relations;
    std::map<std::string, std::map<std::string, FieldTarget>> fields;
    std::map<std::string, std::string> templates;
    /// Component types instances may refer to (task domain).
    TypeLibrary types;
    Json document;

    const PaletteEntry* entry(std::string_view id) const;
    const WizardSpec* wizard(std::string_view id) const;
    const SymbolStyle* style(std::string_view kind) const;
    bool is_relation(std::string_view kind) const { return relations.count(std::string(kind)) != 0; }
    /// False for pairs not covered by the rule table.
    bool binding_allowed(const PortType& from, const PortType& to) const;
};

inline constexpr const char* kBuiltinProfiles[] = {"io", "macro", "task"};

/// Raw built-in profile document; throws ProfileError for unknown names.
const Json& builtin_profile_document(const std::string& name);

/// Builds a validated profile from a built-in name. `types` feeds the
/// instance palette of the task domain.
DomainProfile load_profile(const std::string& name, const TypeLibrary& types = {});
/// Throws ProfileError with the location of the first problem.
DomainProfile load_profile_document(const Json& document, const TypeLibrary& types = {});

/// Static palette plus one "use.<Name>" entry per macro in a macro tree, or
/// one "inst.<type>" entry per library type in a task tree.
std::vector<PaletteEntry> effective_palette(const DomainProfile& profile, const AsltTree& tree);
/// Glyphs a symbol may carry: palette glyphs plus the fallback.
std::set<std::string> palette_glyphs(const std::vector<PaletteEntry>& palette);
inline constexpr const char* kFallbackGlyph = "unknown";

/// Connectors of a node's symbol, in declaration order.
std::vector<Connector> connectors(const AsltTree& tree, NodeId node, const DomainProfile& profile);

using PortTypeMap = std::map<std::pair<NodeId, std::string>, ScalarType>;

/// Known value types of the connectors inside a macro or task container,
/// including inferred op outputs. Ill-typed ops stay unknown.
PortTypeMap infer_port_types(const AsltTree& tree, const DomainProfile& profile, NodeId container);

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::optional<NodeId> node;
    std::string rule;
    std::string message;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::string_view to_string(Severity severity);
Json diagnostic_to_json(const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// Runs the profile's named rules. Never throws.
std::vector<Diagnostic> validate_model(const AsltTree& tree, const DomainProfile& profile);
/// Diagnostics restricted to one node's subtree.
std::vector<Diagnostic> validate_subtree(const AsltTree& tree, const DomainProfile& profile, NodeId node);

/// Identifier rule for names: [A-Za-z_][A-Za-z0-9_]*, not a primitive op.
bool is_identifier(std::string_view text);

/// Folds `selection` (nodes of one macro) into a new macro `name` and
/// replaces it with a macro.use node wired through fresh ports. Returns the
/// new macro's id. Throws SelectionError; the tree is untouched on error.
NodeId derive_extended_element(AsltTree& tree, const std::vector<NodeId>& selection,
                               const std::string& name, UndoStack* undo = nullptr);

} // namespace nbmvc
