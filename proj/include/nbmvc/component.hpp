#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/value.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nbmvc {

// Vocabulary shared by the built-in domains.
namespace kinds {
inline constexpr std::string_view IoLibrary = "io.library";
inline constexpr std::string_view Device = "io.device";
inline constexpr std::string_view Pin = "io.pin";
inline constexpr std::string_view MacroLibrary = "macro.library";
inline constexpr std::string_view Macro = "macro";
inline constexpr std::string_view MacroPort = "macro.port";
inline constexpr std::string_view MacroOp = "macro.op";
inline constexpr std::string_view MacroUse = "macro.use";
inline constexpr std::string_view MacroWire = "macro.wire";
inline constexpr std::string_view TaskApp = "task.app";
inline constexpr std::string_view Instance = "task.instance";
inline constexpr std::string_view TaskWire = "task.wire";
} // namespace kinds

namespace keys {
inline constexpr const char* Name = "node.name";
inline constexpr const char* PinDirection = "io.direction";
inline constexpr const char* PinAddress = "io.address";
inline constexpr const char* PortDirection = "port.direction";
inline constexpr const char* PortType = "port.type";
inline constexpr const char* Const = "macro.const";
inline constexpr const char* FromNode = "wire.from_node";
inline constexpr const char* FromPort = "wire.from_port";
inline constexpr const char* ToNode = "wire.to_node";
inline constexpr const char* ToPort = "wire.to_port";
} // namespace keys

enum class PortDir { In, Out };

std::string_view to_string(PortDir dir);
std::optional<PortDir> parse_port_dir(std::string_view text);
/// bool, int and float are the only port value types.
std::optional<ScalarType> parse_port_type(std::string_view text);

struct PortDecl {
    std::string name;
    PortDir dir = PortDir::In;
    ScalarType type = ScalarType::Bool;

    friend bool operator==(const PortDecl&, const PortDecl&) = default;
};

struct NodeDecl {
    std::string name;
    /// A primitive op (AND, CONST, ...) or the name of a composite type.
    std::string op;
    std::optional<Scalar> literal;

    friend bool operator==(const NodeDecl&, const NodeDecl&) = default;
};

/// `node` empty means the component's own port `port`.
struct Endpoint {
    std::string node;
    std::string port;

    std::string text() const { return node.empty() ? port : node + "." + port; }
    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct WireDecl {
    Endpoint from;
    Endpoint to;

    friend auto operator<=>(const WireDecl&, const WireDecl&) = default;
};

/// Neutral form of a device or macro: the unit of code generation and of
/// evaluation.
struct ComponentDef {
    std::string name;
    std::string kind;
    std::vector<PortDecl> ports;
    std::vector<NodeDecl> nodes;
    std::vector<WireDecl> wires;

    const PortDecl* port(std::string_view name) const;
    bool is_device() const { return kind == kinds::Device; }

    friend bool operator==(const ComponentDef&, const ComponentDef&) = default;
};

/// Component types by (possibly qualified) name.
using TypeLibrary = std::map<std::string, ComponentDef>;

// Primitive operations.

inline constexpr std::string_view kPrimitiveOps[] = {"NOT", "AND", "OR", "XOR", "ADD", "SUB",
                                                     "MUL", "LT",  "EQ", "PASS", "CONST"};

bool is_primitive_op(std::string_view op);
/// Number of inputs (in0, in1, ...) of a primitive op.
std::size_t op_arity(std::string_view op);
std::string op_input_port(std::size_t i);
inline constexpr std::string_view kOpOutputPort = "out";
/// Result type for the given input types; nullopt when they do not fit.
std::optional<ScalarType> op_result_type(std::string_view op, std::span<const ScalarType> inputs,
                                         const std::optional<Scalar>& literal);
/// Throws InputError on ill-typed inputs.
Scalar eval_op(std::string_view op, std::span<const Scalar> inputs,
               const std::optional<Scalar>& literal);

/// Name of a node for NDL and diagnostics: value for ports, pins, devices
/// and macros; meta node.name for ops, uses and instances.
std::string node_name(const AsltTree& tree, NodeId id);

/// Builds the neutral form of an io.device or macro node. Throws
/// CannotGenerate when wires reference missing nodes.
ComponentDef extract_component(const AsltTree& tree, NodeId node);

/// Every device / macro under the root, keyed by name.
TypeLibrary extract_library(const AsltTree& tree);

/// Copies `library` under "<prefix>.<name>", rewriting composite
/// references so the result is self-contained.
TypeLibrary qualify_library(const TypeLibrary& library, const std::string& prefix);

/// Evaluates a macro definition on named input values, recursing into
/// composite nodes through `library`. Throws InputError / CycleError.
std::map<std::string, Scalar> evaluate_component(const ComponentDef& def,
                                                 const TypeLibrary& library,
                                                 const std::map<std::string, Scalar>& inputs);

/// Topological order of def.nodes (indices), ties by node name. Throws
/// CycleError naming the nodes on a cycle.
std::vector<std::size_t> component_order(const ComponentDef& def);

} // namespace nbmvc
