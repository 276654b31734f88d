#include "nbmvc/build.hpp"

namespace nbmvc::build {

namespace {

NodeId append(AsltTree& tree, NodeId parent, std::string_view kind, Scalar value = {}) {
    return tree.insert_node(parent, tree.node(parent).children.size(), std::string(kind), std::move(value));
}

MetaValue txt(std::string_view s) { return MetaValue(std::string(s)); }

} // namespace

NodeId device(AsltTree& tree, const std::string& name) {
    return append(tree, tree.root(), kinds::Device, text(name));
}

NodeId pin(AsltTree& tree, NodeId device, const std::string& name, PortDir dir, ScalarType type,
           const std::string& address) {
    auto id = append(tree, device, kinds::Pin, text(name));
    tree.set_meta(id, keys::PinDirection, txt(to_string(dir)));
    tree.set_meta(id, keys::PortType, txt(type_tag(type)));
    tree.set_meta(id, keys::PinAddress, txt(address));
    return id;
}

NodeId macro(AsltTree& tree, const std::string& name) {
    return append(tree, tree.root(), kinds::Macro, text(name));
}

NodeId port(AsltTree& tree, NodeId macro, const std::string& name, PortDir dir, ScalarType type) {
    auto id = append(tree, macro, kinds::MacroPort, text(name));
    tree.set_meta(id, keys::PortDirection, txt(to_string(dir)));
    tree.set_meta(id, keys::PortType, txt(type_tag(type)));
    return id;
}

NodeId op(AsltTree& tree, NodeId macro, const std::string& name, const std::string& op,
          std::optional<Scalar> literal) {
    auto id = append(tree, macro, kinds::MacroOp, text(op));
    tree.set_meta(id, keys::Name, txt(name));
    if (literal)
        tree.set_meta(id, keys::Const, MetaValue::from_scalar(*literal));
    return id;
}

NodeId use(AsltTree& tree, NodeId macro, const std::string& name, const std::string& type) {
    auto id = append(tree, macro, kinds::MacroUse, text(type));
    tree.set_meta(id, keys::Name, txt(name));
    return id;
}

NodeId instance(AsltTree& tree, const std::string& name, const std::string& type) {
    auto id = append(tree, tree.root(), kinds::Instance, text(type));
    tree.set_meta(id, keys::Name, txt(name));
    return id;
}

NodeId wire(AsltTree& tree, NodeId container, NodeId from, const std::string& from_port, NodeId to,
            const std::string& to_port) {
    auto kind = tree.node(container).kind == kinds::TaskApp ? kinds::TaskWire : kinds::MacroWire;
    auto id = append(tree, container, kind);
    tree.set_meta(id, keys::FromNode, txt(from.hex()));
    tree.set_meta(id, keys::FromPort, txt(from_port));
    tree.set_meta(id, keys::ToNode, txt(to.hex()));
    tree.set_meta(id, keys::ToPort, txt(to_port));
    return id;
}

} // namespace nbmvc::build
