#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/component.hpp"

#include <string>

namespace nbmvc::build {

// Direct construction helpers for the built-in vocabularies. Each call
// appends to the given parent and returns the new node.

NodeId device(AsltTree& tree, const std::string& name);
NodeId pin(AsltTree& tree, NodeId device, const std::string& name, PortDir dir, ScalarType type,
           const std::string& address = {});

NodeId macro(AsltTree& tree, const std::string& name);
NodeId port(AsltTree& tree, NodeId macro, const std::string& name, PortDir dir, ScalarType type);
NodeId op(AsltTree& tree, NodeId macro, const std::string& name, const std::string& op,
          std::optional<Scalar> literal = std::nullopt);
NodeId use(AsltTree& tree, NodeId macro, const std::string& name, const std::string& type);

NodeId instance(AsltTree& tree, const std::string& name, const std::string& type);

/// A macro.wire or task.wire, depending on the container.
NodeId wire(AsltTree& tree, NodeId container, NodeId from, const std::string& from_port, NodeId to,
            const std::string& to_port);

} // namespace nbmvc::build
