#pragma once

#include "nbmvc/codegen.hpp"
#include "nbmvc/component.hpp"
#include "nbmvc/domain.hpp"

#include <map>
#include <string>
#include <vector>

namespace nbmvc {

/// A task compiled for evaluation. Port keys are "<instance>.<port>".
struct TaskProgram {
    struct Instance {
        std::string name;
        std::string type;
        ComponentDef def;
    };
    enum class Phase { Read, Compute, Write };
    struct Step {
        std::string instance;
        Phase phase = Phase::Compute;
        friend bool operator==(const Step&, const Step&) = default;
    };

    std::map<std::string, Instance> instances;
    /// Driver of every driven sink, keyed by the sink.
    std::map<std::string, std::string> drivers;
    std::vector<Step> order;
    /// Device input pins plus macro inputs nothing drives.
    std::map<std::string, ScalarType> inputs;
    /// Driven device output pins plus macro outputs nothing consumes.
    std::map<std::string, ScalarType> outputs;
    TypeLibrary library;
};

std::string_view to_string(TaskProgram::Phase phase);

/// Devices are read first, then macros run in topological order (ties by
/// instance name), then devices are written. Throws CycleError naming the
/// instances on a cycle and CannotGenerate for malformed wiring.
TaskProgram compile_task(const AsltTree& tree, const DomainProfile& profile);

/// One synchronous sweep. Throws InputError for missing, unknown or
/// ill-typed inputs.
std::map<std::string, Scalar> evaluate_task(const TaskProgram& program, const std::map<std::string, Scalar>& inputs);

Json program_to_json(const TaskProgram& program);

} // namespace nbmvc
