#include "nbmvc/runtime.hpp"

#include <algorithm>
#include <set>

namespace nbmvc {

std::string_view to_string(TaskProgram::Phase phase) {
    switch (phase) {
    case TaskProgram::Phase::Read: return "read";
    case TaskProgram::Phase::Compute: return "compute";
    case TaskProgram::Phase::Write: return "write";
    }
    return "";
}

namespace {

[[noreturn]] void malformed(const std::string& msg) { fail(ErrorCode::CannotGenerate, msg); }

std::string key(const std::string& inst, const std::string& port) { return inst + "." + port; }

} // namespace

TaskProgram compile_task(const AsltTree& tree, const DomainProfile& profile) {
    auto app = extract_application(tree);
    TaskProgram prog;
    prog.library = profile.types;

    // Which way values flow through each instance port: sources feed wires,
    // sinks are fed. A device input pin is a source inside the task.
    std::map<std::string, std::pair<bool, ScalarType>> ports; // key -> (is source, type)
    for (const auto& inst : app.instances) {
        auto it = profile.types.find(inst.type);
        if (it == profile.types.end())
            malformed("instance " + inst.name + " refers to unknown type '" + inst.type + "'");
        bool device = it->second.is_device();
        for (const auto& p : it->second.ports) {
            bool source = (p.dir == PortDir::In) == device;
            ports[key(inst.name, p.name)] = {source, p.type};
        }
        prog.instances[inst.name] = {inst.name, inst.type, it->second};
    }

    std::map<std::string, std::set<std::string>> succ;
    for (const auto& b : app.binds) {
        auto from = b.from.text();
        auto to = b.to.text();
        auto f = ports.find(from);
        auto t = ports.find(to);
        if (f == ports.end() || t == ports.end())
            malformed("bind " + from + " -> " + to + " names an unknown port");
        if (!f->second.first || t->second.first)
            malformed("bind " + from + " -> " + to + " must run from an output to an input");
        if (!prog.drivers.emplace(to, from).second)
            malformed(to + " is driven more than once");
        bool from_macro = !prog.instances.at(b.from.node).def.is_device();
        bool to_macro = !prog.instances.at(b.to.node).def.is_device();
        if (from_macro && to_macro)
            succ[b.from.node].insert(b.to.node);
    }

    // Kahn over macro instances; std::set keeps ties in name order.
    std::map<std::string, std::size_t> indegree;
    for (const auto& [name, inst] : prog.instances)
        if (!inst.def.is_device())
            indegree[name] = 0;
    for (const auto& [from, tos] : succ)
        for (const auto& to : tos)
            ++indegree[to];
    std::set<std::string> ready;
    for (const auto& [name, d] : indegree)
        if (d == 0)
            ready.insert(name);
    std::vector<std::string> computed;
    while (!ready.empty()) {
        auto name = *ready.begin();
        ready.erase(ready.begin());
        computed.push_back(name);
        for (const auto& to : succ[name])
            if (--indegree[to] == 0)
                ready.insert(to);
    }
    if (computed.size() != indegree.size()) {
        std::string names;
        for (const auto& [name, d] : indegree)
            if (d > 0)
                names += (names.empty() ? "" : ", ") + name;
        fail(ErrorCode::CycleError, "task wiring has a cycle through " + names);
    }

    for (const auto& [name, inst] : prog.instances)
        if (inst.def.is_device())
            prog.order.push_back({name, TaskProgram::Phase::Read});
    for (const auto& name : computed)
        prog.order.push_back({name, TaskProgram::Phase::Compute});
    for (const auto& [name, inst] : prog.instances)
        if (inst.def.is_device())
            prog.order.push_back({name, TaskProgram::Phase::Write});

    std::set<std::string> consumed;
    for (const auto& [to, from] : prog.drivers)
        consumed.insert(from);
    for (const auto& [k, info] : ports) {
        auto [source, type] = info;
        auto inst = k.substr(0, k.find('.'));
        bool device = prog.instances.at(inst).def.is_device();
        if (device && source)
            prog.inputs[k] = type;
        else if (device && prog.drivers.count(k))
            prog.outputs[k] = type;
        else if (device)
            continue; // undriven device output: nothing to write
        else if (!source && !prog.drivers.count(k))
            prog.inputs[k] = type;
        else if (source && !consumed.count(k))
            prog.outputs[k] = type;
    }
    return prog;
}

std::map<std::string, Scalar> evaluate_task(const TaskProgram& program, const std::map<std::string, Scalar>& inputs) {
    for (const auto& [k, v] : inputs)
        if (!program.inputs.count(k))
            fail(ErrorCode::InputError, "unknown input " + k);
    for (const auto& [k, type] : program.inputs) {
        auto it = inputs.find(k);
        if (it == inputs.end())
            fail(ErrorCode::InputError, "missing input " + k);
        if (type_of(it->second) != type)
            fail(ErrorCode::InputError, "input " + k + " must be " + std::string(type_tag(type)) + ", got " +
                                            std::string(type_tag(type_of(it->second))));
    }

    std::map<std::string, Scalar> values;
    auto fetch = [&](const std::string& sink) -> const Scalar& {
        auto d = program.drivers.find(sink);
        if (d == program.drivers.end())
            return inputs.at(sink);
        return values.at(d->second);
    };
    std::map<std::string, Scalar> out;
    for (const auto& step : program.order) {
        const auto& inst = program.instances.at(step.instance);
        switch (step.phase) {
        case TaskProgram::Phase::Read:
            for (const auto& p : inst.def.ports)
                if (p.dir == PortDir::In)
                    values[key(inst.name, p.name)] = inputs.at(key(inst.name, p.name));
            break;
        case TaskProgram::Phase::Compute: {
            std::map<std::string, Scalar> ins;
            for (const auto& p : inst.def.ports)
                if (p.dir == PortDir::In)
                    ins[p.name] = fetch(key(inst.name, p.name));
            for (auto& [port, v] : evaluate_component(inst.def, program.library, ins))
                values[key(inst.name, port)] = std::move(v);
            break;
        }
        case TaskProgram::Phase::Write:
            for (const auto& p : inst.def.ports)
                if (p.dir == PortDir::Out && program.drivers.count(key(inst.name, p.name))) {
                    const auto& v = fetch(key(inst.name, p.name));
                    if (type_of(v) != p.type)
                        fail(ErrorCode::InputError, key(inst.name, p.name) + " expects " +
                                                        std::string(type_tag(p.type)));
                    out[key(inst.name, p.name)] = v;
                }
            break;
        }
    }
    for (const auto& [k, type] : program.outputs)
        if (!out.count(k))
            out[k] = values.at(k);
    return out;
}

Json program_to_json(const TaskProgram& program) {
    Json instances = Json::object();
    for (const auto& [name, inst] : program.instances)
        instances[name] = inst.type;
    Json order = Json::array();
    for (const auto& s : program.order)
        order.push_back({{"instance", s.instance}, {"phase", std::string(to_string(s.phase))}});
    auto typed = [](const std::map<std::string, ScalarType>& m) {
        Json j = Json::object();
        for (const auto& [k, t] : m)
            j[k] = std::string(type_tag(t));
        return j;
    };
    return Json{{"instances", instances},
                {"wiring", program.drivers},
                {"order", order},
                {"inputs", typed(program.inputs)},
                {"outputs", typed(program.outputs)}};
}

} // namespace nbmvc
