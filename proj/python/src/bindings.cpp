// Python bindings. Structured values cross the boundary as JSON text; the
// nbmvc package turns them into dicts.

#include "nbmvc/error.hpp"
#include "nbmvc/protocol.hpp"
#include "nbmvc/runtime.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace nbmvc;

namespace {

std::string dump_all(const std::vector<Json>& items) {
    Json out = Json::array();
    for (const auto& j : items)
        out.push_back(j);
    return out.dump();
}

std::string export_json(Workspace& ws, const std::string& project) {
    Json out = Json::array();
    for (const auto& a : ws.export_code(project))
        out.push_back(artifact_to_json(a));
    return out.dump();
}

std::string validate_json(Workspace& ws, const std::string& project) {
    Json out = Json::array();
    for (const auto& d : validate_model(ws.load(project), ws.profile_for(project)))
        out.push_back(diagnostic_to_json(d));
    return out.dump();
}

/// Inputs arrive as {"p1.btn": true, ...}.
std::string eval_json(Workspace& ws, const std::string& project, const std::string& inputs) {
    auto program = compile_task(ws.load(project), ws.profile_for(project));
    std::map<std::string, Scalar> in;
    const Json parsed = Json::parse(inputs);
    for (const auto& [k, v] : parsed.items())
        in[k] = plain_scalar_from_json(v);
    Json out = Json::object();
    for (const auto& [k, v] : evaluate_task(program, in))
        out[k] = plain_scalar_to_json(v);
    return out.dump();
}

} // namespace

PYBIND11_MODULE(_nbmvc, m) {
    m.doc() = "NBMVC workbench core";

    static py::exception<Error> error(m, "NbmvcError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def("domains", [] { return std::vector<std::string>(std::begin(kBuiltinProfiles), std::end(kBuiltinProfiles)); });

    py::class_<Workspace>(m, "Workspace")
        .def(py::init([](const std::string& root) { return std::make_unique<Workspace>(root); }), py::arg("root"))
        .def("root", [](const Workspace& ws) { return ws.root().string(); })
        .def("create", [](Workspace& ws, const std::string& name, const std::string& domain) {
            return project_to_json(ws.create(name, domain)).dump();
        })
        .def("list", [](const Workspace& ws) {
            Json out = Json::array();
            for (const auto& p : ws.list())
                out.push_back(project_to_json(p));
            return out.dump();
        })
        .def("remove", &Workspace::remove)
        .def("apply_script", [](Workspace& ws, const std::string& project, const std::string& script) {
            ProtocolHub hub(ws);
            std::istringstream in(script);
            return dump_all(run_script(hub, project, in));
        })
        .def("validate", &validate_json)
        .def("export_code", &export_json)
        .def("eval_task", &eval_json)
        .def("model", [](const Workspace& ws, const std::string& project) { return tree_to_json(ws.load(project)).dump(); })
        .def("replay_matches", [](const Workspace& ws, const std::string& project) {
            return ws.replay(project) == ws.load(project);
        });

    py::class_<ProtocolHub>(m, "Hub")
        .def(py::init<Workspace&>(), py::arg("workspace"), py::keep_alive<1, 2>())
        .def("handle", &ProtocolHub::handle_text, py::arg("message"),
             "One client message as JSON text in, the reply as JSON text out.")
        .def("close", &ProtocolHub::close)
        .def("sessions", &ProtocolHub::sessions);
}
