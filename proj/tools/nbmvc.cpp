// nbmvc: command line front end for the workbench.

#include "nbmvc/error.hpp"
#include "nbmvc/runtime.hpp"
#include "nbmvc/server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nbmvc;

namespace {

Server* g_server = nullptr;

void on_signal(int) {
    if (g_server)
        g_server->stop();
}

/// "a.b=1,c=true" with each value parsed as the program expects.
std::map<std::string, Scalar> parse_inputs(const std::string& text, const TaskProgram& program) {
    std::map<std::string, Scalar> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::InputError, "input '" + item + "' is not key=value");
        auto key = item.substr(0, eq);
        auto it = program.inputs.find(key);
        if (it == program.inputs.end())
            fail(ErrorCode::InputError, "unknown input '" + key + "'");
        try {
            out[key] = parse_scalar(it->second, item.substr(eq + 1));
        } catch (const Error& e) {
            fail(ErrorCode::InputError, key + ": " + e.what());
        }
    }
    return out;
}

int print_diagnostics(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        std::cout << diagnostic_to_json(d).dump() << "\n";
    return has_errors(diags) ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nbmvc: model workbench"};
    app.require_subcommand(1);

    std::string data_dir = default_data_dir().string();
    std::string project, domain, name, file, out_dir, inputs, node, profile;
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
    bool fail_on_reject = false;

    auto with_dir = [&](CLI::App* cmd) {
        cmd->add_option("--data-dir", data_dir, "Project directory (default $NBMVC_DATA_DIR or ./nbmvc-data)");
        return cmd;
    };

    auto* serve = with_dir(app.add_subcommand("serve", "Run the HTTP / WebSocket service"));
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--address", address, "Bind address")->capture_default_str();

    auto* create = with_dir(app.add_subcommand("new", "Create a project"));
    create->add_option("--domain", domain, "io, macro or task")->required()->check(CLI::IsMember({"io", "macro", "task"}));
    create->add_option("--name", name, "Project name (an identifier)")->required();

    auto* list = with_dir(app.add_subcommand("list", "List projects"));

    auto* apply = with_dir(app.add_subcommand("apply-event", "Run a JSONL script of client messages"));
    apply->add_option("--project", project)->required();
    apply->add_option("--file", file, "Script, '-' for stdin")->required();
    apply->add_option("--profile", profile, "Profile override");
    apply->add_flag("--fail-on-reject", fail_on_reject, "Exit 1 when any event is rejected");

    auto* validate = with_dir(app.add_subcommand("validate", "Print validation diagnostics"));
    validate->add_option("--project", project)->required();

    auto* export_code = with_dir(app.add_subcommand("export-code", "Write generated NDL files"));
    export_code->add_option("--project", project)->required();
    export_code->add_option("--out", out_dir)->required();
    export_code->add_option("--node", node, "Only this component (id or path)");

    auto* eval = with_dir(app.add_subcommand("eval-task", "Run one sweep of a task application"));
    eval->add_option("--project", project)->required();
    eval->add_option("--inputs", inputs, "k=v,... e.g. p1.btn=true");

    auto* replay = with_dir(app.add_subcommand("replay", "Fold the event log and compare with the snapshot"));
    replay->add_option("--project", project)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        Workspace ws(data_dir);

        if (*serve) {
            ServerOptions opts;
            opts.address = address;
            opts.port = port;
            Server server(ws, opts);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "nbmvc listening on http://" << address << ":" << server.port() << " (data " << data_dir
                      << ")\n";
            server.run();
            g_server = nullptr;
            return 0;
        }
        if (*create) {
            std::cout << project_to_json(ws.create(name, domain)).dump() << "\n";
            return 0;
        }
        if (*list) {
            for (const auto& p : ws.list())
                std::cout << project_to_json(p).dump() << "\n";
            return 0;
        }
        if (*apply) {
            std::ifstream in_file;
            std::istream* in = &std::cin;
            if (file != "-") {
                in_file.open(file);
                if (!in_file)
                    fail(ErrorCode::IoError, file + ": cannot read");
                in = &in_file;
            }
            ProtocolHub hub(ws);
            auto replies = run_script(hub, project, *in, profile.empty() ? std::nullopt : std::optional(profile));
            int rc = 0;
            for (const auto& r : replies) {
                std::cout << r.dump() << "\n";
                if (r["type"] == "error" || (fail_on_reject && r["type"] == "rejected"))
                    rc = 1;
            }
            return rc;
        }
        if (*validate) {
            return print_diagnostics(validate_model(ws.load(project), ws.profile_for(project)));
        }
        if (*export_code) {
            try {
                auto arts = ws.export_code(project, node.empty() ? std::nullopt : std::optional(node));
                Workspace::write_artifacts(arts, out_dir);
                for (const auto& a : arts)
                    std::cout << a.path << " " << a.hash << "\n";
                return 0;
            } catch (const GenerateError& e) {
                std::cerr << "nbmvc: " << e.what() << "\n";
                print_diagnostics(e.diagnostics());
                return 1;
            }
        }
        if (*eval) {
            auto program = compile_task(ws.load(project), ws.profile_for(project));
            auto result = evaluate_task(program, parse_inputs(inputs, program));
            Json out = Json::object();
            for (const auto& [k, v] : result)
                out[k] = plain_scalar_to_json(v);
            std::cout << out.dump() << "\n";
            return 0;
        }
        if (*replay) {
            auto folded = ws.replay(project);
            bool equal = folded == ws.load(project);
            std::cout << Json{{"events", ws.read_log(project).size()}, {"version", folded.version()}, {"equal", equal}}
                             .dump()
                      << "\n";
            return equal ? 0 : 1;
        }
    } catch (const Error& e) {
        std::cerr << "nbmvc: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    }
    return 0;
}
