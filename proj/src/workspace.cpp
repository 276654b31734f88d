#include "nbmvc/workspace.hpp"

#include "nbmvc/error.hpp"
#include "nbmvc/wire.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace nbmvc {

namespace {

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, path.string() + ": cannot read");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            fail(ErrorCode::IoError, tmp.string() + ": cannot write");
        out << bytes;
        out.flush();
        if (!out)
            fail(ErrorCode::IoError, tmp.string() + ": write failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        fail(ErrorCode::IoError, path.string() + ": " + ec.message());
}

/// Rethrows parse failures with the file (and line) attached.
template <class F>
auto located(const fs::path& path, std::size_t line, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseError && e.code() != ErrorCode::UnsupportedVersion)
            throw;
        auto where = path.string() + (line ? ":" + std::to_string(line) : std::string{});
        throw Error(e.code(), where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        auto where = path.string() + (line ? ":" + std::to_string(line) : std::string{});
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
}

bool builtin(const std::string& domain) {
    for (const char* n : kBuiltinProfiles)
        if (domain == n)
            return true;
    return false;
}

} // namespace

fs::path default_data_dir() {
    if (const char* env = std::getenv("NBMVC_DATA_DIR"); env && *env)
        return env;
    return "nbmvc-data";
}

Json project_to_json(const ProjectInfo& p) {
    return Json{{"id", p.id},           {"name", p.name},
                {"domain", p.domain},   {"created", p.created},
                {"modified", p.modified}, {"model", p.model_path.filename().string()},
                {"log", p.log_path.filename().string()}};
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec)
        fail(ErrorCode::IoError, root_.string() + ": " + ec.message());
}

ProjectInfo Workspace::create(const std::string& name, const std::string& domain) {
    if (!is_identifier(name))
        fail(ErrorCode::InvalidArgument, "project name '" + name + "' must be an identifier");
    if (!builtin(domain))
        fail(ErrorCode::ProfileError, "unknown domain '" + domain + "'");
    if (fs::exists(dir(name)))
        fail(ErrorCode::InvalidArgument, "project " + name + " already exists");
    auto profile = load_profile(domain);
    auto tree = AsltTree::create(profile.root_kind, fnv1a64(name), domain);
    fs::create_directories(dir(name));
    auto bytes = serialize(tree);
    write_atomic(dir(name) / "base.nbm", bytes);
    write_atomic(dir(name) / "model.nbm", bytes);
    write_atomic(dir(name) / "events.jsonl", "");
    auto stamp = now_iso();
    Json meta{{"id", name}, {"name", name}, {"domain", domain}, {"created", stamp}, {"modified", stamp}};
    write_atomic(dir(name) / "project.json", meta.dump(2) + "\n");
    return info(name);
}

ProjectInfo Workspace::info(const std::string& id) const {
    auto file = dir(id) / "project.json";
    if (id.empty() || id.find('/') != std::string::npos || !fs::exists(file))
        fail(ErrorCode::NotFound, "no project '" + id + "'");
    auto j = located(file, 0, [&] { return Json::parse(read_file(file)); });
    ProjectInfo p;
    p.id = j.value("id", id);
    p.name = j.value("name", id);
    p.domain = j.value("domain", "");
    p.created = j.value("created", "");
    p.modified = j.value("modified", "");
    p.model_path = dir(id) / "model.nbm";
    p.log_path = dir(id) / "events.jsonl";
    return p;
}

std::vector<ProjectInfo> Workspace::list() const {
    std::vector<ProjectInfo> out;
    for (const auto& entry : fs::directory_iterator(root_))
        if (entry.is_directory() && fs::exists(entry.path() / "project.json"))
            out.push_back(info(entry.path().filename().string()));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

void Workspace::remove(const std::string& id) {
    info(id);
    fs::remove_all(dir(id));
}

void Workspace::touch(const std::string& id) const {
    auto file = dir(id) / "project.json";
    auto j = Json::parse(read_file(file));
    j["modified"] = now_iso();
    write_atomic(file, j.dump(2) + "\n");
}

AsltTree Workspace::load(const std::string& id) const {
    auto p = info(id);
    return located(p.model_path, 0, [&] { return deserialize(read_file(p.model_path)); });
}

std::vector<ChangeEvent> Workspace::read_log(const std::string& id) const {
    auto p = info(id);
    std::istringstream in(read_file(p.log_path));
    std::vector<ChangeEvent> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.empty())
            continue;
        out.push_back(located(p.log_path, n, [&] { return change_from_json(Json::parse(line)); }));
    }
    return out;
}

AsltTree Workspace::replay(const std::string& id, std::optional<std::size_t> limit) const {
    auto base = dir(id) / "base.nbm";
    auto tree = located(base, 0, [&] { return deserialize(read_file(base)); });
    auto log = read_log(id);
    std::size_t n = std::min(limit.value_or(log.size()), log.size());
    for (std::size_t i = 0; i < n; ++i) {
        try {
            tree.apply_change(log[i]);
        } catch (const Error& e) {
            throw Error(e.code(), info(id).log_path.string() + ": event " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return tree;
}

TypeLibrary Workspace::library() const {
    TypeLibrary lib;
    for (const auto& p : list()) {
        if (p.domain != "io" && p.domain != "macro")
            continue;
        try {
            auto tree = load(p.id);
            if (has_errors(validate_model(tree, load_profile(p.domain))))
                continue;
            lib.merge(qualify_library(extract_library(tree), p.id));
        } catch (const Error&) {
            // A broken project contributes nothing.
        }
    }
    return lib;
}

DomainProfile Workspace::profile_for(const std::string& id, const std::optional<std::string>& override_name) const {
    auto p = info(id);
    if (override_name && *override_name != p.domain)
        fail(ErrorCode::ProfileMismatch, "project " + id + " is a " + p.domain + " model, not " + *override_name);
    return p.domain == "task" ? load_profile(p.domain, library()) : load_profile(p.domain);
}

OpenProject Workspace::open(const std::string& id, const std::string& session_id,
                            const std::optional<std::string>& override_name) const {
    auto profile = profile_for(id, override_name);
    OpenProject op;
    op.project = id;
    op.session = std::make_unique<Session>(session_id, load(id), std::move(profile));
    auto undo_file = dir(id) / "undo.json";
    if (fs::exists(undo_file)) {
        auto j = located(undo_file, 0, [&] { return Json::parse(read_file(undo_file)); });
        // A stale history (model written by someone else since) is dropped.
        if (j.value("version", std::uint64_t{0}) == op.session->tree().version())
            op.session->restore_undo(located(undo_file, 0, [&] { return undo_stack_from_json(j); }));
    }
    return op;
}

void Workspace::save(OpenProject& open) {
    const auto& history = open.session->history();
    auto p = info(open.project);
    if (open.saved < history.size()) {
        auto last = read_log(open.project);
        std::uint64_t expect = last.empty() ? deserialize(read_file(dir(open.project) / "base.nbm")).version() + 1
                                            : last.back().seq + 1;
        if (history[open.saved].seq != expect)
            fail(ErrorCode::SequenceGap, p.log_path.string() + ": next seq is " + std::to_string(expect) +
                                             ", session has " + std::to_string(history[open.saved].seq));
        std::ofstream out(p.log_path, std::ios::binary | std::ios::app);
        if (!out)
            fail(ErrorCode::IoError, p.log_path.string() + ": cannot append");
        for (std::size_t i = open.saved; i < history.size(); ++i)
            out << change_to_json(history[i]).dump() << "\n";
        out.flush();
        if (!out)
            fail(ErrorCode::IoError, p.log_path.string() + ": append failed");
    }
    write_atomic(p.model_path, serialize(open.session->tree()));
    auto undo = undo_stack_to_json(open.session->undo_stack());
    undo["version"] = open.session->tree().version();
    write_atomic(dir(open.project) / "undo.json", undo.dump() + "\n");
    open.saved = history.size();
    touch(open.project);
}

std::vector<CodeArtifact> Workspace::export_code(const AsltTree& tree, const DomainProfile& profile,
                                                 const std::optional<std::string>& node) const {
    if (profile.name == "task")
        return generate_application(tree, profile);
    std::vector<CodeArtifact> out;
    if (node) {
        out.push_back(generate_component_code(tree, resolve_ref(tree, *node), profile));
        return out;
    }
    auto diags = validate_model(tree, profile);
    if (has_errors(diags))
        throw GenerateError("model has validation errors", std::move(diags));
    for (auto c : tree.node(tree.root()).children) {
        const auto& k = tree.node(c).kind;
        if (k == kinds::Device || k == kinds::Macro)
            out.push_back(generate_component_code(tree, c, profile));
    }
    std::sort(out.begin(), out.end(), [](const CodeArtifact& a, const CodeArtifact& b) { return a.path < b.path; });
    return out;
}

std::vector<CodeArtifact> Workspace::export_code(const std::string& id, const std::optional<std::string>& node) const {
    return export_code(load(id), profile_for(id), node);
}

void Workspace::write_artifacts(const std::vector<CodeArtifact>& artifacts, const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        fail(ErrorCode::IoError, out.string() + ": " + ec.message());
    for (const auto& a : artifacts)
        write_atomic(out / a.path, a.content);
}

} // namespace nbmvc
