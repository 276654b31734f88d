#pragma once

#include "nbmvc/codegen.hpp"
#include "nbmvc/session.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nbmvc {

struct ProjectInfo {
    std::string id;
    std::string name;
    std::string domain;
    std::string created;
    std::string modified;
    std::filesystem::path model_path;
    std::filesystem::path log_path;
};

Json project_to_json(const ProjectInfo& p);

/// An open session plus how much of its history is already on disk.
struct OpenProject {
    std::string project;
    std::unique_ptr<Session> session;
    std::size_t saved = 0;
};

/// Projects on disk. Each lives in `<root>/<id>/` as project.json,
/// model.nbm (last snapshot), base.nbm (initial snapshot), events.jsonl
/// (one change event per line, contiguous seq) and undo.json (the undo
/// history as of the last save, tagged with the model version).
class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Ids are identifiers; the id is also the type prefix other projects
    /// see. Throws InvalidArgument or ProfileError.
    ProjectInfo create(const std::string& name, const std::string& domain);
    std::vector<ProjectInfo> list() const;
    /// Throws NotFound.
    ProjectInfo info(const std::string& id) const;
    void remove(const std::string& id);

    /// The last saved snapshot.
    AsltTree load(const std::string& id) const;
    /// Folds the event log onto the initial snapshot. `limit` keeps only the
    /// first events, to model a crash part way through the log.
    AsltTree replay(const std::string& id, std::optional<std::size_t> limit = std::nullopt) const;
    std::vector<ChangeEvent> read_log(const std::string& id) const;

    /// Component types of every io / macro project that validates cleanly,
    /// qualified by project id.
    TypeLibrary library() const;
    /// Profile for a project; `override_name` must match its domain
    /// (ProfileMismatch otherwise).
    DomainProfile profile_for(const std::string& id, const std::optional<std::string>& override_name = {}) const;

    OpenProject open(const std::string& id, const std::string& session_id,
                     const std::optional<std::string>& override_name = {}) const;
    /// Appends the unsaved history to the log, then rewrites model.nbm.
    void save(OpenProject& open);

    /// All artifacts of a project, or of one component. Throws
    /// GenerateError without writing anything when the model is invalid.
    std::vector<CodeArtifact> export_code(const std::string& id, const std::optional<std::string>& node = {}) const;
    std::vector<CodeArtifact> export_code(const AsltTree& tree, const DomainProfile& profile,
                                          const std::optional<std::string>& node = {}) const;
    /// Writes artifacts under `out`, creating it.
    static void write_artifacts(const std::vector<CodeArtifact>& artifacts, const std::filesystem::path& out);

private:
    std::filesystem::path dir(const std::string& id) const { return root_ / id; }
    void touch(const std::string& id) const;

    std::filesystem::path root_;
};

/// `NBMVC_DATA_DIR`, or ./nbmvc-data.
std::filesystem::path default_data_dir();

} // namespace nbmvc
