#pragma once

#include "nbmvc/component.hpp"
#include "nbmvc/domain.hpp"
#include "nbmvc/error.hpp"

#include <map>
#include <string>
#include <vector>

namespace nbmvc {

struct CodeArtifact {
    std::string path;
    std::string language = "ndl";
    std::string content;
    NodeId source;
    /// FNV-1a 64 of content, 16 hex digits.
    std::string hash;

    friend bool operator==(const CodeArtifact&, const CodeArtifact&) = default;
};

Json artifact_to_json(const CodeArtifact& a);
std::string content_hash(std::string_view content);

/// CannotGenerate carrying the diagnostics that blocked generation.
class GenerateError : public Error {
public:
    GenerateError(const std::string& message, std::vector<Diagnostic> diagnostics)
        : Error(ErrorCode::CannotGenerate, message), diagnostics_(std::move(diagnostics)) {}
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// NDL text of one component, using the profile's templates.
std::string render_component(const ComponentDef& def, const DomainProfile& profile);

/// `node` must be an io.device or macro whose subtree validates.
CodeArtifact generate_component_code(const AsltTree& tree, NodeId node, const DomainProfile& profile);

/// Instances and binds of a task model, by instance name.
struct ApplicationDecl {
    std::string name;
    struct Instance {
        std::string name;
        std::string type;
        NodeId node;
    };
    std::vector<Instance> instances; // sorted by name
    std::vector<WireDecl> binds;     // sorted by (from, to)
};

/// Throws CannotGenerate for binds whose ends are not instances.
ApplicationDecl extract_application(const AsltTree& tree);

/// One artifact per referenced type (transitively) plus the application
/// manifest, sorted by path.
std::vector<CodeArtifact> generate_application(const AsltTree& tree, const DomainProfile& profile);

} // namespace nbmvc
