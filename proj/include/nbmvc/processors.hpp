#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/events.hpp"
#include "nbmvc/wire.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace nbmvc {

enum class AtomicOp { Insert, Remove, Move, SetValue, SetMeta, RemoveMeta, AssertKind };

std::string_view to_string(AtomicOp op);
std::optional<AtomicOp> parse_atomic_op(std::string_view text);

/// One primitive tree mutation or guard.
///
/// Anchors are path text (`/a/b[0]`), a literal 32-hex NodeId, `@last`
/// (the node most recently inserted in the same run) or `@new[K]` (the
/// K-th node inserted in the same run). For Insert the anchor names the
/// parent; for Move `target` names the new parent.
struct AtomicInstruction {
    AtomicOp op = AtomicOp::AssertKind;
    std::string anchor;
    std::string kind;
    std::optional<std::size_t> index; // Insert / Move; empty appends
    std::string target;
    Scalar value;
    std::string key;
    MetaValue meta;

    friend bool operator==(const AtomicInstruction&, const AtomicInstruction&) = default;
};

Json instruction_to_json(const AtomicInstruction& instr);
/// Parses the concrete (placeholder-free) instruction form.
AtomicInstruction instruction_from_json(const Json& j);

/// Per-run state shared by the instructions of one processor application.
struct ApplyContext {
    std::vector<NodeId> inserted;
};

/// Resolves an anchor to exactly one node; throws AnchorError otherwise.
NodeId resolve_anchor(const AsltTree& tree, std::string_view anchor, const ApplyContext& ctx);

/// Performs one instruction. Returns the change, or nothing for a passing
/// AssertKind. Throws AnchorError / GuardFailed / core errors.
std::optional<ChangeEvent> apply_atomic(AsltTree& tree, const AtomicInstruction& instr,
                                        ApplyContext& ctx);

/// A domain-specific processor: an instruction template list bound to the
/// payload of the event that triggers it.
///
/// Templates use the concrete instruction form with `${...}` placeholders
/// in any string: `${payload.<field>}`, `${payload.<field>|<default>}`,
/// `${subject}`, `${root}` and loop variables. Two template-only forms are
/// expanded during binding and never reach the tree:
///   {"op":"Repeat","args":{"count":N,"var":"i"},"body":[...]}
///   {"op":"When","args":{"value":A,"equals":B},"body":[...]}
struct DomainProcessor {
    std::string name;
    std::string domain;
    ModelEventKind trigger = ModelEventKind::ElementDropped;
    Json instructions = Json::array();
};

Json processor_to_json(const DomainProcessor& proc);
/// Accepts the processor definition document; throws ProfileError.
DomainProcessor processor_from_json(const Json& j, const std::string& domain);

/// Placeholder substitution plus Repeat/When expansion.
std::vector<AtomicInstruction> bind_processor(const DomainProcessor& proc, const ModelEvent& event,
                                              const AsltTree& tree);

/// Expands `${name}` / `${name|default}` placeholders (nested allowed).
std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars);

class ProcessorRegistry {
public:
    /// Throws ReplaceRejected when (domain, trigger) is already taken.
    void add(DomainProcessor proc);
    /// Records that `kind` is deliberately not handled in `domain`.
    void mark_unsupported(const std::string& domain, ModelEventKind kind);

    /// Throws NoProcessor.
    const DomainProcessor& resolve(const std::string& domain, ModelEventKind kind) const;
    const DomainProcessor* find(const std::string& domain, ModelEventKind kind) const;
    bool is_unsupported(const std::string& domain, ModelEventKind kind) const;

    std::vector<const DomainProcessor*> all() const;

private:
    std::map<std::pair<std::string, ModelEventKind>, DomainProcessor> processors_;
    std::set<std::pair<std::string, ModelEventKind>> unsupported_;
};

struct UndoEntry {
    std::string label;
    std::vector<ChangeEvent> forward;
    /// Unsequenced mutations that undo `forward`, in application order.
    std::vector<ChangeEvent> inverse;
};

class UndoStack {
public:
    /// Drops any redo tail, then appends.
    void push(std::string label, std::vector<ChangeEvent> forward);

    bool can_undo() const { return cursor_ > 0; }
    bool can_redo() const { return cursor_ < entries_.size(); }
    std::size_t size() const { return entries_.size(); }
    std::size_t cursor() const { return cursor_; }
    const std::vector<UndoEntry>& entries() const { return entries_; }

    /// Applies the inverse of the entry under the cursor as one transaction.
    /// Throws NothingToUndo.
    std::vector<ChangeEvent> undo(AsltTree& tree);
    /// Re-applies the forward mutations of the next entry. Throws NothingToRedo.
    std::vector<ChangeEvent> redo(AsltTree& tree);

    /// Rebuilds a stack saved with undo_stack_to_json. Throws
    /// InvalidArgument when the cursor is out of range.
    static UndoStack restore(std::vector<UndoEntry> entries, std::size_t cursor);

private:
    std::vector<UndoEntry> entries_;
    std::size_t cursor_ = 0;
};

Json undo_stack_to_json(const UndoStack& stack);
/// Throws ParseError.
UndoStack undo_stack_from_json(const Json& j);

/// Applies `mutations` to a detached copy, then commits them to `tree` in
/// order. Either every mutation lands and is published, or none does.
std::vector<ChangeEvent> commit_transaction(AsltTree& tree, const std::vector<ChangeEvent>& mutations);

struct ApplyOptions {
    /// Throws GuardFailed in place of the instruction at this position.
    std::optional<std::size_t> inject_fault_at;
    UndoStack* undo = nullptr;
};

/// Runs `instructions` all-or-nothing. On failure throws
/// TransactionRolledBack naming the cause; `tree` is untouched and nothing
/// is published.
std::vector<ChangeEvent> apply_instructions(AsltTree& tree,
                                            const std::vector<AtomicInstruction>& instructions,
                                            const ApplyOptions& options = {},
                                            const std::string& label = {});

std::vector<ChangeEvent> apply_processor(AsltTree& tree, const DomainProcessor& proc,
                                         const ModelEvent& event, const ApplyOptions& options = {});

// Meta information accessors. Keys are "<ns>.<key>".

struct MiptHit {
    NodeId node;
    std::string key;
    MetaValue value;

    friend bool operator==(const MiptHit&, const MiptHit&) = default;
};

std::optional<MetaValue> mipt_get(const AsltTree& tree, NodeId node, std::string_view ns,
                                  std::string_view key);
ChangeEvent mipt_set(AsltTree& tree, NodeId node, std::string_view ns, std::string_view key,
                     MetaValue value);
using MiptPredicate = std::function<bool(std::string_view key, const MetaValue& value)>;
/// Walks the tree in document order.
std::vector<MiptHit> mipt_query(const AsltTree& tree, std::string_view ns,
                                const MiptPredicate& predicate);

} // namespace nbmvc
