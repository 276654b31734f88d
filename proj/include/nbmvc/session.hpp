#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/domain.hpp"
#include "nbmvc/events.hpp"
#include "nbmvc/processors.hpp"
#include "nbmvc/scene.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nbmvc {

enum class Outcome { Applied, Rejected, NoOp };

std::string_view to_string(Outcome outcome);

struct TraceStep {
    int step = 0;
    std::string description;
    std::vector<std::uint64_t> seqs;
};

/// What one pass through the event cycle did. Steps: 1 raw event received,
/// 2 classified by the view, 3 controller decision, 4 model mutated,
/// 5 change events published, 6 View Constructor updated, 7 patch
/// delivered to view listeners.
struct CycleTrace {
    Outcome outcome = Outcome::NoOp;
    std::vector<TraceStep> steps;
    std::optional<ModelEvent> model_event;
    std::vector<Diagnostic> diagnostics;
    std::vector<ChangeEvent> changes;
    std::optional<ViewPatch> patch;
    /// Set when the controller stopped to ask for wizard answers; the
    /// outcome is then NoOp.
    std::optional<WizardSpec> wizard;

    std::vector<int> step_numbers() const;
};

Json trace_to_json(const CycleTrace& trace);

/// Outcome of controller_handle: either changes, a wizard request, or
/// diagnostics explaining the refusal.
struct ControllerResult {
    std::vector<ChangeEvent> changes;
    std::optional<WizardSpec> wizard;
    std::vector<Diagnostic> diagnostics;
};

using ViewListener = std::function<void(const std::vector<ChangeEvent>&, const ViewPatch&)>;

/// Resolves a node reference: a 32-hex id or a path matching exactly one
/// node. Throws MalformedRawEvent.
NodeId resolve_ref(const AsltTree& tree, std::string_view ref);

/// The event a processor binds against: wizard answers checked and missing
/// optional fields set to their defaults. Nothing while a required field is
/// still unanswered; throws InvalidAnswer.
std::optional<ModelEvent> prepare_event(const DomainProfile& profile, const ModelEvent& ev);

class Session {
public:
    Session(std::string id, AsltTree tree, DomainProfile profile);

    const std::string& id() const { return id_; }
    const AsltTree& tree() const { return tree_; }
    const DomainProfile& profile() const { return profile_; }
    const Scene& scene() const { return scene_; }
    const UndoStack& undo_stack() const { return undo_; }
    /// Replaces the undo history, e.g. with one saved by a past session.
    void restore_undo(UndoStack stack) { undo_ = std::move(stack); }
    std::vector<PaletteEntry> palette() const { return effective_palette(profile_, tree_); }

    std::optional<NodeId> selection() const { return selection_; }
    void select(std::optional<NodeId> node);

    /// Steps 1-2. Returns nothing for events that do not classify; throws
    /// MalformedRawEvent.
    std::optional<ModelEvent> ingest_raw(const RawEvent& ev);
    /// Step 3 and, when allowed, step 4.
    ControllerResult controller_handle(const ModelEvent& ev);
    /// Enriches the event parked by the last needs-wizard answer for
    /// `wizard_id`. Throws InvalidAnswer or NotFound.
    ModelEvent wizard_complete(const std::string& wizard_id, const std::map<std::string, Scalar>& answers);

    /// Steps 1-7; never throws for classification or decision failures.
    CycleTrace run_cycle(const RawEvent& ev);
    /// Steps 3-7 for an already classified event, e.g. after a wizard.
    CycleTrace run_model_event(const ModelEvent& ev);
    CycleTrace undo();
    CycleTrace redo();
    /// Places every unplaced symbol on the grid as one undoable cycle.
    CycleTrace layout();

    SubscriptionId subscribe_view(ViewListener listener);
    void unsubscribe_view(SubscriptionId id);

    /// Every change applied since the session opened, in seq order.
    const std::vector<ChangeEvent>& history() const { return history_; }

private:
    CycleTrace finish(CycleTrace trace, std::vector<ChangeEvent> changes, const std::string& what);
    ModelEvent classify_drop(const RawEvent& ev);
    std::optional<ModelEvent> classify_pane(const RawEvent& ev);
    ModelEvent classify_edit(const RawEvent& ev);
    NodeId subject_of(const RawEvent& ev) const;

    std::string id_;
    AsltTree tree_;
    DomainProfile profile_;
    Scene scene_;
    UndoStack undo_;
    std::optional<NodeId> selection_;
    std::map<std::string, ModelEvent> parked_;
    std::vector<std::pair<SubscriptionId, ViewListener>> listeners_;
    SubscriptionId next_listener_ = 1;
    std::vector<ChangeEvent> history_;
};

} // namespace nbmvc
