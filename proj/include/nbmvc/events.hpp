#pragma once

#include "nbmvc/ids.hpp"
#include "nbmvc/value.hpp"
#include "nbmvc/wire.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace nbmvc {

enum class RawSource { ModellingPane, Toolbar, PropertyInspector, LayerPanel, External };
enum class RawKind { Drop, Click, DragEnd, FieldEdit, KeyCommand };

struct Position {
    double x = 0;
    double y = 0;

    friend bool operator==(const Position&, const Position&) = default;
};

/// A simple UI event as it arrives at the view.
struct RawEvent {
    RawSource source = RawSource::ModellingPane;
    RawKind kind = RawKind::Click;
    std::optional<Position> position;
    std::map<std::string, std::string> payload;

    friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

enum class ModelEventKind {
    ElementDropped,
    ElementRemoved,
    BindingCreated,
    BindingRemoved,
    PropertyEdited,
    ElementMoved,
    FilterToggled,
    GroupCreated,
    SubmodelToggled,
};

inline constexpr ModelEventKind kAllModelEventKinds[] = {
    ModelEventKind::ElementDropped, ModelEventKind::ElementRemoved,
    ModelEventKind::BindingCreated, ModelEventKind::BindingRemoved,
    ModelEventKind::PropertyEdited, ModelEventKind::ElementMoved,
    ModelEventKind::FilterToggled,  ModelEventKind::GroupCreated,
    ModelEventKind::SubmodelToggled,
};

/// A classified change request, as fired by the view to the controller.
struct ModelEvent {
    ModelEventKind kind = ModelEventKind::ElementDropped;
    std::optional<NodeId> subject;
    std::map<std::string, Scalar> payload;

    friend bool operator==(const ModelEvent&, const ModelEvent&) = default;
};

std::string_view to_string(RawSource source);
std::string_view to_string(RawKind kind);
std::string_view to_string(ModelEventKind kind);
std::optional<RawSource> parse_raw_source(std::string_view text);
std::optional<RawKind> parse_raw_kind(std::string_view text);
std::optional<ModelEventKind> parse_model_event_kind(std::string_view text);

/// Payload scalars travel as plain JSON (string, integer, float, bool, null).
Json plain_scalar_to_json(const Scalar& value);
Scalar plain_scalar_from_json(const Json& j);

Json raw_event_to_json(const RawEvent& event);
/// Throws MalformedRawEvent.
RawEvent raw_event_from_json(const Json& j);
Json model_event_to_json(const ModelEvent& event);
ModelEvent model_event_from_json(const Json& j);

} // namespace nbmvc
