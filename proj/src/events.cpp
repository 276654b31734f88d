#include "nbmvc/events.hpp"

#include "nbmvc/error.hpp"

#include <array>
#include <cmath>

namespace nbmvc {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view text, const std::array<Enum, N>& all) {
    for (auto v : all)
        if (to_string(v) == text)
            return v;
    return std::nullopt;
}

[[noreturn]] void malformed_raw(const std::string& why) {
    fail(ErrorCode::MalformedRawEvent, "malformed raw event: " + why);
}

} // namespace

std::string_view to_string(RawSource source) {
    switch (source) {
    case RawSource::ModellingPane: return "ModellingPane";
    case RawSource::Toolbar: return "Toolbar";
    case RawSource::PropertyInspector: return "PropertyInspector";
    case RawSource::LayerPanel: return "LayerPanel";
    case RawSource::External: return "External";
    }
    return "";
}

std::string_view to_string(RawKind kind) {
    switch (kind) {
    case RawKind::Drop: return "Drop";
    case RawKind::Click: return "Click";
    case RawKind::DragEnd: return "DragEnd";
    case RawKind::FieldEdit: return "FieldEdit";
    case RawKind::KeyCommand: return "KeyCommand";
    }
    return "";
}

std::string_view to_string(ModelEventKind kind) {
    switch (kind) {
    case ModelEventKind::ElementDropped: return "ElementDropped";
    case ModelEventKind::ElementRemoved: return "ElementRemoved";
    case ModelEventKind::BindingCreated: return "BindingCreated";
    case ModelEventKind::BindingRemoved: return "BindingRemoved";
    case ModelEventKind::PropertyEdited: return "PropertyEdited";
    case ModelEventKind::ElementMoved: return "ElementMoved";
    case ModelEventKind::FilterToggled: return "FilterToggled";
    case ModelEventKind::GroupCreated: return "GroupCreated";
    case ModelEventKind::SubmodelToggled: return "SubmodelToggled";
    }
    return "";
}

std::optional<RawSource> parse_raw_source(std::string_view text) {
    return parse_enum(text, std::array{RawSource::ModellingPane, RawSource::Toolbar,
                                       RawSource::PropertyInspector, RawSource::LayerPanel,
                                       RawSource::External});
}

std::optional<RawKind> parse_raw_kind(std::string_view text) {
    return parse_enum(text, std::array{RawKind::Drop, RawKind::Click, RawKind::DragEnd,
                                       RawKind::FieldEdit, RawKind::KeyCommand});
}

std::optional<ModelEventKind> parse_model_event_kind(std::string_view text) {
    for (auto k : kAllModelEventKinds)
        if (to_string(k) == text)
            return k;
    return std::nullopt;
}

Json plain_scalar_to_json(const Scalar& value) {
    return std::visit(
        [](const auto& v) -> Json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                return nullptr;
            else
                return v;
        },
        value);
}

Scalar plain_scalar_from_json(const Json& j) {
    if (j.is_null())
        return Scalar{};
    if (j.is_boolean())
        return Scalar{j.get<bool>()};
    if (j.is_number_integer())
        return Scalar{j.get<std::int64_t>()};
    if (j.is_number_float())
        return Scalar{j.get<double>()};
    if (j.is_string())
        return Scalar{j.get<std::string>()};
    fail(ErrorCode::InvalidArgument, "payload values must be scalars");
}

Json raw_event_to_json(const RawEvent& event) {
    Json j;
    j["source"] = std::string(to_string(event.source));
    j["kind"] = std::string(to_string(event.kind));
    j["position"] = event.position ? Json{{"x", event.position->x}, {"y", event.position->y}}
                                   : Json(nullptr);
    Json payload = Json::object();
    for (const auto& [k, v] : event.payload)
        payload[k] = v;
    j["payload"] = std::move(payload);
    return j;
}

RawEvent raw_event_from_json(const Json& j) {
    if (!j.is_object())
        malformed_raw("not an object");
    RawEvent ev;
    auto str = [&](const char* field) -> std::string {
        if (!j.contains(field) || !j.at(field).is_string())
            malformed_raw(std::string("missing '") + field + "'");
        return j.at(field).get<std::string>();
    };
    auto source = parse_raw_source(str("source"));
    if (!source)
        malformed_raw("unknown source '" + str("source") + "'");
    auto kind = parse_raw_kind(str("kind"));
    if (!kind)
        malformed_raw("unknown kind '" + str("kind") + "'");
    ev.source = *source;
    ev.kind = *kind;
    if (j.contains("position") && !j.at("position").is_null()) {
        const auto& p = j.at("position");
        if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.at("x").is_number() ||
            !p.at("y").is_number())
            malformed_raw("position must be {x, y}");
        ev.position = Position{p.at("x").get<double>(), p.at("y").get<double>()};
        if (!std::isfinite(ev.position->x) || !std::isfinite(ev.position->y))
            malformed_raw("position must be finite");
    }
    if (j.contains("payload")) {
        if (!j.at("payload").is_object())
            malformed_raw("payload must be an object");
        for (const auto& [k, v] : j.at("payload").items()) {
            if (v.is_string())
                ev.payload[k] = v.get<std::string>();
            else if (v.is_primitive() && !v.is_null())
                ev.payload[k] = v.dump();
            else
                malformed_raw("payload values must be text");
        }
    }
    return ev;
}

Json model_event_to_json(const ModelEvent& event) {
    Json j;
    j["kind"] = std::string(to_string(event.kind));
    j["subject"] = event.subject ? Json(event.subject->hex()) : Json(nullptr);
    Json payload = Json::object();
    for (const auto& [k, v] : event.payload)
        payload[k] = plain_scalar_to_json(v);
    j["payload"] = std::move(payload);
    return j;
}

ModelEvent model_event_from_json(const Json& j) {
    if (!j.is_object())
        fail(ErrorCode::InvalidArgument, "model event must be an object");
    ModelEvent ev;
    auto kind = parse_model_event_kind(require_string(j, "kind", "kind"));
    if (!kind)
        fail(ErrorCode::InvalidArgument, "unknown model event kind");
    ev.kind = *kind;
    if (j.contains("subject") && !j.at("subject").is_null())
        ev.subject = NodeId::from_hex(j.at("subject").get<std::string>());
    if (j.contains("payload"))
        for (const auto& [k, v] : j.at("payload").items())
            ev.payload[k] = plain_scalar_from_json(v);
    return ev;
}

} // namespace nbmvc
