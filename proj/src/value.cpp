#include "nbmvc/value.hpp"

#include "nbmvc/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <system_error>

namespace nbmvc {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::CycleError: return "cycle-error";
    case ErrorCode::SequenceGap: return "sequence-gap";
    case ErrorCode::UnsupportedVersion: return "unsupported-version";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::AnchorError: return "anchor-error";
    case ErrorCode::GuardFailed: return "guard-failed";
    case ErrorCode::TransactionRolledBack: return "transaction-rolled-back";
    case ErrorCode::NoProcessor: return "no-processor";
    case ErrorCode::ReplaceRejected: return "replace-rejected";
    case ErrorCode::NothingToUndo: return "nothing-to-undo";
    case ErrorCode::NothingToRedo: return "nothing-to-redo";
    case ErrorCode::MalformedRawEvent: return "malformed-raw-event";
    case ErrorCode::InvalidAnswer: return "invalid-answer";
    case ErrorCode::ProfileError: return "profile-error";
    case ErrorCode::ProfileMismatch: return "profile-mismatch";
    case ErrorCode::SelectionError: return "selection-error";
    case ErrorCode::CannotGenerate: return "cannot-generate";
    case ErrorCode::InputError: return "input-error";
    case ErrorCode::SessionGone: return "session-gone";
    case ErrorCode::IoError: return "io-error";
    }
    return "unknown";
}

ScalarType type_of(const Scalar& value) {
    return static_cast<ScalarType>(value.index());
}

std::string_view type_tag(ScalarType type) {
    switch (type) {
    case ScalarType::None: return "none";
    case ScalarType::Bool: return "bool";
    case ScalarType::Int: return "int";
    case ScalarType::Float: return "float";
    case ScalarType::Text: return "text";
    }
    return "none";
}

std::optional<ScalarType> parse_type_tag(std::string_view tag) {
    static constexpr std::array<ScalarType, 5> all{ScalarType::None, ScalarType::Bool,
                                                   ScalarType::Int, ScalarType::Float,
                                                   ScalarType::Text};
    for (auto t : all)
        if (type_tag(t) == tag)
            return t;
    return std::nullopt;
}

namespace {

std::string float_text(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    std::string out(buf.data(), end);
    if (out.find_first_of(".eEn") == std::string::npos)
        out += ".0";
    return out;
}

[[noreturn]] void bad_parse(ScalarType type, std::string_view text) {
    fail(ErrorCode::InvalidArgument,
         "cannot parse '" + std::string(text) + "' as " + std::string(type_tag(type)));
}

} // namespace

std::string to_text(const Scalar& value) {
    switch (type_of(value)) {
    case ScalarType::None: return "";
    case ScalarType::Bool: return std::get<bool>(value) ? "true" : "false";
    case ScalarType::Int: return std::to_string(std::get<std::int64_t>(value));
    case ScalarType::Float: return float_text(std::get<double>(value));
    case ScalarType::Text: return std::get<std::string>(value);
    }
    return "";
}

Scalar parse_scalar(ScalarType type, std::string_view text) {
    switch (type) {
    case ScalarType::None:
        return Scalar{};
    case ScalarType::Bool:
        if (text == "true" || text == "1")
            return Scalar{true};
        if (text == "false" || text == "0")
            return Scalar{false};
        bad_parse(type, text);
    case ScalarType::Int: {
        std::int64_t v{};
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            bad_parse(type, text);
        return Scalar{v};
    }
    case ScalarType::Float: {
        double v{};
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
            bad_parse(type, text);
        return Scalar{v};
    }
    case ScalarType::Text:
        return Scalar{std::string(text)};
    }
    bad_parse(type, text);
}

void check_scalar(const Scalar& value) {
    if (auto d = std::get_if<double>(&value); d && !std::isfinite(*d))
        fail(ErrorCode::InvalidArgument, "non-finite float value");
}

MetaValue MetaValue::from_scalar(const Scalar& value) {
    switch (type_of(value)) {
    case ScalarType::Bool: return MetaValue(std::get<bool>(value));
    case ScalarType::Int: return MetaValue(std::get<std::int64_t>(value));
    case ScalarType::Float: return MetaValue(std::get<double>(value));
    case ScalarType::Text: return MetaValue(std::get<std::string>(value));
    case ScalarType::None: break;
    }
    fail(ErrorCode::InvalidArgument, "meta values cannot be none");
}

Scalar MetaValue::scalar() const {
    return std::visit(
        [](const auto& v) -> Scalar {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, List>)
                return Scalar{};
            else
                return Scalar{v};
        },
        data_);
}

std::string MetaValue::to_text() const {
    if (!is_list())
        return nbmvc::to_text(scalar());
    std::string out = "[";
    for (std::size_t i = 0; i < list().size(); ++i) {
        if (i)
            out += ",";
        out += nbmvc::to_text(list()[i]);
    }
    return out + "]";
}

void MetaValue::check() const {
    if (!is_list()) {
        check_scalar(scalar());
        return;
    }
    const auto& items = list();
    for (const auto& item : items) {
        if (type_of(item) == ScalarType::None)
            fail(ErrorCode::InvalidArgument, "meta lists cannot hold none");
        if (type_of(item) != type_of(items.front()))
            fail(ErrorCode::InvalidArgument, "meta lists must be homogeneous");
        check_scalar(item);
    }
}

} // namespace nbmvc
