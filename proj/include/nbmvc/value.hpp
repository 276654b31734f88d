#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nbmvc {

/// Node payload: none | bool | int (64-bit) | float (64-bit) | text.
using Scalar = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

enum class ScalarType { None, Bool, Int, Float, Text };

ScalarType type_of(const Scalar& value);
std::string_view type_tag(ScalarType type);
std::optional<ScalarType> parse_type_tag(std::string_view tag);

/// Text form used for labels, placeholders and NDL literals.
std::string to_text(const Scalar& value);

/// Parses `text` as a scalar of `type`; throws InvalidArgument on mismatch.
Scalar parse_scalar(ScalarType type, std::string_view text);

/// Rejects non-finite floats; they have no `.nbm` encoding.
void check_scalar(const Scalar& value);

inline Scalar text(std::string s) { return Scalar{std::move(s)}; }
inline Scalar integer(std::int64_t v) { return Scalar{v}; }
inline Scalar real(double v) { return Scalar{v}; }
inline Scalar boolean(bool v) { return Scalar{v}; }

class MetaValue {
public:
    using List = std::vector<Scalar>;

    MetaValue() : data_(false) {}
    MetaValue(bool v) : data_(v) {}
    MetaValue(int v) : data_(std::int64_t{v}) {}
    MetaValue(std::int64_t v) : data_(v) {}
    MetaValue(double v) : data_(v) {}
    MetaValue(std::string v) : data_(std::move(v)) {}
    MetaValue(const char* v) : data_(std::string(v)) {}
    MetaValue(List v) : data_(std::move(v)) {}

    /// Throws InvalidArgument when `value` is none.
    static MetaValue from_scalar(const Scalar& value);

    bool is_list() const { return std::holds_alternative<List>(data_); }
    const List& list() const { return std::get<List>(data_); }
    /// The scalar form; none for lists.
    Scalar scalar() const;

    template <typename T>
    const T* get_if() const { return std::get_if<T>(&data_); }

    std::string to_text() const;

    /// Lists must be homogeneous and free of none; floats finite.
    void check() const;

    friend bool operator==(const MetaValue&, const MetaValue&) = default;

private:
    std::variant<bool, std::int64_t, double, std::string, List> data_;
};

} // namespace nbmvc
