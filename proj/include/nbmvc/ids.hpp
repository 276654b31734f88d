#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace nbmvc {

/// 128-bit opaque node identity. Rendered as 32 lowercase hex chars.
struct NodeId {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    std::string hex() const;
    static std::optional<NodeId> parse(std::string_view text);
    /// Like parse(), but throws InvalidArgument.
    static NodeId from_hex(std::string_view text);

    bool is_null() const { return hi == 0 && lo == 0; }

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct NodeIdHash {
    std::size_t operator()(const NodeId& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.hi ^ (id.lo * 0x9e3779b97f4a7c15ULL));
    }
};

/// Deterministic id source: the same seed yields the same id sequence.
class IdMinter {
public:
    explicit IdMinter(std::uint64_t seed = 0) : seed_(seed) {}

    NodeId next();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void restore(std::uint64_t seed, std::uint64_t counter) {
        seed_ = seed;
        counter_ = counter;
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
/// FNV-1a, 64-bit. Stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace nbmvc
