#pragma once

#include "nbmvc/ids.hpp"
#include "nbmvc/value.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nbmvc {

struct AsltNode {
    NodeId id;
    std::string kind;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    Scalar value;
    std::map<std::string, MetaValue> meta;

    friend bool operator==(const AsltNode&, const AsltNode&) = default;
};

struct Placement {
    NodeId parent;
    std::size_t index = 0;

    friend bool operator==(const Placement&, const Placement&) = default;
};

enum class ChangeKind { NodeInserted, NodeRemoved, NodeMoved, ValueChanged, MetaChanged };

std::string_view to_string(ChangeKind kind);
std::optional<ChangeKind> parse_change_kind(std::string_view text);

/// The part of the tree a change touched, on one side of the change.
///
/// NodeInserted / NodeRemoved carry `placement` and the whole `subtree`
/// (document order, subtree root first) on the side where it exists.
/// NodeMoved carries `placement` on both sides. ValueChanged carries
/// `value`; MetaChanged carries `meta`, left empty on the side where the
/// key is absent.
struct Fragment {
    std::optional<Placement> placement;
    std::vector<AsltNode> subtree;
    std::optional<Scalar> value;
    std::optional<MetaValue> meta;

    friend bool operator==(const Fragment&, const Fragment&) = default;
};

struct ChangeEvent {
    std::uint64_t seq = 0;
    ChangeKind kind = ChangeKind::ValueChanged;
    NodeId node;
    std::string key; // MetaChanged only
    Fragment before;
    Fragment after;

    friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
};

/// The mutation that undoes `event`. The result is unsequenced (seq 0).
ChangeEvent invert(const ChangeEvent& event);

/// True for "ns.key" with non-empty namespace and key.
bool is_meta_key(std::string_view key);

using ChangeListener = std::function<void(const ChangeEvent&)>;
using SubscriptionId = std::uint64_t;

/// Versioned, annotatable tree. Every successful mutation bumps the version
/// by one and publishes exactly one ChangeEvent whose seq is the new version.
///
/// Copies are detached: they carry the data, version and id minter, but no
/// listeners.
class AsltTree {
public:
    static AsltTree create(std::string root_kind, std::uint64_t seed = 0,
                           std::string domain = {});

    AsltTree(const AsltTree& other);
    AsltTree& operator=(const AsltTree& other);
    AsltTree(AsltTree&&) noexcept = default;
    AsltTree& operator=(AsltTree&&) noexcept = default;

    NodeId root() const { return root_; }
    std::uint64_t version() const { return version_; }
    const std::string& domain() const { return domain_; }
    std::size_t size() const { return nodes_.size(); }

    bool contains(NodeId id) const { return nodes_.count(id) != 0; }
    const AsltNode* find(NodeId id) const;
    /// Throws NotFound.
    const AsltNode& node(NodeId id) const;
    std::optional<MetaValue> meta(NodeId id, std::string_view key) const;
    std::size_t index_in_parent(NodeId id) const;
    /// True when `ancestor` is `node` or lies on its parent chain.
    bool in_subtree(NodeId node, NodeId ancestor) const;

    /// Preorder from the root.
    std::vector<NodeId> document_order() const;
    std::vector<NodeId> subtree(NodeId id) const;

    NodeId insert_node(NodeId parent, std::size_t index, std::string kind, Scalar value = {});
    /// Returns the number of nodes removed.
    std::size_t remove_subtree(NodeId id);
    void move_node(NodeId id, NodeId new_parent, std::size_t index);
    void set_value(NodeId id, Scalar value);
    void set_meta(NodeId id, const std::string& key, MetaValue value);
    void remove_meta(NodeId id, const std::string& key);

    /// `/kind/kind[i]/...`; `*` matches any kind, `[i]` picks the i-th
    /// matching child (0-based) of each parent. `/` alone is the root.
    std::vector<NodeId> query(std::string_view path) const;

    SubscriptionId subscribe(ChangeListener listener);
    void unsubscribe(SubscriptionId id);

    /// Replays a recorded event. Requires event.seq == version() + 1 and a
    /// `before` side that matches the current state.
    void apply_change(const ChangeEvent& event);
    /// Applies an unsequenced mutation as the next version and returns the
    /// sequenced event that was published.
    ChangeEvent perform(ChangeEvent mutation);

    /// The event published by the most recent successful mutation.
    const ChangeEvent& last_change() const { return last_change_; }

    /// Messages from listeners that threw. The mutation stands regardless.
    const std::vector<std::string>& listener_faults() const { return faults_; }
    std::vector<std::string> take_listener_faults();

    IdMinter& minter() { return minter_; }
    const IdMinter& minter() const { return minter_; }

    /// Walks the whole tree; throws InvalidArgument describing the first
    /// broken link, cycle or unreachable node.
    void check_invariants() const;

    /// Equality over root, domain and node table; ignores the version.
    bool structurally_equal(const AsltTree& other) const;
    /// Structural equality plus version.
    friend bool operator==(const AsltTree& a, const AsltTree& b) {
        return a.version_ == b.version_ && a.structurally_equal(b);
    }

    /// Used by deserialization to rebuild a tree verbatim.
    static AsltTree from_parts(NodeId root, std::string domain, std::uint64_t version,
                               std::vector<AsltNode> nodes, IdMinter minter);

private:
    AsltTree() = default;

    AsltNode& mutable_node(NodeId id);
    ChangeEvent commit(ChangeEvent event);
    void validate(const ChangeEvent& event) const;
    void mutate(const ChangeEvent& event);
    std::vector<AsltNode> snapshot_subtree(NodeId id) const;
    NodeId mint();

    NodeId root_;
    std::string domain_;
    std::uint64_t version_ = 0;
    std::unordered_map<NodeId, AsltNode, NodeIdHash> nodes_;
    IdMinter minter_;

    std::vector<std::pair<SubscriptionId, ChangeListener>> listeners_;
    SubscriptionId next_subscription_ = 1;
    std::vector<std::string> faults_;
    ChangeEvent last_change_;
};

} // namespace nbmvc
