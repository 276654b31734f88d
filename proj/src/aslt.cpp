#include "nbmvc/aslt.hpp"

#include "nbmvc/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <unordered_set>
#include <utility>

namespace nbmvc {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string NodeId::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(32, '0');
    for (int i = 0; i < 16; ++i) {
        out[15 - i] = digits[(hi >> (4 * i)) & 0xf];
        out[31 - i] = digits[(lo >> (4 * i)) & 0xf];
    }
    return out;
}

std::optional<NodeId> NodeId::parse(std::string_view text) {
    if (text.size() != 32)
        return std::nullopt;
    for (char c : text)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
            return std::nullopt;
    NodeId id;
    std::from_chars(text.data(), text.data() + 16, id.hi, 16);
    std::from_chars(text.data() + 16, text.data() + 32, id.lo, 16);
    return id;
}

NodeId NodeId::from_hex(std::string_view text) {
    auto id = parse(text);
    if (!id)
        fail(ErrorCode::InvalidArgument, "malformed node id '" + std::string(text) + "'");
    return *id;
}

NodeId IdMinter::next() {
    std::uint64_t k = counter_++;
    NodeId id{splitmix64(seed_ ^ splitmix64(2 * k)), splitmix64(seed_ + splitmix64(2 * k + 1))};
    if (id.is_null())
        id.lo = 1;
    return id;
}

std::string_view to_string(ChangeKind kind) {
    switch (kind) {
    case ChangeKind::NodeInserted: return "NodeInserted";
    case ChangeKind::NodeRemoved: return "NodeRemoved";
    case ChangeKind::NodeMoved: return "NodeMoved";
    case ChangeKind::ValueChanged: return "ValueChanged";
    case ChangeKind::MetaChanged: return "MetaChanged";
    }
    return "";
}

std::optional<ChangeKind> parse_change_kind(std::string_view text) {
    static constexpr std::array<ChangeKind, 5> all{
        ChangeKind::NodeInserted, ChangeKind::NodeRemoved, ChangeKind::NodeMoved,
        ChangeKind::ValueChanged, ChangeKind::MetaChanged};
    for (auto k : all)
        if (to_string(k) == text)
            return k;
    return std::nullopt;
}

ChangeEvent invert(const ChangeEvent& event) {
    ChangeEvent inv;
    inv.node = event.node;
    inv.key = event.key;
    inv.before = event.after;
    inv.after = event.before;
    switch (event.kind) {
    case ChangeKind::NodeInserted: inv.kind = ChangeKind::NodeRemoved; break;
    case ChangeKind::NodeRemoved: inv.kind = ChangeKind::NodeInserted; break;
    default: inv.kind = event.kind; break;
    }
    return inv;
}

bool is_meta_key(std::string_view key) {
    auto dot = key.find('.');
    return dot != std::string_view::npos && dot > 0 && dot + 1 < key.size();
}

AsltTree AsltTree::create(std::string root_kind, std::uint64_t seed, std::string domain) {
    if (root_kind.empty())
        fail(ErrorCode::InvalidArgument, "root kind must be non-empty");
    AsltTree tree;
    tree.minter_ = IdMinter(seed);
    tree.domain_ = std::move(domain);
    tree.root_ = tree.minter_.next();
    AsltNode root;
    root.id = tree.root_;
    root.kind = std::move(root_kind);
    tree.nodes_.emplace(root.id, std::move(root));
    return tree;
}

AsltTree AsltTree::from_parts(NodeId root, std::string domain, std::uint64_t version,
                              std::vector<AsltNode> nodes, IdMinter minter) {
    AsltTree tree;
    tree.root_ = root;
    tree.domain_ = std::move(domain);
    tree.version_ = version;
    tree.minter_ = minter;
    for (auto& n : nodes) {
        NodeId id = n.id;
        if (!tree.nodes_.emplace(id, std::move(n)).second)
            fail(ErrorCode::InvalidArgument, "duplicate node id " + id.hex());
    }
    tree.check_invariants();
    return tree;
}

AsltTree::AsltTree(const AsltTree& other)
    : root_(other.root_),
      domain_(other.domain_),
      version_(other.version_),
      nodes_(other.nodes_),
      minter_(other.minter_) {}

AsltTree& AsltTree::operator=(const AsltTree& other) {
    if (this != &other) {
        root_ = other.root_;
        domain_ = other.domain_;
        version_ = other.version_;
        nodes_ = other.nodes_;
        minter_ = other.minter_;
    }
    return *this;
}

const AsltNode* AsltTree::find(NodeId id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const AsltNode& AsltTree::node(NodeId id) const {
    if (auto* n = find(id))
        return *n;
    fail(ErrorCode::NotFound, "no node " + id.hex());
}

AsltNode& AsltTree::mutable_node(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        fail(ErrorCode::NotFound, "no node " + id.hex());
    return it->second;
}

std::optional<MetaValue> AsltTree::meta(NodeId id, std::string_view key) const {
    const auto& n = node(id);
    auto it = n.meta.find(std::string(key));
    if (it == n.meta.end())
        return std::nullopt;
    return it->second;
}

std::size_t AsltTree::index_in_parent(NodeId id) const {
    const auto& n = node(id);
    if (!n.parent)
        return 0;
    const auto& siblings = node(*n.parent).children;
    return static_cast<std::size_t>(std::find(siblings.begin(), siblings.end(), id) -
                                    siblings.begin());
}

bool AsltTree::in_subtree(NodeId id, NodeId ancestor) const {
    const AsltNode* cur = find(id);
    while (cur) {
        if (cur->id == ancestor)
            return true;
        cur = cur->parent ? find(*cur->parent) : nullptr;
    }
    return false;
}

std::vector<NodeId> AsltTree::subtree(NodeId id) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{id};
    node(id);
    while (!stack.empty()) {
        NodeId cur = stack.back();
        stack.pop_back();
        out.push_back(cur);
        const auto& kids = node(cur).children;
        for (auto it = kids.rbegin(); it != kids.rend(); ++it)
            stack.push_back(*it);
    }
    return out;
}

std::vector<NodeId> AsltTree::document_order() const {
    return subtree(root_);
}

std::vector<AsltNode> AsltTree::snapshot_subtree(NodeId id) const {
    std::vector<AsltNode> out;
    for (NodeId n : subtree(id))
        out.push_back(node(n));
    return out;
}

NodeId AsltTree::mint() {
    NodeId id = minter_.next();
    while (contains(id))
        id = minter_.next();
    return id;
}

NodeId AsltTree::insert_node(NodeId parent, std::size_t index, std::string kind, Scalar value) {
    const auto& p = node(parent);
    if (index > p.children.size())
        fail(ErrorCode::InvalidArgument, "insert index " + std::to_string(index) +
                                             " out of range 0.." +
                                             std::to_string(p.children.size()));
    if (kind.empty())
        fail(ErrorCode::InvalidArgument, "node kind must be non-empty");
    check_scalar(value);
    AsltNode n;
    n.id = mint();
    n.kind = std::move(kind);
    n.parent = parent;
    n.value = std::move(value);
    ChangeEvent ev;
    ev.kind = ChangeKind::NodeInserted;
    ev.node = n.id;
    ev.after.placement = Placement{parent, index};
    ev.after.subtree.push_back(std::move(n));
    return commit(std::move(ev)).node;
}

std::size_t AsltTree::remove_subtree(NodeId id) {
    const auto& n = node(id);
    if (!n.parent)
        fail(ErrorCode::InvalidArgument, "cannot remove the root");
    ChangeEvent ev;
    ev.kind = ChangeKind::NodeRemoved;
    ev.node = id;
    ev.before.placement = Placement{*n.parent, index_in_parent(id)};
    ev.before.subtree = snapshot_subtree(id);
    std::size_t count = ev.before.subtree.size();
    commit(std::move(ev));
    return count;
}

void AsltTree::move_node(NodeId id, NodeId new_parent, std::size_t index) {
    const auto& n = node(id);
    node(new_parent);
    if (!n.parent)
        fail(ErrorCode::InvalidArgument, "cannot move the root");
    ChangeEvent ev;
    ev.kind = ChangeKind::NodeMoved;
    ev.node = id;
    ev.before.placement = Placement{*n.parent, index_in_parent(id)};
    ev.after.placement = Placement{new_parent, index};
    commit(std::move(ev));
}

void AsltTree::set_value(NodeId id, Scalar value) {
    check_scalar(value);
    ChangeEvent ev;
    ev.kind = ChangeKind::ValueChanged;
    ev.node = id;
    ev.before.value = node(id).value;
    ev.after.value = std::move(value);
    commit(std::move(ev));
}

void AsltTree::set_meta(NodeId id, const std::string& key, MetaValue value) {
    if (!is_meta_key(key))
        fail(ErrorCode::InvalidArgument, "malformed meta key '" + key + "'");
    value.check();
    ChangeEvent ev;
    ev.kind = ChangeKind::MetaChanged;
    ev.node = id;
    ev.key = key;
    ev.before.meta = meta(id, key);
    ev.after.meta = std::move(value);
    commit(std::move(ev));
}

void AsltTree::remove_meta(NodeId id, const std::string& key) {
    if (!is_meta_key(key))
        fail(ErrorCode::InvalidArgument, "malformed meta key '" + key + "'");
    auto current = meta(id, key);
    if (!current)
        fail(ErrorCode::NotFound, "no meta key '" + key + "' on " + id.hex());
    ChangeEvent ev;
    ev.kind = ChangeKind::MetaChanged;
    ev.node = id;
    ev.key = key;
    ev.before.meta = std::move(current);
    commit(std::move(ev));
}

void AsltTree::validate(const ChangeEvent& ev) const {
    auto inconsistent = [&](const std::string& why) {
        fail(ErrorCode::InvalidArgument,
             std::string(to_string(ev.kind)) + " on " + ev.node.hex() + ": " + why);
    };
    switch (ev.kind) {
    case ChangeKind::NodeInserted: {
        const auto& frag = ev.after;
        if (!frag.placement || frag.subtree.empty())
            inconsistent("missing placement or subtree");
        if (frag.subtree.front().id != ev.node)
            inconsistent("subtree root does not match node");
        const auto& parent = node(frag.placement->parent);
        if (frag.placement->index > parent.children.size())
            inconsistent("index out of range");
        if (frag.subtree.front().parent != frag.placement->parent)
            inconsistent("subtree root parent mismatch");
        std::unordered_set<NodeId, NodeIdHash> ids;
        for (const auto& n : frag.subtree) {
            if (n.kind.empty())
                inconsistent("empty kind");
            if (contains(n.id) || !ids.insert(n.id).second)
                inconsistent("id " + n.id.hex() + " already present");
            check_scalar(n.value);
            for (const auto& [k, v] : n.meta) {
                if (!is_meta_key(k))
                    inconsistent("malformed meta key '" + k + "'");
                v.check();
            }
        }
        // Children must be exactly the nodes of the fragment, each listed once.
        std::size_t linked = 0;
        for (const auto& n : frag.subtree) {
            for (NodeId c : n.children) {
                auto it = std::find_if(frag.subtree.begin(), frag.subtree.end(),
                                       [&](const AsltNode& m) { return m.id == c; });
                if (it == frag.subtree.end() || it->parent != n.id)
                    inconsistent("subtree links are inconsistent");
                ++linked;
            }
        }
        if (linked + 1 != frag.subtree.size())
            inconsistent("subtree is not connected");
        break;
    }
    case ChangeKind::NodeRemoved: {
        const auto& n = node(ev.node);
        if (!n.parent)
            inconsistent("cannot remove the root");
        if (!ev.before.placement ||
            *ev.before.placement != Placement{*n.parent, index_in_parent(ev.node)})
            inconsistent("placement does not match current state");
        if (ev.before.subtree != snapshot_subtree(ev.node))
            inconsistent("subtree does not match current state");
        break;
    }
    case ChangeKind::NodeMoved: {
        const auto& n = node(ev.node);
        if (!n.parent)
            inconsistent("cannot move the root");
        if (!ev.before.placement || !ev.after.placement)
            inconsistent("missing placement");
        if (*ev.before.placement != Placement{*n.parent, index_in_parent(ev.node)})
            inconsistent("placement does not match current state");
        NodeId target = ev.after.placement->parent;
        const auto& p = node(target);
        if (in_subtree(target, ev.node))
            fail(ErrorCode::CycleError, "cannot move " + ev.node.hex() + " into its own subtree");
        std::size_t limit = p.children.size() - (target == *n.parent ? 1 : 0);
        if (ev.after.placement->index > limit)
            fail(ErrorCode::InvalidArgument, "move index " +
                                                 std::to_string(ev.after.placement->index) +
                                                 " out of range 0.." + std::to_string(limit));
        break;
    }
    case ChangeKind::ValueChanged: {
        const auto& n = node(ev.node);
        if (!ev.before.value || !ev.after.value)
            inconsistent("missing value");
        if (*ev.before.value != n.value)
            inconsistent("value does not match current state");
        check_scalar(*ev.after.value);
        break;
    }
    case ChangeKind::MetaChanged: {
        if (!is_meta_key(ev.key))
            fail(ErrorCode::InvalidArgument, "malformed meta key '" + ev.key + "'");
        if (ev.before.meta != meta(ev.node, ev.key))
            inconsistent("meta does not match current state");
        if (!ev.before.meta && !ev.after.meta)
            inconsistent("meta change without either side");
        if (ev.after.meta)
            ev.after.meta->check();
        break;
    }
    }
}

void AsltTree::mutate(const ChangeEvent& ev) {
    switch (ev.kind) {
    case ChangeKind::NodeInserted: {
        auto& parent = mutable_node(ev.after.placement->parent);
        parent.children.insert(parent.children.begin() +
                                   static_cast<std::ptrdiff_t>(ev.after.placement->index),
                               ev.node);
        for (const auto& n : ev.after.subtree)
            nodes_.emplace(n.id, n);
        break;
    }
    case ChangeKind::NodeRemoved: {
        auto& parent = mutable_node(ev.before.placement->parent);
        parent.children.erase(parent.children.begin() +
                              static_cast<std::ptrdiff_t>(ev.before.placement->index));
        for (const auto& n : ev.before.subtree)
            nodes_.erase(n.id);
        break;
    }
    case ChangeKind::NodeMoved: {
        auto& old_parent = mutable_node(ev.before.placement->parent);
        old_parent.children.erase(old_parent.children.begin() +
                                  static_cast<std::ptrdiff_t>(ev.before.placement->index));
        auto& new_parent = mutable_node(ev.after.placement->parent);
        new_parent.children.insert(new_parent.children.begin() +
                                       static_cast<std::ptrdiff_t>(ev.after.placement->index),
                                   ev.node);
        mutable_node(ev.node).parent = ev.after.placement->parent;
        break;
    }
    case ChangeKind::ValueChanged:
        mutable_node(ev.node).value = *ev.after.value;
        break;
    case ChangeKind::MetaChanged: {
        auto& m = mutable_node(ev.node).meta;
        if (ev.after.meta)
            m[ev.key] = *ev.after.meta;
        else
            m.erase(ev.key);
        break;
    }
    }
}

ChangeEvent AsltTree::commit(ChangeEvent event) {
    validate(event);
    mutate(event);
    event.seq = ++version_;
    last_change_ = event;
    for (const auto& [id, listener] : listeners_) {
        try {
            listener(event);
        } catch (const std::exception& e) {
            faults_.push_back("listener " + std::to_string(id) + " at seq " +
                              std::to_string(event.seq) + ": " + e.what());
        } catch (...) {
            faults_.push_back("listener " + std::to_string(id) + " at seq " +
                              std::to_string(event.seq) + ": unknown error");
        }
    }
    return event;
}

void AsltTree::apply_change(const ChangeEvent& event) {
    if (event.seq != version_ + 1)
        fail(ErrorCode::SequenceGap, "event seq " + std::to_string(event.seq) +
                                         " does not follow version " + std::to_string(version_));
    commit(event);
}

ChangeEvent AsltTree::perform(ChangeEvent mutation) {
    return commit(std::move(mutation));
}

SubscriptionId AsltTree::subscribe(ChangeListener listener) {
    SubscriptionId id = next_subscription_++;
    listeners_.emplace_back(id, std::move(listener));
    return id;
}

void AsltTree::unsubscribe(SubscriptionId id) {
    std::erase_if(listeners_, [&](const auto& entry) { return entry.first == id; });
}

std::vector<std::string> AsltTree::take_listener_faults() {
    return std::exchange(faults_, {});
}

void AsltTree::check_invariants() const {
    auto broken = [](const std::string& why) { fail(ErrorCode::InvalidArgument, why); };
    const AsltNode* root = find(root_);
    if (!root)
        broken("root " + root_.hex() + " missing");
    if (root->parent)
        broken("root has a parent");
    std::unordered_set<NodeId, NodeIdHash> seen;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        NodeId cur = stack.back();
        stack.pop_back();
        if (!seen.insert(cur).second)
            broken("node " + cur.hex() + " reached twice");
        const AsltNode* n = find(cur);
        if (!n)
            broken("child " + cur.hex() + " missing");
        if (n->kind.empty())
            broken("node " + cur.hex() + " has empty kind");
        for (NodeId c : n->children) {
            const AsltNode* child = find(c);
            if (!child)
                broken("child " + c.hex() + " missing");
            if (child->parent != cur)
                broken("child " + c.hex() + " does not point back at " + cur.hex());
            stack.push_back(c);
        }
        for (const auto& [k, v] : n->meta)
            if (!is_meta_key(k))
                broken("malformed meta key '" + k + "'");
    }
    if (seen.size() != nodes_.size())
        broken("unreachable nodes in table");
}

bool AsltTree::structurally_equal(const AsltTree& other) const {
    return root_ == other.root_ && domain_ == other.domain_ && nodes_ == other.nodes_;
}

std::vector<NodeId> AsltTree::query(std::string_view path) const {
    auto syntax = [&](const std::string& why) {
        fail(ErrorCode::InvalidArgument, "bad path '" + std::string(path) + "': " + why);
    };
    if (path.empty() || path.front() != '/')
        syntax("must start with '/'");
    std::vector<NodeId> current{root_};
    if (path == "/")
        return current;
    std::string_view rest = path.substr(1);
    while (true) {
        auto slash = rest.find('/');
        std::string_view segment = rest.substr(0, slash);
        if (segment.empty())
            syntax("empty segment");
        std::string_view kind = segment;
        std::optional<std::size_t> pick;
        if (auto open = segment.find('['); open != std::string_view::npos) {
            if (segment.back() != ']' || open == 0)
                syntax("malformed index in '" + std::string(segment) + "'");
            std::string_view digits = segment.substr(open + 1, segment.size() - open - 2);
            std::size_t i = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
            if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size())
                syntax("malformed index in '" + std::string(segment) + "'");
            pick = i;
            kind = segment.substr(0, open);
        }
        if (kind.find_first_of("[]") != std::string_view::npos)
            syntax("stray bracket in '" + std::string(segment) + "'");
        std::vector<NodeId> next;
        for (NodeId parent : current) {
            std::size_t seen = 0;
            for (NodeId c : node(parent).children) {
                if (kind != "*" && node(c).kind != kind)
                    continue;
                if (!pick || *pick == seen)
                    next.push_back(c);
                ++seen;
            }
        }
        current = std::move(next);
        if (slash == std::string_view::npos)
            break;
        rest = rest.substr(slash + 1);
    }
    return current;
}

} // namespace nbmvc
