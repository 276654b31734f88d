#pragma once

#include "nbmvc/aslt.hpp"
#include "nbmvc/error.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace nbmvc::testing {

using Rng = std::mt19937_64;

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("nbmvc-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline Scalar random_scalar(Rng& rng) {
    switch (rng() % 5) {
    case 0: return {};
    case 1: return rng() % 2 == 0;
    case 2: return static_cast<std::int64_t>(rng()) >> (rng() % 60);
    case 3: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    default: {
        static const char* words[] = {"", "a", "btn", "héllo", "tab\there", "quote\"s", "line\nbreak", "x.y"};
        return std::string(words[rng() % std::size(words)]);
    }
    }
}

inline MetaValue random_meta(Rng& rng) {
    if (rng() % 4 == 0) {
        MetaValue::List list;
        auto n = rng() % 4;
        for (std::size_t i = 0; i < n; ++i)
            list.push_back(static_cast<std::int64_t>(rng() % 100));
        return MetaValue(list);
    }
    for (;;) {
        auto s = random_scalar(rng);
        if (!std::holds_alternative<std::monostate>(s))
            return MetaValue::from_scalar(s);
    }
}

inline std::string random_kind(Rng& rng) {
    static const char* kinds[] = {"io.device", "io.pin", "macro", "macro.op", "task.instance", "x"};
    return kinds[rng() % std::size(kinds)];
}

inline NodeId random_node(const AsltTree& tree, Rng& rng) {
    auto order = tree.document_order();
    return order[rng() % order.size()];
}

/// Performs one random valid mutation. Returns false when it picked an
/// operation that was not possible on this tree.
inline bool random_mutation(AsltTree& tree, Rng& rng) {
    auto pick = rng() % 10;
    if (pick < 4 || tree.size() < 3) {
        auto parent = random_node(tree, rng);
        auto n = tree.node(parent).children.size();
        tree.insert_node(parent, rng() % (n + 1), random_kind(rng), random_scalar(rng));
        return true;
    }
    auto node = random_node(tree, rng);
    if (pick == 4) {
        if (node == tree.root())
            return false;
        tree.remove_subtree(node);
        return true;
    }
    if (pick == 5) {
        if (node == tree.root())
            return false;
        auto target = random_node(tree, rng);
        if (tree.in_subtree(target, node))
            return false;
        auto n = tree.node(target).children.size();
        if (tree.node(node).parent == target)
            --n;
        tree.move_node(node, target, rng() % (n + 1));
        return true;
    }
    if (pick == 6) {
        tree.set_value(node, random_scalar(rng));
        return true;
    }
    if (pick == 7 && !tree.node(node).meta.empty()) {
        auto it = tree.node(node).meta.begin();
        std::advance(it, rng() % tree.node(node).meta.size());
        tree.remove_meta(node, it->first);
        return true;
    }
    static const char* keys[] = {"view.x", "view.y", "io.address", "port.type", "a.b", "ns.list"};
    tree.set_meta(node, keys[rng() % std::size(keys)], random_meta(rng));
    return true;
}

/// A tree of at most `max_nodes` nodes built by random mutations.
inline AsltTree random_tree(Rng& rng, std::size_t max_nodes, std::size_t steps) {
    AsltTree tree = AsltTree::create(random_kind(rng), rng(), "io");
    for (std::size_t i = 0; i < steps; ++i) {
        if (tree.size() >= max_nodes) {
            auto node = random_node(tree, rng);
            if (node != tree.root())
                tree.remove_subtree(node);
            continue;
        }
        random_mutation(tree, rng);
    }
    return tree;
}

} // namespace nbmvc::testing
