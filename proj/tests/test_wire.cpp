#include "doctest.h"

#include "support.hpp"

#include "nbmvc/error.hpp"
#include "nbmvc/wire.hpp"

using namespace nbmvc;

TEST_CASE("empty tree round-trip") {
    auto t = AsltTree::create("task.app", 3, "task");
    auto back = deserialize(serialize(t));
    CHECK(back == t);
}

TEST_CASE("all scalar types and list meta survive") {
    auto t = AsltTree::create("io.library", 1, "io");
    auto r = t.root();
    t.insert_node(r, 0, "a", Scalar{});
    t.insert_node(r, 1, "b", boolean(false));
    t.insert_node(r, 2, "c", integer(-9223372036854775807LL - 1));
    t.insert_node(r, 3, "d", real(0.1));
    auto e = t.insert_node(r, 4, "e", text("héllo \"x\"\n"));
    t.set_meta(e, "ns.list", MetaValue(MetaValue::List{real(1.5), real(-2)}));
    t.set_meta(e, "ns.empty", MetaValue(MetaValue::List{}));
    t.set_meta(e, "view.x", MetaValue(40.0));
    auto bytes = serialize(t);
    auto back = deserialize(bytes);
    CHECK(back == t);
    CHECK(serialize(back) == bytes);
}

TEST_CASE("document layout") {
    auto t = AsltTree::create("io.device", 2, "io");
    auto p = t.insert_node(t.root(), 0, "io.pin", text("btn"));
    t.set_meta(p, "port.type", MetaValue(std::string("bool")));
    auto j = Json::parse(serialize(t));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items())
        keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"schema", "domain", "root", "version", "nodes"});
    CHECK(j["schema"] == "nbmvc/1");
    CHECK(j["nodes"][0]["parent"].is_null());
    std::vector<std::string> node_keys;
    for (const auto& [k, v] : j["nodes"][1].items())
        node_keys.push_back(k);
    CHECK(node_keys == std::vector<std::string>{"id", "kind", "parent", "index", "value", "meta"});
    CHECK(j["nodes"][1]["value"] == Json{{"t", "text"}, {"v", "btn"}});
    CHECK(j["nodes"][1]["meta"]["port.type"] == Json{{"t", "text"}, {"v", "bool"}});
}

TEST_CASE("malformed input") {
    auto t = AsltTree::create("io.device", 2, "io");
    t.insert_node(t.root(), 0, "io.pin", text("btn"));
    auto bytes = serialize(t);
    auto code = [](std::string_view b) {
        try {
            deserialize(b);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    CHECK(code(bytes.substr(0, bytes.size() / 2)) == ErrorCode::ParseError);
    CHECK(code("") == ErrorCode::ParseError);
    auto j = Json::parse(bytes);
    j["schema"] = "nbmvc/2";
    CHECK(code(j.dump()) == ErrorCode::UnsupportedVersion);
    j = Json::parse(bytes);
    j["nodes"][1]["index"] = 3;
    CHECK(code(j.dump()) == ErrorCode::ParseError);
    j = Json::parse(bytes);
    j["nodes"][1]["value"]["t"] = "int";
    CHECK(code(j.dump()) == ErrorCode::ParseError);
}

TEST_CASE("change events round-trip through JSON") {
    testing::Rng rng(77);
    auto t = AsltTree::create("io.library", 4, "io");
    std::vector<ChangeEvent> log;
    t.subscribe([&](const ChangeEvent& ev) { log.push_back(ev); });
    while (log.size() < 100)
        testing::random_mutation(t, rng);
    auto fresh = AsltTree::create("io.library", 4, "io");
    for (const auto& ev : log) {
        auto back = change_from_json(Json::parse(change_to_json(ev).dump()));
        CHECK(back == ev);
        fresh.apply_change(back);
    }
    CHECK(fresh == t);
}

TEST_CASE("deserialized trees keep minting fresh ids") {
    testing::Rng rng(8);
    auto t = testing::random_tree(rng, 40, 60);
    auto back = deserialize(serialize(t));
    auto id = back.insert_node(back.root(), 0, "x");
    CHECK_FALSE(t.contains(id));
}
