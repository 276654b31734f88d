#include "doctest.h"

#include "nbmvc/build.hpp"
#include "nbmvc/codegen.hpp"
#include "nbmvc/session.hpp"

using namespace nbmvc;

namespace {

RawEvent drop(const std::string& item, std::map<std::string, std::string> payload = {},
              std::optional<Position> pos = Position{40, 40}) {
    RawEvent ev;
    ev.source = RawSource::Toolbar;
    ev.kind = RawKind::Drop;
    ev.position = pos;
    ev.payload = std::move(payload);
    ev.payload["palette_item"] = item;
    return ev;
}

RawEvent pane(RawKind kind, std::map<std::string, std::string> payload, std::optional<Position> pos = {}) {
    RawEvent ev;
    ev.source = RawSource::ModellingPane;
    ev.kind = kind;
    ev.position = pos;
    ev.payload = std::move(payload);
    return ev;
}

RawEvent edit(const std::string& node, const std::string& field, const std::string& value) {
    RawEvent ev;
    ev.source = RawSource::PropertyInspector;
    ev.kind = RawKind::FieldEdit;
    ev.payload = {{"node", node}, {"field", field}, {"value", value}};
    return ev;
}

Session io_session() { return Session("s", AsltTree::create("io.library", 7, "io"), load_profile("io")); }

void require_scene_fresh(const Session& s) { REQUIRE(s.scene() == construct_scene(s.tree(), s.profile())); }

} // namespace

TEST_CASE("toolbar drop runs all seven steps") {
    auto s = io_session();
    auto t = s.run_cycle(drop("io.device", {{"name", "panel"}}));
    CHECK(t.outcome == Outcome::Applied);
    CHECK(t.step_numbers() == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
    auto dev = s.tree().node(s.tree().root()).children.at(0);
    CHECK(s.tree().node(dev).value == text("panel"));
    CHECK(s.tree().meta(dev, "view.x") == MetaValue(40.0));
    CHECK(s.undo_stack().size() == 1);
    require_scene_fresh(s);
}

TEST_CASE("drop classification carries the palette data") {
    auto s = io_session();
    auto me = s.ingest_raw(drop("io.device", {}, Position{40, 40}));
    REQUIRE(me);
    CHECK(me->kind == ModelEventKind::ElementDropped);
    CHECK(me->payload.at("kind") == text("io.device"));
    CHECK(me->payload.at("x") == real(40));
    CHECK(me->payload.at("y") == real(40));
}

TEST_CASE("empty canvas click is a no-op") {
    auto s = io_session();
    auto t = s.run_cycle(pane(RawKind::Click, {}));
    CHECK(t.outcome == Outcome::NoOp);
    CHECK(t.step_numbers() == std::vector<int>{1});
}

TEST_CASE("drop without palette item is rejected") {
    auto s = io_session();
    RawEvent ev;
    ev.source = RawSource::Toolbar;
    ev.kind = RawKind::Drop;
    CHECK_THROWS_AS(s.ingest_raw(ev), Error);
    auto t = s.run_cycle(ev);
    CHECK(t.outcome == Outcome::Rejected);
    CHECK(t.step_numbers() == std::vector<int>{1});
    CHECK(t.diagnostics.at(0).rule == "malformed-raw-event");
}

TEST_CASE("guard failure rejects at step 3 and leaves the tree alone") {
    auto s = io_session();
    s.run_cycle(drop("io.device", {{"name", "panel"}}));
    auto before = s.tree();
    auto scene = s.scene();
    // A pin dropped onto the library root fails the container guard.
    auto t = s.run_cycle(drop("io.pin", {{"name", "btn"}, {"target", "/"}}));
    CHECK(t.outcome == Outcome::Rejected);
    CHECK(t.step_numbers() == std::vector<int>{1, 2, 3});
    CHECK(s.tree() == before);
    CHECK(s.scene() == scene);
    CHECK(s.undo_stack().size() == 1);
}

TEST_CASE("missing wizard answers park the event") {
    auto s = io_session();
    s.run_cycle(drop("io.device", {{"name", "panel"}}));
    auto version = s.tree().version();
    auto t = s.run_cycle(drop("io.pin"));
    CHECK(t.outcome == Outcome::NoOp);
    REQUIRE(t.wizard);
    CHECK(t.wizard->id == "io.pin");
    CHECK(s.tree().version() == version);
    CHECK_THROWS_AS(s.wizard_complete("io.pin", {{"name", text("1bad")}}), Error);
    auto me = s.wizard_complete("io.pin", {{"name", text("btn")}});
    CHECK(me.payload.at("direction") == text("in"));
    auto done = s.run_model_event(me);
    CHECK(done.outcome == Outcome::Applied);
    CHECK(done.step_numbers() == std::vector<int>{3, 4, 5, 6, 7});
    auto pin = s.tree().query("/io.device/io.pin");
    REQUIRE(pin.size() == 1);
    CHECK(s.tree().meta(pin[0], keys::PortType) == MetaValue("bool"));
    CHECK_THROWS_AS(s.wizard_complete("io.pin", {}), Error); // nothing parked any more
}

TEST_CASE("wizard default equals omission") {
    auto a = io_session();
    auto b = io_session();
    for (auto* s : {&a, &b})
        s->run_cycle(drop("io.device", {{"name", "d"}}));
    a.run_cycle(drop("io.pin", {{"name", "p"}}));
    b.run_cycle(drop("io.pin", {{"name", "p"}, {"direction", "in"}}));
    CHECK(a.tree() == b.tree());
}

TEST_CASE("unsupported events are rejected without mutation") {
    auto s = io_session();
    s.run_cycle(drop("io.device", {{"name", "d"}}));
    auto v = s.tree().version();
    auto t = s.run_cycle(pane(RawKind::DragEnd, {{"from_node", "/io.device"}, {"from_port", "x"},
                                                 {"to_node", "/io.device"}, {"to_port", "y"}}));
    CHECK(t.outcome == Outcome::Rejected);
    CHECK(t.diagnostics.at(0).rule == "no-processor");
    CHECK(s.tree().version() == v);
}

TEST_CASE("view listeners see applied cycles only") {
    auto s = io_session();
    std::vector<ViewPatch> one, two;
    s.subscribe_view([&](const auto&, const ViewPatch& p) { one.push_back(p); });
    s.subscribe_view([&](const auto&, const ViewPatch& p) { two.push_back(p); });
    s.run_cycle(drop("io.device", {{"name", "d"}}));
    s.run_cycle(pane(RawKind::Click, {}));
    s.run_cycle(drop("io.pin", {{"name", "p"}, {"target", "/"}}));
    CHECK(one.size() == 1);
    REQUIRE(two.size() == 1);
    CHECK(patch_to_json(one[0]) == patch_to_json(two[0]));
}

TEST_CASE("undo and redo are cycles too") {
    auto s = io_session();
    s.run_cycle(drop("io.device", {{"name", "d"}}));
    auto t = s.undo();
    CHECK(t.outcome == Outcome::Applied);
    CHECK(s.tree().node(s.tree().root()).children.empty());
    require_scene_fresh(s);
    CHECK(s.redo().outcome == Outcome::Applied);
    CHECK(s.tree().node(s.tree().root()).children.size() == 1);
    require_scene_fresh(s);
    CHECK(s.redo().outcome == Outcome::Rejected);
}

TEST_CASE("building And2 through raw events") {
    Session s("m", AsltTree::create("macro.library", 9, "macro"), load_profile("macro"));
    auto check = [&](const RawEvent& ev) {
        auto t = s.run_cycle(ev);
        INFO(trace_to_json(t).dump());
        REQUIRE(t.outcome == Outcome::Applied);
        require_scene_fresh(s);
    };
    check(drop("macro", {{"name", "And2"}, {"ins", "2"}, {"outs", "1"}}));
    CHECK(s.tree().query("/macro/macro.port").size() == 3);
    check(drop("op.AND", {{"name", "and1"}}, Position{200, 80}));
    check(pane(RawKind::DragEnd, {{"from_node", "/macro/macro.port[0]"}, {"from_port", "out"},
                                  {"to_node", "/macro/macro.op"}, {"to_port", "in0"}}));
    check(pane(RawKind::DragEnd, {{"from_node", "/macro/macro.port[1]"}, {"from_port", "out"},
                                  {"to_node", "/macro/macro.op"}, {"to_port", "in1"}}));
    check(pane(RawKind::DragEnd, {{"from_node", "/macro/macro.op"}, {"from_port", "out"},
                                  {"to_node", "/macro/macro.port[2]"}, {"to_port", "in"}}));
    CHECK(validate_model(s.tree(), s.profile()).empty());
    CHECK(s.scene().bindings.size() == 3);

    check(edit("/macro/macro.op", "name", "gate"));
    CHECK(s.tree().meta(s.tree().query("/macro/macro.op")[0], keys::Name) == MetaValue("gate"));
    check(edit("/macro/macro.op", "layer", "logic"));

    // A use of And2 shows up in the palette.
    auto pal = s.palette();
    CHECK(std::any_of(pal.begin(), pal.end(), [](const PaletteEntry& e) { return e.id == "use.And2"; }));

    check(pane(RawKind::KeyCommand, {{"command", "delete"}, {"node", "/macro/macro.op"}}));
    CHECK(s.tree().query("/macro/macro.wire").empty());
    CHECK(s.tree().query("/macro/macro.port").size() == 3);

    RawEvent filter;
    filter.source = RawSource::LayerPanel;
    filter.kind = RawKind::Click;
    filter.payload = {{"filter", "kind:macro.port"}, {"active", "true"}};
    check(filter);
    for (const auto& [id, sym] : s.scene().symbols)
        CHECK(sym.visible == (sym.kind != "macro.port"));

    check(pane(RawKind::KeyCommand, {{"command", "collapse"}, {"node", "/macro"}}));
    check(pane(RawKind::KeyCommand, {{"command", "group"}, {"members", "/macro/macro.port[0],/macro/macro.port[1]"},
                                     {"group", "inputs"}}));
    CHECK(s.scene().groups.size() == 1);
    check(pane(RawKind::DragEnd, {{"node", "/macro"}}, Position{10, 20}));
}

TEST_CASE("profile mismatch") {
    CHECK_THROWS_AS(Session("x", AsltTree::create("io.library", 1, "io"), load_profile("task")), Error);
}
