// Acceptance run. Prints one PASS / FAIL line per criterion and exits 1
// when any criterion fails. Every check is exact: the allowed number of
// violations is pinned to zero below. Usage: nbmvc_acceptance [seed]

#include "support.hpp"

#include "nbmvc/build.hpp"
#include "nbmvc/protocol.hpp"
#include "nbmvc/runtime.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace nbmvc;
using nbmvc::testing::Rng;
using nbmvc::testing::TempDir;

namespace {

// Tolerances. No criterion admits a single violation.
constexpr std::size_t kMaxViolations = 0;

// Sizes.
constexpr int kCycleSessionsPerDomain = 3;
constexpr int kCycleMessagesPerSession = 150;
constexpr std::size_t kMinRawEventsPerDomain = 100;
constexpr int kSourcingSessions = 50;
constexpr std::size_t kMinMutationsPerSession = 200;
constexpr int kFaultEventsPerDomain = 400;
constexpr int kRandomProcessors = 100;
constexpr std::size_t kMaxProcessorLength = 10;
constexpr int kOracleMacros = 100;
constexpr int kMaxMacroInputs = 6;
constexpr int kMaxMacroGates = 12;
constexpr std::size_t kDerivations = 100;
constexpr int kVectorsPerDerivation = 100;
constexpr int kSerializedTrees = 1000;
constexpr std::size_t kMaxTreeNodes = 500;

std::uint64_t g_seed = 0x6e626d7663;

struct Tally {
    std::size_t cases = 0;
    std::size_t violations = 0;
    std::vector<std::string> notes;
    std::string summary;

    void fail(const std::string& what) {
        ++violations;
        if (notes.size() < 5)
            notes.push_back(what);
    }
    bool expect(bool ok, const std::string& what) {
        if (!ok)
            fail(what);
        return ok;
    }
};

std::string path_of(const AsltTree& tree, NodeId id) {
    if (id == tree.root())
        return "/";
    std::vector<std::string> parts;
    for (NodeId cur = id; cur != tree.root();) {
        const auto& n = tree.node(cur);
        std::size_t k = 0;
        for (auto s : tree.node(*n.parent).children) {
            if (s == cur)
                break;
            if (tree.node(s).kind == n.kind)
                ++k;
        }
        parts.push_back(n.kind + "[" + std::to_string(k) + "]");
        cur = *n.parent;
    }
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it)
        out += "/" + *it;
    return out;
}

// Random client messages

/// Produces plausible client messages for a model, with a share of
/// deliberately bad ones (unknown items, missing ports, bad answers).
class EventGen {
public:
    explicit EventGen(std::uint64_t seed) : rng_(seed) {}

    Json next(const AsltTree& tree, const DomainProfile& profile, const std::optional<WizardSpec>& pending) {
        if (pending && chance(75))
            return answers(*pending);
        const bool big = tree.size() > 60;
        std::discrete_distribution<int> what(
            {big ? 6.0 : 30.0, 16, 12, 8, big ? 30.0 : 10.0, 4, 4, 4, 3, 5, 3, 1});
        switch (what(rng_)) {
        case 0: return raw(drop(tree, profile));
        case 1: return raw(bind(tree, profile));
        case 2: return raw(edit(tree, profile));
        case 3: {
            Json ev{{"source", "ModellingPane"}, {"kind", "DragEnd"}, {"payload", {{"node", ref(tree, node(tree, false))}}}};
            if (chance(90))
                ev["position"] = position();
            return raw(ev);
        }
        case 4: {
            // Wires are few among the nodes; aim at them now and then.
            auto target = node(tree, chance(3));
            std::vector<NodeId> wires;
            for (auto id : tree.document_order())
                if (profile.is_relation(tree.node(id).kind))
                    wires.push_back(id);
            if (!wires.empty() && chance(30))
                target = pick(wires);
            return raw(Json{{"source", "ModellingPane"},
                            {"kind", "KeyCommand"},
                            {"payload", {{"command", "delete"}, {"node", ref(tree, target)}}}});
        }
        case 5: {
            std::vector<std::string> specs = {"layer:default", "layer:aux", "meta:node.name=g0", "bad"};
            specs.push_back("kind:" + tree.node(node(tree, false)).kind);
            return raw(Json{{"source", "LayerPanel"},
                            {"kind", "Click"},
                            {"payload", {{"filter", pick(specs)}, {"active", chance(60) ? "true" : "false"}}}});
        }
        case 6: {
            std::string members;
            for (std::size_t i = 0, n = 1 + rng_() % 3; i < n; ++i)
                members += (i ? "," : "") + ref(tree, node(tree, false));
            return raw(Json{{"source", "ModellingPane"},
                            {"kind", "KeyCommand"},
                            {"payload", {{"command", "group"}, {"members", members}, {"group", "g" + std::to_string(rng_() % 3)}}}});
        }
        case 7:
            return raw(Json{{"source", "ModellingPane"},
                            {"kind", "KeyCommand"},
                            {"payload", {{"command", "collapse"}, {"node", ref(tree, node(tree, false))}}}});
        case 8: {
            Json payload = Json::object();
            if (chance(70))
                payload["node"] = ref(tree, node(tree, true));
            return raw(Json{{"source", "ModellingPane"}, {"kind", "Click"}, {"payload", payload}});
        }
        case 9: return Json{{"type", "undo"}, {"body", Json::object()}};
        case 10: return Json{{"type", "redo"}, {"body", Json::object()}};
        default: {
            std::vector<Json> bad = {
                Json{{"source", "Nowhere"}, {"kind", "Drop"}},
                Json{{"source", "ModellingPane"}, {"kind", "DragEnd"}, {"payload", {{"from_node", ref(tree, node(tree, true))}}}},
                Json{{"source", "Toolbar"}, {"kind", "Drop"}, {"payload", {{"palette_item", 7}}}},
            };
            return raw(pick(bad));
        }
        }
    }

private:
    Rng rng_;

    bool chance(int pct) { return static_cast<int>(rng_() % 100) < pct; }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[rng_() % v.size()];
    }
    static Json raw(Json ev) { return Json{{"type", "raw_event"}, {"body", std::move(ev)}}; }
    Json position() { return Json{{"x", static_cast<double>(rng_() % 800)}, {"y", static_cast<double>(rng_() % 600)}}; }

    std::string name() {
        static const std::vector<std::string> good = {"a", "b", "c", "n1", "n2", "x", "led", "btn", "Half", "Sum"};
        static const std::vector<std::string> bad = {"1bad", "AND", "", "a b"};
        return chance(92) ? pick(good) : pick(bad);
    }
    std::string ref(const AsltTree& tree, NodeId id) { return chance(70) ? id.hex() : path_of(tree, id); }
    NodeId node(const AsltTree& tree, bool allow_root) {
        auto order = tree.document_order();
        if (order.size() == 1 || allow_root)
            return order[rng_() % order.size()];
        return order[1 + rng_() % (order.size() - 1)];
    }

    Json drop(const AsltTree& tree, const DomainProfile& profile) {
        auto palette = effective_palette(profile, tree);
        Json payload = Json::object();
        if (palette.empty() || chance(2)) {
            payload["palette_item"] = "nope.item";
        } else {
            const auto& e = pick(palette);
            payload["palette_item"] = e.id;
            if (e.container != profile.root_kind && chance(80)) {
                std::vector<NodeId> hosts;
                for (auto id : tree.document_order())
                    if (tree.node(id).kind == e.container)
                        hosts.push_back(id);
                if (!hosts.empty())
                    payload["target"] = ref(tree, pick(hosts));
            }
            if (chance(85))
                payload["name"] = name();
            if (e.wizard == "macro.create") {
                if (chance(60))
                    payload["ins"] = std::to_string(rng_() % 4);
                if (chance(60))
                    payload["outs"] = std::to_string(rng_() % 3);
            } else if (e.wizard == "macro.const" && chance(50)) {
                payload["literal_type"] = "bool";
                payload["literal"] = chance(50) ? "true" : "false";
            } else if (e.wizard == "io.pin" && chance(70)) {
                payload["direction"] = chance(50) ? "in" : "out";
                payload["type"] = chance(80) ? "bool" : "int";
            }
        }
        Json ev{{"source", "Toolbar"}, {"kind", "Drop"}, {"payload", payload}};
        if (chance(80))
            ev["position"] = position();
        return ev;
    }

    Json bind(const AsltTree& tree, const DomainProfile& profile) {
        std::vector<std::pair<NodeId, std::string>> outs, ins;
        for (auto id : tree.document_order()) {
            if (id == tree.root())
                continue;
            for (const auto& c : connectors(tree, id, profile))
                (c.dir == PortDir::Out ? outs : ins).emplace_back(id, c.name);
        }
        auto a = node(tree, false), b = node(tree, false);
        std::string ap = "x", bp = "y";
        if (!outs.empty() && !ins.empty()) {
            std::tie(a, ap) = pick(outs);
            std::tie(b, bp) = pick(ins);
        }
        if (chance(8))
            ap = "nope";
        return Json{{"source", "ModellingPane"},
                    {"kind", "DragEnd"},
                    {"payload", {{"from_node", ref(tree, a)}, {"from_port", ap}, {"to_node", ref(tree, b)}, {"to_port", bp}}}};
    }

    Json edit(const AsltTree& tree, const DomainProfile& profile) {
        auto n = node(tree, chance(5));
        std::vector<std::string> fields = {"layer"};
        if (auto it = profile.fields.find(tree.node(n).kind); it != profile.fields.end())
            for (const auto& [f, _] : it->second)
                fields.push_back(f);
        if (chance(5))
            fields = {"bogus"};
        auto field = pick(fields);
        std::string value = "v";
        if (field == "name")
            value = name();
        else if (field == "direction")
            value = pick(std::vector<std::string>{"in", "out", "sideways"});
        else if (field == "type")
            value = pick(std::vector<std::string>{"bool", "int", "text", "nope"});
        else if (field == "op")
            value = pick(std::vector<std::string>{"AND", "OR", "NOT", "XOR", "FOO"});
        else if (field == "literal")
            value = pick(std::vector<std::string>{"true", "false", "3"});
        else if (field == "address")
            value = pick(std::vector<std::string>{"A0", "B1"});
        else if (field == "layer")
            value = pick(std::vector<std::string>{"default", "aux", "top"});
        Json payload{{"field", field}, {"value", value}};
        if (chance(95))
            payload["node"] = ref(tree, n);
        return Json{{"source", "PropertyInspector"}, {"kind", "FieldEdit"}, {"payload", payload}};
    }

    Json answers(const WizardSpec& spec) {
        Json a = Json::object();
        for (const auto& f : spec.fields) {
            if (!f.required() && chance(50))
                continue;
            if (chance(4))
                continue;
            if (f.name == "name")
                a[f.name] = name();
            else if (f.type == ScalarType::Int)
                a[f.name] = chance(95) ? static_cast<int>(rng_() % 4) : 99;
            else if (f.name == "type" || f.name == "literal_type")
                a[f.name] = chance(85) ? "bool" : "int";
            else if (f.name == "direction")
                a[f.name] = chance(50) ? "in" : "out";
            else if (f.name == "literal")
                a[f.name] = chance(50) ? "true" : "false";
            else
                a[f.name] = "A3";
        }
        if (chance(4))
            a["zzz"] = "1";
        return Json{{"type", "wizard_answers"}, {"body", {{"wizard", spec.id}, {"answers", a}}}};
    }
};

// Hub client with a replica of the model and of the scene

bool is_cycle_reply(const std::string& type) {
    return type == "applied" || type == "rejected" || type == "noop" || type == "needs_wizard";
}

struct Client {
    ProtocolHub& hub;
    const DomainProfile& profile;
    Tally& order;
    Tally* rebuild = nullptr;

    std::string session;
    std::uint64_t seq = 0;
    std::optional<AsltTree> replica;
    Scene scene;
    std::uint64_t version = 0;
    std::uint64_t undo = 0;
    std::uint64_t redo = 0;
    std::optional<WizardSpec> pending;
    std::vector<Json> script;
    std::vector<std::string> reply_types;

    bool open(const std::string& project) {
        auto r = hub.handle(Json{{"type", "open_session"}, {"body", {{"project", project}}}});
        if (!order.expect(r["type"] == "snapshot", "open " + project + ": " + r.dump()))
            return false;
        const auto& b = r["body"];
        session = r["session"].get<std::string>();
        seq = 0;
        replica = tree_from_json(b["tree"]);
        scene = scene_from_json(b["scene"]);
        version = b["version"];
        undo = b["undo_depth"];
        redo = b["redo_depth"];
        pending.reset();
        order.expect(replica->version() == version, "snapshot version");
        return true;
    }

    void close() { hub.close(session); }

    Json send(const Json& msg) {
        const std::string kind = msg["type"];
        auto r = hub.handle(make_message(kind, session, ++seq, msg["body"]));
        script.push_back(msg);
        reply_types.push_back(r["type"].get<std::string>());
        observe(kind, r);
        return r;
    }

    void observe(const std::string& kind, const Json& r) {
        const std::string type = r["type"];
        const std::string at = kind + " #" + std::to_string(seq) + ": ";
        order.expect(r["seq"] == seq && r["session"] == session, at + "reply envelope " + r.dump());
        if (!is_cycle_reply(type)) {
            if (type == "error") {
                std::string code = r["body"]["code"];
                order.expect(code != "sequence-gap" && code != "session-gone", at + "transport error " + code);
            }
            return;
        }
        ++order.cases;
        const auto& b = r["body"];
        std::vector<int> steps = b["steps"];
        order.expect(!steps.empty() && steps.front() == (kind == "wizard_answers" ? 3 : 1), at + "first step");
        for (std::size_t i = 1; i < steps.size(); ++i)
            order.expect(steps[i - 1] < steps[i], at + "steps out of order");
        bool mutated = std::any_of(steps.begin(), steps.end(), [](int s) { return s >= 4; });
        order.expect(mutated == (type == "applied"), at + "mutation steps on a " + type + " reply");

        std::uint64_t nv = b["version"], nu = b["undo_depth"], nr = b["redo_depth"];
        if (type != "applied") {
            order.expect(nv == version && nu == undo && nr == redo, at + type + " moved the model");
        } else {
            order.expect(steps.size() >= 4 && std::vector<int>(steps.end() - 4, steps.end()) == std::vector<int>{4, 5, 6, 7},
                         at + "applied steps do not end with 4 5 6 7");
            const auto& changes = b["change_events"];
            order.expect(!changes.empty() && nv == version + changes.size(), at + "version does not follow the changes");
            for (std::size_t i = 0; i < changes.size(); ++i) {
                auto c = change_from_json(changes[i]);
                order.expect(c.seq == version + 1 + i, at + "change seq");
                try {
                    replica->apply_change(c);
                } catch (const Error& e) {
                    order.fail(at + "change does not apply to the replica: " + e.what());
                }
            }
            if (kind == "undo")
                order.expect(nu + 1 == undo && nr == redo + 1, at + "undo depths");
            else if (kind == "redo")
                order.expect(nu == undo + 1 && nr + 1 == redo, at + "redo depths");
            else
                order.expect(nu == undo + 1 && nr == 0, at + "new entry depths");
            try {
                apply_patch(scene, patch_from_json(b["view_patch"]));
            } catch (const Error& e) {
                order.fail(at + "patch does not apply: " + e.what());
            }
            if (rebuild) {
                ++rebuild->cases;
                rebuild->expect(scene == construct_scene(*replica, profile),
                                at + "patched scene differs from a full rebuild (" + profile.name + ")");
            }
        }
        version = nv;
        undo = nu;
        redo = nr;
        if (type == "needs_wizard") {
            const auto* spec = profile.wizard(b["spec"]["id"].get<std::string>());
            pending = spec ? std::optional(*spec) : std::nullopt;
        } else if (!(kind == "wizard_answers" && type == "rejected")) {
            pending.reset();
        }
    }
};

// Workspaces with the sample projects

std::filesystem::path samples_dir() {
    return std::filesystem::path(NBMVC_SOURCE_DIR) / "samples";
}

const std::vector<std::pair<std::string, std::string>> kSamples = {
    {"hardware", "io"}, {"logic", "macro"}, {"app", "task"}};

struct Fixture {
    TempDir dir;
    Workspace ws{dir.path};
    ProtocolHub hub{ws};

    /// Creates the sample projects and runs their scripts. Returns every reply.
    std::vector<Json> load_samples(Tally* t = nullptr) {
        std::vector<Json> all;
        for (const auto& [name, domain] : kSamples) {
            ws.create(name, domain);
            std::ifstream in(samples_dir() / (name + ".jsonl"));
            if (t)
                t->expect(in.good(), "cannot read sample " + name);
            for (auto& r : run_script(hub, name, in)) {
                if (t)
                    t->expect(r["type"] != "error" && r["type"] != "rejected", name + ": " + r.dump());
                all.push_back(std::move(r));
            }
        }
        return all;
    }
};

const char* kDomains[] = {"io", "macro", "task"};

// Criteria

/// Cycle ordering plus, on the same traffic, the incremental scene check.
struct CycleRun {
    Tally order;
    Tally rebuild;
};

CycleRun run_cycles() {
    CycleRun out;
    Fixture fx;
    fx.load_samples(&out.order);
    struct Recorded {
        std::string project;
        std::vector<Json> script;
        std::vector<std::string> replies;
    };
    std::vector<Recorded> recorded;
    std::ostringstream summary;
    for (const char* domain : kDomains) {
        const std::string project = std::string("cyc_") + domain;
        fx.ws.create(project, domain);
        auto profile = fx.ws.profile_for(project);
        std::map<std::string, std::size_t> outcomes;
        std::size_t raw = 0;
        AsltTree last = fx.ws.load(project);
        for (int s = 0; s < kCycleSessionsPerDomain; ++s) {
            Client c{fx.hub, profile, out.order, &out.rebuild};
            if (!c.open(project))
                continue;
            out.order.expect(c.replica->structurally_equal(last), project + ": reopened model differs");
            EventGen gen(g_seed ^ (0x100 * (s + 1)) ^ std::hash<std::string>{}(domain));
            for (int i = 0; i < kCycleMessagesPerSession; ++i) {
                auto msg = gen.next(*c.replica, profile, c.pending);
                auto r = c.send(msg);
                if (msg["type"] == "raw_event") {
                    ++raw;
                    ++outcomes[r["type"].get<std::string>()];
                }
            }
            c.close();
            last = *c.replica;
            recorded.push_back({project, c.script, c.reply_types});
        }
        out.order.expect(fx.ws.load(project) == last, project + ": saved model differs from the client replica");
        out.order.expect(raw >= kMinRawEventsPerDomain, project + ": too few raw events");
        for (const char* t : {"applied", "rejected", "noop"})
            out.order.expect(outcomes[t] > 0, project + ": no " + std::string(t) + " raw event");
        summary << domain << " " << raw << " raw (" << outcomes["applied"] << " applied, " << outcomes["rejected"]
                << " rejected, " << outcomes["noop"] + outcomes["needs_wizard"] << " noop) ";
    }

    // The recorded traffic, replayed as apply-event scripts on a fresh
    // workspace, must give the same replies and the same models.
    Fixture again;
    again.load_samples();
    for (const char* domain : kDomains)
        again.ws.create(std::string("cyc_") + domain, domain);
    for (const auto& rec : recorded) {
        std::stringstream lines;
        for (const auto& m : rec.script)
            lines << m.dump() << "\n";
        auto replies = run_script(again.hub, rec.project, lines);
        std::vector<std::string> types;
        for (std::size_t i = 1; i < replies.size(); ++i)
            types.push_back(replies[i]["type"].get<std::string>());
        ++out.order.cases;
        out.order.expect(types == rec.replies, rec.project + ": script replay gave different replies");
    }
    for (const char* domain : kDomains) {
        const std::string project = std::string("cyc_") + domain;
        out.order.expect(again.ws.load(project) == fx.ws.load(project), project + ": script replay gave another model");
    }
    out.order.summary = summary.str();
    out.rebuild.summary = std::to_string(out.rebuild.cases) + " applied cycles compared";
    return out;
}

Tally run_event_sourcing() {
    Tally t;
    Fixture fx;
    fx.load_samples(&t);
    Rng rng(g_seed + 2);
    std::size_t total = 0, saves = 0, reopens = 0;
    for (int s = 0; s < kSourcingSessions; ++s) {
        const std::string domain = kDomains[s % 3];
        const std::string project = "es" + std::to_string(s);
        fx.ws.create(project, domain);
        auto profile = fx.ws.profile_for(project);
        Client c{fx.hub, profile, t};
        if (!c.open(project))
            continue;
        EventGen gen(g_seed * 31 + s);
        std::size_t mutations = 0;
        for (int i = 0; i < 6000 && mutations < kMinMutationsPerSession; ++i) {
            auto r = c.send(gen.next(*c.replica, profile, c.pending));
            if (r["type"] == "applied")
                mutations += r["body"]["change_events"].size();
            if (rng() % 100 < 3) {
                ++saves;
                t.expect(c.send(Json{{"type", "save"}, {"body", Json::object()}})["type"] == "saved", project + ": save");
            }
            if (rng() % 100 < 2) {
                ++reopens;
                c.close();
                AsltTree before = *c.replica;
                auto depths = std::pair(c.undo, c.redo);
                if (!c.open(project))
                    break;
                t.expect(*c.replica == before, project + ": reopened snapshot differs from the replica");
                t.expect(std::pair(c.undo, c.redo) == depths, project + ": undo history lost on reopen");
            }
        }
        c.close();
        total += mutations;
        ++t.cases;
        t.expect(mutations >= kMinMutationsPerSession, project + ": only " + std::to_string(mutations) + " mutations");
        auto saved = fx.ws.load(project);
        t.expect(saved == *c.replica, project + ": saved model differs from the client replica");
        t.expect(fx.ws.replay(project) == saved, project + ": replayed log differs from the snapshot");
        auto log = fx.ws.read_log(project);
        for (std::size_t i = 0; i < log.size(); ++i)
            if (!t.expect(log[i].seq == i + 1, project + ": log seq gap"))
                break;
        for (int k = 0; k < 3 && !log.empty(); ++k) {
            auto cut = rng() % (log.size() + 1);
            try {
                auto partial = fx.ws.replay(project, cut);
                partial.check_invariants();
                t.expect(partial.version() == cut, project + ": prefix version");
            } catch (const Error& e) {
                t.fail(project + ": prefix of " + std::to_string(cut) + " events: " + e.what());
            }
        }
    }
    t.summary = std::to_string(kSourcingSessions) + " sessions, " + std::to_string(total) + " mutations, " +
                std::to_string(saves) + " saves, " + std::to_string(reopens) + " reopens";
    return t;
}

Tally run_transactions() {
    Tally t;
    Fixture fx;
    fx.load_samples(&t);
    std::set<std::string> covered;
    std::set<std::string> registered;
    std::size_t events = 0;
    for (const char* domain : kDomains) {
        const std::string project = std::string("tx_") + domain;
        fx.ws.create(project, domain);
        auto profile = fx.ws.profile_for(project);
        for (const auto* p : profile.registry.all())
            registered.insert(p->domain + "/" + std::string(to_string(p->trigger)));
        Session s("tx", fx.ws.load(project), profile);
        EventGen gen(g_seed * 7 + events);
        std::optional<WizardSpec> pending;
        for (int i = 0; i < kFaultEventsPerDomain; ++i) {
            auto msg = gen.next(s.tree(), profile, pending);
            const std::string kind = msg["type"];
            const AsltTree pre = s.tree();
            const auto pre_bytes = serialize(pre);
            CycleTrace trace;
            if (kind == "raw_event") {
                RawEvent ev;
                try {
                    ev = raw_event_from_json(msg["body"]);
                } catch (const Error&) {
                    continue;
                }
                trace = s.run_cycle(ev);
            } else if (kind == "wizard_answers") {
                std::map<std::string, Scalar> answers;
                for (const auto& [k, v] : msg["body"]["answers"].items())
                    answers[k] = plain_scalar_from_json(v);
                try {
                    trace = s.run_model_event(s.wizard_complete(msg["body"]["wizard"], answers));
                } catch (const Error&) {
                    continue;
                }
            } else if (kind == "undo") {
                trace = s.undo();
            } else {
                trace = s.redo();
            }
            pending = trace.wizard;
            if (trace.outcome != Outcome::Applied) {
                t.expect(serialize(s.tree()) == pre_bytes, project + ": a refused event changed the model");
                continue;
            }
            if (kind == "undo" || kind == "redo" || !trace.model_event)
                continue;
            ++events;
            const auto& me = *trace.model_event;
            auto bound = prepare_event(profile, me);
            const auto* proc = profile.registry.find(profile.name, me.kind);
            if (!t.expect(bound && proc, project + ": applied event has no processor"))
                continue;
            auto instrs = bind_processor(*proc, *bound, pre);
            {
                AsltTree again = pre;
                auto changes = apply_processor(again, *proc, *bound);
                t.expect(changes == trace.changes && again == s.tree(), project + ": processor is not deterministic");
            }
            for (std::size_t k = 0; k < instrs.size(); ++k) {
                ++t.cases;
                AsltTree copy = pre;
                std::size_t published = 0;
                copy.subscribe([&](const ChangeEvent&) { ++published; });
                bool rolled_back = false;
                try {
                    ApplyOptions opts;
                    opts.inject_fault_at = k;
                    apply_processor(copy, *proc, *bound, opts);
                } catch (const Error& e) {
                    rolled_back = e.code() == ErrorCode::TransactionRolledBack;
                }
                const std::string at = proc->name + " fault at " + std::to_string(k) + "/" + std::to_string(instrs.size());
                t.expect(rolled_back, at + ": no rollback");
                t.expect(published == 0, at + ": events published");
                t.expect(serialize(copy) == pre_bytes, at + ": tree changed");
            }
            if (!instrs.empty())
                covered.insert(profile.name + "/" + std::string(to_string(me.kind)));
        }
    }
    for (const auto& r : registered)
        t.expect(covered.count(r) != 0, "processor never exercised: " + r);
    t.summary = std::to_string(events) + " applied events, " + std::to_string(covered.size()) + "/" +
                std::to_string(registered.size()) + " processors covered";
    return t;
}

// Composition: a processor run equals its instructions one by one.

AtomicInstruction random_instruction(const AsltTree& tree, Rng& rng, std::size_t inserted_so_far) {
    static const std::vector<std::string> kinds = {"io.device", "io.pin", "macro", "x"};
    static const std::vector<std::string> keys = {"view.x", "node.name", "a.b", "view.y", "a.c", "nokey"};
    auto order = tree.document_order();
    auto any = [&] { return order[rng() % order.size()]; };
    auto anchor = [&]() -> std::string {
        auto r = rng() % 100;
        if (r < 70)
            return any().hex();
        if (r < 78 && inserted_so_far)
            return "@last";
        if (r < 86 && inserted_so_far)
            return "@new[" + std::to_string(rng() % inserted_so_far) + "]";
        if (r < 94)
            return path_of(tree, any());
        if (r < 96)
            return "/";
        return rng() % 2 ? "/nope" : NodeId::parse("0123456789abcdef0123456789abcdef")->hex();
    };
    AtomicInstruction in;
    in.anchor = anchor();
    switch (rng() % 7) {
    case 0:
    case 1:
        in.op = AtomicOp::Insert;
        in.kind = kinds[rng() % kinds.size()];
        in.value = testing::random_scalar(rng);
        if (rng() % 3 == 0)
            in.index = rng() % 4;
        break;
    case 2: in.op = AtomicOp::Remove; break;
    case 3:
        in.op = AtomicOp::Move;
        in.target = anchor();
        if (rng() % 2)
            in.index = rng() % 3;
        break;
    case 4:
        in.op = AtomicOp::SetValue;
        in.value = testing::random_scalar(rng);
        break;
    case 5:
        in.op = rng() % 3 ? AtomicOp::SetMeta : AtomicOp::RemoveMeta;
        in.key = keys[rng() % keys.size()];
        if (in.op == AtomicOp::SetMeta)
            in.meta = testing::random_meta(rng);
        break;
    default:
        in.op = AtomicOp::AssertKind;
        in.kind = rng() % 4 ? tree.node(order[0]).kind : kinds[rng() % kinds.size()];
        if (rng() % 2) {
            auto n = any();
            in.anchor = n.hex();
            in.kind = rng() % 4 ? tree.node(n).kind : "x.other";
        }
        break;
    }
    return in;
}

Tally run_composition() {
    Tally t;
    Rng rng(g_seed + 4);
    std::size_t ok = 0, refused = 0;
    for (int p = 0; p < kRandomProcessors; ++p) {
        auto base = testing::random_tree(rng, 40, 10 + rng() % 60);
        std::vector<AtomicInstruction> instrs;
        std::size_t inserts = 0;
        for (std::size_t i = 0, n = 1 + rng() % kMaxProcessorLength; i < n; ++i) {
            instrs.push_back(random_instruction(base, rng, inserts));
            inserts += instrs.back().op == AtomicOp::Insert;
        }
        DomainProcessor proc{"random" + std::to_string(p), "io", ModelEventKind::ElementDropped, Json::array()};
        for (const auto& in : instrs)
            proc.instructions.push_back(instruction_to_json(in));
        t.expect(bind_processor(proc, ModelEvent{}, base) == instrs, proc.name + ": binding changed the instructions");

        for (int trial = 0; trial < 3; ++trial) {
            ++t.cases;
            AsltTree pre = base;
            for (int m = 0; m < trial * 3; ++m)
                testing::random_mutation(pre, rng);
            const auto pre_bytes = serialize(pre);

            AsltTree seq_tree = pre;
            ApplyContext ctx;
            std::vector<ChangeEvent> seq_events;
            bool failed = false;
            try {
                for (const auto& in : instrs)
                    if (auto ev = apply_atomic(seq_tree, in, ctx))
                        seq_events.push_back(*ev);
            } catch (const Error&) {
                failed = true;
            }

            for (int via = 0; via < 2; ++via) {
                AsltTree tree = pre;
                std::vector<ChangeEvent> events;
                bool threw = false;
                try {
                    events = via == 0 ? apply_processor(tree, proc, ModelEvent{}) : apply_instructions(tree, instrs);
                } catch (const Error& e) {
                    threw = true;
                    t.expect(e.code() == ErrorCode::TransactionRolledBack, proc.name + ": failure is not a rollback");
                }
                const std::string at = proc.name + (via == 0 ? " as processor" : " as instruction list");
                if (failed) {
                    t.expect(threw, at + ": succeeded where the sequence failed");
                    t.expect(serialize(tree) == pre_bytes, at + ": failed run left changes");
                } else {
                    t.expect(!threw, at + ": failed where the sequence succeeded");
                    t.expect(tree == seq_tree, at + ": result differs from the sequence");
                    t.expect(events == seq_events, at + ": events differ from the sequence");
                }
            }
            if (!failed) {
                AsltTree tree = pre;
                UndoStack undo;
                ApplyOptions opts;
                opts.undo = &undo;
                apply_processor(tree, proc, ModelEvent{}, opts);
                if (undo.can_undo()) {
                    undo.undo(tree);
                    t.expect(tree.structurally_equal(pre), proc.name + ": undo does not restore the tree");
                }
            }
            (failed ? refused : ok)++;
        }
    }
    t.expect(ok > 0 && refused > 0, "random processors should both succeed and fail");
    t.summary = std::to_string(ok) + " committed, " + std::to_string(refused) + " rolled back";
    return t;
}

std::map<std::string, std::string> read_tree_files(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[std::filesystem::relative(e.path(), root).generic_string()] = ss.str();
    }
    return out;
}

Tally run_golden() {
    Tally t;
    const auto golden = read_tree_files(samples_dir() / "golden");
    t.expect(!golden.empty(), "no golden files");
    std::vector<std::map<std::string, std::string>> runs;
    for (int run = 0; run < 2; ++run) {
        Fixture fx;
        auto replies = fx.load_samples(&t);
        std::map<std::string, std::string> produced;
        for (const auto& [name, _] : kSamples)
            for (const auto& a : fx.ws.export_code(name))
                produced[name + "/" + a.path] = a.content;
        // The export_code message of each script must agree with the files.
        for (const auto& r : replies) {
            if (r["type"] != "code")
                continue;
            for (const auto& a : r["body"]["artifacts"]) {
                bool found = false;
                for (const auto& [path, content] : produced)
                    found = found || (path.size() > a["path"].get<std::string>().size() &&
                                      path.ends_with("/" + a["path"].get<std::string>()) && content == a["content"]);
                t.expect(found, "code reply differs from the export: " + a["path"].get<std::string>());
            }
        }
        for (const auto& [path, bytes] : golden) {
            ++t.cases;
            auto it = produced.find(path);
            t.expect(it != produced.end() && it->second == bytes, "run " + std::to_string(run) + ": " + path + " differs");
        }
        for (const auto& [path, _] : produced)
            t.expect(golden.count(path) != 0, "unexpected artifact " + path);
        runs.push_back(std::move(produced));
    }
    t.expect(runs[0] == runs[1], "two runs produced different bytes");
    t.summary = std::to_string(golden.size()) + " golden files, 2 runs";
    return t;
}

// Random boolean circuits, with a naive interpreter as the oracle.

struct Gate {
    std::string op;
    std::vector<int> sources; // negative: input -1-s; otherwise an earlier gate
    bool literal = false;
};

struct Circuit {
    int inputs = 1;
    std::vector<Gate> gates;
    int output = 0;
};

int gate_arity(const std::string& op) {
    if (op == "CONST")
        return 0;
    return op == "NOT" || op == "PASS" ? 1 : 2;
}

Circuit random_circuit(Rng& rng) {
    static const std::vector<std::string> ops = {"AND", "OR", "XOR", "EQ", "NOT", "PASS", "CONST", "AND", "OR", "XOR"};
    Circuit c;
    c.inputs = 1 + static_cast<int>(rng() % kMaxMacroInputs);
    const int n = 1 + static_cast<int>(rng() % kMaxMacroGates);
    for (int j = 0; j < n; ++j) {
        Gate g;
        g.op = ops[rng() % ops.size()];
        g.literal = rng() % 2;
        for (int p = 0; p < gate_arity(g.op); ++p) {
            int pool = c.inputs + j;
            int s = static_cast<int>(rng() % pool);
            g.sources.push_back(s < c.inputs ? -1 - s : s - c.inputs);
        }
        c.gates.push_back(std::move(g));
    }
    c.output = rng() % 3 ? n - 1 : static_cast<int>(rng() % n);
    return c;
}

bool oracle(const Circuit& c, const std::vector<bool>& in) {
    std::vector<bool> v;
    for (const auto& g : c.gates) {
        std::vector<bool> a;
        for (int s : g.sources)
            a.push_back(s < 0 ? in[-1 - s] : v[s]);
        bool r = false;
        if (g.op == "AND") r = a[0] && a[1];
        else if (g.op == "OR") r = a[0] || a[1];
        else if (g.op == "XOR") r = a[0] != a[1];
        else if (g.op == "EQ") r = a[0] == a[1];
        else if (g.op == "NOT") r = !a[0];
        else if (g.op == "PASS") r = a[0];
        else r = g.literal;
        v.push_back(r);
    }
    return v[c.output];
}

std::string circuit_script(const Circuit& c) {
    std::ostringstream out;
    auto line = [&](const Json& j) { out << j.dump() << "\n"; };
    line(Json{{"source", "Toolbar"}, {"kind", "Drop"}, {"position", {{"x", 0}, {"y", 0}}},
              {"payload", {{"palette_item", "macro"}, {"name", "M"}, {"ins", std::to_string(c.inputs)}, {"outs", "1"}}}});
    for (std::size_t j = 0; j < c.gates.size(); ++j) {
        const auto& g = c.gates[j];
        Json payload{{"palette_item", "op." + g.op}, {"name", "g" + std::to_string(j)}, {"target", "/macro"}};
        if (g.op == "CONST") {
            payload["literal_type"] = "bool";
            payload["literal"] = g.literal ? "true" : "false";
        }
        line(Json{{"source", "Toolbar"}, {"kind", "Drop"}, {"position", {{"x", 100 * j}, {"y", 50}}}, {"payload", payload}});
    }
    auto wire = [&](const std::string& from, const std::string& fp, const std::string& to, const std::string& tp) {
        line(Json{{"source", "ModellingPane"}, {"kind", "DragEnd"},
                  {"payload", {{"from_node", from}, {"from_port", fp}, {"to_node", to}, {"to_port", tp}}}});
    };
    auto source = [&](int s) {
        return s < 0 ? "/macro/macro.port[" + std::to_string(-1 - s) + "]" : "/macro/macro.op[" + std::to_string(s) + "]";
    };
    for (std::size_t j = 0; j < c.gates.size(); ++j)
        for (std::size_t p = 0; p < c.gates[j].sources.size(); ++p)
            wire(source(c.gates[j].sources[p]), "out", "/macro/macro.op[" + std::to_string(j) + "]", op_input_port(p));
    wire(source(c.output), "out", "/macro/macro.port[" + std::to_string(c.inputs) + "]", "in");
    return out.str();
}

Tally run_evaluator() {
    Tally t;
    Rng rng(g_seed + 7);
    TempDir dir;
    Workspace ws(dir.path);
    ProtocolHub hub(ws);
    std::size_t gates = 0;
    for (int i = 0; i < kOracleMacros; ++i) {
        auto c = random_circuit(rng);
        gates += c.gates.size();
        const std::string project = "ev" + std::to_string(i);
        ws.create(project, "macro");
        std::stringstream lines(circuit_script(c));
        for (const auto& r : run_script(hub, project, lines))
            t.expect(r["type"] == "snapshot" || r["type"] == "applied", project + ": " + r.dump().substr(0, 300));
        auto tree = ws.load(project);
        auto lib = extract_library(tree);
        if (!t.expect(lib.count("M") == 1, project + ": macro missing"))
            continue;
        const auto& def = lib.at("M");
        for (unsigned bits = 0; bits < (1u << c.inputs); ++bits) {
            ++t.cases;
            std::vector<bool> in;
            std::map<std::string, Scalar> inputs;
            for (int k = 0; k < c.inputs; ++k) {
                in.push_back((bits >> k) & 1);
                inputs["in" + std::to_string(k)] = boolean(in.back());
            }
            try {
                auto got = evaluate_component(def, lib, inputs);
                t.expect(got.at("out0") == Scalar(oracle(c, in)),
                         project + ": wrong output for inputs " + std::to_string(bits));
            } catch (const std::exception& e) {
                t.fail(project + ": " + e.what());
            }
        }
    }
    t.summary = std::to_string(kOracleMacros) + " macros, " + std::to_string(gates) + " gates, every input vector";
    return t;
}

NodeId build_circuit(AsltTree& tree, const Circuit& c, std::vector<NodeId>& gate_ids) {
    auto m = build::macro(tree, "Top");
    std::vector<NodeId> ins;
    for (int k = 0; k < c.inputs; ++k)
        ins.push_back(build::port(tree, m, "in" + std::to_string(k), PortDir::In, ScalarType::Bool));
    auto out = build::port(tree, m, "out0", PortDir::Out, ScalarType::Bool);
    for (std::size_t j = 0; j < c.gates.size(); ++j) {
        const auto& g = c.gates[j];
        gate_ids.push_back(build::op(tree, m, "g" + std::to_string(j), g.op,
                                     g.op == "CONST" ? std::optional<Scalar>(boolean(g.literal)) : std::nullopt));
    }
    auto node_of = [&](int s) { return s < 0 ? ins[-1 - s] : gate_ids[s]; };
    for (std::size_t j = 0; j < c.gates.size(); ++j)
        for (std::size_t p = 0; p < c.gates[j].sources.size(); ++p)
            build::wire(tree, m, node_of(c.gates[j].sources[p]), "out", gate_ids[j], op_input_port(p));
    build::wire(tree, m, node_of(c.output), "out", out, "in");
    return m;
}

TaskProgram task_over(const AsltTree& macros) {
    auto lib = qualify_library(extract_library(macros), "logic");
    auto task = AsltTree::create("task.app", 11, "task");
    build::instance(task, "u", "logic.Top");
    return compile_task(task, load_profile("task", lib));
}

Tally run_derivation() {
    Tally t;
    Rng rng(g_seed + 8);
    const auto macro_profile = load_profile("macro");
    std::size_t accepted = 0, refused = 0;
    for (int attempt = 0; attempt < 5000 && accepted < kDerivations; ++attempt) {
        auto c = random_circuit(rng);
        auto tree = AsltTree::create("macro.library", rng(), "macro");
        std::vector<NodeId> gates;
        build_circuit(tree, c, gates);
        std::vector<NodeId> selection;
        if (rng() % 2) {
            auto a = rng() % gates.size(), b = rng() % gates.size();
            for (auto i = std::min(a, b); i <= std::max(a, b); ++i)
                selection.push_back(gates[i]);
        } else {
            for (auto g : gates)
                if (rng() % 2)
                    selection.push_back(g);
            if (selection.empty())
                selection.push_back(gates[rng() % gates.size()]);
        }
        const auto before = tree;
        auto program_before = task_over(before);
        UndoStack undo;
        try {
            derive_extended_element(tree, selection, "Part", &undo);
        } catch (const Error& e) {
            ++refused;
            t.expect(e.code() == ErrorCode::SelectionError, std::string("derive failed with ") + e.what());
            t.expect(tree == before, "refused derivation changed the tree");
            continue;
        }
        ++accepted;
        const std::string at = "derivation " + std::to_string(accepted);
        for (const auto& d : validate_model(tree, macro_profile))
            t.expect(d.severity != Severity::Error, at + ": " + d.rule + ": " + d.message);
        try {
            auto program_after = task_over(tree);
            t.expect(program_after.inputs == program_before.inputs && program_after.outputs == program_before.outputs,
                     at + ": interface changed");
            for (int v = 0; v < kVectorsPerDerivation; ++v) {
                ++t.cases;
                std::map<std::string, Scalar> inputs;
                std::vector<bool> in(c.inputs, false);
                for (int k = 0; k < c.inputs; ++k) {
                    in[k] = rng() % 2;
                    inputs["u.in" + std::to_string(k)] = boolean(in[k]);
                }
                for (auto it = inputs.begin(); it != inputs.end();)
                    it = program_before.inputs.count(it->first) ? std::next(it) : inputs.erase(it);
                auto a = evaluate_task(program_before, inputs);
                auto b = evaluate_task(program_after, inputs);
                t.expect(a == b, at + ": outputs changed");
                t.expect(b.at("u.out0") == Scalar(oracle(c, in)), at + ": output differs from the oracle");
            }
        } catch (const std::exception& e) {
            t.fail(at + ": " + e.what());
        }
        undo.undo(tree);
        t.expect(tree.structurally_equal(before), at + ": undo does not restore the macro");
    }
    t.expect(accepted >= kDerivations, "only " + std::to_string(accepted) + " selections were derivable");
    t.summary = std::to_string(accepted) + " derivations (" + std::to_string(refused) + " selections refused)";
    return t;
}

/// Grows a tree to `target` nodes, then shuffles it with a few moves,
/// removals and edits.
AsltTree grown_tree(Rng& rng, std::size_t target) {
    static const char* keys[] = {"view.x", "a.b", "ns.list"};
    auto tree = AsltTree::create(testing::random_kind(rng), rng(), "io");
    std::vector<NodeId> ids{tree.root()};
    while (tree.size() < target) {
        auto parent = ids[rng() % ids.size()];
        auto n = tree.node(parent).children.size();
        ids.push_back(tree.insert_node(parent, rng() % (n + 1), testing::random_kind(rng), testing::random_scalar(rng)));
        if (rng() % 3 == 0)
            tree.set_meta(ids.back(), keys[rng() % 3], testing::random_meta(rng));
    }
    for (int i = 0; i < 30; ++i)
        testing::random_mutation(tree, rng);
    return tree;
}

Tally run_serialization() {
    Tally t;
    Rng rng(g_seed + 9);
    std::size_t largest = 0;
    for (int i = 0; i < kSerializedTrees; ++i) {
        ++t.cases;
        auto tree = grown_tree(rng, 1 + rng() % (kMaxTreeNodes - 30));
        largest = std::max(largest, tree.size());
        t.expect(tree.size() <= kMaxTreeNodes, "tree too large");
        const std::string at = "tree " + std::to_string(i);
        try {
            auto bytes = serialize(tree);
            auto back = deserialize(bytes);
            back.check_invariants();
            t.expect(back == tree, at + ": round trip differs");
            t.expect(serialize(back) == bytes, at + ": bytes differ on the second pass");
            t.expect(tree_from_json(tree_to_json(tree)) == tree, at + ": json round trip differs");
            // Decoding is deterministic down to the next minted id, which
            // must be fresh.
            auto a = deserialize(bytes);
            auto id = a.insert_node(a.root(), 0, "x");
            t.expect(id == back.insert_node(back.root(), 0, "x") && !tree.contains(id), at + ": minted ids differ");
        } catch (const Error& e) {
            t.fail(at + ": " + e.what());
        }
    }
    t.summary = std::to_string(kSerializedTrees) + " trees, up to " + std::to_string(largest) + " nodes";
    return t;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1)
        g_seed = std::stoull(argv[1]);

    std::optional<CycleRun> cycles;
    auto cycle_part = [&](bool rebuild) {
        if (!cycles)
            cycles = run_cycles();
        return rebuild ? cycles->rebuild : cycles->order;
    };

    struct Criterion {
        const char* name;
        std::function<Tally()> run;
    };
    const std::vector<Criterion> criteria = {
        {"event-cycle ordering", [&] { return cycle_part(false); }},
        {"event sourcing", run_event_sourcing},
        {"processor transactionality", run_transactions},
        {"processor composition", run_composition},
        {"incremental scene rebuild", [&] { return cycle_part(true); }},
        {"golden code generation", run_golden},
        {"evaluator oracle", run_evaluator},
        {"extended element preservation", run_derivation},
        {"serialization round trip", run_serialization},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Tally t;
        try {
            t = c.run();
        } catch (const std::exception& e) {
            t.fail(std::string("uncaught: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool ok = t.violations <= kMaxViolations && t.cases > 0;
        failed += !ok;
        std::printf("%s  %-30s cases=%-6zu violations=%zu (max %zu)  %.1fs  %s\n", ok ? "PASS" : "FAIL", c.name, t.cases,
                    t.violations, kMaxViolations, secs, t.summary.c_str());
        for (const auto& n : t.notes)
            std::printf("      %s\n", n.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
