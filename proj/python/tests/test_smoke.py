import json
import pathlib

import pytest

import nbmvc

SAMPLES = pathlib.Path(__file__).resolve().parents[2] / "samples"


def drop(item, **payload):
    payload["palette_item"] = item
    return {"source": "Toolbar", "kind": "Drop", "payload": payload}


def test_domains():
    assert nbmvc.domains() == ["io", "macro", "task"]


def test_samples_build_and_run(tmp_path):
    ws = nbmvc.Workspace(tmp_path)
    for name, domain in [("hardware", "io"), ("logic", "macro"), ("app", "task")]:
        ws.create(name, domain)
        replies = ws.apply(name, (SAMPLES / f"{name}.jsonl").read_text())
        assert replies[0]["type"] == "snapshot"
        assert not [r for r in replies if r["type"] in ("error", "rejected")]
        assert ws.replay_matches(name)
    arts = {a["path"]: a["content"] for a in ws.export_code("app")}
    golden = SAMPLES / "golden" / "app"
    assert arts == {p.name: p.read_text() for p in golden.iterdir()}
    assert ws.eval_task("app", {"p1.btn": True}) == {"p1.led": True}
    assert ws.eval_task("app", {"p1.btn": False}) == {"p1.led": False}


def test_errors_surface(tmp_path):
    ws = nbmvc.Workspace(tmp_path)
    with pytest.raises(nbmvc.NbmvcError, match="not-found"):
        ws.model("missing")
    with pytest.raises(nbmvc.NbmvcError):
        ws.create("1bad", "io")


def test_hub_round_trip(tmp_path):
    ws = nbmvc.Workspace(tmp_path)
    ws.create("hw", "io")
    hub = nbmvc.Hub(ws)
    snap = hub.send({"type": "open_session", "body": {"project": "hw"}})
    assert snap["type"] == "snapshot" and snap["body"]["palette"]
    sid = snap["session"]
    reply = hub.send({"type": "raw_event", "session": sid, "seq": 1, "body": drop("io.device", name="d")})
    assert reply["type"] == "applied"
    assert reply["body"]["steps"] == [1, 2, 3, 4, 5, 6, 7]
    gap = hub.send({"type": "undo", "session": sid, "seq": 9})
    assert gap["type"] == "error" and gap["body"]["code"] == "sequence-gap"
    hub.close(sid)
    assert [n["kind"] for n in ws.model("hw")["nodes"]].count("io.device") == 1
    assert json.loads(json.dumps(ws.list()))[0]["id"] == "hw"
