"""Endpoint behavior, event determinism and artifact output of the service."""
import json

import pytest
from fastapi.testclient import TestClient

from convoplan.service import TaskService, create_app, load_config

from conftest import DATA


@pytest.fixture(scope="module")
def config(full_model_dir, tmp_path_factory):
    workspace = tmp_path_factory.mktemp("svc")
    return load_config(
        None,
        task_model=str(full_model_dir / "task.crf"),
        argument_model=str(full_model_dir / "argument.crf"),
        argtype_model=str(full_model_dir / "argtype.crf"),
        workspace=str(workspace),
    )


@pytest.fixture()
def service(config):
    return TaskService(config)


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


def test_sessions_are_distinct_and_retrievable(client):
    a = client.post("/sessions").json()["id"]
    b = client.post("/sessions").json()["id"]
    assert a != b
    snapshot = client.get(f"/sessions/{a}").json()
    assert snapshot["transcript"] == []
    assert snapshot["fluents"]  # initial world loaded
    assert client.get("/sessions/nope").status_code == 404


def test_direct_instruction_yields_plan_event(client):
    sid = client.post("/sessions").json()["id"]
    events = client.post(
        f"/sessions/{sid}/utterance", json={"text": "take the book from the shelf"}
    ).json()["events"]
    kinds = [e["kind"] for e in events]
    assert kinds == ["plan", "state"]
    assert events[0]["plan"] == ["move(start, shelf)", "pick(book, shelf)"]
    snapshot = client.get(f"/sessions/{sid}").json()
    assert any(name.endswith(".pddl") for name in snapshot["artifacts"])


def test_novel_verb_confirmation_flow(client):
    sid = client.post("/sessions").json()["id"]
    events = client.post(
        f"/sessions/{sid}/utterance", json={"text": "grasp the book"}
    ).json()["events"]
    assert events[0]["kind"] == "question"
    assert events[0]["text"] == "Is this task similar to taking ?"
    events = client.post(f"/sessions/{sid}/utterance", json={"text": "yes"}).json()["events"]
    kinds = [e["kind"] for e in events]
    assert "plan" in kinds


def test_missing_argument_question_then_plan(client):
    sid = client.post("/sessions").json()["id"]
    events = client.post(
        f"/sessions/{sid}/utterance", json={"text": "put the cup"}
    ).json()["events"]
    assert events[0] == {"kind": "question", "state": "ask_missing_arg",
                         "text": "Where do I put it ?"}
    events = client.post(
        f"/sessions/{sid}/utterance", json={"text": "on the shelf"}
    ).json()["events"]
    assert [e["kind"] for e in events] == ["plan", "state"]


def test_perception_updates_world(client):
    sid = client.post("/sessions").json()["id"]
    event = client.post(
        f"/sessions/{sid}/perception",
        json={"fluents": [{"predicate": "at-robot", "args": ["kitchen"]}]},
    ).json()
    assert "at-robot(kitchen)" in event["fluents"]
    assert "at-robot(start)" not in event["fluents"]


def test_inconsistent_perception_is_422(client):
    sid = client.post("/sessions").json()["id"]
    response = client.post(
        f"/sessions/{sid}/perception",
        json={"fluents": [{"predicate": "at-robot", "args": ["kitchen"]},
                          {"predicate": "at-robot", "args": ["hall"]}]},
    )
    assert response.status_code == 422


def test_event_stream_replays_history(client):
    sid = client.post("/sessions").json()["id"]
    client.post(f"/sessions/{sid}/utterance", json={"text": "go to the kitchen"})
    response = client.get(f"/sessions/{sid}/events")
    assert response.headers["content-type"].startswith("text/event-stream")
    payloads = [json.loads(line[len("data: "):])
                for line in response.text.splitlines() if line.startswith("data: ")]
    assert [p["kind"] for p in payloads] == ["plan", "state"]


def test_transcript_replay_is_deterministic(config):
    script = [
        "take the book from the shelf",
        "grasp the cup",
        "yes",
        "put the cup",
        "on the table",
        "go to the bedroom",
    ]

    def run():
        service = TaskService(config)
        client = TestClient(create_app(service))
        sid = client.post("/sessions").json()["id"]
        events = []
        for line in script:
            events.extend(client.post(f"/sessions/{sid}/utterance",
                                      json={"text": line}).json()["events"])
        return json.dumps(events, sort_keys=True)

    assert run() == run()


def test_question_count_matches_question_events(service):
    sid = service.create_session()
    service.post_utterance(sid, "grasp the book")
    service.post_utterance(sid, "no")
    service.post_utterance(sid, "yes")
    record = service.sessions[sid]
    question_events = sum(1 for e in record.events if e["kind"] == "question")
    # dialogue object is cleared after planning; count carried by events
    assert question_events >= 2


def test_error_events_do_not_tear_down(service):
    sid = service.create_session()
    events = service.post_utterance(sid, "go to the kitchen and go to the bedroom")
    kinds = [e["kind"] for e in events]
    assert "plan" in kinds  # both legs plan sequentially with context threading
    assert service.get_state(sid)["fluents"]
