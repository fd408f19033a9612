#!/usr/bin/env python
"""Regenerate the bundled synthetic corpus, world fixture and dialogue scenarios.

Everything is deterministic; the checked-in data files are this script's output.
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from convoplan.annotation import fallback_annotate, serialize  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "convoplan" / "data"

OBJECTS = ["book", "pen", "cup", "bottle", "plate", "tray", "pillow", "bowl", "remote", "box"]
LOCATIONS = ["table", "shelf", "kitchen", "bedroom", "desk", "couch", "hall", "counter"]
DEVICES = ["tv", "light", "fan", "heater"]
PERSONS = ["man", "woman", "guest", "child"]

HOME = {
    "book": "shelf",
    "pen": "desk",
    "cup": "counter",
    "bottle": "counter",
    "plate": "shelf",
    "tray": "kitchen",
    "pillow": "couch",
    "bowl": "counter",
    "remote": "table",
    "box": "hall",
}


def build(parts):
    """parts: list of (word list, role) where role is a task type (trigger),
    an argument type, or None. Returns a corpus record for one task."""
    words, segments = [], []
    for piece, role in parts:
        start = len(words)
        words.extend(piece)
        segments.append((start, len(words), role))
    return words, segments


def record(frames_parts, missing_by_frame=None):
    """frames_parts: list of per-task `parts`; tasks concatenate with 'and'."""
    words = []
    frames = []
    task_tags = []
    arg_tags = []
    for fi, parts in enumerate(frames_parts):
        if fi > 0:
            words.append("and")
            task_tags.append("O")
            arg_tags.append("O")
        frame = {"task": None, "trigger": None, "args": {}}
        for piece, role in parts:
            start = len(words)
            words.extend(piece)
            end = len(words)
            if role is None:
                task_tags.extend(["O"] * len(piece))
                arg_tags.extend(["O"] * len(piece))
            elif role[0].isupper():
                frame["task"] = role
                frame["trigger"] = [start, end]
                task_tags.extend([f"B-{role}"] + [f"I-{role}"] * (len(piece) - 1))
                arg_tags.extend(["O"] * len(piece))
            else:
                frame["args"][role] = [start, end]
                task_tags.extend(["O"] * len(piece))
                arg_tags.extend([f"B-{role}"] + [f"I-{role}"] * (len(piece) - 1))
        if missing_by_frame and fi in missing_by_frame:
            frame["missing"] = missing_by_frame[fi]
        frames.append(frame)
    text = " ".join(words)
    rec = serialize(fallback_annotate(text))
    assert len(rec["tokens"]) == len(words), text
    rec["task_tags"] = task_tags
    rec["arg_tags"] = arg_tags
    rec["frames"] = frames
    return rec


def taking(obj, loc=None, verb="take"):
    parts = [([verb], "Taking"), (["the", obj], "theme")]
    if loc:
        parts.append((["from", "the", loc], "source"))
    return parts


def placing(obj, loc=None, prep="on", verb="put"):
    parts = [([verb], "Placing"), (["the", obj], "theme")]
    if loc:
        parts.append(([prep, "the", loc], "goal"))
    return parts


def bringing(obj, loc, verb="bring"):
    return [([verb], "Bringing"), (["the", obj], "theme"), (["to", "the", loc], "goal")]


def motion(loc, verb="go"):
    return [([verb], "Motion"), (["to", "the", loc], "goal")]


def change_state(dev, state, verb="turn"):
    return [([verb], "Change-state"), ([state], "state"), (["the", dev], "device")]


def following(person):
    return [(["follow"], "Following"), (["the", person], "cotheme")]


def main():
    rng = random.Random(7)
    records = []

    objs = OBJECTS * 4
    locs = LOCATIONS * 6
    rng.shuffle(objs)
    rng.shuffle(locs)

    for i in range(6):
        records.append(record([taking(objs.pop(), locs.pop())]))
    for i in range(2):
        records.append(record([taking(objs.pop(), None, verb="grab")]))
    for i in range(2):
        records.append(record([taking(objs.pop(), locs.pop(), verb="get")]))

    for i in range(7):
        records.append(record([placing(objs.pop(), locs.pop(), prep="on")]))
    for i in range(5):
        records.append(record([placing(objs.pop(), locs.pop(), prep="in", verb="place")]))
    records.append(record([placing("cup", None)], {0: {"goal": "on the shelf"}}))

    for i in range(6):
        records.append(record([bringing(objs.pop(), locs.pop())]))
    for i in range(4):
        records.append(record([bringing(objs.pop(), locs.pop(), verb="carry")]))

    for i in range(6):
        records.append(record([motion(locs.pop())]))
    for i in range(3):
        records.append(record([motion(locs.pop(), verb="move")]))

    for verb in ("turn", "switch"):
        for state in ("on", "off"):
            for dev in (DEVICES[:2] if verb == "turn" else DEVICES[2:]):
                records.append(record([change_state(dev, state, verb)]))

    for person in PERSONS + PERSONS[:2]:
        records.append(record([following(person)]))

    # compound instructions
    records.append(record([motion("kitchen"), taking("pen")]))
    records.append(record([motion("hall"), taking("book")]))
    records.append(record([motion("bedroom"), bringing("pillow", "couch")]))
    records.append(record([taking("bottle", "counter"), bringing("bottle", "table")]))
    records.append(record([taking("cup", "counter"), placing("cup", "kitchen", prep="in", verb="place")]))
    records.append(record([motion("kitchen"), motion("bedroom")]))
    # anaphora: second task's theme is a pronoun referring to the first theme
    records.append(
        record(
            [taking("pen", "desk"), [(["bring"], "Bringing"), (["it"], "theme"), (["to", "the", "kitchen"], "goal")]]
        )
    )
    records.append(
        record(
            [taking("plate", "shelf"), [(["put"], "Placing"), (["it"], "theme"), (["on", "the", "table"], "goal")]]
        )
    )

    with open(DATA / "corpus.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"corpus: {len(records)} instructions, {sum(len(r['frames']) for r in records)} tasks")

    # world fixture
    fluents = [{"predicate": "at-robot", "args": ["start"]}]
    for obj, loc in sorted(HOME.items()):
        fluents.append({"predicate": "hasobject", "args": [loc, obj]})
    for dev in DEVICES:
        fluents.append({"predicate": "current-state", "args": [dev, "off"]})
    person_home = dict(zip(PERSONS, ["hall", "kitchen", "hall", "bedroom"]))
    for person, loc in sorted(person_home.items()):
        fluents.append({"predicate": "at-person", "args": [person, loc]})
    catalog = {"start": "location", "trash": "location", "on": "state", "off": "state"}
    catalog.update({o: "object" for o in OBJECTS})
    catalog.update({l: "location" for l in LOCATIONS})
    catalog.update({d: "device" for d in DEVICES})
    catalog.update({p: "person" for p in PERSONS})
    with open(DATA / "world.json", "w") as fh:
        json.dump({"fluents": fluents, "catalog": catalog}, fh, indent=1, sort_keys=True)
        fh.write("\n")

    # dialogue scenarios: novel verbs and ambiguous instructions with true types
    scenarios = [
        {"text": "add some water to the bowl", "true_task": "Placing", "kind": "novel"},
        {"text": "gather all the cups", "true_task": "Bringing", "kind": "novel"},
        {"text": "dump the bowl into the trash", "true_task": "Placing", "kind": "novel"},
        {"text": "drop it in the trash", "true_task": "Placing", "kind": "novel"},
        {"text": "grasp the book", "true_task": "Taking", "kind": "novel"},
        {"text": "set some pillows on the couch too", "true_task": "Bringing", "kind": "novel"},
        {"text": "pour the contents of the pot into a bowl", "true_task": "Placing", "kind": "novel"},
        {"text": "throw the bottle in the trash", "true_task": "Placing", "kind": "novel"},
        {"text": "collect the cups from the table", "true_task": "Taking", "kind": "novel"},
        {"text": "release the bag", "true_task": "Placing", "kind": "novel"},
        {"text": "move the remote near the tv", "true_task": "Bringing", "kind": "ambiguous"},
        {"text": "turn to the right", "true_task": "Motion", "kind": "ambiguous"},
        {"text": "put on the tv", "true_task": "Change-state", "kind": "ambiguous"},
        {"text": "keep the same pace", "true_task": "Following", "kind": "ambiguous"},
        {"text": "go to the kitchen with him", "true_task": "Following", "kind": "ambiguous"},
        {"text": "take the tray to the bedroom", "true_task": "Bringing", "kind": "ambiguous"},
    ]
    with open(DATA / "scenarios.jsonl", "w") as fh:
        for s in scenarios:
            fh.write(json.dumps(s, sort_keys=True) + "\n")
    print(f"scenarios: {len(scenarios)}")


if __name__ == "__main__":
    main()
