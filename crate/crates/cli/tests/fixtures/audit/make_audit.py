#!/usr/bin/env python3
"""Regenerates the consistency-audit fixtures.

mock_495.json: 33 policies x 15 slots, one reply per request, with exactly
52 replies whose answers differ from the policy's typical answer. Other
replies vary only in formatting. mock_bernoulli.json: one policy whose reply
is the typical answer with weight 9 and one of three other answers with
total weight 1.
"""

import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(495)

LABELS = [
    ("email", "Email address", "An electronic mail address."),
    ("location", "Location", "Geographic position of the user."),
    ("cookies", "Cookies", "Cookies or similar trackers."),
]
IDS = [l[0] for l in LABELS]
NAME = {l[0]: l[1] for l in LABELS}
POLICIES = 33
SLOTS = 15
PLANTED = 52


def marker(pid):
    return f"Audit reference {pid}."


def render(vector, style):
    lines = []
    for l in IDS:
        word = "Yes" if vector[l] else "No"
        lines.append(
            [f"{NAME[l]}: {word}", f"  {NAME[l]}:   {word.lower()}  ", f"- {NAME[l]}: {word.upper()}"][style % 3]
        )
    sep = "\n\n" if style % 2 else "\n"
    return sep.join(lines)


def flip_one(vector):
    out = dict(vector)
    l = rng.choice(IDS)
    out[l] = not out[l]
    return out


def dump(name, value):
    with open(os.path.join(HERE, name), "w") as f:
        f.write(json.dumps(value, indent=2) + "\n")


def main():
    pids = [f"audit-{n:02d}" for n in range(1, POLICIES + 1)]
    os.makedirs(os.path.join(HERE, "corpus"), exist_ok=True)
    dump(
        "corpus/corpus.json",
        [
            {
                "policy_id": pid,
                "source_name": f"{pid}.txt",
                "paragraphs": [f"{marker(pid)} We describe our data practices here.", "Contact us with questions."],
            }
            for pid in pids
        ],
    )
    dump("corpus/annotations.json", [])
    dump("corpus/taxonomy.json", [{"label_id": i, "display_name": n, "definition": d} for i, n, d in LABELS])

    # 19 policies with two discrepancies and 14 with one: 38 + 14 = 52.
    counts = [2] * 19 + [1] * 14
    rng.shuffle(counts)
    assert sum(counts) == PLANTED
    rules = []
    for pid, k in zip(pids, counts):
        typical = {l: rng.random() < 0.5 for l in IDS}
        odd = set(rng.sample(range(SLOTS), k))
        replies = [
            render(flip_one(typical) if s in odd else typical, rng.randrange(6)) for s in range(SLOTS)
        ]
        rules.append({"when_contains": [marker(pid)], "replies": [{"content": r} for r in replies]})
    dump("mock_495.json", {"seed": 0, "rules": rules})

    typical = {"email": True, "location": False, "cookies": True}
    others = [flip_one(typical) for _ in range(3)]
    others = [o for i, o in enumerate(others) if o not in others[:i]]
    choices = [{"weight": 9 * len(others), "content": render(typical, 0)}]
    choices += [{"weight": 1, "content": render(o, 1)} for o in others]
    dump(
        "mock_bernoulli.json",
        {"seed": 90, "rules": [{"when_contains": [marker("audit-01")], "choices": choices}]},
    )


if __name__ == "__main__":
    main()
