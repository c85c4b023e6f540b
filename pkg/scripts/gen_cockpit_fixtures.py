#!/usr/bin/env python3
"""Record session-protocol transcripts for the cockpit's replay tests.

Drives the three reference scenarios (first reply wins, simultaneous tie,
timeout cancel) through the session protocol and writes the full message
exchange plus the canonical bytes of the final history to
frontend/tests/fixtures/broker_scenarios.json.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from iasm.model import canonical_json
from iasm.server import SessionManager

BROKER = """\
static client0/0
static client1/0
dynamic sold/0 relational
dynamic buyer/0
dynamic cancelled/0 relational
label q0, q1, t
external q0/0 = [q0]
external q1/0 = [q1]
external t/0 = [t]
rule
if knot (q0() preceq t()) kand knot (q1() preceq t()) then
  cancelled() := true
else
  if q0() preceq q1() then
    par { sold() := true; buyer() := client0 }
  else
    par { sold() := true; buyer() := client1 }
  endif
endif
"""

STATE = {
    "elements": ["c0", "c1", "yes"],
    "functions": {
        "client0/0": {"default": "c0", "table": []},
        "client1/0": {"default": "c1", "table": []},
    },
    "dynamic": ["buyer/0", "cancelled/0", "sold/0"],
    "relational": ["cancelled/0", "sold/0"],
}

LOAD = {"type": "loadProgram", "asmText": BROKER, "stateJson": STATE}


def reply(tokens, elem):
    return {"query": tokens, "reply": f"e:{elem}"}


SCENARIOS = [
    {
        "name": "first-reply-wins",
        "rounds": [[reply(["l:q0"], "yes")]],
        "expectedUpdates": [["buyer", [], "c0"], ["sold", [], "true"]],
    },
    {
        "name": "simultaneous-tie-prefers-client0",
        "rounds": [[reply(["l:q0"], "yes"), reply(["l:q1"], "yes")]],
        "expectedUpdates": [["buyer", [], "c0"], ["sold", [], "true"]],
    },
    {
        "name": "timeout-cancels",
        "rounds": [[reply(["l:t"], "yes")]],
        "expectedUpdates": [["cancelled", [], "true"]],
    },
]


def record(scenario):
    manager = SessionManager()
    session, msgs = manager.load(LOAD)
    exchanges = [{"client": LOAD, "server": msgs}]
    final_history = None
    for rnd in scenario["rounds"]:
        msg = {"type": "submitRound", "replies": rnd}
        out = manager.handle(session, msg)
        exchanges.append({"client": msg, "server": out})
        for m in out:
            if m["type"] == "roundAccepted":
                final_history = m["history"]
    done = [m for ex in exchanges for m in ex["server"] if m["type"] == "stepDone"]
    assert done, scenario["name"]
    assert done[-1]["updates"] == scenario["expectedUpdates"], scenario["name"]
    return {
        "name": scenario["name"],
        "exchanges": exchanges,
        "expectedVerdict": done[-1]["verdict"],
        "expectedUpdates": scenario["expectedUpdates"],
        "finalHistoryCanonical": canonical_json(final_history),
    }


def main():
    out_path = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"
    out_path.mkdir(parents=True, exist_ok=True)
    data = {"scenarios": [record(s) for s in SCENARIOS]}
    target = out_path / "broker_scenarios.json"
    target.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
