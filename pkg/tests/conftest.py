import pytest

from iasm.model import Query, Structure
from iasm.syntax import desugar_program, parse_program

BROKER_TEXT = """\
static s/0
static p/0
static a/0
static client0/0
static client1/0
dynamic sold/0 relational
dynamic buyer/0
dynamic cancelled/0 relational
label q0, q1, t
external q0/3 = [q0, #1, #2, #3]
external q1/3 = [q1, #1, #2, #3]
external t/0 = [t]
rule
if knot (q0(s, p, a) preceq t) kand knot (q1(s, p, a) preceq t) then
  cancelled() := true
else
  if q0(s, p, a) preceq q1(s, p, a) then
    par {
      sold() := true;
      buyer() := client0
    }
  else
    par {
      sold() := true;
      buyer() := client1
    }
  endif
endif
"""

BROKER_STATE_JSON = {
    "elements": ["av", "c0", "c1", "ok", "pv", "sv", "yes"],
    "functions": {
        "s/0": {"default": "sv", "table": []},
        "p/0": {"default": "pv", "table": []},
        "a/0": {"default": "av", "table": []},
        "client0/0": {"default": "c0", "table": []},
        "client1/0": {"default": "c1", "table": []},
    },
    "dynamic": ["buyer/0", "cancelled/0", "sold/0"],
    "relational": ["cancelled/0", "sold/0"],
}

Q0_HAT = Query((("l", "q0"), ("e", "sv"), ("e", "pv"), ("e", "av")))
Q1_HAT = Query((("l", "q1"), ("e", "sv"), ("e", "pv"), ("e", "av")))
T_HAT = Query((("l", "t"),))


@pytest.fixture(scope="session")
def broker_program():
    return desugar_program(parse_program(BROKER_TEXT))


@pytest.fixture(scope="session")
def broker_state(broker_program):
    return Structure.from_json(BROKER_STATE_JSON, broker_program.vocabulary)
