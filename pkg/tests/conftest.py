import math
import random

import pytest
from hypothesis import strategies as st

from queso.circuit import Circuit, GateInstance
from queso.gateset import builtin
from queso.params import ParamExpr
from queso.synthesizer import SynthConfig, synthesize

GATESETS = ("nam", "ibm", "rigetti", "ion")


@st.composite
def circuits(draw, gateset, n=None, max_gates=6, exact=True, symbolic=False):
    """Random concrete circuits; ``exact`` keeps constant angles at multiples of pi/2."""
    gs = builtin(gateset) if isinstance(gateset, str) else gateset
    n = draw(st.integers(1, 3)) if n is None else n
    defs = [g for g in gs.gates.values() if g.arity <= n]
    gates = []
    for _ in range(draw(st.integers(0, max_gates))):
        gd = draw(st.sampled_from(defs))
        qs = tuple(draw(st.permutations(range(n)))[:gd.arity])
        ps = []
        for _ in range(gd.params):
            if draw(st.booleans()):
                ps.append(draw(st.sampled_from(gs.parameters)))
            elif exact:
                ps.append(draw(st.integers(-4, 7)) * math.pi / 2)
            else:
                ps.append(draw(st.floats(-7, 7, allow_nan=False)))
        gates.append(GateInstance(gd.name, qs, tuple(ps)))
    if symbolic and n >= 1:
        k = draw(st.integers(1, min(2, n)))
        pos = draw(st.integers(0, len(gates)))
        qs = tuple(sorted(draw(st.permutations(range(n)))[:k]))
        gates.insert(pos, GateInstance("S", qs))
    return Circuit(n, tuple(gates))


def random_circuit(rng: random.Random, gateset: str, n: int, size: int, exact_angles=True) -> Circuit:
    gs = builtin(gateset)
    defs = [g for g in gs.gates.values() if g.arity <= n]
    gates = []
    for _ in range(size):
        gd = rng.choice(defs)
        qs = tuple(rng.sample(range(n), gd.arity))
        if exact_angles:
            ps = tuple(rng.randrange(16) * math.pi / 4 for _ in range(gd.params))
        else:
            ps = tuple(rng.uniform(-math.pi, math.pi) for _ in range(gd.params))
        gates.append(GateInstance(gd.name, qs, ps))
    return Circuit(n, tuple(gates))


def angles_for(c: Circuit, seed: int = 0) -> dict:
    rng = random.Random(seed)
    return {k: rng.uniform(-2 * math.pi, 2 * math.pi) for k in sorted(c.param_vars())}


@pytest.fixture(scope="session")
def nam():
    return builtin("nam")


@pytest.fixture(scope="session")
def nam_small():
    """Nam rules on 3 qubits up to size 3 (symbolic circuits on 2 qubits up to size 3)."""
    cfg = SynthConfig(builtin("nam"), max_qubits=3, max_size=3, seed=0)
    res, rules = synthesize(cfg)
    return cfg, res, rules


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; assertion failures still fail the test."""
    def record(num: int, what: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {what}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
