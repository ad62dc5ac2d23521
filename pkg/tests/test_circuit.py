import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import circuits, random_circuit
from queso.circuit import Circuit, GateInstance, QasmError, canonical_hash, emit_qasm, from_gates, parse_qasm
from queso.gateset import builtin
from queso.oracle import max_delta, unitary
from queso.params import ParamExpr as P

HDR = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def test_parse_basic_program(nam):
    c = parse_qasm(HDR + "qreg q[3];\ncreg c[3];\nh q[0];\ncx q[0],q[2];\nrz(-pi/4) q[1];\n"
                   "barrier q;\nmeasure q[1] -> c[1];\n", nam)
    assert c.n == 3 and c.creg == 3
    assert [g.name for g in c.gates] == ["h", "cx", "rz", "barrier", "measure"]
    assert c.size == 3
    assert c.gates[2].params[0] == pytest.approx(-math.pi / 4)
    assert c.gates[3].qubits == (0, 1, 2)
    assert c.gates[4].label == "c[1]"


@pytest.mark.parametrize("src, line", [
    ("qreg q[2];\nfoo q[0];\n", 4),
    ("qreg q[2];\nh q[5];\n", 4),
    ("qreg q[2];\nqreg r[2];\n", 4),
    ("h q[0];\n", 3),
    ("qreg q[2];\ncx q[0],q[0];\n", 4),
    ("qreg q[2];\nrz(pi/) q[0];\n", 4),
    ("qreg q[2];\nh q;\n", 4),
    ("qreg q[2];\nif(c==1) x q[0];\n", 4),
])
def test_parse_errors_carry_positions(nam, src, line):
    with pytest.raises(QasmError) as err:
        parse_qasm(HDR + src, nam)
    assert err.value.line == line
    assert err.value.col >= 1


def test_fixed_angle_gates_resolve_by_value():
    rig = builtin("rigetti")
    c = parse_qasm(HDR + "qreg q[1];\nrx(pi) q[0];\nrx(pi/2) q[0];\nrx(-pi/2) q[0];\nrz(0.3) q[0];\n", rig)
    assert [g.name for g in c.gates] == ["rx_pi", "rx_pi2", "rx_mpi2", "rz"]
    assert "rx(pi/2) q[0];" in emit_qasm(c, rig)
    with pytest.raises(QasmError):
        parse_qasm(HDR + "qreg q[1];\nrx(0.3) q[0];\n", rig)


@pytest.mark.parametrize("name", ["nam", "ibm", "ion", "rigetti"])
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_qasm_round_trip(name, seed):
    gs = builtin(name)
    c = random_circuit(random.Random(seed), name, 3, 12, exact_angles=False)
    if name == "rigetti":
        c = random_circuit(random.Random(seed), name, 3, 12, exact_angles=True)
    back = parse_qasm(emit_qasm(c, gs), gs)
    assert [(g.name, g.qubits) for g in back.gates] == [(g.name, g.qubits) for g in c.gates]
    assert max_delta(unitary(back), unitary(c)) < 1e-12
    assert emit_qasm(back, gs) == emit_qasm(c, gs)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_canonical_hash_ignores_disjoint_reordering(seed):
    rng = random.Random(seed)
    c = random_circuit(rng, "nam", 4, 10)
    # bubble random adjacent pairs that act on disjoint qubits
    gates = list(c.gates)
    for _ in range(30):
        i = rng.randrange(max(1, len(gates) - 1))
        if i + 1 < len(gates) and not set(gates[i].qubits) & set(gates[i + 1].qubits):
            gates[i], gates[i + 1] = gates[i + 1], gates[i]
    d = Circuit(c.n, tuple(gates))
    assert canonical_hash(c) == canonical_hash(d)
    assert max_delta(unitary(c), unitary(d)) < 1e-12


def test_canonical_hash_examples():
    assert canonical_hash(from_gates(2, [("x", 0), ("rz", 1, [0.4])])) == \
        canonical_hash(from_gates(2, [("rz", 1, [0.4]), ("x", 0)]))
    a = from_gates(1, [("rz", 0, [0.5])])
    assert canonical_hash(a) == canonical_hash(from_gates(1, [("rz", 0, [0.5 + 2 * math.pi])]))
    assert canonical_hash(a) == canonical_hash(from_gates(1, [("rz", 0, [0.5 - 4 * math.pi])]))
    assert canonical_hash(a) != canonical_hash(from_gates(1, [("rz", 0, [0.5 + 3e-10])]))
    assert canonical_hash(from_gates(2, [("cx", (0, 1))])) != canonical_hash(from_gates(2, [("cx", (1, 0))]))


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_canonical_form_is_idempotent_and_confluent(data):
    c = data.draw(circuits("nam", n=3, max_gates=6))
    k = c.canonical()
    assert k.canonical() == k
    # every reordering of parallel gates (every linear extension of the DAG) gives the same form
    for order in _linear_extensions(c):
        d = Circuit(c.n, tuple(c.gates[i] for i in order))
        assert d.canonical() == k
        assert canonical_hash(d) == canonical_hash(c)


def _linear_extensions(c: Circuit):
    preds = [c.preds(i) for i in range(len(c.gates))]

    def rec(done, order):
        if len(order) == len(c.gates):
            yield list(order)
            return
        for i in range(len(c.gates)):
            if i not in done and preds[i] <= done:
                yield from rec(done | {i}, order + [i])

    yield from rec(frozenset(), [])


def test_dag_queries():
    c = from_gates(3, [("h", 0), ("cx", (0, 1)), ("x", 2), ("cx", (1, 2)), ("h", 0)])
    assert c.preds(3) == {1, 2}
    assert c.succs(1) == {3, 4}
    assert c.descendants([0]) >= {1, 3, 4}
    assert c.ancestors([3]) >= {0, 1, 2}
    assert c.is_connected()
    assert not from_gates(2, [("h", 0), ("h", 1)]).is_connected()


def test_param_vars_in_first_use_order():
    c = from_gates(1, [("rz", 0, [P.parse("t3")]), ("rz", 0, [P.parse("t1+t3")])])
    assert c.param_vars() == [3, 1]


def test_gate_instance_rejects_repeated_qubits():
    with pytest.raises(ValueError):
        GateInstance("cx", (1, 1))
    with pytest.raises(ValueError):
        from_gates(1, [("h", 2)])
