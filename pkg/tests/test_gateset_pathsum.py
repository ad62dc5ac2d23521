import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import GATESETS, angles_for, circuits
from queso.circuit import Circuit, GateInstance, from_gates
from queso.gateset import GatesetError, SpecParseError, builtin, builtin_path, load_gateset
from queso.oracle import gate_matrix, monomial_matrix, unitary
from queso.params import ParamExpr
from queso.pathsum import (
    PathSum, PathSumError, apply_interpretation, circuit_pathsum, compose, extend, is_interpreted, is_monomial,
    pathsum_matrix,
)


@pytest.mark.parametrize("name", GATESETS)
def test_builtin_gates_match_textbook_matrices(name):
    gs = builtin(name)
    for gd in gs.gates.values():
        for trial in range(5):
            ps = [0.37 + 1.3 * trial + k for k in range(gd.params)]
            g = GateInstance(gd.name, tuple(range(gd.arity)), tuple(ParamExpr.var(k + 1) for k in range(gd.params)))
            c = Circuit(gd.arity, (g,))
            got = pathsum_matrix(circuit_pathsum(c, gs), dict(enumerate(ps, 1)))
            want = gate_matrix(gd.name, ps)
            assert np.abs(got - want).max() < 1e-12, gd.name


@pytest.mark.parametrize("name", GATESETS)
def test_builtin_ids_are_stable(name):
    gs = builtin(name)
    again = load_gateset(builtin_path(name).read_text())
    assert gs.id == again.id
    assert gs.id.startswith(name + ":")


def test_field_closure_rejects_quarter_angles():
    obj = json.loads(builtin_path("nam").read_text())
    for g in obj["gates"]:
        if g["name"] == "rz":
            g["amplitude"] = "(exp (* 1/4 p0))"
    with pytest.raises(GatesetError):
        load_gateset(obj)


def test_bad_sexpr_reports_position():
    obj = json.loads(builtin_path("nam").read_text())
    obj["gates"][0]["amplitude"] = "(* (sqrt2inv"
    with pytest.raises(SpecParseError):
        load_gateset(obj)


@pytest.mark.parametrize("name", GATESETS)
@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_circuit_pathsum_matches_oracle(name, data):
    c = data.draw(circuits(name, max_gates=5))
    a = angles_for(c, data.draw(st.integers(0, 99)))
    got = pathsum_matrix(circuit_pathsum(c, builtin(name)), a)
    assert np.abs(got - unitary(c, a)).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_compose_is_associative(data):
    gs = builtin("nam")
    cs = [data.draw(circuits(gs, n=2, max_gates=3)) for _ in range(3)]
    p = [circuit_pathsum(c, gs) for c in cs]
    a = angles_for(Circuit(2, cs[0].gates + cs[1].gates + cs[2].gates))
    left = pathsum_matrix(compose(compose(p[0], p[1]), p[2]), a)
    right = pathsum_matrix(compose(p[0], compose(p[1], p[2])), a)
    assert np.abs(left - right).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_pathsum_matrices_are_unitary(data):
    name = data.draw(st.sampled_from(GATESETS))
    c = data.draw(circuits(name, max_gates=4))
    m = pathsum_matrix(circuit_pathsum(c, builtin(name)), angles_for(c))
    assert np.abs(m.conj().T @ m - np.eye(1 << c.n)).max() < 1e-10


def test_identity_and_errors():
    gs = builtin("nam")
    assert np.allclose(pathsum_matrix(PathSum.identity(2)), np.eye(4))
    with pytest.raises(PathSumError):
        extend(gs.gates["cx"], (0, 0), 2)
    with pytest.raises(PathSumError):
        extend(gs.gates["h"], (3,), 2)
    with pytest.raises(PathSumError):
        compose(PathSum.identity(1), PathSum.identity(2))


def test_monomial_detection():
    gs = builtin("nam")
    assert is_monomial(circuit_pathsum(from_gates(2, [("cx", (0, 1)), ("x", (1,))]), gs))
    assert not is_monomial(circuit_pathsum(from_gates(1, [("h", (0,))]), gs))


@pytest.mark.parametrize("arity", [1, 2])
def test_interpreted_symbolic_gate_is_generalized_permutation(arity):
    gs = builtin("nam")
    c = Circuit(arity, (GateInstance("S", tuple(range(arity))),))
    for perm in itertools.permutations(range(1 << arity)):
        p = circuit_pathsum(c, gs, {"S": perm})
        assert is_interpreted(p)
        phases = {bits: np.exp(1j * (0.3 + sum(bits) + 0.7 * len(bits) * int("".join(map(str, bits)) or "0", 2)))
                  for bits in itertools.product((0, 1), repeat=arity)}
        m = pathsum_matrix(p, {}, lambda sid, bits: phases[bits])
        want = monomial_matrix(perm, [phases[tuple((x >> (arity - 1 - j)) & 1 for j in range(arity))]
                                      for x in range(1 << arity)])
        assert np.abs(m - want).max() < 1e-12


def test_uninterpreted_symbolic_gate_has_no_matrix():
    gs = builtin("nam")
    p = circuit_pathsum(Circuit(1, (GateInstance("S", (0,)),)), gs)
    assert not is_interpreted(p)
    with pytest.raises(PathSumError):
        pathsum_matrix(p)
    assert is_interpreted(apply_interpretation(p, {"S": (1, 0)}))
