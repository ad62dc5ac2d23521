"""Dense-matrix reference semantics, written independently of the path-sum engine."""
from __future__ import annotations

import math
import random
from typing import Mapping

import numpy as np

from . import _kernels
from .circuit import Circuit, GateInstance
from .params import ParamExpr

_SQ = 1 / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_FIXED = {"rx_pi": math.pi, "rx_pi2": math.pi / 2, "rx_mpi2": -math.pi / 2}


def _rx(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _u3(t, p, lam):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -np.exp(1j * lam) * s], [np.exp(1j * p) * s, np.exp(1j * (p + lam)) * c]])


def gate_matrix(name: str, params=()) -> np.ndarray:
    """Textbook unitary; for two-qubit gates the first qubit is the most significant bit."""
    p = [float(x) for x in params]
    if name == "h":
        return np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex)
    if name == "x":
        return _X.copy()
    if name == "rz":
        return np.diag([np.exp(-0.5j * p[0]), np.exp(0.5j * p[0])])
    if name == "u1":
        return np.diag([1, np.exp(1j * p[0])]).astype(complex)
    if name == "u2":
        return _u3(math.pi / 2, p[0], p[1])
    if name == "u3":
        return _u3(*p)
    if name == "rx":
        return _rx(p[0])
    if name in _FIXED:
        return _rx(_FIXED[name])
    if name == "ry":
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "cx":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if name == "cz":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if name == "rxx":
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return c * np.eye(4) - 1j * s * np.kron(_X, _X)
    raise KeyError(f"oracle has no matrix for gate {name!r}")


def monomial_matrix(perm, phases) -> np.ndarray:
    """Generalized permutation: column x has ``phases[x]`` at row ``perm[x]``."""
    m = np.zeros((len(perm), len(perm)), dtype=complex)
    for x, y in enumerate(perm):
        m[y, x] = phases[x]
    return m


def _angles_of(g: GateInstance, angles: Mapping[int, float]) -> list[float]:
    return [p.evaluate(angles) if isinstance(p, ParamExpr) else float(p) for p in g.params]


def apply_gate(st: np.ndarray, g: GateInstance, n: int, angles: Mapping[int, float] | None = None,
               symbolic: np.ndarray | None = None) -> np.ndarray:
    if g.is_fence:
        return st
    if g.is_symbolic:
        if symbolic is None:
            raise ValueError("symbolic gate needs a concrete completion")
        m = symbolic
    else:
        m = gate_matrix(g.name, _angles_of(g, angles or {}))
    if len(g.qubits) == 1:
        return _kernels.apply_1q(st, m, g.qubits[0], n)
    return _kernels.apply_2q(st, m, g.qubits[0], g.qubits[1], n)


def unitary(c: Circuit, angles: Mapping[int, float] | None = None, symbolic: np.ndarray | None = None) -> np.ndarray:
    st = np.eye(1 << c.n, dtype=complex)
    for g in c.gates:
        st = apply_gate(st, g, c.n, angles, symbolic)
    return st


def random_phases(k: int, rng: random.Random) -> list[complex]:
    return [complex(math.cos(a), math.sin(a)) for a in (rng.uniform(0, 2 * math.pi) for _ in range(k))]


def random_completion(interp, arity: int, rng: random.Random) -> np.ndarray:
    """Random monomial matrix realizing ``interp``: the permutation with random unit phases."""
    return monomial_matrix(list(interp), random_phases(len(interp), rng))


def max_delta(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max()) if a.size else 0.0


def phase_aligned_delta(a: np.ndarray, b: np.ndarray) -> float:
    """Entrywise difference after removing the best global phase."""
    inner = np.vdot(b, a)
    if abs(inner) < 1e-15:
        return max_delta(a, b)
    return max_delta(a, b * (inner / abs(inner)))


def check_pair(c1: Circuit, c2: Circuit, interp=None, trials: int = 20, seed: int = 0,
               up_to_phase: bool = False, interp2=None) -> float:
    """Worst entrywise difference over random angle/completion instances.

    ``interp2`` gives ``c2`` its own permutation; both sides share the random phases.
    """
    rng = random.Random(seed)
    vars_ = sorted(set(c1.param_vars()) | set(c2.param_vars()))
    sym = next((g for g in c1.gates + c2.gates if g.is_symbolic), None)
    worst = 0.0
    for _ in range(trials):
        angles = {k: rng.uniform(-2 * math.pi, 2 * math.pi) for k in vars_}
        comp1 = comp2 = None
        if sym is not None:
            phases = random_phases(1 << len(sym.qubits), rng)
            comp1 = monomial_matrix(list(interp), phases)
            comp2 = comp1 if interp2 is None else monomial_matrix(list(interp2), phases)
        u1, u2 = unitary(c1, angles, comp1), unitary(c2, angles, comp2)
        d = phase_aligned_delta(u1, u2) if up_to_phase else max_delta(u1, u2)
        worst = max(worst, d)
    return worst


def check_rule(rule, trials: int = 20, seed: int = 0) -> float:
    n = max(rule.lhs.n, rule.rhs.n)
    lhs = Circuit(n, rule.lhs.gates)
    rhs = Circuit(n, rule.rhs.gates)
    perm = None if rule.interp is None else rule.interp[1]
    return check_pair(lhs, rhs, perm, trials, seed)
