"""Path-sum semantics for (symbolic) circuits.

Branch bits are expanded eagerly: a :class:`PathSum` is a list of
:class:`Branch` objects, each with a concrete amplitude expression and an
output state given as one ANF per qubit over the input bits ``0..n-1``.

Amplitude terms are ``(coeff, angle)`` with ``angle`` a dict from ``"pi"`` or a
parameter index ``k`` (meaning ``t_k``) to an integer-valued multilinear
polynomial over input bits; the term denotes ``coeff * exp(i * sum)``.
Symbolic gates contribute a factor ``phi(sid, args)`` per branch and opaque
output bits ``("f", tag, j)`` until an interpretation is applied.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import bits as B
from .field import FieldElement, FieldError
from .gateset import GateDef, Gateset, SymbolicDecl
from .params import ParamExpr

SymbolicGate = SymbolicDecl
Interpretation = Mapping[str, Sequence[int]]  # symbolic gate name -> permutation table


class PathSumError(ValueError):
    pass


def _mono_key(m) -> tuple:
    return tuple(sorted(repr(v) for v in m))


def _poly_key(p: B.MLPoly) -> tuple:
    return tuple(sorted((_mono_key(m), c) for m, c in p.items()))


def angle_key(angle: Mapping) -> tuple:
    return tuple(sorted((repr(k), _poly_key(p)) for k, p in angle.items()))


def _angle_add(a: Mapping, b: Mapping) -> dict:
    out = dict(a)
    for k, p in b.items():
        q = B.ml_add(out.get(k, {}), p)
        if k == "pi":
            q = B.ml_mod(q, 2)
        if q:
            out[k] = q
        else:
            out.pop(k, None)
    return out


def _angle_subst(angle: Mapping, sub: Mapping) -> dict:
    out = {}
    for k, p in angle.items():
        q = B.ml_subst(p, sub)
        if k == "pi":
            q = B.ml_mod(q, 2)
        if q:
            out[k] = q
    return out


def normalize_terms(terms: Iterable) -> tuple:
    """Merge terms with identical angles and drop zero coefficients."""
    acc: dict = {}
    order = []
    for c, ang in terms:
        k = angle_key(ang)
        if k in acc:
            acc[k] = (acc[k][0] + c, ang)
        else:
            acc[k] = (c, ang)
            order.append(k)
    return tuple(acc[k] for k in sorted(order) if not acc[k][0].is_zero())


@dataclass(frozen=True)
class Branch:
    terms: tuple  # ((FieldElement, angle), ...)
    state: tuple  # ANF per qubit
    phis: tuple = ()  # ((sid, args: tuple of ANF), ...)
    uf: tuple = ()  # ((tag, sid, args), ...) in application order

    def subst(self, sub: Mapping) -> Branch:
        terms = normalize_terms((c, _angle_subst(a, sub)) for c, a in self.terms)
        state = tuple(B.anf_subst(s, sub) for s in self.state)
        phis = tuple((sid, tuple(B.anf_subst(x, sub) for x in args)) for sid, args in self.phis)
        uf = tuple((tag, sid, tuple(B.anf_subst(x, sub) for x in args)) for tag, sid, args in self.uf)
        return Branch(terms, state, phis, uf)


@dataclass(frozen=True)
class PathSum:
    n: int
    branches: tuple = field(default_factory=tuple)

    @classmethod
    def identity(cls, n: int) -> PathSum:
        from .field import ONE
        return cls(n, (Branch(((ONE, {}),), tuple(B.anf_var(q) for q in range(n))),))

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def symbolic_tags(self) -> set:
        return {tag for br in self.branches for tag, _, _ in br.uf}


def _check_qubits(qubits: Sequence[int], arity: int, n: int) -> None:
    if len(qubits) != arity:
        raise PathSumError(f"expected {arity} qubit indices, got {len(qubits)}")
    if len(set(qubits)) != len(qubits):
        raise PathSumError(f"qubit indices not distinct: {tuple(qubits)}")
    for q in qubits:
        if not 0 <= q < n:
            raise PathSumError(f"qubit index {q} out of range for {n} qubits")


def _check_pi(angle: Mapping) -> None:
    for c in angle.get("pi", {}).values():
        if (c * 4).denominator != 1:
            raise FieldError(f"phase {c}*pi is not a multiple of pi/4")


def extend(g: GateDef | SymbolicDecl, qubits: Sequence[int], n: int,
           params: Sequence[ParamExpr] | None = None, tag=0) -> PathSum:
    """Path sum of gate ``g`` on ``qubits`` (0-based) inside an ``n``-qubit register."""
    qubits = tuple(qubits)
    if isinstance(g, SymbolicDecl):
        _check_qubits(qubits, len(qubits), n)
        if len(qubits) > 2:
            raise PathSumError("symbolic gates act on at most 2 qubits")
        args = tuple(B.anf_var(q) for q in qubits)
        state = [B.anf_var(q) for q in range(n)]
        for j, q in enumerate(qubits):
            state[q] = B.anf_var(("f", tag, j))
        from .field import ONE
        br = Branch(((ONE, {}),), tuple(state), ((g.name, args),), ((tag, g.name, args),))
        return PathSum(n, (br,))
    _check_qubits(qubits, g.arity, n)
    params = tuple(params) if params is not None else tuple(ParamExpr.var(j + 1) for j in range(g.params))
    if len(params) != g.params:
        raise PathSumError(f"gate {g.name} takes {g.params} parameters, got {len(params)}")
    branches = []
    for ys in product((0, 1), repeat=g.branches):
        sub = {f"x{j}": B.anf_var(q) for j, q in enumerate(qubits)}
        sub.update({f"y{j}": B.anf_const(y) for j, y in enumerate(ys)})
        terms = []
        for c, ang in g.terms:
            out: dict = {}
            for key, poly in ang.items():
                p = B.ml_subst(poly, sub)
                if key == "pi":
                    out = _angle_add(out, {"pi": p})
                    continue
                if key == "1":
                    raise PathSumError("angle constants must be multiples of pi")
                pe = params[int(key[1:])]
                contrib = {k: B.ml_scale(p, a) for k, a in pe.coeffs}
                if pe.pi:
                    contrib["pi"] = B.ml_scale(p, pe.pi)
                out = _angle_add(out, {k: v for k, v in contrib.items() if v})
            _check_pi(out)
            terms.append((c, out))
        state = [B.anf_var(q) for q in range(n)]
        for j, q in enumerate(qubits):
            state[q] = B.anf_subst(g.state[j], sub)
        terms = normalize_terms(terms)
        if terms:
            branches.append(Branch(terms, tuple(state)))
    return PathSum(n, tuple(branches))


def compose(p1: PathSum, p2: PathSum) -> PathSum:
    """Sequential composition: ``p1`` then ``p2``."""
    if p1.n != p2.n:
        raise PathSumError(f"qubit-count mismatch: {p1.n} vs {p2.n}")
    clash = p1.symbolic_tags & p2.symbolic_tags
    if clash:
        raise PathSumError(f"symbolic tags reused across composition: {sorted(map(repr, clash))}")
    out = []
    for b1 in p1.branches:
        sub = {q: b1.state[q] for q in range(p1.n)}
        for b2 in p2.branches:
            b2s = b2.subst(sub)
            terms = normalize_terms((c * d, _angle_add(a1, a2)) for c, a1 in b1.terms for d, a2 in b2s.terms)
            if not terms:
                continue
            out.append(Branch(terms, b2s.state, b1.phis + b2s.phis, b1.uf + b2s.uf))
    return PathSum(p1.n, tuple(out))


def is_monomial(p: PathSum) -> bool:
    return len(p.branches) == 1


def interpretation_anfs(perm: Sequence[int], arity: int) -> list[B.Anf]:
    """Output bits of a permutation of Z_2^arity as ANFs over formal inputs ``("a", i)`` (i = 0 is the MSB)."""
    if sorted(perm) != list(range(1 << arity)):
        raise PathSumError(f"interpretation {tuple(perm)} is not a permutation of {1 << arity} points")
    inputs = [("a", i) for i in range(arity)]
    return [B.anf_from_truth_table([(perm[v] >> (arity - 1 - j)) & 1 for v in range(1 << arity)], inputs)
            for j in range(arity)]


def apply_interpretation(p: PathSum, interp: Interpretation) -> PathSum:
    """Replace every uninterpreted state transformer by its permutation; phi factors stay symbolic."""
    out = []
    for br in p.branches:
        cur = br
        for idx in range(len(br.uf)):
            tag, sid, args = cur.uf[idx]
            if sid not in interp:
                raise PathSumError(f"no interpretation for symbolic gate {sid!r}")
            forms = interpretation_anfs(interp[sid], len(args))
            formal = {("a", i): a for i, a in enumerate(args)}
            sub = {("f", tag, j): B.anf_subst(f, formal) for j, f in enumerate(forms)}
            cur = cur.subst(sub)
        out.append(Branch(cur.terms, cur.state, cur.phis, ()))
    return PathSum(p.n, tuple(out))


def is_interpreted(p: PathSum) -> bool:
    return all(not br.uf for br in p.branches)


def circuit_pathsum(circuit, gateset: Gateset, interp: Interpretation | None = None) -> PathSum:
    """Path sum of a pattern circuit; symbolic gates are instances named ``S``."""
    ps = PathSum.identity(circuit.n)
    for pos, g in enumerate(circuit.gates):
        if g.name in gateset.gates:
            params = [p if isinstance(p, ParamExpr) else _float_to_expr(p) for p in g.params]
            step = extend(gateset.gates[g.name], g.qubits, circuit.n, params)
        elif g.is_symbolic:
            step = extend(SymbolicDecl(g.name, len(g.qubits)), g.qubits, circuit.n, tag=pos)
        else:
            raise PathSumError(f"gate {g.name!r} is not in gate set {gateset.name!r}")
        ps = compose(ps, step)
    if interp is not None:
        ps = apply_interpretation(ps, interp)
    return ps


def _float_to_expr(x: float) -> ParamExpr:
    q = Fraction(x / math.pi).limit_denominator(8)
    if abs(float(q) * math.pi - x) > 1e-12:
        raise FieldError(f"angle {x!r} is not an exact multiple of pi/8")
    return ParamExpr.const(q)


def branch_amplitude(br: Branch, env: Mapping, angles: Mapping[int, float],
                     phi=None) -> complex:
    """Numeric amplitude of one branch under bit assignment ``env``."""
    total = 0j
    for c, ang in br.terms:
        ph = 0.0
        for k, poly in ang.items():
            v = float(B.ml_eval(poly, env))
            ph += v * (math.pi if k == "pi" else angles[k])
        total += complex(c) * cmath.exp(1j * ph)
    for sid, args in br.phis:
        if phi is None:
            raise PathSumError("symbolic amplitude needs a phi valuation")
        total *= phi(sid, tuple(B.anf_eval(a, env) for a in args))
    return total


def pathsum_matrix(p: PathSum, angles: Mapping[int, float] | None = None, phi=None) -> np.ndarray:
    """Dense matrix (big-endian: qubit 0 is the most significant bit) of an interpreted path sum."""
    if not is_interpreted(p):
        raise PathSumError("path sum has uninterpreted state transformers")
    angles = angles or {}
    dim = 1 << p.n
    m = np.zeros((dim, dim), dtype=complex)
    for a in range(dim):
        env = {q: (a >> (p.n - 1 - q)) & 1 for q in range(p.n)}
        for br in p.branches:
            b = 0
            for s in br.state:
                b = (b << 1) | B.anf_eval(s, env)
            m[b, a] += branch_amplitude(br, env, angles, phi)
    return m
