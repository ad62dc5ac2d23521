"""Boolean and multilinear polynomials over bit variables.

``Anf`` is a GF(2) algebraic normal form: a frozenset of monomials, each a
frozenset of variables. ``MLPoly`` is an integer-valued multilinear
polynomial with rational coefficients (``x*x == x`` for bits).
"""
from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Mapping

Var = Hashable
Monomial = frozenset
Anf = frozenset
MLPoly = dict  # Monomial -> Fraction

EMPTY = frozenset()
ANF_ZERO: Anf = frozenset()
ANF_ONE: Anf = frozenset([EMPTY])


def anf_var(v: Var) -> Anf:
    return frozenset([frozenset([v])])


def anf_const(bit: int) -> Anf:
    return ANF_ONE if bit & 1 else ANF_ZERO


def anf_xor(*xs: Anf) -> Anf:
    out: set = set()
    for x in xs:
        out ^= x
    return frozenset(out)


def anf_and(x: Anf, y: Anf) -> Anf:
    out: set = set()
    for m in x:
        for n in y:
            out ^= {m | n}
    return frozenset(out)


def anf_not(x: Anf) -> Anf:
    return anf_xor(x, ANF_ONE)


def anf_vars(x: Anf) -> set:
    return set().union(*x) if x else set()


def anf_eval(x: Anf, env: Mapping[Var, int]) -> int:
    acc = 0
    for m in x:
        t = 1
        for v in m:
            if not env[v]:
                t = 0
                break
        acc ^= t
    return acc


def anf_subst(x: Anf, sub: Mapping[Var, Anf]) -> Anf:
    out: set = set()
    for m in x:
        term = ANF_ONE
        for v in m:
            term = anf_and(term, sub.get(v, anf_var(v)))
        out ^= term
    return frozenset(out)


def anf_from_truth_table(table, inputs: list) -> Anf:
    """ANF of a boolean function given ``table[i]`` for integer-encoded inputs (inputs[0] = MSB)."""
    n = len(inputs)
    coeffs = [int(t) & 1 for t in table]
    # Moebius transform
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                coeffs[mask] ^= coeffs[mask ^ bit]
    out = set()
    for mask, c in enumerate(coeffs):
        if c:
            out.add(frozenset(inputs[n - 1 - i] for i in range(n) if mask >> i & 1))
    return frozenset(out)


def ml_const(c) -> MLPoly:
    c = Fraction(c)
    return {EMPTY: c} if c else {}


def ml_var(v: Var) -> MLPoly:
    return {frozenset([v]): Fraction(1)}


def ml_add(p: MLPoly, q: MLPoly, scale=1) -> MLPoly:
    out = dict(p)
    for m, c in q.items():
        v = out.get(m, Fraction(0)) + scale * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def ml_scale(p: MLPoly, s) -> MLPoly:
    s = Fraction(s)
    return {m: c * s for m, c in p.items()} if s else {}


def ml_mul(p: MLPoly, q: MLPoly) -> MLPoly:
    out: dict = {}
    for m, c in p.items():
        for n, d in q.items():
            k = m | n
            v = out.get(k, Fraction(0)) + c * d
            if v:
                out[k] = v
            else:
                out.pop(k, None)
    return out


def ml_is_const(p: MLPoly) -> bool:
    return all(not m for m in p)


def ml_eval(p: MLPoly, env: Mapping[Var, int]) -> Fraction:
    acc = Fraction(0)
    for m, c in p.items():
        if all(env[v] for v in m):
            acc += c
    return acc


def anf_to_ml(x: Anf) -> MLPoly:
    """Integer-valued polynomial equal to the XOR of the ANF monomials."""
    acc: MLPoly = {}
    for m in x:
        term = {m: Fraction(1)}
        # a xor b = a + b - 2ab
        acc = ml_add(ml_add(acc, term), ml_mul(acc, term), scale=-2)
    return acc


def ml_subst(p: MLPoly, sub: Mapping[Var, Anf]) -> MLPoly:
    out: MLPoly = {}
    cache: dict = {}
    for m, c in p.items():
        term = ml_const(c)
        for v in m:
            if v in sub:
                if v not in cache:
                    cache[v] = anf_to_ml(sub[v])
                term = ml_mul(term, cache[v])
            else:
                term = ml_mul(term, ml_var(v))
        out = ml_add(out, term)
    return out


def ml_mod(p: MLPoly, modulus) -> MLPoly:
    """Reduce coefficients into [0, modulus) (valid for pi-phases when modulus is 2)."""
    out = {}
    for m, c in p.items():
        r = c % modulus
        if r:
            out[m] = r
    return out


def ml_range(p: MLPoly, vars_) -> tuple[Fraction, Fraction]:
    """Min and max over all bit assignments of ``vars_``."""
    vars_ = list(vars_)
    lo = hi = None
    for mask in range(1 << len(vars_)):
        env = {v: (mask >> i) & 1 for i, v in enumerate(vars_)}
        val = ml_eval(p, env)
        lo = val if lo is None or val < lo else lo
        hi = val if hi is None or val > hi else hi
    return (lo if lo is not None else Fraction(0)), (hi if hi is not None else Fraction(0))
