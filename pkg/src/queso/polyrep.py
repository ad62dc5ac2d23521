"""Amplitude polynomials of interpreted path sums and the summed fingerprint polynomial.

Variables:

* ``v{a}_{b}``: general, one per basis pair (shared by all circuits with n qubits)
* ``u{k}``: unit circle, ``exp(i t_k / 2)``; exponents may be negative
* ``phi_{sid}_{bits}``: general, the symbolic amplitude at a local input pattern
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import bits as B
from .field import GENERAL, UNIT, ZERO, FieldElement, FieldError, omega_power
from .pathsum import PathSum, circuit_pathsum, is_interpreted

DEFAULT_MAX_QUBITS = 3


class PolyError(ValueError):
    pass


def v_name(a: int, b: int) -> str:
    return f"v{a}_{b}"


def u_name(k: int) -> str:
    return f"u{k}"


def phi_name(sid: str, bits: tuple[int, ...]) -> str:
    return f"phi_{sid}_{''.join(map(str, bits))}"


def var_kind(name: str) -> str:
    return UNIT if name.startswith("u") else GENERAL


Exps = tuple  # sorted ((var, exponent), ...)


def _mul_exps(e1: Exps, e2: Exps) -> Exps:
    acc = dict(e1)
    for v, k in e2:
        acc[v] = acc.get(v, 0) + k
    return tuple(sorted((v, k) for v, k in acc.items() if k))


@dataclass
class AmpPoly:
    """Sum of monomials ``coeff * prod(var**exp)``."""

    terms: dict = field(default_factory=dict)  # Exps -> FieldElement
    spec: dict = field(default_factory=dict)  # var -> kind

    def add_term(self, exps: Exps, coeff: FieldElement) -> None:
        c = self.terms.get(exps, ZERO) + coeff
        if c.is_zero():
            self.terms.pop(exps, None)
        else:
            self.terms[exps] = c
        for v, _ in exps:
            self.spec.setdefault(v, var_kind(v))

    def __add__(self, other: AmpPoly) -> AmpPoly:
        out = AmpPoly(dict(self.terms), dict(self.spec))
        for e, c in other.terms.items():
            out.add_term(e, c)
        out.spec.update(other.spec)
        return out

    def scale_var(self, var: str, kind: str = GENERAL) -> AmpPoly:
        out = AmpPoly(spec=dict(self.spec))
        out.spec[var] = kind
        for e, c in self.terms.items():
            out.add_term(_mul_exps(e, ((var, 1),)), c)
        return out

    def variables(self) -> set[str]:
        return {v for e in self.terms for v, _ in e}

    def degree_bound(self) -> int:
        """Total degree after clearing negative unit exponents by multiplying through."""
        hi: dict[str, int] = {}
        lo: dict[str, int] = {}
        for e in self.terms:
            for v, k in e:
                hi[v] = max(hi.get(v, 0), k)
                lo[v] = min(lo.get(v, 0), k)
        return sum(hi[v] - lo[v] for v in hi)

    def true_degree(self) -> int:
        """Exact total degree of the polynomial after clearing negative unit exponents."""
        lo: dict[str, int] = {}
        for e in self.terms:
            for v, k in e:
                lo[v] = min(lo.get(v, 0), k)
        best = 0
        for e in self.terms:
            d = dict(e)
            best = max(best, sum(d.get(v, 0) - lo.get(v, 0) for v in set(d) | set(lo)))
        return best

    def __len__(self) -> int:
        return len(self.terms)

    def lowest_exponents(self) -> dict[str, int]:
        lo: dict[str, int] = {}
        for e in self.terms:
            for v, k in e:
                lo[v] = min(lo.get(v, 0), k)
        return lo

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(v if k == 1 else f"{v}^{k}" for v, k in e)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def joint_degree(*polys: AmpPoly) -> int:
    """Total degree of any combination of ``polys`` once negative exponents are cleared by one common monomial."""
    lo: dict[str, int] = {}
    for p in polys:
        for v, k in p.lowest_exponents().items():
            lo[v] = min(lo.get(v, 0), k)
    best = 0
    for p in polys:
        for e in p.terms:
            d = dict(e)
            best = max(best, sum(d.get(v, 0) - lo.get(v, 0) for v in set(d) | set(lo)))
    return best


def _basis_env(a: int, n: int) -> dict:
    return {q: (a >> (n - 1 - q)) & 1 for q in range(n)}


def amplitudes(ps: PathSum, a: int) -> dict[int, AmpPoly]:
    """Map output basis index ``b`` to the amplitude polynomial of input basis ``a``."""
    if not is_interpreted(ps):
        raise PolyError("path sum has uninterpreted state transformers")
    n = ps.n
    env = _basis_env(a, n)
    out: dict[int, AmpPoly] = {}
    for br in ps.branches:
        b = 0
        for s in br.state:
            b = (b << 1) | B.anf_eval(s, env)
        phis = tuple(sorted((phi_name(sid, tuple(B.anf_eval(x, env) for x in args)), 1)
                            for sid, args in br.phis))
        phi_exps: Exps = ()
        for v, k in phis:
            phi_exps = _mul_exps(phi_exps, ((v, k),))
        poly = out.setdefault(b, AmpPoly())
        for c, ang in br.terms:
            coeff = c
            exps: Exps = ()
            for key, p in ang.items():
                val = B.ml_eval(p, env)
                if key == "pi":
                    q = val * 4
                    if q.denominator != 1:
                        raise FieldError(f"phase {val}*pi leaves the field")
                    coeff = coeff * omega_power(int(q))
                else:
                    e = val * 2
                    if e.denominator != 1:
                        raise FieldError(f"half-angle exponent {e} of t{key} is not an integer")
                    if e:
                        exps = _mul_exps(exps, ((u_name(key), int(e)),))
            poly.add_term(_mul_exps(exps, phi_exps), coeff)
    return {b: p for b, p in out.items() if p.terms}


def fingerprint_of_pathsum(ps: PathSum) -> AmpPoly:
    total = AmpPoly()
    dim = 1 << ps.n
    for a in range(dim):
        for b, amp in amplitudes(ps, a).items():
            total = total + amp.scale_var(v_name(a, b))
    for a in range(dim):
        for b in range(dim):
            total.spec.setdefault(v_name(a, b), GENERAL)
    return total


def fingerprint_poly(c, gateset, interp=None, max_qubits: int = DEFAULT_MAX_QUBITS) -> AmpPoly:
    """Sum over basis pairs of ``v_{a,b}`` times the amplitude from ``a`` to ``b``."""
    if c.n > max_qubits:
        raise PolyError(f"circuit has {c.n} qubits; fingerprints are limited to {max_qubits}")
    return fingerprint_of_pathsum(circuit_pathsum(c, gateset, interp))


def evaluate(p: AmpPoly, val: Mapping[str, FieldElement]) -> FieldElement:
    acc = ZERO
    cache: dict = {}
    for exps, c in p.terms.items():
        t = c
        for v, k in exps:
            if v not in val:
                raise PolyError(f"valuation is missing variable {v!r}")
            key = (v, k)
            if key not in cache:
                x = val[v]
                if k < 0:
                    if p.spec.get(v, var_kind(v)) != UNIT:
                        raise PolyError(f"negative exponent on non-unit variable {v!r}")
                    cache[key] = x.conj() ** (-k)
                else:
                    cache[key] = x ** k
            t = t * cache[key]
        acc = acc + t
    return acc

