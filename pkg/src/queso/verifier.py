"""Randomized identity testing of circuit fingerprints and the polynomial identity filter."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .circuit import Circuit, GateInstance
from .field import SLOPE_DOMAIN, ZERO, FieldElement, canonical_digest, sample_value
from .gateset import Gateset
from .params import ParamExpr
from .pathsum import extend
from .polyrep import (DEFAULT_MAX_QUBITS, amplitudes, evaluate, fingerprint_poly, joint_degree, phi_name,
                      v_name, var_kind)

log = logging.getLogger(__name__)

EQUIVALENT = "equivalent"
COUNTEREXAMPLE = "counterexample"


class VerifyError(ValueError):
    pass


class Valuation(Mapping):
    """Lazily sampled valuation: every variable name has a value fixed by ``(seed, name)``."""

    def __init__(self, seed: int):
        self.seed = seed
        self._cache: dict[str, FieldElement] = {}

    def __getitem__(self, name: str) -> FieldElement:
        x = self._cache.get(name)
        if x is None:
            x = self._cache[name] = sample_value(self.seed, name, var_kind(name))
        return x

    def __contains__(self, name) -> bool:
        return isinstance(name, str)

    def __iter__(self):
        return iter(self._cache)

    def __len__(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class PitOutcome:
    verdict: str
    bound: Fraction = Fraction(0)
    valuation: dict = field(default_factory=dict)
    values: tuple = ()
    degree: int = 0

    @property
    def equivalent(self) -> bool:
        return self.verdict == EQUIVALENT

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "degree": self.degree}
        if self.equivalent:
            out["failure_bound"] = str(self.bound)
            out["failure_bound_float"] = float(self.bound)
        else:
            out["valuation"] = {k: str(v) for k, v in sorted(self.valuation.items())}
            out["values"] = [str(v) for v in self.values]
        return out


def _param_vars(c: Circuit) -> frozenset[int]:
    return frozenset(c.param_vars())


def pit_check(c1: Circuit, c2: Circuit, gateset: Gateset, interp=None, seed: int = 0,
              max_qubits: int = DEFAULT_MAX_QUBITS) -> PitOutcome:
    """Schwartz-Zippel test of ``c1 == c2`` (under ``interp`` for symbolic gates)."""
    if c1.n != c2.n:
        raise VerifyError(f"qubit-count mismatch: {c1.n} vs {c2.n}")
    if _param_vars(c1) != _param_vars(c2):
        raise VerifyError("circuits are over different parameter variables")
    p1 = fingerprint_poly(c1, gateset, interp, max_qubits)
    p2 = fingerprint_poly(c2, gateset, interp, max_qubits)
    spec = dict(p1.spec)
    spec.update(p2.spec)
    val = Valuation(seed)
    x1, x2 = evaluate(p1, val), evaluate(p2, val)
    d = joint_degree(p1, p2)
    if x1 != x2:
        return PitOutcome(COUNTEREXAMPLE, valuation={k: val[k] for k in sorted(spec)},
                          values=(x1, x2), degree=d)
    return PitOutcome(EQUIVALENT, Fraction(d, SLOPE_DOMAIN), degree=d)


# -- fast exact evaluation ---------------------------------------------------

class Evaluator:
    """Exact sparse matrix of a pattern circuit under a fixed valuation."""

    def __init__(self, gateset: Gateset, val: Valuation):
        self.gateset = gateset
        self.val = val
        self._local: dict = {}

    def local(self, g: GateInstance, interp=None) -> list[dict[int, FieldElement]]:
        """Column list of the gate on its own qubits (index 0 = first listed qubit as MSB)."""
        if g.is_symbolic:
            if interp is None or g.name not in interp:
                raise VerifyError("symbolic gate without an interpretation")
            perm = tuple(interp[g.name])
            key = (g.name, len(g.qubits), perm)
        else:
            key = (g.name, g.params)
        m = self._local.get(key)
        if m is not None:
            return m
        k = len(g.qubits)
        if g.is_symbolic:
            if len(perm) != 1 << k:
                raise VerifyError(f"interpretation size {len(perm)} does not fit arity {k}")
            m = [{perm[x]: self.val[phi_name(g.name, tuple((x >> (k - 1 - j)) & 1 for j in range(k)))]}
                 for x in range(1 << k)]
        else:
            gd = self.gateset.gates.get(g.name)
            if gd is None:
                raise VerifyError(f"gate {g.name!r} not in gate set {self.gateset.name!r}")
            params = [p if isinstance(p, ParamExpr) else _const_expr(p) for p in g.params]
            ps = extend(gd, tuple(range(k)), k, params)
            m = []
            for x in range(1 << k):
                col = {}
                for y, amp in amplitudes(ps, x).items():
                    v = evaluate(amp, self.val)
                    if not v.is_zero():
                        col[y] = v
                m.append(col)
        self._local[key] = m
        return m

    @staticmethod
    def identity(n: int) -> tuple:
        return tuple({a: FieldElement.from_int(1)} for a in range(1 << n))

    def apply(self, state: tuple, n: int, g: GateInstance, interp=None) -> tuple:
        loc = self.local(g, interp)
        shifts = [n - 1 - q for q in g.qubits]
        k = len(shifts)
        clear = ~sum(1 << s for s in shifts)
        scatter = []
        for y in range(1 << k):
            bits = 0
            for j, s in enumerate(shifts):
                if (y >> (k - 1 - j)) & 1:
                    bits |= 1 << s
            scatter.append(bits)
        out = []
        for col in state:
            new: dict[int, FieldElement] = {}
            for b, amp in col.items():
                x = 0
                for s in shifts:
                    x = (x << 1) | ((b >> s) & 1)
                base = b & clear
                for y, e in loc[x].items():
                    b2 = base | scatter[y]
                    v = new.get(b2)
                    t = amp * e
                    v = t if v is None else v + t
                    if v.is_zero():
                        new.pop(b2, None)
                    else:
                        new[b2] = v
            out.append(new)
        return tuple(out)

    def matrix(self, c: Circuit, interp=None) -> tuple:
        st = self.identity(c.n)
        for g in c.gates:
            st = self.apply(st, c.n, g, interp)
        return st

    def value_of(self, state: tuple) -> FieldElement:
        acc = ZERO
        for a, col in enumerate(state):
            for b, amp in col.items():
                acc = acc + self.val[v_name(a, b)] * amp
        return acc

    def value(self, c: Circuit, interp=None) -> FieldElement:
        return self.value_of(self.matrix(c, interp))


def _const_expr(x) -> ParamExpr:
    import math
    q = Fraction(float(x) / math.pi).limit_denominator(4)
    if abs(float(q) * math.pi - float(x)) > 1e-12:
        raise VerifyError(f"angle {x!r} is not an exact multiple of pi/4")
    return ParamExpr.const(q)


def static_degree(c: Circuit, gateset: Gateset) -> int:
    """Upper bound on the total degree of the fingerprint of ``c``."""
    d = 1
    for g in c.gates:
        if g.is_symbolic:
            d += 1
            continue
        gd = gateset.gates[g.name]
        for slot, p in enumerate(g.params):
            if not isinstance(p, ParamExpr) or not p.coeffs:
                continue
            lo, hi = gd.slot_range(slot)
            spread = 2 * (hi - lo)
            d += int(sum(abs(a) for _, a in p.coeffs) * spread)
    return d


# -- polynomial identity filter ---------------------------------------------------

@dataclass
class PifEntry:
    circuit: Circuit
    interp: tuple | None = None  # (name, perm) for a single symbolic gate

    @property
    def interp_map(self):
        return None if self.interp is None else {self.interp[0]: self.interp[1]}


class Pif:
    """Map from one fixed random evaluation of the fingerprint to an equivalence class."""

    def __init__(self, gateset: Gateset, n: int, seed: int, max_qubits: int = DEFAULT_MAX_QUBITS):
        if n > max_qubits:
            raise VerifyError(f"PIF limited to {max_qubits} qubits")
        self.gateset = gateset
        self.n = n
        self.seed = seed
        self.valuation = Valuation(seed)
        self.evaluator = Evaluator(gateset, self.valuation)
        self.classes: dict[bytes, list[PifEntry]] = {}
        self.ids: dict[bytes, int] = {}
        self.max_degree = 0

    def key(self, value: FieldElement) -> bytes:
        return canonical_digest(value)

    def insert(self, circuit: Circuit, interp: tuple | None = None, value: FieldElement | None = None) -> int:
        if circuit.n != self.n:
            raise VerifyError(f"circuit has {circuit.n} qubits, PIF stratum is {self.n}")
        entry = PifEntry(circuit, interp)
        if value is None:
            value = self.evaluator.value(circuit, entry.interp_map)
        k = self.key(value)
        if k not in self.classes:
            self.classes[k] = []
            self.ids[k] = len(self.ids)
        self.classes[k].append(entry)
        self.max_degree = max(self.max_degree, static_degree(circuit, self.gateset))
        return self.ids[k]

    @property
    def pair_count(self) -> int:
        return sum(len(v) * (len(v) - 1) // 2 for v in self.classes.values())

    @property
    def failure_bound(self) -> Fraction:
        return Fraction(self.pair_count * self.max_degree, SLOPE_DOMAIN)

    def class_list(self) -> list[list[PifEntry]]:
        return [self.classes[k] for k in sorted(self.classes, key=self.ids.__getitem__)]

    def __len__(self) -> int:
        return len(self.classes)


def pif_insert(pif: Pif, circuit: Circuit, interp=None) -> int:
    if isinstance(interp, Mapping):
        (name, perm), = interp.items()
        interp = (name, tuple(perm))
    return pif.insert(circuit, interp)


@dataclass
class ReverifyReport:
    classes: int = 0
    pairs_checked: int = 0
    splits: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.splits


def reverify_classes(pif: Pif, fresh_seed: int) -> ReverifyReport:
    """Re-evaluate every class member at a fresh valuation; split classes that disagree."""
    ev = Evaluator(pif.gateset, Valuation(fresh_seed))
    report = ReverifyReport()
    new_classes: dict[bytes, list[PifEntry]] = {}
    new_ids: dict[bytes, int] = {}
    for k in sorted(pif.classes, key=pif.ids.__getitem__):
        members = pif.classes[k]
        report.classes += 1
        report.pairs_checked += len(members) * (len(members) - 1) // 2
        groups: dict[bytes, list[PifEntry]] = {}
        for e in members:
            groups.setdefault(canonical_digest(ev.value(e.circuit, e.interp_map)), []).append(e)
        parts = list(groups.values())
        if len(parts) > 1:
            report.splits.append({"class": pif.ids[k], "sizes": [len(p) for p in parts],
                                  "members": [[str(e.circuit) for e in p] for p in parts]})
            log.warning("class %d split into %d parts", pif.ids[k], len(parts))
        for j, p in enumerate(parts):
            nk = k if j == 0 else k + b"#%d" % j
            new_classes[nk] = p
            new_ids[nk] = pif.ids[k] if j == 0 else len(pif.ids) + len(new_ids)
    pif.classes, pif.ids = new_classes, new_ids
    return report


def dump_classes(pif: Pif, path: str | Path) -> None:
    lines = [f"queso-classes/1 gateset={pif.gateset.id} n={pif.n} seed={pif.seed}"]
    for cid, members in enumerate(pif.class_list()):
        for e in members:
            tag = "" if e.interp is None else f" interp={e.interp[0]}:{','.join(map(str, e.interp[1]))}"
            lines.append(f"{cid}\t{e.circuit.serialize() or 'ε'}{tag}")
    Path(path).write_text("\n".join(lines) + "\n")
