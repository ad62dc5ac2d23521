"""Matching rewrite rules against concrete circuits and applying them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .circuit import Circuit, GateInstance
from .oracle import gate_matrix
from .params import ANGLE_PERIOD, ParamExpr, normalize_angle
from .pathsum import interpretation_anfs

ANGLE_TOL = 1e-10
MAX_BRIDGE_GATES = 10
MAX_BRIDGE_QUBITS = 7


class StaleMatch(ValueError):
    pass


def angles_equal(a: float, b: float) -> bool:
    return abs(math.remainder(a - b, ANGLE_PERIOD)) <= ANGLE_TOL


# -- affine summaries ------------------------------------------------------------

@lru_cache(maxsize=4096)
def _monomial_perm(name: str, params: tuple) -> tuple | None:
    """Basis permutation of a gate if its matrix is monomial (one nonzero per column)."""
    if name in ("measure", "barrier", "S"):
        return None
    try:
        m = gate_matrix(name, params)
    except KeyError:
        return None
    nz = np.abs(m) > 1e-9
    if not (nz.sum(axis=0) == 1).all():
        return None
    return tuple(int(np.argmax(nz[:, x])) for x in range(m.shape[1]))


def _perm_affine(perm: tuple, k: int) -> list[tuple[int, int]] | None:
    """Per output bit j: (coefficient mask over local inputs, constant), or None if not affine."""
    out = []
    for j in range(k):
        bit = lambda v: (perm[v] >> (k - 1 - j)) & 1  # noqa: E731
        const = bit(0)
        mask = 0
        for i in range(k):
            if bit(1 << (k - 1 - i)) ^ const:
                mask |= 1 << i
        for v in range(1 << k):
            pred = const
            for i in range(k):
                if mask >> i & 1 and (v >> (k - 1 - i)) & 1:
                    pred ^= 1
            if pred != bit(v):
                return None
        out.append((mask, const))
    return out


@dataclass
class AffineSummary:
    """GF(2) affine form per qubit: ``(mask over input qubits, constant)``."""

    forms: dict = field(default_factory=dict)

    def form(self, q: int) -> tuple[int, int]:
        return self.forms.get(q, (1 << q, 0))

    def apply(self, g: GateInstance) -> bool:
        """Fold a gate in; False when the gate is not an affine monomial."""
        perm = _monomial_perm(g.name, tuple(float(p) for p in g.params))
        if perm is None:
            return False
        k = len(g.qubits)
        aff = _perm_affine(perm, k)
        if aff is None:
            return False
        cur = [self.form(q) for q in g.qubits]
        new = []
        for mask, const in aff:
            m, c = 0, const
            for i in range(k):
                if mask >> i & 1:
                    m ^= cur[i][0]
                    c ^= cur[i][1]
            new.append((m, c))
        for q, f in zip(g.qubits, new):
            self.forms[q] = f
        return True

    @classmethod
    def of(cls, gates) -> AffineSummary | None:
        s = cls()
        for g in gates:
            if not s.apply(g):
                return None
        return s

    def evaluate(self, q: int, bits: dict[int, int]) -> int:
        mask, c = self.form(q)
        for p, b in bits.items():
            if mask >> p & 1 and b:
                c ^= 1
        return c


def interpretation_forms(perm, sq: tuple[int, ...]) -> list[tuple[int, int]]:
    """Affine forms of an interpretation placed on circuit qubits ``sq``."""
    out = []
    for anf in interpretation_anfs(perm, len(sq)):
        mask, const = 0, 0
        for mono in anf:
            if not mono:
                const ^= 1
            elif len(mono) == 1:
                (_, i), = mono
                mask ^= 1 << sq[i]
            else:
                raise ValueError("interpretation is not affine")
        out.append((mask, const))
    return out


# -- compiled patterns -------------------------------------------------------------

class CompiledRule:
    def __init__(self, rule):
        self.rule = rule
        lhs = rule.lhs
        self.lhs = lhs
        self.sym = next((i for i, g in enumerate(lhs.gates) if g.is_symbolic), None)
        self.pat = [i for i in range(len(lhs.gates)) if i != self.sym]
        prev, nxt = lhs.dag()
        self.edges = [(j, i, q) for i in self.pat for q, j in prev[i].items() if j != self.sym]
        if self.sym is not None:
            self.before = lhs.ancestors([self.sym])
            self.after = set(self.pat) - self.before
            self.squbits = lhs.gates[self.sym].qubits
            self.perm = tuple(rule.interp[1])
        else:
            self.before, self.after, self.squbits, self.perm = set(self.pat), set(), (), None
        self.pattern_qubits = sorted({q for i in self.pat for q in lhs.gates[i].qubits} | set(self.squbits))
        adj: dict[int, list] = {i: [] for i in self.pat}
        for j, i, q in self.edges:
            adj[j].append((i, q, "next"))
            adj[i].append((j, q, "prev"))
        # visiting order: BFS through wire edges, new components start fresh
        self.order: list[tuple[int, tuple | None]] = []
        seen: set[int] = set()
        starts = sorted(self.pat, key=lambda i: (i not in self.before, i))
        for s in starts:
            if s in seen:
                continue
            seen.add(s)
            self.order.append((s, None))
            queue = [s]
            while queue:
                u = queue.pop(0)
                for v, q, d in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        # v is reached from u along wire q
                        self.order.append((v, (u, q, d)))
                        queue.append(v)
        # RHS split around S
        rhs = rule.rhs
        rs = next((i for i, g in enumerate(rhs.gates) if g.is_symbolic), None)
        if rs is None:
            self.rhs_before, self.rhs_after = list(rhs.gates), []
        else:
            anc = rhs.ancestors([rs])
            self.rhs_before = [g for i, g in enumerate(rhs.gates) if i in anc]
            self.rhs_after = [g for i, g in enumerate(rhs.gates) if i != rs and i not in anc]


_COMPILED: dict[int, CompiledRule] = {}


def compile_rule(rule) -> CompiledRule:
    cr = _COMPILED.get(id(rule))
    if cr is None or cr.rule is not rule:
        cr = _COMPILED[id(rule)] = CompiledRule(rule)
    return cr


class CircuitIndex:
    def __init__(self, c: Circuit):
        self.c = c
        self.prev, self.next = c.dag()
        self.by_name: dict[str, list[int]] = {}
        self.wire: dict[int, list[int]] = {}
        for i, g in enumerate(c.gates):
            self.by_name.setdefault(g.name, []).append(i)
            for q in g.qubits:
                self.wire.setdefault(q, []).append(i)


@dataclass(frozen=True)
class Match:
    gate_map: tuple  # circuit gate index per LHS gate (-1 for the symbolic gate)
    qubit_map: tuple  # ((pattern qubit, circuit qubit), ...)
    binding: tuple  # ((variable, angle), ...)
    bridge: tuple = ()
    expected: tuple = ()  # gates at gate_map + bridge when the match was found

    @property
    def matched(self) -> tuple:
        return tuple(i for i in self.gate_map if i >= 0)

    @property
    def footprint(self) -> frozenset:
        return frozenset(self.matched) | frozenset(self.bridge)

    def qmap(self) -> dict:
        return dict(self.qubit_map)

    def bind(self) -> dict:
        return dict(self.binding)


def _bind_params(pg: GateInstance, g: GateInstance, binding: dict, deferred: list) -> bool:
    if len(pg.params) != len(g.params):
        return False
    for pe, a in zip(pg.params, g.params):
        a = float(a)
        if pe.is_var():
            (k, _), = pe.coeffs
            if k in binding:
                if not angles_equal(binding[k], a):
                    return False
            else:
                binding[k] = a
        elif pe.is_const():
            if not angles_equal(float(pe.pi) * math.pi, a):
                return False
        else:
            deferred.append((pe, a))
    return True


def _convex(idx: CircuitIndex, region: set[int]) -> bool:
    """No path leaves the region and re-enters it."""
    if not region:
        return True
    hi = max(region)
    stack = [s for r in region for s in idx.next[r].values() if s not in region]
    seen: set[int] = set()
    while stack:
        i = stack.pop()
        if i in seen or i > hi:
            continue
        seen.add(i)
        for s in idx.next[i].values():
            if s in region:
                return False
            stack.append(s)
    return True


def _desc(idx: CircuitIndex, roots, limit: int | None = None) -> set[int]:
    seen: set[int] = set()
    stack = [s for r in roots for s in idx.next[r].values()]
    while stack:
        i = stack.pop()
        if i in seen or (limit is not None and i > limit):
            continue
        seen.add(i)
        stack.extend(idx.next[i].values())
    return seen


def _anc(idx: CircuitIndex, roots, limit: int | None = None) -> set[int]:
    seen: set[int] = set()
    stack = [s for r in roots for s in idx.prev[r].values()]
    while stack:
        i = stack.pop()
        if i in seen or (limit is not None and i < limit):
            continue
        seen.add(i)
        stack.extend(idx.prev[i].values())
    return seen


def _finalize(cr: CompiledRule, idx: CircuitIndex, gm: dict, qmap: dict, binding: dict,
              deferred: list) -> Match | None:
    for pe, a in deferred:
        if any(k not in binding for k in pe.vars):
            return None
        if not angles_equal(pe.evaluate(binding), a):
            return None
    for j, i, q in cr.edges:
        if idx.next[gm[j]].get(qmap[q]) != gm[i]:
            return None
    if any(q not in qmap for q in cr.pattern_qubits):
        return None
    matched = set(gm.values())
    bridge: tuple = ()
    if cr.sym is None:
        if not _convex(idx, matched):
            return None
    else:
        m1 = {gm[i] for i in cr.before}
        m2 = {gm[i] for i in cr.after}
        if not m1 or not m2:
            return None
        lo, hi = min(m1), max(m2)
        d1 = _desc(idx, m1, hi)
        a2 = _anc(idx, m2, lo)
        if m2 & _anc(idx, m1, None):
            return None
        b = (d1 & a2) - matched
        if len(b) > MAX_BRIDGE_GATES:
            return None
        if b & _anc(idx, m1) or b & _desc(idx, m2):
            return None
        bgates = [idx.c.gates[i] for i in sorted(b)]
        if any(g.is_fence for g in bgates):
            return None
        sq = tuple(qmap[p] for p in cr.squbits)
        bq = {q for g in bgates for q in g.qubits}
        if len(bq | set(sq)) > MAX_BRIDGE_QUBITS:
            return None
        others = set(qmap.values()) - set(sq)
        if bq & others:
            return None
        summ = AffineSummary.of(bgates)
        if summ is None:
            return None
        smask = sum(1 << q for q in sq)
        for q, want in zip(sq, interpretation_forms(cr.perm, sq)):
            got = summ.form(q)
            if got[0] & ~smask or got != want:
                return None
        region = matched | b
        if not _convex(idx, region):
            return None
        bridge = tuple(sorted(b))
    n = len(cr.lhs.gates)
    gate_map = tuple(gm.get(i, -1) for i in range(n))
    expected = tuple(idx.c.gates[i] for i in gate_map if i >= 0) + tuple(idx.c.gates[i] for i in bridge)
    return Match(gate_map, tuple(sorted(qmap.items())), tuple(sorted(binding.items())), bridge, expected)


def _candidates(cr: CompiledRule, idx: CircuitIndex, p: int, how, gm: dict, qmap: dict):
    pg = cr.lhs.gates[p]
    if how is not None:
        u, q, d = how
        nbr = (idx.next if d == "next" else idx.prev)[gm[u]].get(qmap[q])
        return [] if nbr is None else [nbr]
    for q in pg.qubits:
        if q in qmap:
            return [i for i in idx.wire.get(qmap[q], []) if idx.c.gates[i].name == pg.name]
    return idx.by_name.get(pg.name, [])


def match_rule(rule, c: Circuit, idx: CircuitIndex | None = None, limit: int | None = None) -> list[Match]:
    """All matches of a (plain or symbolic) rule's LHS in ``c``."""
    cr = compile_rule(rule)
    idx = idx or CircuitIndex(c)
    out: list[Match] = []
    if not cr.pat:
        return out
    gates = c.gates

    def rec(pos: int, gm: dict, qmap: dict, used_q: set, binding: dict, deferred: list):
        if limit is not None and len(out) >= limit:
            return
        if pos == len(cr.order):
            m = _finalize(cr, idx, gm, qmap, binding, deferred)
            if m is not None:
                out.append(m)
            return
        p, how = cr.order[pos]
        pg = cr.lhs.gates[p]
        used = set(gm.values())
        for ci in _candidates(cr, idx, p, how, gm, qmap):
            if ci in used:
                continue
            g = gates[ci]
            if g.name != pg.name or len(g.qubits) != len(pg.qubits):
                continue
            nq = dict(qmap)
            nu = set(used_q)
            ok = True
            for pq, cq in zip(pg.qubits, g.qubits):
                if pq in nq:
                    if nq[pq] != cq:
                        ok = False
                        break
                elif cq in nu:
                    ok = False
                    break
                else:
                    nq[pq] = cq
                    nu.add(cq)
            if not ok:
                continue
            nb = dict(binding)
            nd = list(deferred)
            if not _bind_params(pg, g, nb, nd):
                continue
            gm[p] = ci
            rec(pos + 1, gm, nq, nu, nb, nd)
            del gm[p]

    rec(0, {}, {}, set(), {}, [])
    return out


def match_pattern(pattern: Circuit, c: Circuit) -> list[Match]:
    """Convex matches of a plain pattern circuit."""
    from .synthesizer import RewriteRule
    if any(g.is_symbolic for g in pattern.gates):
        raise ValueError("pattern contains a symbolic gate; use match_sym")
    return match_rule(RewriteRule(pattern, Circuit(pattern.n, ())), c)


def match_sym(rule, c: Circuit) -> list[Match]:
    if not rule.is_symbolic:
        raise ValueError("rule has no symbolic gate")
    return match_rule(rule, c)


def maximal_matching_set(matches) -> list[Match]:
    """Greedy, in discovery order: keep every match disjoint from those already kept."""
    taken: set[int] = set()
    out = []
    for m in matches:
        fp = m.footprint
        if fp & taken:
            continue
        taken |= fp
        out.append(m)
    return out


def _instantiate(gates, qmap: dict, binding: dict) -> list[GateInstance]:
    out = []
    for g in gates:
        params = tuple(normalize_angle(p.evaluate(binding)) if isinstance(p, ParamExpr) else float(p)
                       for p in g.params)
        out.append(GateInstance(g.name, tuple(qmap[q] for q in g.qubits), params))
    return out


def validate(c: Circuit, rule, m: Match, idx: CircuitIndex | None = None) -> Match:
    """Re-derive the match on ``c``; raises :class:`StaleMatch` if it no longer holds."""
    cr = compile_rule(rule)
    idx = idx or CircuitIndex(c)
    ids = m.matched + m.bridge
    if any(i >= len(c.gates) for i in ids) or tuple(c.gates[i] for i in ids) != m.expected:
        raise StaleMatch("circuit changed under the match")
    gm = {p: i for p, i in enumerate(m.gate_map) if i >= 0}
    binding: dict = {}
    deferred: list = []
    for p, i in gm.items():
        if not _bind_params(cr.lhs.gates[p], c.gates[i], binding, deferred):
            raise StaleMatch("parameters no longer bind")
    fresh = _finalize(cr, idx, gm, m.qmap(), binding, deferred)
    if fresh is None or set(fresh.bridge) != set(m.bridge):
        raise StaleMatch("match is no longer valid")
    return fresh


def _rewrite(c: Circuit, rule, m: Match, idx: CircuitIndex) -> tuple[Circuit, dict]:
    cr = compile_rule(rule)
    region = set(m.matched) | set(m.bridge)
    anc = _anc(idx, region) - region
    qmap, binding = m.qmap(), m.bind()
    new: list[GateInstance] = []
    remap: dict[int, int] = {}
    for i in range(len(c.gates)):
        if i in anc:
            remap[i] = len(new)
            new.append(c.gates[i])
    new.extend(_instantiate(cr.rhs_before, qmap, binding))
    for i in m.bridge:
        remap[i] = len(new)
        new.append(c.gates[i])
    new.extend(_instantiate(cr.rhs_after, qmap, binding))
    for i in range(len(c.gates)):
        if i not in anc and i not in region:
            remap[i] = len(new)
            new.append(c.gates[i])
    return Circuit(c.n, tuple(new), c.creg), remap


def apply_rewrite(c: Circuit, rule, m: Match) -> Circuit:
    idx = CircuitIndex(c)
    m = validate(c, rule, m, idx)
    return _rewrite(c, rule, m, idx)[0]


def _remap(m: Match, remap: dict) -> Match | None:
    try:
        gm = tuple(remap[i] if i >= 0 else -1 for i in m.gate_map)
        br = tuple(remap[i] for i in m.bridge)
    except KeyError:
        return None
    return Match(gm, m.qubit_map, m.binding, br, m.expected)


def apply_matches(c: Circuit, rule, matches) -> Circuit:
    """Rewrite a set of non-overlapping matches; matches invalidated by earlier rewrites are skipped."""
    pending = list(matches)
    while pending:
        m = pending.pop(0)
        idx = CircuitIndex(c)
        try:
            m = validate(c, rule, m, idx)
        except StaleMatch:
            continue
        c, remap = _rewrite(c, rule, m, idx)
        pending = [x for x in (_remap(p, remap) for p in pending) if x is not None]
    return c
