"""Circuit representation: gate list plus per-qubit DAG, QASM 2.0 subset I/O, canonical hashing."""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .params import ANGLE_PERIOD, TWO_PI, ExprError, ParamExpr, eval_angle, normalize_angle

FENCES = ("measure", "barrier")
SYMBOLIC = "S"
QUANTUM = 1e-10


class QasmError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class GateInstance:
    name: str
    qubits: tuple[int, ...]
    params: tuple = ()  # ParamExpr in pattern mode, float for concrete circuits
    label: str = ""  # classical target of a measurement

    def __post_init__(self):
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.name}: repeated qubit in {self.qubits}")

    @property
    def is_symbolic(self) -> bool:
        return self.name == SYMBOLIC

    @property
    def is_fence(self) -> bool:
        return self.name in FENCES

    @property
    def arity(self) -> int:
        return len(self.qubits)

    def relabel(self, qmap, pmap=None) -> GateInstance:
        params = self.params
        if pmap is not None:
            params = tuple(p.rename(pmap) if isinstance(p, ParamExpr) else p for p in params)
        return GateInstance(self.name, tuple(qmap[q] for q in self.qubits), params, self.label)

    def sort_key(self) -> tuple:
        return (min(self.qubits) if self.qubits else -1, self.qubits, self.name,
                tuple(_param_key(p) for p in self.params), self.label)

    def __str__(self) -> str:
        ps = "(" + ",".join(_fmt_param(p) for p in self.params) + ")" if self.params else ""
        return f"{self.name}{ps} " + ",".join(f"q{q}" for q in self.qubits)


def _quantize(x: float) -> int:
    # hashing identifies angles mod 2pi; rewriting keeps the exact period
    k = round(normalize_angle(x, TWO_PI) / QUANTUM)
    return 0 if k >= round(TWO_PI / QUANTUM) else k


def _param_key(p) -> tuple:
    if isinstance(p, ParamExpr):
        return (1, str(p))
    return (0, _quantize(float(p)))


def _fmt_param(p) -> str:
    if isinstance(p, ParamExpr):
        return str(p)
    return format(float(p), ".17g")


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple = ()
    creg: int = 0
    _dag: list = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n:
                    raise ValueError(f"gate {g} uses qubit {q} outside 0..{self.n - 1}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def size(self) -> int:
        """Gate count, excluding fences."""
        return sum(1 for g in self.gates if not g.is_fence)

    # -- DAG view ---------------------------------------------------------
    def dag(self) -> tuple[list[dict], list[dict]]:
        """``(prev, next)``: per gate, qubit -> adjacent gate index on that wire."""
        if self._dag is None:
            prev = [dict() for _ in self.gates]
            nxt = [dict() for _ in self.gates]
            last: dict[int, int] = {}
            for i, g in enumerate(self.gates):
                for q in g.qubits:
                    if q in last:
                        prev[i][q] = last[q]
                        nxt[last[q]][q] = i
                    last[q] = i
            object.__setattr__(self, "_dag", [prev, nxt])
        return self._dag[0], self._dag[1]

    def preds(self, i: int) -> set[int]:
        return set(self.dag()[0][i].values())

    def succs(self, i: int) -> set[int]:
        return set(self.dag()[1][i].values())

    def edges(self) -> set[tuple[int, int, int]]:
        prev, _ = self.dag()
        return {(j, i, q) for i, p in enumerate(prev) for q, j in p.items()}

    def descendants(self, roots: Iterable[int]) -> set[int]:
        _, nxt = self.dag()
        seen: set[int] = set()
        stack = [s for r in roots for s in nxt[r].values()]
        while stack:
            i = stack.pop()
            if i not in seen:
                seen.add(i)
                stack.extend(nxt[i].values())
        return seen

    def ancestors(self, roots: Iterable[int]) -> set[int]:
        prev, _ = self.dag()
        seen: set[int] = set()
        stack = [s for r in roots for s in prev[r].values()]
        while stack:
            i = stack.pop()
            if i not in seen:
                seen.add(i)
                stack.extend(prev[i].values())
        return seen

    def qubits_used(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def is_connected(self) -> bool:
        """True when the qubit-interaction graph of the used qubits is connected."""
        used = self.qubits_used()
        if len(used) <= 1:
            return True
        parent = {q: q for q in used}

        def find(q):
            while parent[q] != q:
                parent[q] = parent[parent[q]]
                q = parent[q]
            return q

        for g in self.gates:
            for q in g.qubits[1:]:
                parent[find(q)] = find(g.qubits[0])
        return len({find(q) for q in used}) == 1

    # -- canonical forms ----------------------------------------------------
    def linearize(self) -> Circuit:
        """Topological order that always emits the ready gate with the smallest key."""
        import heapq
        prev, nxt = self.dag()
        indeg = [len(set(p.values())) for p in prev]
        heap = [(self.gates[i].sort_key(), i) for i in range(len(self.gates)) if indeg[i] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, i = heapq.heappop(heap)
            order.append(i)
            for j in set(nxt[i].values()):
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(heap, (self.gates[j].sort_key(), j))
        return Circuit(self.n, tuple(self.gates[i] for i in order), self.creg)

    def relabeled(self, qmap, pmap=None, n: int | None = None) -> Circuit:
        return Circuit(self.n if n is None else n, tuple(g.relabel(qmap, pmap) for g in self.gates), self.creg)

    def param_vars(self) -> list[int]:
        """Parameter variables in first-use order."""
        out: list[int] = []
        for g in self.gates:
            for p in g.params:
                if isinstance(p, ParamExpr):
                    for k, _ in p.coeffs:
                        if k not in out:
                            out.append(k)
        return out

    def canonical(self) -> Circuit:
        """Linearize, rename qubits and parameter variables by first use, repeat to a fixpoint."""
        cur = self.linearize()
        for _ in range(4):
            qorder: list[int] = []
            for g in cur.gates:
                for q in g.qubits:
                    if q not in qorder:
                        qorder.append(q)
            qorder += [q for q in range(cur.n) if q not in qorder]
            qmap = {q: i for i, q in enumerate(qorder)}
            pmap = {k: i + 1 for i, k in enumerate(cur.param_vars())}
            nxt = cur.relabeled(qmap, pmap).linearize()
            if nxt == cur:
                break
            cur = nxt
        return cur

    def serialize(self) -> str:
        return "; ".join(str(g) for g in self.gates)

    def __str__(self) -> str:
        return f"[{self.n}] " + (self.serialize() or "ε")


def canonical_hash(c: Circuit) -> str:
    """Digest invariant under reordering of gates on disjoint qubits and under angle shifts by 2pi."""
    lin = c.linearize()
    h = hashlib.blake2b(digest_size=16)
    h.update(b"%d|" % c.n)
    for g in lin.gates:
        h.update(repr((g.name, g.qubits, tuple(_param_key(p) for p in g.params), g.label)).encode())
        h.update(b";")
    return h.hexdigest()


# -- QASM ---------------------------------------------------------------------

_ARG = r"([A-Za-z_]\w*)\s*(?:\[\s*(\d+)\s*\])?"
_RE_QREG = re.compile(r"qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_RE_CREG = re.compile(r"creg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_RE_MEASURE = re.compile(rf"measure\s+{_ARG}\s*->\s*{_ARG}$")
_RE_APP = re.compile(r"([A-Za-z_]\w*)\s*(?:\((.*)\))?\s+(.+)$", re.S)


def _statements(text: str):
    """Yield (statement, line, col) with comments removed."""
    buf: list[str] = []
    start = None
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith("//", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            stmt = "".join(buf).strip()
            if stmt:
                yield stmt, start[0], start[1]
            buf, start = [], None
        else:
            if start is None and not ch.isspace():
                start = (line, col)
            buf.append(ch)
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1
        i += 1
    rest = "".join(buf).strip()
    if rest:
        raise QasmError("missing ';' at end of statement", *start)


def _resolve(name: str, angles: list[float], nq: int, gateset, line: int, col: int):
    if gateset is None:
        return name, tuple(angles)
    cands = gateset.by_qasm(name)
    if not cands:
        raise QasmError(f"unknown gate {name!r} for gate set {gateset.name!r}", line, col)
    for gd in cands:
        if gd.arity != nq:
            continue
        if gd.fixed:
            if len(angles) == len(gd.fixed) and all(
                    abs(math.remainder(a - eval_angle(f), ANGLE_PERIOD)) < 1e-9 for a, f in zip(angles, gd.fixed)):
                return gd.name, ()
            continue
        if gd.params == len(angles):
            return gd.name, tuple(angles)
    raise QasmError(f"gate {name!r} with {len(angles)} angle(s) on {nq} qubit(s) not in gate set "
                    f"{gateset.name!r}", line, col)


def parse_qasm(text: str, gateset=None) -> Circuit:
    """Parse the OpenQASM 2.0 subset: one qreg, gate applications, trailing measure/barrier fences."""
    qreg = None
    n = 0
    creg = 0
    gates: list[GateInstance] = []
    for stmt, line, col in _statements(text):
        if stmt.startswith("OPENQASM"):
            continue
        if stmt.startswith("include"):
            continue
        m = _RE_QREG.match(stmt)
        if m:
            if qreg is not None:
                raise QasmError("only one qreg is supported", line, col)
            qreg, n = m.group(1), int(m.group(2))
            continue
        m = _RE_CREG.match(stmt)
        if m:
            creg += int(m.group(2))
            continue
        if qreg is None:
            raise QasmError("gate before qreg declaration", line, col)
        if stmt.startswith(("if", "gate ", "opaque", "reset")):
            raise QasmError(f"unsupported statement {stmt.split()[0]!r}", line, col)
        m = _RE_MEASURE.match(stmt)
        if m:
            q = _qubit(m.group(1), m.group(2), qreg, n, line, col)
            gates.append(GateInstance("measure", (q,), (), f"{m.group(3)}[{m.group(4)}]"))
            continue
        m = _RE_APP.match(stmt)
        if not m:
            raise QasmError(f"syntax error in {stmt!r}", line, col)
        name, ptxt, argtxt = m.group(1), m.group(2), m.group(3)
        args = [a.strip() for a in argtxt.split(",")]
        qubits: list[int] = []
        for a in args:
            am = re.fullmatch(_ARG, a)
            if not am:
                raise QasmError(f"bad qubit argument {a!r}", line, col)
            if am.group(2) is None:
                if am.group(1) != qreg:
                    raise QasmError(f"unknown register {am.group(1)!r}", line, col)
                if name != "barrier":
                    raise QasmError("register broadcast is only supported for barrier", line, col)
                qubits.extend(range(n))
            else:
                qubits.append(_qubit(am.group(1), am.group(2), qreg, n, line, col))
        if name == "barrier":
            gates.append(GateInstance("barrier", tuple(qubits)))
            continue
        angles = []
        if ptxt is not None and ptxt.strip():
            for p in ptxt.split(","):
                try:
                    angles.append(eval_angle(p))
                except ExprError as exc:
                    raise QasmError(str(exc), line, col) from exc
        if len(set(qubits)) != len(qubits):
            raise QasmError("repeated qubit argument", line, col)
        gname, params = _resolve(name, angles, len(qubits), gateset, line, col)
        gates.append(GateInstance(gname, tuple(qubits), params))
    if qreg is None:
        raise QasmError("no qreg declared", 1, 1)
    return Circuit(n, tuple(gates), creg)


def _qubit(reg: str, idx: str, qreg: str, n: int, line: int, col: int) -> int:
    if reg != qreg:
        raise QasmError(f"unknown register {reg!r}", line, col)
    q = int(idx)
    if q >= n:
        raise QasmError(f"qubit {reg}[{q}] out of range", line, col)
    return q


def emit_qasm(c: Circuit, gateset=None) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n}];"]
    if c.creg:
        lines.append(f"creg c[{c.creg}];")
    for g in c.gates:
        qs = ",".join(f"q[{q}]" for q in g.qubits)
        if g.name == "measure":
            lines.append(f"measure {qs} -> {g.label};")
            continue
        name, params = g.name, [_fmt_param(p) for p in g.params]
        if gateset is not None and g.name in gateset.gates:
            gd = gateset.gates[g.name]
            name = gd.qasm
            if gd.fixed:
                params = list(gd.fixed)
        ps = "(" + ",".join(params) + ")" if params else ""
        lines.append(f"{name}{ps} {qs};")
    return "\n".join(lines) + "\n"


def from_gates(n: int, gates: Sequence) -> Circuit:
    """Build a circuit from ``(name, qubits, params)`` tuples."""
    out = []
    for g in gates:
        if isinstance(g, GateInstance):
            out.append(g)
            continue
        name, qubits, *rest = g
        params = tuple(rest[0]) if rest else ()
        qubits = (qubits,) if isinstance(qubits, int) else tuple(qubits)
        out.append(GateInstance(name, qubits, params))
    return Circuit(n, tuple(out))
