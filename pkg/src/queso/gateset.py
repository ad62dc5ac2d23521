"""Gate-set specifications: path sums for each gate written as prefix expressions.

Amplitude syntax (S-expressions)::

    number | i | (sqrt2 k) | (expi ANGLE) | (* A ...) | (+ A ...) | (- A [B]) | (/ A n)

Angles are linear in the gate parameters ``p0, p1, ...`` and may contain
products of input bits ``x0, x1`` and branch bits ``y0, ...`` scaled by ``pi``.
States are boolean expressions per output qubit::

    x0 | y0 | 0 | 1 | (xor E ...) | (and E ...) | (not E)
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

from . import bits as B
from .field import ONE, I, FieldElement, sqrt2_power
from .params import ExprError, ParamExpr

SCHEMA = "queso-gateset/1"
BUILTIN = ("nam", "ibm", "rigetti", "ion")


class GatesetError(ValueError):
    pass


class SpecParseError(GatesetError):
    def __init__(self, msg: str, where: str, pos: int | None = None):
        loc = f"{where}" + (f", char {pos}" if pos is not None else "")
        super().__init__(f"{loc}: {msg}")
        self.where = where
        self.pos = pos


# -- S-expressions -----------------------------------------------------------

def _tokenize(text: str, where: str):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            toks.append((ch, i))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            toks.append((text[i:j], i))
            i = j
    return toks


def parse_sexpr(text: str, where: str = "<expr>"):
    toks = _tokenize(text, where)
    if not toks:
        raise SpecParseError("empty expression", where, 0)
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            raise SpecParseError("unexpected end of expression", where, len(text))
        tok, at = toks[pos]
        pos += 1
        if tok == "(":
            items = []
            while True:
                if pos >= len(toks):
                    raise SpecParseError("unbalanced '('", where, at)
                if toks[pos][0] == ")":
                    pos += 1
                    return items
                items.append(read())
        if tok == ")":
            raise SpecParseError("unexpected ')'", where, at)
        return (tok, at)

    out = read()
    if pos != len(toks):
        raise SpecParseError("trailing tokens", where, toks[pos][1])
    return out


def _number(tok: str) -> Fraction | None:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None


# -- angles --------------------------------------------------------------------
# Angle = {key: MLPoly}, key in {"1", "pi", "p0", "p1", ...}; bits are "x0", "y0", ...

def _angle_add(a: dict, b: dict, scale=1) -> dict:
    out = dict(a)
    for k, p in b.items():
        q = B.ml_add(out.get(k, {}), p, scale)
        if q:
            out[k] = q
        else:
            out.pop(k, None)
    return out


def _angle_mul(a: dict, b: dict, where: str, at: int) -> dict:
    if set(a) <= {"1"}:
        scal, other = a.get("1", {}), b
    elif set(b) <= {"1"}:
        scal, other = b.get("1", {}), a
    else:
        raise SpecParseError("angle is not linear in pi and parameters", where, at)
    out = {}
    for k, p in other.items():
        q = B.ml_mul(scal, p)
        if q:
            out[k] = q
    return out


def _parse_angle(node, where: str, nparams: int, bitvars: set) -> dict:
    if isinstance(node, tuple):
        tok, at = node
        num = _number(tok)
        if num is not None:
            return {"1": B.ml_const(num)} if num else {}
        if tok == "pi":
            return {"pi": B.ml_const(1)}
        if tok in bitvars:
            return {"1": B.ml_var(tok)}
        if tok.startswith("p") and tok[1:].isdigit():
            if int(tok[1:]) >= nparams:
                raise SpecParseError(f"parameter {tok} out of range", where, at)
            return {tok: B.ml_const(1)}
        raise SpecParseError(f"unknown angle atom {tok!r}", where, at)
    if not node:
        raise SpecParseError("empty list", where)
    op, at = node[0]
    args = [_parse_angle(n, where, nparams, bitvars) for n in node[1:]]
    if op == "+":
        out: dict = {}
        for a in args:
            out = _angle_add(out, a)
        return out
    if op == "-":
        if len(args) == 1:
            return _angle_add({}, args[0], -1)
        out = args[0]
        for a in args[1:]:
            out = _angle_add(out, a, -1)
        return out
    if op == "*":
        out = {"1": B.ml_const(1)}
        for a in args:
            out = _angle_mul(out, a, where, at)
        return out
    raise SpecParseError(f"unknown angle operator {op!r}", where, at)


# -- amplitudes ------------------------------------------------------------------
# Term = (FieldElement coefficient, angle dict); amplitude = list of terms.

def _terms_mul(xs: list, ys: list) -> list:
    return [(c * d, _angle_add(a, b)) for c, a in xs for d, b in ys]


def _parse_amp(node, where: str, nparams: int, bitvars: set) -> list:
    if isinstance(node, tuple):
        tok, at = node
        num = _number(tok)
        if num is not None:
            return [(FieldElement.coerce(num), {})]
        if tok == "i":
            return [(I, {})]
        raise SpecParseError(f"unknown amplitude atom {tok!r}", where, at)
    if not node:
        raise SpecParseError("empty list", where)
    op, at = node[0]
    rest = node[1:]
    if op == "expi":
        if len(rest) != 1:
            raise SpecParseError("expi takes one angle", where, at)
        ang = _parse_angle(rest[0], where, nparams, bitvars)
        if ang.get("1"):
            raise SpecParseError("angle constant is not a multiple of pi", where, at)
        return [(ONE, ang)]
    if op == "sqrt2":
        if len(rest) != 1 or not isinstance(rest[0], tuple) or _number(rest[0][0]) is None:
            raise SpecParseError("sqrt2 takes an integer power", where, at)
        k = _number(rest[0][0])
        if k.denominator != 1:
            raise SpecParseError("sqrt2 power must be an integer", where, at)
        return [(sqrt2_power(int(k)), {})]
    args = [_parse_amp(n, where, nparams, bitvars) for n in rest]
    if op == "*":
        out = [(ONE, {})]
        for a in args:
            out = _terms_mul(out, a)
        return out
    if op == "+":
        return [t for a in args for t in a]
    if op == "-":
        neg = lambda ts: [(-c, a) for c, a in ts]  # noqa: E731
        if len(args) == 1:
            return neg(args[0])
        return args[0] + [t for a in args[1:] for t in neg(a)]
    if op == "/":
        if len(rest) != 2 or not isinstance(rest[1], tuple) or not _number(rest[1][0]):
            raise SpecParseError("'/' needs a nonzero numeric divisor", where, at)
        inv = FieldElement.coerce(1 / _number(rest[1][0]))
        return [(c * inv, a) for c, a in args[0]]
    raise SpecParseError(f"unknown amplitude operator {op!r}", where, at)


def _parse_state(node, where: str, bitvars: set) -> B.Anf:
    if isinstance(node, tuple):
        tok, at = node
        if tok in ("0", "1"):
            return B.anf_const(int(tok))
        if tok in bitvars:
            return B.anf_var(tok)
        raise SpecParseError(f"unknown state atom {tok!r}", where, at)
    if not node:
        raise SpecParseError("empty list", where)
    op, at = node[0]
    args = [_parse_state(n, where, bitvars) for n in node[1:]]
    if op == "xor":
        return B.anf_xor(*args)
    if op == "and":
        out = B.ANF_ONE
        for a in args:
            out = B.anf_and(out, a)
        return out
    if op == "not":
        if len(args) != 1:
            raise SpecParseError("not takes one argument", where, at)
        return B.anf_not(args[0])
    raise SpecParseError(f"unknown state operator {op!r}", where, at)


# -- definitions -----------------------------------------------------------------

@dataclass(frozen=True)
class GateDef:
    name: str
    arity: int
    params: int
    branches: int
    terms: tuple  # ((FieldElement, angle dict), ...)
    state: tuple  # ANF per output qubit over x0.., y0..
    qasm: str
    fixed: tuple = ()  # QASM angles printed for fixed-angle gates
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def monomial(self) -> bool:
        return self.branches == 0

    @property
    def input_bits(self) -> list[str]:
        return [f"x{j}" for j in range(self.arity)]

    @property
    def branch_bits(self) -> list[str]:
        return [f"y{j}" for j in range(self.branches)]

    def slot_range(self, slot: int) -> tuple[Fraction, Fraction]:
        """Min/max of the coefficient of parameter ``slot`` over all bit assignments, summed over terms."""
        lo = hi = Fraction(0)
        vs = self.input_bits + self.branch_bits
        for _, ang in self.terms:
            p = ang.get(f"p{slot}")
            if p:
                a, b = B.ml_range(p, vs)
                lo, hi = min(lo, a), max(hi, b)
        return lo, hi


@dataclass(frozen=True)
class SymbolicDecl:
    name: str
    arity: int


@dataclass
class Gateset:
    name: str
    gates: dict[str, GateDef]
    parameters: list[ParamExpr]
    param_use_once: bool = False
    symbolic: list[SymbolicDecl] = field(default_factory=list)
    source: dict = field(default_factory=dict, repr=False)

    @property
    def id(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, separators=(",", ":")).encode()
        return f"{self.name}:{hashlib.sha256(blob).hexdigest()[:16]}"

    @property
    def nvars(self) -> int:
        return max((max(p.vars) for p in self.parameters if p.vars), default=0)

    def by_qasm(self, qasm_name: str) -> list[GateDef]:
        return [g for g in self.gates.values() if g.qasm == qasm_name]

    def to_json(self) -> str:
        return json.dumps(self.source, indent=2, sort_keys=True)


def _check_field_closure(gd: GateDef, where: str) -> None:
    for _, ang in gd.terms:
        for key, poly in ang.items():
            step = Fraction(1, 4) if key == "pi" else Fraction(1, 2)
            for c in poly.values():
                if (c / step).denominator != 1:
                    what = "pi coefficient" if key == "pi" else f"coefficient of {key}"
                    raise GatesetError(f"{where}: {what} {c} leaves the exact field")


def _gate_from_json(obj: dict, idx: int) -> GateDef:
    where = f"gates[{idx}]"
    try:
        name = str(obj["name"])
        arity = int(obj["arity"])
        nparams = int(obj.get("params", 0))
        nbranch = int(obj.get("branches", 0))
        amp_text = str(obj.get("amplitude", "1"))
        state_text = obj["state"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GatesetError(f"{where}: missing or malformed field ({exc})") from exc
    where = f"gate {name!r}"
    if arity not in (1, 2):
        raise GatesetError(f"{where}: arity must be 1 or 2")
    bitvars = {f"x{j}" for j in range(arity)} | {f"y{j}" for j in range(nbranch)}
    terms = _parse_amp(parse_sexpr(amp_text, where + " amplitude"), where + " amplitude", nparams, bitvars)
    if not isinstance(state_text, list) or len(state_text) != arity:
        raise GatesetError(f"{where}: state must list one expression per qubit")
    state = tuple(_parse_state(parse_sexpr(s, f"{where} state[{j}]"), f"{where} state[{j}]", bitvars)
                  for j, s in enumerate(state_text))
    if "monomial" in obj and bool(obj["monomial"]) != (nbranch == 0):
        raise GatesetError(f"{where}: monomial flag disagrees with branch count")
    fixed = tuple(str(a) for a in obj.get("fixed", ()))
    if fixed and nparams:
        raise GatesetError(f"{where}: fixed-angle gates take no parameters")
    gd = GateDef(name, arity, nparams, nbranch, tuple(terms), state,
                 str(obj.get("qasm", name)), fixed, source=obj)
    _check_field_closure(gd, where)
    return gd


def load_gateset(spec: str | dict) -> Gateset:
    """Parse a gate-set specification (JSON text or already-decoded dict)."""
    if isinstance(spec, str):
        try:
            obj = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SpecParseError(exc.msg, f"line {exc.lineno} col {exc.colno}") from exc
    else:
        obj = spec
    if obj.get("schema") != SCHEMA:
        raise GatesetError(f"unsupported schema {obj.get('schema')!r}, expected {SCHEMA!r}")
    gates: dict[str, GateDef] = {}
    for idx, g in enumerate(obj.get("gates", [])):
        gd = _gate_from_json(g, idx)
        if gd.name in gates:
            raise GatesetError(f"duplicate gate {gd.name!r}")
        if gd.name.startswith("S") and gd.name[1:].isdigit():
            raise GatesetError(f"gate name {gd.name!r} is reserved for symbolic gates")
        gates[gd.name] = gd
    params = []
    for text in obj.get("parameters", []):
        try:
            pe = ParamExpr.parse(str(text))
        except ExprError as exc:
            raise GatesetError(f"parameter {text!r}: {exc}") from exc
        if (pe.pi * 4).denominator != 1:
            raise GatesetError(f"parameter {text!r}: constant must be a multiple of pi/4")
        params.append(pe)
    symbolic = []
    for s in obj.get("symbolic", []):
        if not s.get("monomial", True):
            raise GatesetError(f"symbolic gate {s.get('name')!r} must be monomial")
        ar = int(s.get("arity", 2))
        if ar not in (1, 2):
            raise GatesetError(f"symbolic gate {s.get('name')!r}: arity must be 1 or 2")
        symbolic.append(SymbolicDecl(str(s.get("name", f"S{ar}")), ar))
    return Gateset(str(obj.get("name", "custom")), gates, params,
                   bool(obj.get("param_use_once", False)), symbolic, source=obj)


def builtin_path(name: str) -> Path:
    return Path(str(resources.files("queso") / "gatesets" / f"{name}.json"))


def builtin(name: str) -> Gateset:
    if name not in BUILTIN:
        raise GatesetError(f"no built-in gate set {name!r}; choose from {', '.join(BUILTIN)}")
    return load_gateset(builtin_path(name).read_text())


def load_gateset_arg(arg: str) -> Gateset:
    """Accept a built-in name or a path to a JSON spec."""
    if arg in BUILTIN:
        return builtin(arg)
    p = Path(arg)
    if p.stem in BUILTIN and not p.exists():
        return builtin(p.stem)
    return load_gateset(p.read_text())


def gate_terms_at(gd: GateDef, env: dict[str, int]) -> list[tuple[FieldElement, dict[str, Fraction]]]:
    """Terms with bits fixed: coefficient and {'pi'|'pK': rational coefficient}."""
    out = []
    for c, ang in gd.terms:
        out.append((c, {k: B.ml_eval(p, env) for k, p in ang.items()}))
    return out


def describe(gs: Gateset) -> dict[str, Any]:
    return {"name": gs.name, "id": gs.id, "gates": sorted(gs.gates),
            "parameters": [str(p) for p in gs.parameters]}
