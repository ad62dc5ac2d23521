"""Linear parameter expressions (``t1 + t2``, ``-t1``, ``pi/2``) and safe angle parsing."""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

TWO_PI = 2.0 * math.pi
# every parameter slot enters with a coefficient in (1/2)Z, so 4*pi is a common exact period
ANGLE_PERIOD = 4.0 * math.pi


class ExprError(ValueError):
    pass


def _linear(node, names: frozenset[str]) -> dict[str, Fraction]:
    """Evaluate an AST node to a linear combination ``{name or '': coeff}``."""
    if isinstance(node, ast.Expression):
        return _linear(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return {"": Fraction(str(node.value))}
    if isinstance(node, ast.Name):
        if node.id == "pi" or node.id in names:
            return {node.id: Fraction(1)}
        raise ExprError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _linear(node.operand, names)
        sign = -1 if isinstance(node.op, ast.USub) else 1
        return {k: sign * v for k, v in inner.items()}
    if isinstance(node, ast.BinOp):
        lhs, rhs = _linear(node.left, names), _linear(node.right, names)
        if isinstance(node.op, (ast.Add, ast.Sub)):
            sign = 1 if isinstance(node.op, ast.Add) else -1
            out = dict(lhs)
            for k, v in rhs.items():
                out[k] = out.get(k, Fraction(0)) + sign * v
            return {k: v for k, v in out.items() if v}
        if isinstance(node.op, ast.Mult):
            if set(lhs) <= {""}:
                s = lhs.get("", Fraction(0))
                return {k: s * v for k, v in rhs.items() if s * v}
            if set(rhs) <= {""}:
                s = rhs.get("", Fraction(0))
                return {k: s * v for k, v in lhs.items() if s * v}
            raise ExprError("nonlinear product")
        if isinstance(node.op, ast.Div):
            if set(rhs) <= {""} and rhs.get(""):
                s = rhs[""]
                return {k: v / s for k, v in lhs.items()}
            raise ExprError("division by non-constant")
    raise ExprError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_linear(text: str, names=()) -> dict[str, Fraction]:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"syntax error in {text!r}: {exc.msg}") from exc
    return _linear(tree, frozenset(names))


def eval_angle(text: str) -> float:
    """Numeric value of a QASM angle expression (numbers, ``pi``, + - * /, unary minus)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"syntax error in {text!r}: {exc.msg}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            ops = {ast.Add: a.__add__, ast.Sub: a.__sub__, ast.Mult: a.__mul__,
                   ast.Div: a.__truediv__, ast.Pow: a.__pow__}
            for t, fn in ops.items():
                if isinstance(node.op, t):
                    return fn(b)
        raise ExprError(f"unsupported angle syntax in {text!r}")

    return ev(tree)


def normalize_angle(x: float, period: float = ANGLE_PERIOD) -> float:
    y = math.fmod(x, period)
    if y < 0:
        y += period
    if y >= period:
        y -= period
    return y


def _fmt_coeff(c: Fraction, atom: str) -> str:
    if c == 1:
        return atom
    if c == -1:
        return "-" + atom
    if c.denominator == 1:
        return f"{c.numerator}*{atom}"
    if c.numerator == 1:
        return f"{atom}/{c.denominator}"
    if c.numerator == -1:
        return f"-{atom}/{c.denominator}"
    return f"{c.numerator}*{atom}/{c.denominator}"


@dataclass(frozen=True, order=True)
class ParamExpr:
    """``sum(coeff * t_k) + pi_coeff * pi`` with rational coefficients."""

    coeffs: tuple[tuple[int, Fraction], ...] = ()
    pi: Fraction = Fraction(0)

    @classmethod
    def var(cls, k: int) -> ParamExpr:
        return cls(((k, Fraction(1)),))

    @classmethod
    def const(cls, pi_coeff) -> ParamExpr:
        return cls((), Fraction(pi_coeff))

    @classmethod
    def parse(cls, text: str) -> ParamExpr:
        lin = parse_linear(text, names=[f"t{k}" for k in range(1, 64)])
        if lin.get(""):
            raise ExprError(f"angle constant in {text!r} is not a multiple of pi")
        coeffs = tuple(sorted((int(k[1:]), v) for k, v in lin.items() if k.startswith("t") and v))
        return cls(coeffs, lin.get("pi", Fraction(0)))

    @property
    def vars(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.coeffs)

    def is_var(self) -> bool:
        return self.pi == 0 and len(self.coeffs) == 1 and self.coeffs[0][1] == 1

    def is_const(self) -> bool:
        return not self.coeffs

    def is_arithmetic(self) -> bool:
        return not (self.is_var() or self.is_const())

    def evaluate(self, angles: Mapping[int, float]) -> float:
        return float(self.pi) * math.pi + sum(float(c) * angles[k] for k, c in self.coeffs)

    def rename(self, mapping: Mapping[int, int]) -> ParamExpr:
        acc: dict[int, Fraction] = {}
        for k, c in self.coeffs:
            j = mapping[k]
            acc[j] = acc.get(j, Fraction(0)) + c
        return ParamExpr(tuple(sorted((k, c) for k, c in acc.items() if c)), self.pi)

    def __str__(self) -> str:
        parts = [_fmt_coeff(c, f"t{k}") for k, c in self.coeffs]
        if self.pi:
            parts.append(_fmt_coeff(self.pi, "pi"))
        if not parts:
            return "0"
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out
