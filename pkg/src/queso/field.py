"""Exact arithmetic in Q(i)[sqrt2] and deterministic sampling of valuations.

A :class:`FieldElement` stores ``(a + b*i + (c + d*i)*sqrt2) / den`` with
integer numerators and one positive shared denominator, always reduced so
that equal values have equal representations.
"""
from __future__ import annotations

import hashlib
import random
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping

Rational = Fraction

SLOPE_BITS = 62
SLOPE_DOMAIN = 1 << SLOPE_BITS
GENERAL_BITS = 32

UNIT = "unit"
GENERAL = "general"


class FieldError(ArithmeticError):
    pass


def _reduce(a: int, b: int, c: int, d: int, den: int) -> tuple[int, int, int, int, int]:
    if den == 0:
        raise FieldError("zero denominator")
    if den < 0:
        a, b, c, d, den = -a, -b, -c, -d, -den
    if not (a or b or c or d):
        return 0, 0, 0, 0, 1
    g = gcd(gcd(gcd(a, b), gcd(c, d)), den)
    if g != 1:
        a, b, c, d, den = a // g, b // g, c // g, d // g, den // g
    return a, b, c, d, den


class FieldElement:
    __slots__ = ("_a", "_b", "_c", "_d", "_den", "_hash")

    def __init__(self, a: int = 0, b: int = 0, c: int = 0, d: int = 0, den: int = 1):
        self._a, self._b, self._c, self._d, self._den = _reduce(a, b, c, d, den)
        self._hash = None

    @classmethod
    def _raw(cls, a: int, b: int, c: int, d: int, den: int) -> FieldElement:
        x = object.__new__(cls)
        x._a, x._b, x._c, x._d, x._den = _reduce(a, b, c, d, den)
        x._hash = None
        return x

    @classmethod
    def from_parts(cls, a=0, b=0, c=0, d=0) -> FieldElement:
        """Build from four rationals: ``(a + b i) + (c + d i) sqrt2``."""
        fs = [Fraction(v) for v in (a, b, c, d)]
        den = 1
        for f in fs:
            den = den * f.denominator // gcd(den, f.denominator)
        nums = [f.numerator * (den // f.denominator) for f in fs]
        return cls._raw(*nums, den)

    @classmethod
    def from_int(cls, n: int) -> FieldElement:
        return cls._raw(n, 0, 0, 0, 1)

    @classmethod
    def coerce(cls, x) -> FieldElement:
        if isinstance(x, FieldElement):
            return x
        if isinstance(x, int):
            return cls._raw(x, 0, 0, 0, 1)
        if isinstance(x, Fraction):
            return cls._raw(x.numerator, 0, 0, 0, x.denominator)
        if isinstance(x, complex) and x.real == int(x.real) and x.imag == int(x.imag):
            return cls._raw(int(x.real), int(x.imag), 0, 0, 1)
        raise TypeError(f"cannot coerce {x!r} to FieldElement")

    # rational components
    @property
    def a(self) -> Fraction:
        return Fraction(self._a, self._den)

    @property
    def b(self) -> Fraction:
        return Fraction(self._b, self._den)

    @property
    def c(self) -> Fraction:
        return Fraction(self._c, self._den)

    @property
    def d(self) -> Fraction:
        return Fraction(self._d, self._den)

    @property
    def parts(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return self.a, self.b, self.c, self.d

    def key(self) -> tuple[int, int, int, int, int]:
        return self._a, self._b, self._c, self._d, self._den

    def is_zero(self) -> bool:
        return not (self._a or self._b or self._c or self._d)

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldElement):
            try:
                other = FieldElement.coerce(other)
            except TypeError:
                return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self) -> str:
        return f"FieldElement({self.a}, {self.b}, {self.c}, {self.d})"

    def __str__(self) -> str:
        a, b, c, d = self.parts
        out = []
        if a or b or not (c or d):
            out.append(f"({a}+{b}i)" if b else f"{a}")
        if c or d:
            out.append(f"({c}+{d}i)√2" if d else f"{c}√2")
        return " + ".join(out)

    # ring operations
    def __add__(self, other) -> FieldElement:
        if not isinstance(other, FieldElement):
            other = FieldElement.coerce(other)
        n1, n2 = self._den, other._den
        if n1 == n2:
            return FieldElement._raw(self._a + other._a, self._b + other._b,
                                     self._c + other._c, self._d + other._d, n1)
        return FieldElement._raw(self._a * n2 + other._a * n1, self._b * n2 + other._b * n1,
                                 self._c * n2 + other._c * n1, self._d * n2 + other._d * n1,
                                 n1 * n2)

    __radd__ = __add__

    def __neg__(self) -> FieldElement:
        return FieldElement._raw(-self._a, -self._b, -self._c, -self._d, self._den)

    def __sub__(self, other) -> FieldElement:
        if not isinstance(other, FieldElement):
            other = FieldElement.coerce(other)
        return self + (-other)

    def __rsub__(self, other) -> FieldElement:
        return FieldElement.coerce(other) - self

    def __mul__(self, other) -> FieldElement:
        if not isinstance(other, FieldElement):
            other = FieldElement.coerce(other)
        a, b, c, d = self._a, self._b, self._c, self._d
        e, f, g, h = other._a, other._b, other._c, other._d
        # (A + B r)(C + D r) = (AC + 2BD) + (AD + BC) r, with r = sqrt2
        ac_re, ac_im = a * e - b * f, a * f + b * e
        bd_re, bd_im = c * g - d * h, c * h + d * g
        ad_re, ad_im = a * g - b * h, a * h + b * g
        bc_re, bc_im = c * e - d * f, c * f + d * e
        return FieldElement._raw(ac_re + 2 * bd_re, ac_im + 2 * bd_im,
                                 ad_re + bc_re, ad_im + bc_im, self._den * other._den)

    __rmul__ = __mul__

    def conj(self) -> FieldElement:
        """Complex conjugate (sqrt2 is real, so only the i parts flip)."""
        return FieldElement._raw(self._a, -self._b, self._c, -self._d, self._den)

    def inv(self) -> FieldElement:
        if self.is_zero():
            raise FieldError("inverse of zero")
        a, b, c, d, den = self._a, self._b, self._c, self._d, self._den
        # 1/(A + B r) = (A - B r) / (A^2 - 2 B^2); then divide by the Q(i) norm
        n_re = a * a - b * b - 2 * (c * c - d * d)
        n_im = 2 * a * b - 4 * c * d
        norm = n_re * n_re + n_im * n_im
        # (A - B r) * conj(N) * den / |N|^2
        p_re, p_im = a * n_re + b * n_im, b * n_re - a * n_im
        q_re, q_im = -(c * n_re + d * n_im), -(d * n_re - c * n_im)
        return FieldElement._raw(p_re * den, p_im * den, q_re * den, q_im * den, norm)

    def __truediv__(self, other) -> FieldElement:
        if not isinstance(other, FieldElement):
            other = FieldElement.coerce(other)
        return self * other.inv()

    def __pow__(self, n: int) -> FieldElement:
        if n < 0:
            return self.inv() ** (-n)
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def abs2(self) -> FieldElement:
        return self * self.conj()

    def __complex__(self) -> complex:
        r2 = 2 ** 0.5
        return complex((self._a + self._c * r2) / self._den, (self._b + self._d * r2) / self._den)

    def digest(self) -> bytes:
        return canonical_digest(self)


ZERO = FieldElement()
ONE = FieldElement.from_int(1)
I = FieldElement(0, 1)
SQRT2 = FieldElement(0, 0, 1)
INV_SQRT2 = FieldElement(0, 0, 1, 0, 2)
OMEGA = FieldElement(0, 0, 1, 1, 2)  # e^{i pi/4} = (1 + i) / sqrt2

_OMEGA_POWERS = [ONE]
for _ in range(7):
    _OMEGA_POWERS.append(_OMEGA_POWERS[-1] * OMEGA)


def omega_power(k: int) -> FieldElement:
    """e^{i pi k / 4}."""
    return _OMEGA_POWERS[k % 8]


def sqrt2_power(k: int) -> FieldElement:
    if k >= 0:
        return FieldElement(1 << (k // 2)) * (SQRT2 if k % 2 else ONE)
    return sqrt2_power(-k).inv()


def field_arith(x: FieldElement, y: FieldElement | None, op: str) -> FieldElement:
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "neg":
        return -x
    if op == "inv":
        return x.inv()
    raise ValueError(f"unknown op {op!r}")


def unit_from_slope(r) -> FieldElement:
    """Rational point on the unit circle parametrised by slope ``r``."""
    r = Fraction(r)
    p, q = r.numerator, r.denominator
    # ((r^2 - 1) + 2 r i) / (1 + r^2), scaled by q^2
    return FieldElement._raw(p * p - q * q, 2 * p * q, 0, 0, p * p + q * q)


def canonical_digest(x: FieldElement) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(b"%d,%d,%d,%d,%d" % x.key())
    return h.digest()


def _stream(seed: int, name: str) -> random.Random:
    h = hashlib.blake2b(f"{seed & ((1 << 64) - 1)}:{name}".encode(), digest_size=16)
    return random.Random(int.from_bytes(h.digest(), "big"))


def _gaussian_rational(rng: random.Random) -> FieldElement:
    while True:
        parts = []
        for _ in range(2):
            num = rng.getrandbits(GENERAL_BITS) - (1 << (GENERAL_BITS - 1))
            den = rng.getrandbits(GENERAL_BITS) + 1
            parts.append(Fraction(num, den))
        x = FieldElement.from_parts(parts[0], parts[1])
        if not x.is_zero():
            return x


def sample_value(seed: int, name: str, kind: str) -> FieldElement:
    rng = _stream(seed, name)
    if kind == UNIT:
        return unit_from_slope(rng.randrange(SLOPE_DOMAIN) + 1)
    if kind == GENERAL:
        return _gaussian_rational(rng)
    raise ValueError(f"unknown variable kind {kind!r}")


def sample_valuation(seed: int, spec: Mapping[str, str] | Iterable[tuple[str, str]]) -> dict[str, FieldElement]:
    """Sample every variable independently; each draw depends only on (seed, name, kind)."""
    items = spec.items() if isinstance(spec, Mapping) else spec
    return {name: sample_value(seed, name, kind) for name, kind in items}
