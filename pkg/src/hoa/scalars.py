"""Exact scalar coefficients: Gaussian rationals times monomials in real symbols.

A :class:`ScalarCoeff` is ``z * g**p * t**q * ...`` where ``z`` is a complex
number with rational parts.  All symbols are treated as real, so complex
conjugation only touches ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Mapping

__all__ = [
    "GaussianRational",
    "ScalarCoeff",
    "SymbolPowers",
    "as_gaussian",
    "symbol_powers",
    "mul_symbols",
    "symbol_degree",
    "eval_symbols",
]

# Sorted tuple of (name, exponent) with exponent != 0.
SymbolPowers = tuple


class GaussianRational:
    """Complex number ``re + i*im`` with :class:`~fractions.Fraction` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else Fraction(re)
        self.im = im if isinstance(im, Fraction) else Fraction(im)

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Rational)):
            return self.im == 0 and self.re == other
        if isinstance(other, complex):
            return complex(self) == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __add__(self, other):
        other = as_gaussian(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_gaussian(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_gaussian(other) - self

    def __mul__(self, other):
        other = as_gaussian(other)
        if not self.im and not other.im:
            return GaussianRational(self.re * other.re)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_gaussian(other)
        den = other.re * other.re + other.im * other.im
        if not den:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * other.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pow__(self, n: int):
        if n < 0:
            return GaussianRational(1) / self**-n
        out = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    @property
    def is_real(self):
        return not self.im


I = GaussianRational(0, 1)
ONE = GaussianRational(1)
ZERO = GaussianRational(0)


def as_gaussian(x) -> GaussianRational:
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (int, Rational)):
        return GaussianRational(x)
    if isinstance(x, complex):
        raise TypeError("floating-point complex values are not exact; use GaussianRational")
    if isinstance(x, float):
        raise TypeError("floats are not exact; use Fraction or int")
    raise TypeError(f"cannot convert {type(x).__name__} to GaussianRational")


def symbol_powers(mapping: Mapping[str, int] | None = None, **kwargs) -> SymbolPowers:
    """Canonical sorted tuple from a ``{name: exponent}`` mapping."""
    merged = dict(mapping or {})
    for k, v in kwargs.items():
        merged[k] = merged.get(k, 0) + v
    return tuple(sorted((k, int(v)) for k, v in merged.items() if v))


def mul_symbols(a: SymbolPowers, b: SymbolPowers) -> SymbolPowers:
    if not a:
        return b
    if not b:
        return a
    merged = dict(a)
    for k, v in b:
        merged[k] = merged.get(k, 0) + v
    return tuple(sorted((k, v) for k, v in merged.items() if v))


def symbol_degree(s: SymbolPowers, name: str) -> int:
    for k, v in s:
        if k == name:
            return v
    return 0


def eval_symbols(s: SymbolPowers, values: Mapping[str, complex]) -> complex:
    out = 1.0
    for k, v in s:
        try:
            out *= values[k] ** v
        except KeyError:
            from .errors import UnknownSymbolError

            raise UnknownSymbolError(f"no numeric value bound for symbol {k!r}") from None
    return out


@dataclass(frozen=True)
class ScalarCoeff:
    """Gaussian-rational number times a monomial in named real symbols."""

    value: GaussianRational
    symbols: SymbolPowers = ()

    @classmethod
    def make(cls, value=1, symbols: Mapping[str, int] | None = None, **powers):
        return cls(as_gaussian(value), symbol_powers(symbols, **powers))

    def __mul__(self, other: "ScalarCoeff") -> "ScalarCoeff":
        if not isinstance(other, ScalarCoeff):
            return ScalarCoeff(self.value * as_gaussian(other), self.symbols)
        return ScalarCoeff(self.value * other.value, mul_symbols(self.symbols, other.symbols))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarCoeff(-self.value, self.symbols)

    def conjugate(self):
        return ScalarCoeff(self.value.conjugate(), self.symbols)

    def degree(self, name: str) -> int:
        return symbol_degree(self.symbols, name)

    def is_zero(self):
        return not self.value

    def evaluate(self, values: Mapping[str, complex]) -> complex:
        return complex(self.value) * eval_symbols(self.symbols, values)

    def __str__(self):
        return format_term(self.value, self.symbols, "")


_SUPERSCRIPT = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")


def superscript(n: int) -> str:
    return str(n).translate(_SUPERSCRIPT)


def format_symbols(s: SymbolPowers, unicode=True) -> str:
    parts = []
    for k, v in s:
        if v == 1:
            parts.append(k)
        elif unicode:
            parts.append(f"{k}{superscript(v)}")
        else:
            parts.append(f"{k}^{v}")
    return " ".join(parts)


def format_term(value: GaussianRational, syms: SymbolPowers, body: str, unicode=True) -> str:
    """Render ``value * syms * body`` with a leading sign, e.g. ``-12 g² t² |α|⁴``."""
    rest = " ".join(x for x in (format_symbols(syms, unicode), body) if x)
    if value.im and value.re:
        num = f"({value.re}{'+' if value.im > 0 else '-'}{abs(value.im)}i)"
        return f"{num} {rest}".strip()
    if value.im:
        mag, sign, unit = abs(value.im), "-" if value.im < 0 else "", "i"
    else:
        mag, sign, unit = abs(value.re), "-" if value.re < 0 else "", ""
    if mag == 1 and rest:
        head = f"{sign}{unit}" if unit else sign
        return f"{head}{' ' if unit else ''}{rest}" if head else rest
    return f"{sign}{mag}{unit} {rest}".strip()
