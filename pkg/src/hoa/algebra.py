"""Exact algebra of multimode bosonic operator polynomials in normal order.

An :class:`OperatorPoly` is a finite sum of terms ``c * M`` where ``c`` is a
:class:`~hoa.scalars.ScalarCoeff` and ``M`` is a normal-ordered monomial
``prod_m (a_m^dagger)^cr_m a_m^an_m``.  Monomials are stored as sorted tuples
``((mode, cr, an), ...)`` with modes of zero power omitted, and the term map is
keyed by ``(monomial, symbol_powers)`` so that like terms always merge.

Two independent routes to normal order exist on purpose:

* :func:`normal_order` applies the rewrite ``a a^dagger -> a^dagger a + 1`` to a
  raw factor word until nothing is left to rewrite;
* :func:`multiply` uses the closed-form per-mode contraction formula
  ``a^m (a^dagger)^n = sum_k C(m,k) C(n,k) k! (a^dagger)^(n-k) a^(m-k)``.

The test-suite checks each against the other and against matrices.
"""

from __future__ import annotations

import itertools
import os
import random
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import TermCeilingExceeded, UnknownSymbolError
from .scalars import (
    GaussianRational,
    ScalarCoeff,
    as_gaussian,
    format_term,
    mul_symbols,
    superscript,
    symbol_degree,
    symbol_powers,
)

__all__ = [
    "OperatorPoly",
    "Factor",
    "normal_order",
    "multiply",
    "commutator",
    "dagger",
    "truncate_order",
    "term_ceiling",
    "default_labels",
]

DEFAULT_TERM_CEILING = 10**6

# (mode, is_creation)
Factor = tuple


def term_ceiling() -> int:
    """Maximum number of terms an intermediate result may hold.

    Read from ``HOA_TERM_CEILING`` on every call so the guard can be raised
    without reloading the module.
    """
    raw = os.environ.get("HOA_TERM_CEILING")
    if raw:
        return int(float(raw))
    return DEFAULT_TERM_CEILING


def default_labels(n: int) -> list[str]:
    return [chr(ord("A") + i) if i < 26 else f"M{i}" for i in range(n)]


class OperatorPoly:
    """Immutable normal-ordered operator polynomial with exact coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None, *, _trusted=False):
        if _trusted:
            self._terms = terms
        else:
            clean = {}
            for key, value in (terms or {}).items():
                mono, syms = key
                mono = _canon_monomial(mono)
                syms = symbol_powers(dict(syms))
                value = as_gaussian(value)
                k = (mono, syms)
                total = clean.get(k)
                total = value if total is None else total + value
                if total:
                    clean[k] = total
                else:
                    clean.pop(k, None)
            self._terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls):
        return cls({}, _trusted=True)

    @classmethod
    def scalar(cls, value=1, symbols: Mapping[str, int] | None = None):
        value = as_gaussian(value)
        if not value:
            return cls.zero()
        return cls({((), symbol_powers(symbols)): value}, _trusted=True)

    @classmethod
    def identity(cls):
        return cls.scalar(1)

    @classmethod
    def monomial(cls, powers: Mapping[int, tuple[int, int]], value=1, symbols=None):
        """``value * symbols * prod_m (a_m^dagger)^cr a_m^an`` from ``{m: (cr, an)}``."""
        mono = tuple(sorted((m, c, a) for m, (c, a) in powers.items() if c or a))
        value = as_gaussian(value)
        if not value:
            return cls.zero()
        return cls({(mono, symbol_powers(symbols)): value}, _trusted=True)

    @classmethod
    def annihilation(cls, mode: int):
        return cls.monomial({mode: (0, 1)})

    @classmethod
    def creation(cls, mode: int):
        return cls.monomial({mode: (1, 0)})

    @classmethod
    def number(cls, mode: int):
        return cls.monomial({mode: (1, 1)})

    # -- container protocol -------------------------------------------------

    @property
    def raw_terms(self) -> Mapping:
        """Read-only view ``{(monomial, symbols): GaussianRational}``."""
        return self._terms

    def __iter__(self) -> Iterator[tuple[tuple, ScalarCoeff]]:
        for (mono, syms), value in self.sorted_items():
            yield mono, ScalarCoeff(value, syms)

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: _term_sort_key(kv[0]))

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, OperatorPoly):
            return self._terms == other._terms
        if isinstance(other, int) and other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def coefficient(self, powers: Mapping[int, tuple[int, int]], symbols=None) -> GaussianRational:
        mono = tuple(sorted((m, c, a) for m, (c, a) in powers.items() if c or a))
        return self._terms.get((mono, symbol_powers(symbols)), GaussianRational(0))

    def modes(self) -> set[int]:
        return {m for mono, _ in self._terms for m, _, _ in mono}

    def max_degree(self, symbol: str) -> int:
        return max((symbol_degree(s, symbol) for _, s in self._terms), default=0)

    def symbols(self) -> set[str]:
        return {k for _, s in self._terms for k, _ in s}

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, OperatorPoly):
            other = OperatorPoly.scalar(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            total = out.get(k)
            total = v if total is None else total + v
            if total:
                out[k] = total
            else:
                out.pop(k, None)
        return OperatorPoly(out, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPoly({k: -v for k, v in self._terms.items()}, _trusted=True)

    def __sub__(self, other):
        if not isinstance(other, OperatorPoly):
            other = OperatorPoly.scalar(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, OperatorPoly):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, OperatorPoly):
            return multiply(other, self)
        return self.scale(other)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers of operators are undefined")
        out = OperatorPoly.identity()
        for _ in range(n):
            out = multiply(out, self)
        return out

    def scale(self, factor) -> "OperatorPoly":
        """Multiply by a scalar: number, :class:`GaussianRational` or :class:`ScalarCoeff`."""
        if isinstance(factor, ScalarCoeff):
            value, syms = factor.value, factor.symbols
        else:
            value, syms = as_gaussian(factor), ()
        if not value:
            return OperatorPoly.zero()
        return OperatorPoly(
            {(m, mul_symbols(s, syms)): v * value for (m, s), v in self._terms.items()},
            _trusted=True,
        )

    def dagger(self) -> "OperatorPoly":
        return dagger(self)

    def truncate(self, symbol: str, max_power: int) -> "OperatorPoly":
        return truncate_order(self, symbol, max_power)

    def is_hermitian(self) -> bool:
        return dagger(self) == self

    def subs(self, name: str, value) -> "OperatorPoly":
        """Exact substitution of a symbol by a rational/Gaussian-rational value."""
        value = as_gaussian(value)
        out: dict = {}
        for (mono, syms), v in self._terms.items():
            p = symbol_degree(syms, name)
            if p:
                v = v * value**p
                syms = tuple((k, e) for k, e in syms if k != name)
            _accumulate(out, (mono, syms), v)
        return OperatorPoly(out, _trusted=True)

    def restrict_degree(self, symbol: str, power: int) -> "OperatorPoly":
        """Terms whose exponent of ``symbol`` equals ``power``."""
        return OperatorPoly(
            {k: v for k, v in self._terms.items() if symbol_degree(k[1], symbol) == power},
            _trusted=True,
        )

    # -- output -------------------------------------------------------------

    def __repr__(self):
        return f"OperatorPoly({self.format()!r})"

    def __str__(self):
        return self.format()

    def format(self, labels: Sequence[str] | None = None, unicode: bool = True) -> str:
        if not self._terms:
            return "0"
        labels = labels or default_labels(max(self.modes(), default=0) + 1)
        pieces = []
        for (mono, syms), value in self.sorted_items():
            body = _format_monomial(mono, labels, unicode)
            text = format_term(value, syms, body, unicode) or "1"
            if text in ("-", ""):
                text += "1"
            pieces.append(text)
        out = pieces[0]
        for p in pieces[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def to_latex(self, labels: Sequence[str] | None = None) -> str:
        labels = labels or default_labels(max(self.modes(), default=0) + 1)
        out = []
        for (mono, syms), value in self.sorted_items():
            coeff = _latex_coeff(value, syms)
            body = "".join(_latex_factor(labels[m], c, a) for m, c, a in mono)
            if not body and coeff in ("", "-", "+"):
                coeff += "1"
            elif body and coeff in ("1", "-1"):
                coeff = coeff[:-1]
            out.append(f"{coeff}{body}")
        text = "".join(p if p.startswith("-") else f"+{p}" for p in out)
        return text.lstrip("+") or "0"

    def to_json(self, labels: Sequence[str] | None = None) -> list[dict]:
        labels = labels or default_labels(max(self.modes(), default=0) + 1)
        rows = []
        for (mono, syms), value in self.sorted_items():
            rows.append(
                {
                    "modes": [{"label": labels[m], "index": m, "cr": c, "an": a} for m, c, a in mono],
                    "coeff": {
                        "re_num": value.re.numerator,
                        "re_den": value.re.denominator,
                        "im_num": value.im.numerator,
                        "im_den": value.im.denominator,
                        "symbols": dict(syms),
                    },
                }
            )
        return rows

    @classmethod
    def from_json(cls, rows: Iterable[Mapping], labels: Sequence[str] | None = None) -> "OperatorPoly":
        out: dict = {}
        for row in rows:
            mono = []
            for f in row["modes"]:
                if "index" in f:
                    idx = int(f["index"])
                elif labels is not None:
                    idx = list(labels).index(f["label"])
                else:
                    raise ValueError("mode entries need an index or a label table")
                mono.append((idx, int(f["cr"]), int(f["an"])))
            c = row["coeff"]
            value = GaussianRational(
                Fraction(int(c["re_num"]), int(c["re_den"])),
                Fraction(int(c["im_num"]), int(c["im_den"])),
            )
            _accumulate(out, (_canon_monomial(mono), symbol_powers(c.get("symbols", {}))), value)
        return cls(out, _trusted=True)


# -- internals ----------------------------------------------------------------


def _canon_monomial(mono) -> tuple:
    merged: dict[int, list[int]] = {}
    for m, c, a in mono:
        if c < 0 or a < 0:
            raise ValueError("operator powers must be non-negative")
        if m in merged:
            # only legal when the earlier factor has no annihilators or this one no creators
            raise ValueError("monomial lists a mode twice; use normal_order for raw words")
        merged[m] = [c, a]
    return tuple(sorted((m, c, a) for m, (c, a) in merged.items() if c or a))


def _term_sort_key(key):
    mono, syms = key
    return (
        tuple(e for _, e in syms),
        tuple(k for k, _ in syms),
        sum(c + a for _, c, a in mono),
        mono,
    )


def _accumulate(out: dict, key, value):
    total = out.get(key)
    total = value if total is None else total + value
    if total:
        out[key] = total
    else:
        out.pop(key, None)


def _format_monomial(mono, labels, unicode=True) -> str:
    parts = []
    for m, c, a in mono:
        lab = labels[m]
        if c:
            d = "†" if unicode else "d"
            parts.append(f"{lab}{d}" + ((superscript(c) if unicode else f"^{c}") if c > 1 else ""))
        if a:
            parts.append(lab + ((superscript(a) if unicode else f"^{a}") if a > 1 else ""))
    return "".join(parts) if unicode else "*".join(parts)


def _latex_factor(label, c, a):
    out = ""
    if c:
        out += f"{label}^{{\\dagger{c if c > 1 else ''}}}"
    if a:
        out += f"{label}^{{{a}}}" if a > 1 else label
    return out


def _latex_frac(q: Fraction) -> str:
    if q.denominator == 1:
        return str(abs(q.numerator))
    return f"\\frac{{{abs(q.numerator)}}}{{{q.denominator}}}"


def _latex_coeff(value: GaussianRational, syms) -> str:
    sym = "".join(f"{k}^{{{e}}}" if e != 1 else k for k, e in syms)
    if value.re and value.im:
        return f"\\left({_latex_frac(value.re) if value.re > 0 else '-' + _latex_frac(value.re)}" \
               f"{'+' if value.im > 0 else '-'}{_latex_frac(value.im)}i\\right){sym}"
    q, unit = (value.im, "i") if value.im else (value.re, "")
    sign = "-" if q < 0 else ""
    mag = "" if abs(q) == 1 and (unit or sym) else _latex_frac(q)
    if value.im and not value.re and q < 0 and not sym and mag == "":
        return "-i"
    return f"{sign}{mag}{unit}{sym}"


@lru_cache(maxsize=4096)
def _mode_product(c1: int, a1: int, c2: int, a2: int) -> tuple:
    """``(a^dag)^c1 a^a1 (a^dag)^c2 a^a2`` in normal order as ((coeff, cr, an), ...)."""
    out = []
    for k in range(min(a1, c2) + 1):
        coeff = comb(a1, k) * comb(c2, k) * factorial(k)
        out.append((coeff, c1 + c2 - k, a1 + a2 - k))
    return tuple(out)


def _monomial_product(m1: tuple, m2: tuple) -> list[tuple[int, tuple]]:
    if not m1:
        return [(1, m2)]
    if not m2:
        return [(1, m1)]
    p1 = {m: (c, a) for m, c, a in m1}
    p2 = {m: (c, a) for m, c, a in m2}
    per_mode = []
    for m in sorted(p1.keys() | p2.keys()):
        c1, a1 = p1.get(m, (0, 0))
        c2, a2 = p2.get(m, (0, 0))
        per_mode.append([(coef, m, c, a) for coef, c, a in _mode_product(c1, a1, c2, a2)])
    results = []
    for combo in itertools.product(*per_mode):
        coef = 1
        mono = []
        for k, m, c, a in combo:
            coef *= k
            if c or a:
                mono.append((m, c, a))
        results.append((coef, tuple(mono)))
    return results


def multiply(
    p: OperatorPoly,
    q: OperatorPoly,
    max_powers: Mapping[str, int] | None = None,
) -> OperatorPoly:
    """Normal-ordered product ``p q``.

    ``max_powers`` optionally discards every product term whose exponent of a
    named symbol exceeds the given bound before it is expanded.
    """
    ceiling = term_ceiling()
    if len(p) * len(q) > ceiling:
        raise TermCeilingExceeded(
            f"product of {len(p)} x {len(q)} terms exceeds the term ceiling {ceiling}"
        )
    bounds = tuple((max_powers or {}).items())
    out: dict = {}
    for (m1, s1), v1 in p._terms.items():
        for (m2, s2), v2 in q._terms.items():
            syms = mul_symbols(s1, s2)
            if bounds and any(symbol_degree(syms, k) > b for k, b in bounds):
                continue
            v = v1 * v2
            for coef, mono in _monomial_product(m1, m2):
                _accumulate(out, (mono, syms), v * coef if coef != 1 else v)
            if len(out) > ceiling:
                raise TermCeilingExceeded(f"intermediate result exceeds the term ceiling {ceiling}")
    return OperatorPoly(out, _trusted=True)


def commutator(p: OperatorPoly, q: OperatorPoly) -> OperatorPoly:
    """``[p, q] = pq - qp`` in normal order."""
    return multiply(p, q) - multiply(q, p)


def dagger(p: OperatorPoly) -> OperatorPoly:
    """Hermitian conjugate.

    The adjoint of ``(a^dag)^c a^n`` is ``(a^dag)^n a^c``, which is already in
    normal order, and distinct modes commute, so swapping powers suffices.
    """
    return OperatorPoly(
        {
            (tuple((m, a, c) for m, c, a in mono), syms): v.conjugate()
            for (mono, syms), v in p._terms.items()
        },
        _trusted=True,
    )


def truncate_order(p: OperatorPoly, symbol: str, max_power: int, known: Iterable[str] | None = None) -> OperatorPoly:
    """Drop every term whose exponent of ``symbol`` exceeds ``max_power``.

    If ``known`` is given, ``symbol`` must be one of those names.
    """
    if known is not None and symbol not in set(known):
        raise UnknownSymbolError(f"unknown scalar symbol {symbol!r}")
    return OperatorPoly(
        {k: v for k, v in p._terms.items() if symbol_degree(k[1], symbol) <= max_power},
        _trusted=True,
    )


def normal_order(
    factors: Sequence[Factor],
    coeff: ScalarCoeff | int | GaussianRational = 1,
    rng: random.Random | None = None,
) -> OperatorPoly:
    """Normal-order a raw word of ladder operators by rewriting.

    ``factors`` is a sequence of ``(mode, is_creation)`` pairs read left to
    right.  Adjacent ``a_m a_m^dagger`` is replaced by ``a_m^dagger a_m + 1``;
    adjacent factors of different modes are swapped into mode order.  Each
    rewrite strictly lowers the inversion count, so the loop terminates.  With
    ``rng`` the rewrite site is chosen at random, which exercises confluence.
    """
    if not isinstance(coeff, ScalarCoeff):
        coeff = ScalarCoeff(as_gaussian(coeff))
    ceiling = term_ceiling()
    out: dict = {}
    stack = [(tuple((int(m), bool(c)) for m, c in factors), 1)]
    while stack:
        word, mult = stack.pop()
        sites = _rewrite_sites(word)
        if not sites:
            mono: dict[int, list[int]] = {}
            for m, cr in word:
                slot = mono.setdefault(m, [0, 0])
                slot[0 if cr else 1] += 1
            key = (tuple(sorted((m, c, a) for m, (c, a) in mono.items())), coeff.symbols)
            _accumulate(out, key, coeff.value * mult)
            continue
        i = rng.choice(sites) if rng is not None else sites[0]
        x, y = word[i], word[i + 1]
        swapped = word[:i] + (y, x) + word[i + 2 :]
        stack.append((swapped, mult))
        if x[0] == y[0]:
            # a a^dag = a^dag a + 1: the contraction drops both factors
            stack.append((word[:i] + word[i + 2 :], mult))
        if len(stack) > ceiling:
            raise TermCeilingExceeded(f"rewrite worklist exceeds the term ceiling {ceiling}")
    return OperatorPoly(out, _trusted=True)


def _rewrite_sites(word) -> list[int]:
    sites = []
    for i in range(len(word) - 1):
        (m1, c1), (m2, c2) = word[i], word[i + 1]
        if m1 == m2:
            if not c1 and c2:
                sites.append(i)
        elif m1 > m2:
            sites.append(i)
    return sites


def word_of(p_mono: tuple) -> list[Factor]:
    """Raw factor word of a stored monomial (creators then annihilators per mode)."""
    word = []
    for m, c, a in p_mono:
        word += [(m, True)] * c + [(m, False)] * a
    return word
