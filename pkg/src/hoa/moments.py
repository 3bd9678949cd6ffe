"""Factorial moments on coherent x vacuum states and antibunching criteria.

Expectation values are exact polynomials in ``alpha`` and ``conj(alpha)``
(:class:`AmplitudePoly`).  On ``|alpha>|0>...|0>`` a normal-ordered monomial
survives only if it has no operators on the vacuum modes, and then it
contributes ``conj(alpha)**cr * alpha**an``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .algebra import OperatorPoly
from .dsl import SystemDef
from .errors import HoaError, TermCeilingExceeded, UndefinedCriterion
from .scalars import (
    GaussianRational,
    ScalarCoeff,
    as_gaussian,
    eval_symbols,
    format_term,
    mul_symbols,
    superscript,
    symbol_degree,
    symbol_powers,
)
from .solver import TIME, TimeSeriesSolution, power_of_solution, series_product

__all__ = [
    "AmplitudePoly",
    "MomentReport",
    "ChainReport",
    "CriterionRatio",
    "expect_coherent_vacuum",
    "factorial_moment",
    "mean_power",
    "criterion_d",
    "criterion_R",
    "criterion_A",
    "chain_check",
    "moment_report",
    "abs_alpha_sq",
]


class AmplitudePoly:
    """Exact polynomial in ``alpha``, ``conj(alpha)`` and real symbols.

    Terms are keyed by ``(power of alpha, power of conj(alpha), symbols)``.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        for (pa, pc, syms), v in (terms or {}).items():
            v = as_gaussian(v)
            key = (int(pa), int(pc), symbol_powers(dict(syms)))
            total = clean.get(key, GaussianRational(0)) + v
            if total:
                clean[key] = total
            else:
                clean.pop(key, None)
        self._terms = clean

    @classmethod
    def constant(cls, value=1, symbols=None):
        return cls({(0, 0, symbol_powers(symbols)): value})

    @property
    def raw_terms(self):
        return self._terms

    def __iter__(self):
        for (pa, pc, syms), v in sorted(self._terms.items(), key=_amp_key):
            yield pa, pc, ScalarCoeff(v, syms)

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, AmplitudePoly):
            return self._terms == other._terms
        if isinstance(other, int) and other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __add__(self, other):
        if not isinstance(other, AmplitudePoly):
            other = AmplitudePoly.constant(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            total = out.get(k, GaussianRational(0)) + v
            if total:
                out[k] = total
            else:
                out.pop(k, None)
        return _trusted(out)

    __radd__ = __add__

    def __neg__(self):
        return _trusted({k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, AmplitudePoly):
            other = AmplitudePoly.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, AmplitudePoly):
            return self.multiply(other)
        if isinstance(other, ScalarCoeff):
            return _trusted(
                {(a, c, mul_symbols(s, other.symbols)): v * other.value for (a, c, s), v in self._terms.items()}
            ) if other.value else AmplitudePoly()
        f = as_gaussian(other)
        return _trusted({k: v * f for k, v in self._terms.items()}) if f else AmplitudePoly()

    __rmul__ = __mul__

    def multiply(self, other: "AmplitudePoly", max_powers: Mapping[str, int] | None = None) -> "AmplitudePoly":
        bounds = tuple((max_powers or {}).items())
        out: dict = {}
        for (a1, c1, s1), v1 in self._terms.items():
            for (a2, c2, s2), v2 in other._terms.items():
                s = mul_symbols(s1, s2)
                if bounds and any(symbol_degree(s, k) > b for k, b in bounds):
                    continue
                key = (a1 + a2, c1 + c2, s)
                total = out.get(key, GaussianRational(0)) + v1 * v2
                if total:
                    out[key] = total
                else:
                    out.pop(key, None)
        return _trusted(out)

    def power(self, k: int, max_powers: Mapping[str, int] | None = None) -> "AmplitudePoly":
        out = AmplitudePoly.constant(1)
        for _ in range(k):
            out = out.multiply(self, max_powers)
        return out

    def truncate(self, symbol: str, max_power: int) -> "AmplitudePoly":
        return _trusted({k: v for k, v in self._terms.items() if symbol_degree(k[2], symbol) <= max_power})

    def restrict_degree(self, symbol: str, power: int) -> "AmplitudePoly":
        return _trusted({k: v for k, v in self._terms.items() if symbol_degree(k[2], symbol) == power})

    def max_degree(self, symbol: str) -> int:
        return max((symbol_degree(k[2], symbol) for k in self._terms), default=0)

    def subs(self, name: str, value) -> "AmplitudePoly":
        value = as_gaussian(value)
        out = AmplitudePoly()
        for (a, c, syms), v in self._terms.items():
            p = symbol_degree(syms, name)
            if p:
                v = v * value**p
                syms = tuple(x for x in syms if x[0] != name)
            out = out + _trusted({(a, c, syms): v})
        return out

    def is_phase_invariant(self) -> bool:
        """Only ``|alpha|**(2k)`` combinations appear."""
        return all(a == c for a, c, _ in self._terms)

    def is_real(self) -> bool:
        return all(not v.im for v in self._terms.values())

    def conjugate(self) -> "AmplitudePoly":
        return _trusted({(c, a, s): v.conjugate() for (a, c, s), v in self._terms.items()})

    def evaluate(self, alpha: complex, values: Mapping[str, complex] | None = None) -> complex:
        values = values or {}
        total = 0j
        ac = complex(alpha).conjugate()
        for (a, c, syms), v in self._terms.items():
            total += complex(v) * (alpha**a) * (ac**c) * eval_symbols(syms, values)
        return total

    def evaluate_real(self, alpha: complex, values: Mapping[str, float] | None = None) -> float:
        return self.evaluate(alpha, values).real

    def format(self, unicode: bool = True) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for (a, c, syms), v in sorted(self._terms.items(), key=_amp_key):
            pieces.append(format_term(v, syms, _format_alpha(a, c, unicode), unicode) or "1")
        out = pieces[0]
        for p in pieces[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def format_grouped(self, unicode: bool = True) -> str:
        """Like :meth:`format`, factoring out shared symbol monomials.

        ``|α|⁴ - 12 g² t² |α|⁴ - 24 g² t² |α|⁶`` becomes
        ``|α|⁴ - g² t² (24 |α|⁶ + 12 |α|⁴)``.
        """
        groups: dict = {}
        for (a, c, syms), v in self._terms.items():
            groups.setdefault(syms, {})[(a, c, ())] = v
        if all(len(g) == 1 for g in groups.values()):
            return self.format(unicode)
        pieces = []
        for syms in sorted(groups, key=lambda s: (tuple(e for _, e in s), s)):
            inner = groups[syms]
            if len(inner) == 1:
                (a, c, _), v = next(iter(inner.items()))
                pieces.append(format_term(v, syms, _format_alpha(a, c, unicode), unicode) or "1")
                continue
            negative = all(v.re <= 0 and v.im == 0 for v in inner.values())
            body = _trusted({k: (-v if negative else v) for k, v in inner.items()})
            order = sorted(body._terms.items(), key=lambda kv: -(kv[0][0] + kv[0][1]))
            parts = [format_term(v, (), _format_alpha(a, c, unicode), unicode) for (a, c, _), v in order]
            text = parts[0] + "".join(f" - {p[1:]}" if p.startswith("-") else f" + {p}" for p in parts[1:])
            head = format_term(GaussianRational(-1 if negative else 1), syms, "", unicode)
            pieces.append(f"{head} ({text})")
        out = pieces[0]
        for p in pieces[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"AmplitudePoly({self.format()!r})"

    def to_json(self) -> list[dict]:
        return [
            {
                "alpha": a,
                "alpha_conj": c,
                "coeff": {
                    "re_num": v.re.numerator,
                    "re_den": v.re.denominator,
                    "im_num": v.im.numerator,
                    "im_den": v.im.denominator,
                    "symbols": dict(syms),
                },
            }
            for (a, c, syms), v in sorted(self._terms.items(), key=_amp_key)
        ]

    @classmethod
    def from_json(cls, rows) -> "AmplitudePoly":
        terms = {}
        for r in rows:
            c = r["coeff"]
            v = GaussianRational(Fraction(c["re_num"], c["re_den"]), Fraction(c["im_num"], c["im_den"]))
            key = (r["alpha"], r["alpha_conj"], symbol_powers(c["symbols"]))
            terms[key] = terms.get(key, GaussianRational(0)) + v
        return cls(terms)


def _trusted(terms) -> AmplitudePoly:
    p = AmplitudePoly.__new__(AmplitudePoly)
    p._terms = terms
    return p


def _amp_key(kv):
    (a, c, syms), _ = kv
    return (tuple(e for _, e in syms), tuple(k for k, _ in syms), a + c, a, c)


def _format_alpha(a: int, c: int, unicode=True) -> str:
    name = "α" if unicode else "alpha"
    k = min(a, c)
    parts = []
    if k:
        parts.append(f"|{name}|" + ((superscript(2 * k) if unicode else f"^{2 * k}")))
    if a > k:
        parts.append(name + ((superscript(a - k) if unicode else f"^{a - k}") if a - k > 1 else ""))
    if c > k:
        star = f"{name}*"
        parts.append(star + ((superscript(c - k) if unicode else f"^{c - k}") if c - k > 1 else ""))
    return " ".join(parts)


def abs_alpha_sq(power: int, value=1, symbols: Mapping[str, int] | None = None) -> AmplitudePoly:
    """``value * symbols * |alpha|**(2*power)``."""
    return AmplitudePoly({(power, power, symbol_powers(symbols)): value})


# -- expectation --------------------------------------------------------------


def expect_coherent_vacuum(p: OperatorPoly, pump_mode: int, n_modes: int | None = None) -> AmplitudePoly:
    """``<alpha, 0, ..., 0| p |alpha, 0, ..., 0>`` for a normal-ordered ``p``."""
    if pump_mode < 0 or (n_modes is not None and pump_mode >= n_modes):
        raise HoaError(f"pump mode {pump_mode} is not declared")
    out: dict = {}
    for (mono, syms), v in p.raw_terms.items():
        pa = pc = 0
        for m, c, a in mono:
            if m != pump_mode:
                break
            pc, pa = c, a
        else:
            key = (pa, pc, syms)
            total = out.get(key, GaussianRational(0)) + v
            if total:
                out[key] = total
            else:
                out.pop(key, None)
    return _trusted(out)


class _MomentCache:
    """Per-solution cache of ``A^k(t)`` and ``<N^(i)(t)>``; lives for one call chain."""

    def __init__(self, sol: TimeSeriesSolution):
        self.sol = sol
        self.powers: dict[int, OperatorPoly] = {}
        self.moments: dict[int, AmplitudePoly] = {}

    def power(self, k):
        if k not in self.powers:
            if k == 1:
                self.powers[1] = self.sol.series
            else:
                self.powers[k] = series_product(self.power(k - 1), self.sol.series, self.sol.order)
        return self.powers[k]

    def moment(self, i):
        if i not in self.moments:
            ak = self.power(i)
            nk = series_product(ak.dagger(), ak, self.sol.order)
            self.moments[i] = expect_coherent_vacuum(nk, self.sol.system.pump_mode, len(self.sol.system.modes))
        return self.moments[i]


def _cache(sol, cache):
    if cache is None or cache.sol is not sol:
        return _MomentCache(sol)
    return cache


def factorial_moment(sys: SystemDef, sol: TimeSeriesSolution, i: int, _cache_obj=None) -> AmplitudePoly:
    """``<N^(i)(t)> = <A^dag^i(t) A^i(t)>`` on the system's initial state.

    Products are truncated at the solution's order in ``t``.  ``sol`` must be
    the Taylor solution of the pump annihilator.
    """
    if i < 1:
        raise ValueError("factorial moment index must be at least 1")
    _check_sol(sys, sol)
    return _cache(sol, _cache_obj).moment(i)


def mean_power(sys: SystemDef, sol: TimeSeriesSolution, k: int, _cache_obj=None) -> AmplitudePoly:
    """``<N(t)>**k`` truncated at the solution's order in ``t``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    mean = factorial_moment(sys, sol, 1, _cache_obj)
    return mean.power(k, {TIME: sol.order})


def criterion_d(sys: SystemDef, sol: TimeSeriesSolution, l: int, _cache_obj=None) -> AmplitudePoly:
    """``d(l) = <N^(l+1)> - <N>^(l+1)``; negative means l-th order antibunching."""
    if l < 1:
        raise ValueError("l must be at least 1")
    cache = _cache(sol, _cache_obj)
    return factorial_moment(sys, sol, l + 1, cache) - mean_power(sys, sol, l + 1, cache)


def _check_sol(sys, sol):
    pump = sys.pump_mode
    if sol.series.restrict_degree(TIME, 0) != OperatorPoly.annihilation(pump):
        raise HoaError("moments need the Taylor solution of the pump-mode annihilation operator")


# -- ratio criteria -----------------------------------------------------------


@dataclass(frozen=True)
class CriterionRatio:
    """``numerator / denominator - 1`` kept as exact polynomials."""

    numerator: AmplitudePoly
    denominator: AmplitudePoly

    def evaluate(self, alpha: complex, values: Mapping[str, float] | None = None) -> float:
        den = self.denominator.evaluate(alpha, values)
        if den == 0:
            raise UndefinedCriterion("criterion denominator vanishes at this point")
        return (self.numerator.evaluate(alpha, values) / den).real - 1.0


def _moment_at(moments: Sequence, i: int):
    # moments[0] holds <N^(1)>; <N^(0)> is 1 by convention
    if i == 0:
        return 1
    if i > len(moments):
        raise ValueError(f"moment <N^({i})> not supplied (have up to {len(moments)})")
    return moments[i - 1]


def criterion_R(moments: Sequence, l: int, m: int):
    """Ratio criterion ``<N^(l+1)><N^(m-1)> / (<N^(l)><N^(m)>) - 1``.

    ``moments[i-1]`` is ``<N^(i)>``.  Plain numbers give a float (raising
    :class:`UndefinedCriterion` on a zero denominator); :class:`AmplitudePoly`
    values give a :class:`CriterionRatio`.
    """
    if l < 1 or m < 1:
        raise ValueError("l and m must be at least 1")
    a, b = _moment_at(moments, l + 1), _moment_at(moments, m - 1)
    c, d = _moment_at(moments, l), _moment_at(moments, m)
    symbolic = any(isinstance(x, AmplitudePoly) for x in (a, b, c, d))
    if symbolic:
        lift = lambda x: x if isinstance(x, AmplitudePoly) else AmplitudePoly.constant(as_gaussian(x))  # noqa: E731
        return CriterionRatio(lift(a) * lift(b), lift(c) * lift(d))
    den = c * d
    if den == 0:
        raise UndefinedCriterion("criterion denominator vanishes")
    return a * b / den - 1


def criterion_A(moments: Sequence, l: int):
    """``<N^(l+1)> / (<N^(l)><N>) - 1``, i.e. ``criterion_R(moments, l, 1)``."""
    return criterion_R(moments, l, 1)


@dataclass(frozen=True)
class ChainReport:
    links: tuple  # (k, lhs, rhs, status) with status in {"holds", "equal", "fails"}

    @property
    def all_hold(self) -> bool:
        return all(s == "holds" for *_, s in self.links)

    @property
    def all_equal(self) -> bool:
        return all(s == "equal" for *_, s in self.links)

    def __bool__(self):
        return self.all_hold


def chain_check(moments: Sequence[float], l: int, rtol: float = 1e-12) -> ChainReport:
    """Check each link ``<N^(k+1)><N>^(l-k) < <N^(k)><N>^(l-k+1)`` for k = l..1.

    Diagnostic only: a link within ``rtol`` is reported as ``"equal"``.
    """
    if len(moments) < l + 1:
        raise ValueError(f"chain_check needs moments up to <N^({l + 1})>")
    n1 = float(moments[0])
    links = []
    for k in range(l, 0, -1):
        lhs = float(_moment_at(moments, k + 1)) * n1 ** (l - k)
        rhs = float(_moment_at(moments, k)) * n1 ** (l - k + 1)
        if math.isclose(lhs, rhs, rel_tol=rtol, abs_tol=0.0):
            status = "equal"
        elif lhs < rhs:
            status = "holds"
        else:
            status = "fails"
        links.append((k, lhs, rhs, status))
    return ChainReport(tuple(links))


# -- report -------------------------------------------------------------------


@dataclass
class MomentReport:
    system: str
    l_max: int
    order: int
    moments: list[AmplitudePoly]
    mean_powers: list[AmplitudePoly]
    d_values: list[AmplitudePoly]
    numeric: list[dict] = field(default_factory=list)

    def d(self, l: int) -> AmplitudePoly:
        return self.d_values[l - 1]

    def criterion_A(self, l: int) -> CriterionRatio:
        return criterion_A(self.moments, l)

    def evaluate(self, g: float, t: float, alpha: complex) -> list[dict]:
        """Numeric rows (one per l) at a substitution point."""
        values = {"g": g, "t": t}
        nums = [m.evaluate_real(alpha, values) for m in self.moments]
        rows = []
        for l in range(1, self.l_max + 1):
            d_l = self.d(l).evaluate_real(alpha, values)
            try:
                a_l = criterion_A(nums, l)
            except UndefinedCriterion:
                a_l = math.nan
            rows.append(
                {
                    "system": self.system,
                    "l": l,
                    "g": g,
                    "t": t,
                    "alpha_re": complex(alpha).real,
                    "alpha_im": complex(alpha).imag,
                    "d_l": d_l,
                    "A_l": a_l,
                    "R_l1": a_l,
                }
            )
        return rows

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "l_max": self.l_max,
            "order": self.order,
            "moments": {f"N^({i + 1})": m.to_json() for i, m in enumerate(self.moments)},
            "mean_powers": {f"<N>^{i + 1}": m.to_json() for i, m in enumerate(self.mean_powers)},
            "d": {f"d({l + 1})": d.to_json() for l, d in enumerate(self.d_values)},
            "d_text": {f"d({l + 1})": d.format() for l, d in enumerate(self.d_values)},
            "numeric": self.numeric,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False)


def moment_report(sys: SystemDef, sol: TimeSeriesSolution, l_max: int) -> MomentReport:
    """All moments up to ``<N^(l_max+1)>``, the matching mean powers and d(1..l_max)."""
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    cache = _MomentCache(sol)
    moments = [factorial_moment(sys, sol, i, cache) for i in range(1, l_max + 2)]
    means = [mean_power(sys, sol, k, cache) for k in range(1, l_max + 2)]
    ds = [moments[l] - means[l] for l in range(1, l_max + 1)]
    return MomentReport(sys.name, l_max, sol.order, moments, means, ds)
