"""Short-time Taylor solutions of the Heisenberg equation of motion."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .algebra import OperatorPoly, commutator, multiply
from .dsl import SystemDef
from .errors import HoaError
from .scalars import GaussianRational, ScalarCoeff

__all__ = [
    "TimeSeriesSolution",
    "heisenberg_derivative",
    "taylor_solve",
    "power_of_solution",
    "series_product",
    "TIME",
]

TIME = "t"
_I = GaussianRational(0, 1)


@dataclass(frozen=True)
class TimeSeriesSolution:
    """``X(t) = sum_k t^k/k! D^k X`` truncated at ``t**order``."""

    system: SystemDef
    operator_label: str
    order: int
    series: OperatorPoly

    @property
    def initial(self) -> OperatorPoly:
        return self.series.restrict_degree(TIME, 0)

    def at_order(self, k: int) -> OperatorPoly:
        return self.series.restrict_degree(TIME, k)

    def to_json(self) -> dict:
        return {
            "system": self.system.name,
            "operator": self.operator_label,
            "order": self.order,
            "series": self.series.to_json(self.system.labels),
        }

    @classmethod
    def from_json(cls, data: dict, system: SystemDef) -> "TimeSeriesSolution":
        series = OperatorPoly.from_json(data["series"], system.labels)
        return cls(system, data["operator"], int(data["order"]), series)


def heisenberg_derivative(sys: SystemDef, p: OperatorPoly) -> OperatorPoly:
    """``dX/dt = i [H_int, X]`` with hbar = 1, in the interaction picture."""
    return commutator(sys.h_int, p).scale(_I)


def _elementary(sys: SystemDef, op_label: str) -> OperatorPoly:
    label = op_label
    creation = False
    try:
        idx = sys.mode_index(label)
    except HoaError:
        if label.endswith("d") or label.endswith("†"):
            idx = sys.mode_index(label[:-1])
            creation = True
        else:
            raise
    return OperatorPoly.creation(idx) if creation else OperatorPoly.annihilation(idx)


def taylor_solve(sys: SystemDef, op_label: str, order: int = 2) -> TimeSeriesSolution:
    """Taylor series of a ladder operator to ``t**order``.

    ``op_label`` is a mode label (annihilator) or a label with a trailing
    ``d`` (creator).  Derivatives are nested commutators with the
    interaction Hamiltonian; every term of the ``k``-th derivative is tagged
    with ``t**k / k!``.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    x = _elementary(sys, op_label)
    series = x
    deriv = x
    for k in range(1, order + 1):
        deriv = heisenberg_derivative(sys, deriv)
        series = series + deriv.scale(ScalarCoeff(GaussianRational(Fraction(1, factorial(k))), ((TIME, k),)))
    return TimeSeriesSolution(sys, op_label, order, series)


def series_product(p: OperatorPoly, q: OperatorPoly, order: int) -> OperatorPoly:
    """Normal-ordered ``p q`` keeping only terms up to ``t**order``."""
    return multiply(p, q, {TIME: order})


def power_of_solution(sol: TimeSeriesSolution, k: int) -> OperatorPoly:
    """``X(t)**k`` in normal order, truncated at the solution's order in t."""
    if k < 1:
        raise ValueError("k must be at least 1")
    out = sol.series
    for _ in range(k - 1):
        out = series_product(out, sol.series, sol.order)
    return out
