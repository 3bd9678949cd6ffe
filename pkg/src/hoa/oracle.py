"""Truncated Fock-space propagation used as independent numerical ground truth.

Nothing here touches the symbolic Taylor machinery.  The interaction
Hamiltonian is assembled as a sparse matrix from ladder-operator actions, the
coherent x vacuum state is propagated with an adaptive Lanczos exponential,
and factorial moments are read off the occupation probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln
from scipy.stats import poisson

from .algebra import OperatorPoly
from .dsl import SystemDef
from .errors import DimensionCeilingExceeded, HoaError, IntegratorError, TailLossError
from .scalars import eval_symbols

__all__ = [
    "FockBasis",
    "FockState",
    "SparseHamiltonian",
    "OracleResult",
    "build_basis",
    "build_hamiltonian",
    "operator_matrix",
    "prepare_initial",
    "evolve",
    "measure_factorial_moments",
    "expectation",
    "default_cutoffs",
    "run_oracle",
    "DEFAULT_DIMENSION_CEILING",
]

DEFAULT_DIMENSION_CEILING = 2_000_000
DEFAULT_TAIL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FockBasis:
    """Product basis ``|n_0, n_1, ...>`` with ``0 <= n_m <= cutoffs[m]``.

    Flat indices run in row-major order over the declared modes, so the last
    mode varies fastest.
    """

    cutoffs: tuple[int, ...]
    labels: tuple[str, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return math.prod(self.shape)

    def index(self, occupation: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(occupation), self.shape))

    def occupation(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.shape))

    def occupations(self) -> np.ndarray:
        """``(dim, n_modes)`` integer array of every basis tuple."""
        grids = np.indices(self.shape).reshape(len(self.shape), -1)
        return grids.T.copy()


@dataclass
class FockState:
    basis: FockBasis
    amplitudes: np.ndarray
    tail_loss: float = 0.0

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockState":
        return FockState(self.basis, self.amplitudes / self.norm(), self.tail_loss)


@dataclass(frozen=True)
class SparseHamiltonian:
    basis: FockBasis
    matrix: sp.csr_matrix

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


def build_basis(sys: SystemDef, cutoffs: Sequence[int], ceiling: int = DEFAULT_DIMENSION_CEILING) -> FockBasis:
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != len(sys.modes):
        raise HoaError(f"need {len(sys.modes)} cutoffs, got {len(cutoffs)}")
    if any(c < 1 for c in cutoffs):
        raise HoaError("every cutoff must be at least 1")
    basis = FockBasis(cutoffs, tuple(sys.labels))
    if basis.dim > ceiling:
        raise DimensionCeilingExceeded(f"Fock dimension {basis.dim} exceeds the ceiling {ceiling}")
    return basis


def _ladder_factor(n: np.ndarray, cr: int, an: int, cutoff: int):
    """Amplitude and target occupation of ``(a^dag)^cr a^an |n>`` (0 where dropped)."""
    lowered = n - an
    target = lowered + cr
    ok = (lowered >= 0) & (target <= cutoff)
    safe_low = np.where(ok, lowered, 0)
    safe_tgt = np.where(ok, target, 0)
    log_amp = 0.5 * (gammaln(n + 1) - gammaln(safe_low + 1)) + 0.5 * (gammaln(safe_tgt + 1) - gammaln(safe_low + 1))
    amp = np.where(ok, np.exp(log_amp), 0.0)
    return amp, target, ok


def operator_matrix(p: OperatorPoly, basis: FockBasis, values: Mapping[str, complex] | None = None) -> sp.csr_matrix:
    """Sparse matrix of a normal-ordered polynomial with transitions past a cutoff dropped."""
    values = dict(values or {})
    occ = basis.occupations()
    rows, cols, data = [], [], []
    src = np.arange(basis.dim)
    for (mono, syms), v in p.raw_terms.items():
        coeff = complex(v) * eval_symbols(syms, values)
        if coeff == 0:
            continue
        amp = np.ones(basis.dim)
        target = occ.copy()
        ok = np.ones(basis.dim, dtype=bool)
        for m, c, a in mono:
            f, tgt, good = _ladder_factor(occ[:, m], c, a, basis.cutoffs[m])
            amp *= f
            target[:, m] = np.where(good, tgt, 0)
            ok &= good
        dst = np.ravel_multi_index(tuple(target[ok].T), basis.shape)
        rows.append(dst)
        cols.append(src[ok])
        data.append(coeff * amp[ok])
    if not data:
        return sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
        dtype=complex,
    )


def build_hamiltonian(sys: SystemDef, basis: FockBasis, g: float = 1.0, values: Mapping[str, float] | None = None) -> SparseHamiltonian:
    vals = {"g": g, "hbar": 1.0}
    vals.update(values or {})
    return SparseHamiltonian(basis, operator_matrix(sys.h_int, basis, vals))


def _poisson_cutoff(mean: float, eps: float) -> int:
    n = max(1, int(math.ceil(mean)))
    while poisson.sf(n, mean) >= eps:
        n += 1
    return n


def prepare_initial(sys: SystemDef, basis: FockBasis, alpha: complex, eps_trunc: float = DEFAULT_TAIL_TOLERANCE) -> FockState:
    """Coherent state on the pump mode, vacuum elsewhere, renormalised.

    The discarded Poisson weight above the pump cutoff is recorded as
    ``tail_loss``; more than ``eps_trunc`` raises :class:`TailLossError`.
    """
    pump = sys.pump_mode
    nbar = abs(alpha) ** 2
    cutoff = basis.cutoffs[pump]
    tail = float(poisson.sf(cutoff, nbar)) if nbar else 0.0
    if tail > eps_trunc:
        suggested = _poisson_cutoff(nbar, eps_trunc)
        raise TailLossError(
            f"coherent tail beyond cutoff {cutoff} is {tail:.3e} > {eps_trunc:.1e}; use a pump cutoff of {suggested}",
            suggested,
        )
    n = np.arange(cutoff + 1)
    if alpha == 0:
        pump_amp = np.zeros(cutoff + 1, dtype=complex)
        pump_amp[0] = 1.0
    else:
        r, phi = abs(alpha), np.angle(alpha)
        pump_amp = np.exp(-nbar / 2 + n * math.log(r) - 0.5 * gammaln(n + 1)) * np.exp(1j * phi * n)
    amps = np.zeros(basis.shape, dtype=complex)
    index = [0] * len(basis.shape)
    index[pump] = slice(None)
    amps[tuple(index)] = pump_amp
    amps = amps.reshape(-1)
    amps /= np.linalg.norm(amps)
    return FockState(basis, amps, tail)


def _lanczos(matvec, v: np.ndarray, m_max: int):
    n = v.shape[0]
    m_max = min(m_max, n)
    V = np.zeros((m_max + 1, n), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    V[0] = v
    scale = 0.0
    for j in range(m_max):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        # full reorthogonalisation keeps the short recurrence honest in double precision
        w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        beta[j] = b
        scale = max(scale, abs(alpha[j]), b)
        if b <= 1e-14 * max(scale, 1e-300):
            return V[: j + 1], alpha[: j + 1], beta[:j], 0.0
        V[j + 1] = w / b
    return V[:m_max], alpha, beta[: m_max - 1], beta[m_max - 1]


def _krylov_step(V, alpha, beta, beta_next, tau):
    if len(alpha) == 1:
        y = np.array([np.exp(-1j * tau * alpha[0])])
    else:
        w, U = eigh_tridiagonal(alpha, beta)
        y = U @ (np.exp(-1j * tau * w) * U[0])
    err = abs(beta_next * y[-1])
    return V.T @ y, err


def evolve(
    h: SparseHamiltonian,
    psi: FockState,
    t: float,
    tol: float = 1e-12,
    m_max: int = 30,
    max_steps: int = 100_000,
) -> FockState:
    """``exp(-i h t) psi`` by Lanczos steps with adaptive step size.

    Each step's local error is estimated by ``beta_m |e_m^T exp(-i tau T_m) e_1|``
    and must stay below ``tol``; rejected steps shrink, easy ones grow.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    v = psi.amplitudes.astype(complex, copy=True)
    if t == 0:
        return FockState(psi.basis, v, psi.tail_loss)
    matvec = h.matrix.dot
    done = 0.0
    tau = t
    steps = 0
    while done < t:
        tau = min(tau, t - done)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            break
        V, a, b, b_next = _lanczos(matvec, v / nrm, m_max)
        m = len(a)
        while True:
            new, err = _krylov_step(V, a, b, b_next, tau)
            if err <= tol:
                break
            tau *= max(0.1, 0.9 * (tol / err) ** (1.0 / m))
            steps += 1
            if steps > max_steps or tau < 1e-300:
                raise IntegratorError(f"Krylov propagation failed to reach tolerance {tol} (step {tau:.3e})")
        v = nrm * new
        done += tau
        steps += 1
        if steps > max_steps:
            raise IntegratorError(f"Krylov propagation exceeded {max_steps} steps")
        if err < 0.1 * tol and b_next:
            tau *= 1.5
    return FockState(psi.basis, v, psi.tail_loss)


def measure_factorial_moments(psi: FockState, mode: int, l_max: int) -> list[float]:
    """``[<N^(1)>, ..., <N^(l_max+1)>]`` of one mode, from occupation probabilities."""
    probs = np.abs(psi.amplitudes) ** 2
    probs = probs / probs.sum()
    marginal = probs.reshape(psi.basis.shape).sum(axis=tuple(i for i in range(len(psi.basis.shape)) if i != mode))
    n = np.arange(psi.basis.shape[mode], dtype=float)
    out = []
    falling = np.ones_like(n)
    for i in range(l_max + 1):
        falling = falling * (n - i)
        out.append(math.fsum(marginal * falling))
    return out


def expectation(psi: FockState, matrix: sp.spmatrix) -> complex:
    return complex(np.vdot(psi.amplitudes, matrix @ psi.amplitudes))


def _photon_changes(sys: SystemDef) -> dict[int, int]:
    """Net photons gained per mode by one pump-depleting interaction event."""
    pump = sys.pump_mode
    for mono, _ in sys.h_int:
        delta = {m: c - a for m, c, a in mono}
        if delta.get(pump, 0) < 0:
            return delta
    return {}


def default_cutoffs(sys: SystemDef, alpha: complex, g: float, t: float) -> tuple[int, ...]:
    """Per-mode cutoffs for an oracle run.

    Pump: ``ceil(|alpha|^2 + 8 sqrt(|alpha|^2 + 1))``, raised if needed so
    the Poisson tail is below 1e-15.  Other modes: three times the expected
    photon number plus six, at least six, with the expectation estimated from
    the second-order pump depletion.
    """
    from .moments import factorial_moment
    from .solver import taylor_solve

    pump = sys.pump_mode
    nbar = abs(alpha) ** 2
    pump_cut = int(math.ceil(nbar + 8 * math.sqrt(nbar + 1)))
    if nbar:
        pump_cut = max(pump_cut, _poisson_cutoff(nbar, 1e-15))
    sol = taylor_solve(sys, sys.labels[pump], 2)
    mean = factorial_moment(sys, sol, 1).evaluate_real(alpha, {"g": g, "t": t})
    depletion = min(max(nbar - mean, 0.0), nbar)
    delta = _photon_changes(sys)
    lost = -delta.get(pump, -1)
    cuts = []
    for i in range(len(sys.modes)):
        if i == pump:
            cuts.append(pump_cut)
            continue
        expected = depletion * max(delta.get(i, 0), 0) / lost if lost else 0.0
        cuts.append(max(6, int(math.ceil(3 * expected + 6))))
    return tuple(cuts)


@dataclass
class OracleResult:
    system: str
    g: float
    t: float
    alpha: complex
    cutoffs: tuple[int, ...]
    moments: list[float]
    tail_loss: float
    norm_drift: float
    state: FockState | None = field(default=None, repr=False)

    def d(self, l: int) -> float:
        return self.moments[l] - self.moments[0] ** (l + 1)


def run_oracle(
    sys: SystemDef,
    g: float,
    t: float,
    alpha: complex,
    l_max: int = 2,
    cutoffs: Sequence[int] | None = None,
    tol: float = 1e-12,
    ceiling: int = DEFAULT_DIMENSION_CEILING,
    eps_trunc: float = DEFAULT_TAIL_TOLERANCE,
    keep_state: bool = False,
) -> OracleResult:
    """Propagate ``|alpha>|0>...`` to time ``t`` and measure pump factorial moments."""
    cutoffs = tuple(cutoffs) if cutoffs else default_cutoffs(sys, alpha, g, t)
    basis = build_basis(sys, cutoffs, ceiling)
    h = build_hamiltonian(sys, basis, g)
    psi0 = prepare_initial(sys, basis, alpha, eps_trunc)
    psi = evolve(h, psi0, t, tol)
    drift = abs(psi.norm() - 1.0)
    moments = measure_factorial_moments(psi, sys.pump_mode, l_max)
    return OracleResult(sys.name, g, t, alpha, cutoffs, moments, psi0.tail_loss, drift, psi if keep_state else None)
