import numpy as np
import pytest

from hoa import builtin


def ladder(cutoff):
    """Dense annihilator on ``0..cutoff``."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def mode_operator(single, mode, n_modes, cutoff):
    out = np.eye(1)
    for m in range(n_modes):
        out = np.kron(out, single if m == mode else np.eye(cutoff + 1))
    return out


def dense_poly(poly, n_modes, cutoff, values=None):
    """Dense matrix of a normal-ordered polynomial, built by plain matrix products."""
    values = values or {}
    dim = (cutoff + 1) ** n_modes
    a = ladder(cutoff)
    ad = a.T
    out = np.zeros((dim, dim), dtype=complex)
    for (mono, syms), v in poly.raw_terms.items():
        term = np.eye(dim, dtype=complex) * complex(v)
        for k, e in syms:
            term = term * values[k] ** e
        for m, c, an in mono:
            term = term @ mode_operator(np.linalg.matrix_power(ad, c) @ np.linalg.matrix_power(a, an), m, n_modes, cutoff)
        out += term
    return out


def dense_word(word, n_modes, cutoff, coeff=1.0):
    a = ladder(cutoff)
    dim = (cutoff + 1) ** n_modes
    out = np.eye(dim, dtype=complex) * coeff
    for m, creation in word:
        out = out @ mode_operator(a.T if creation else a, m, n_modes, cutoff)
    return out


def safe_indices(n_modes, cutoff, degree):
    """Flat indices whose occupations stay clear of the cutoff under ``degree`` raisings."""
    occ = np.indices((cutoff + 1,) * n_modes).reshape(n_modes, -1).T
    return np.flatnonzero((occ <= cutoff - degree).all(axis=1))


@pytest.fixture(params=["six_wave", "four_wave", "shg"])
def system(request):
    return builtin(request.param)
