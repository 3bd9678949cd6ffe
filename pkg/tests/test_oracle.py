import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from hoa.algebra import OperatorPoly
from hoa.dsl import builtin, parse_system
from hoa.errors import DimensionCeilingExceeded, HoaError, TailLossError
from hoa.oracle import (
    FockBasis,
    FockState,
    SparseHamiltonian,
    build_basis,
    build_hamiltonian,
    default_cutoffs,
    evolve,
    expectation,
    measure_factorial_moments,
    operator_matrix,
    prepare_initial,
    run_oracle,
)

TWO_MODES = parse_system("mode a coherent(alpha); mode b vacuum; H = g*ad*b + hc")
ONE_MODE = parse_system("mode a coherent(alpha); H = g*ad^2*a^2")


class TestBasis:
    def test_small_dimension(self):
        assert build_basis(TWO_MODES, (2, 1)).dim == 6

    def test_six_wave_dimension(self):
        assert build_basis(builtin("six_wave"), (12, 8, 8)).dim == 1053

    def test_row_major(self):
        basis = build_basis(TWO_MODES, (2, 1))
        assert [basis.occupation(i) for i in range(6)] == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]

    def test_index_round_trip(self):
        basis = build_basis(builtin("six_wave"), (4, 3, 2))
        occ = basis.occupations()
        for i in range(basis.dim):
            assert basis.index(basis.occupation(i)) == i
            assert tuple(occ[i]) == basis.occupation(i)

    def test_ceiling(self):
        with pytest.raises(DimensionCeilingExceeded):
            build_basis(builtin("six_wave"), (100, 100, 100), ceiling=10**5)

    def test_bad_cutoffs(self):
        with pytest.raises(HoaError):
            build_basis(TWO_MODES, (2,))
        with pytest.raises(HoaError):
            build_basis(TWO_MODES, (2, 0))


class TestHamiltonian:
    def test_number_operator_diagonal(self):
        basis = build_basis(ONE_MODE, (3,))
        n = operator_matrix(OperatorPoly.number(0), basis).toarray()
        assert np.allclose(n, np.diag([0, 1, 2, 3]))

    def test_shg_element(self):
        sys = builtin("shg")
        basis = build_basis(sys, (3, 2))
        h = build_hamiltonian(sys, basis, g=0.37).matrix
        assert h[basis.index((0, 1)), basis.index((2, 0))] == pytest.approx(0.37 * math.sqrt(2))
        assert h[basis.index((2, 0)), basis.index((0, 1))] == pytest.approx(0.37 * math.sqrt(2))

    def test_hard_truncation(self):
        sys = builtin("shg")
        basis = build_basis(sys, (3, 1))
        h = build_hamiltonian(sys, basis).matrix
        # from |2,1> both transitions leave the box: |0,2> and |4,0>
        assert h[:, basis.index((2, 1))].nnz == 0
        assert h[:, basis.index((2, 0))].nnz == 1

    @pytest.mark.parametrize("cutoffs", [(6, 7, 4), (9, 5, 5)])
    def test_hermitian(self, cutoffs):
        sys = builtin("six_wave")
        h = build_hamiltonian(sys, build_basis(sys, cutoffs), g=0.3)
        assert isinstance(h, SparseHamiltonian)
        assert h.hermiticity_error() < 1e-12
        assert h.matrix.shape == (h.basis.dim, h.basis.dim)

    def test_matches_dense_construction(self, system):
        cut = {2: (4, 6), 3: (5, 7, 3)}[len(system.modes)]
        basis = build_basis(system, cut)
        h = build_hamiltonian(system, basis, g=1.0).matrix.toarray()
        ladders = []
        for c in cut:
            a = np.diag(np.sqrt(np.arange(1, c + 1)), 1)
            ladders.append(a)
        eye = [np.eye(c + 1) for c in cut]
        dense = np.zeros_like(h)
        for mono, coeff in system.h_int:
            term = np.array([[1.0 + 0j]])
            for m in range(len(cut)):
                op = eye[m]
                for mm, cr, an in mono:
                    if mm == m:
                        ad = ladders[m].T
                        op = np.linalg.matrix_power(ad, cr) @ np.linalg.matrix_power(ladders[m], an)
                term = np.kron(term, op)
            dense = dense + complex(coeff.evaluate({"g": 1.0})) * term
        assert np.allclose(h, dense, atol=1e-12)


class TestPrepare:
    def test_vacuum(self):
        sys = parse_system("mode A coherent(alpha); mode B vacuum; mode C vacuum; H = g*Ad*B*C + hc")
        basis = build_basis(sys, (3, 2, 2))
        psi = prepare_initial(sys, basis, 0.0)
        assert psi.amplitudes[basis.index((0, 0, 0))] == 1
        assert np.count_nonzero(psi.amplitudes) == 1

    def test_tail_at_cutoff_twelve(self):
        sys = builtin("six_wave")
        psi = prepare_initial(sys, build_basis(sys, (12, 6, 6)), 1.0)
        assert 0 < psi.tail_loss < 1e-10
        assert abs(psi.norm() - 1) < 1e-14

    def test_phase(self):
        sys = builtin("shg")
        basis = build_basis(sys, (12, 3))
        psi = prepare_initial(sys, basis, 1j)
        amp = psi.amplitudes[basis.index((1, 0))] / psi.amplitudes[basis.index((0, 0))]
        assert amp == pytest.approx(1j)

    def test_tail_loss_refused(self):
        sys = builtin("shg")
        with pytest.raises(TailLossError) as info:
            prepare_initial(sys, build_basis(sys, (6, 3)), 2.0)
        assert info.value.suggested_cutoff > 6
        basis = build_basis(sys, (info.value.suggested_cutoff, 3))
        assert prepare_initial(sys, basis, 2.0).tail_loss <= 1e-10


class TestEvolve:
    def test_time_zero(self):
        sys = builtin("shg")
        basis = build_basis(sys, (14, 8))
        psi = prepare_initial(sys, basis, 1.0)
        out = evolve(build_hamiltonian(sys, basis), psi, 0.0)
        assert np.array_equal(out.amplitudes, psi.amplitudes)

    def test_negative_time(self):
        sys = builtin("shg")
        basis = build_basis(sys, (14, 8))
        psi = prepare_initial(sys, basis, 1.0)
        with pytest.raises(ValueError):
            evolve(build_hamiltonian(sys, basis), psi, -1.0)

    def test_diagonal_phases(self):
        basis = FockBasis((7,), ("a",))
        energies = np.linspace(-2.0, 3.0, 8)
        h = SparseHamiltonian(basis, sp.diags(energies).tocsr())
        rng = np.random.default_rng(5)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        out = evolve(h, FockState(basis, v, 0.0), 2.5).amplitudes
        assert np.allclose(out, np.exp(-1j * energies * 2.5) * v, atol=1e-12, rtol=0)
        assert np.allclose(np.abs(out), np.abs(v), atol=1e-12)

    @pytest.mark.parametrize("name, g, t", [("six_wave", 0.05, 1.0), ("four_wave", 0.3, 2.0), ("shg", 0.2, 3.0)])
    def test_matches_expm_multiply(self, name, g, t):
        sys = builtin(name)
        cut = {"six_wave": (12, 9, 4), "four_wave": (12, 6, 6), "shg": (12, 7)}[name]
        basis = build_basis(sys, cut)
        h = build_hamiltonian(sys, basis, g)
        psi = prepare_initial(sys, basis, 1.0)
        ours = evolve(h, psi, t).amplitudes
        ref = spla.expm_multiply(-1j * t * h.matrix.tocsc(), psi.amplitudes)
        assert np.abs(ours - ref).max() < 1e-10

    def test_six_wave_depletion(self):
        res = run_oracle(builtin("six_wave"), 1e-3, 1.0, 1.0, l_max=1)
        # <N_A> = |alpha|^2 - 12 g^2 t^2 |alpha|^4 ... to second order: depletion 2 x 6 g^2 t^2
        assert 1.0 - res.moments[0] == pytest.approx(12e-6, rel=1e-3)


class TestMeasure:
    def test_fock_two(self):
        basis = FockBasis((4,), ("a",))
        v = np.zeros(5, dtype=complex)
        v[2] = 1
        assert measure_factorial_moments(FockState(basis, v, 0.0), 0, 2) == [2.0, 2.0, 0.0]

    def test_coherent_moments(self):
        sys = builtin("six_wave")
        basis = build_basis(sys, (20, 2, 2))
        psi = prepare_initial(sys, basis, 1.0)
        for m in measure_factorial_moments(psi, 0, 4):
            assert m == pytest.approx(1.0, abs=1e-10)

    def test_other_mode_marginal(self):
        basis = FockBasis((2, 3), ("a", "b"))
        v = np.zeros(basis.dim, dtype=complex)
        v[basis.index((1, 3))] = 1
        assert measure_factorial_moments(FockState(basis, v, 0.0), 1, 2) == [3.0, 6.0, 6.0]

    def test_six_wave_d1(self):
        res = run_oracle(builtin("six_wave"), 1e-3, 1.0, 1.0, l_max=1)
        assert res.d(1) == pytest.approx(-12e-6, rel=1e-4)


class TestConservation:
    @pytest.fixture(scope="class")
    @classmethod
    def setup(cls):
        sys = builtin("six_wave")
        g = 1e-3
        basis = build_basis(sys, default_cutoffs(sys, 1.0, g, 1.0))
        h = build_hamiltonian(sys, basis, g)
        psi = prepare_initial(sys, basis, 1.0)
        return sys, basis, h, psi

    def test_energy_norm_and_photon_balance(self, setup):
        sys, basis, h, psi = setup
        occ = basis.occupations()
        balance = sp.diags((3 * occ[:, 0] + 2 * occ[:, 1]).astype(float))
        e0 = expectation(psi, h.matrix).real
        b0 = expectation(psi, balance).real
        state = psi
        for t in np.linspace(0.0, 1.0, 6)[1:]:
            state = evolve(h, state, 0.2)
            assert abs(state.norm() - 1) < 1e-9
            # <h> starts at exactly zero here, so scale by the coupling
            assert abs(expectation(state, h.matrix).real - e0) <= 1e-9 * max(abs(e0), 1e-3)
            assert abs(expectation(state, balance).real - b0) <= 1e-8 * abs(b0)

    @pytest.mark.parametrize("name", ["six_wave", "four_wave", "shg"])
    def test_cutoff_insensitivity(self, name):
        sys = builtin(name)
        cut = default_cutoffs(sys, 1.0, 1e-3, 1.0)
        small = run_oracle(sys, 1e-3, 1.0, 1.0, l_max=2, cutoffs=cut)
        big = run_oracle(sys, 1e-3, 1.0, 1.0, l_max=2, cutoffs=[2 * c for c in cut])
        for a, b in zip(small.moments, big.moments):
            assert abs(a - b) <= 1e-9 * abs(b)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0, 2 * math.pi))
def test_prepared_state_moments_are_poissonian(r, phi):
    sys = builtin("shg")
    alpha = r * complex(math.cos(phi), math.sin(phi))
    cut = default_cutoffs(sys, alpha, 0.0, 0.0)
    psi = prepare_initial(sys, build_basis(sys, cut), alpha)
    for i, m in enumerate(measure_factorial_moments(psi, 0, 2), start=1):
        assert m == pytest.approx(r ** (2 * i), abs=1e-9)
