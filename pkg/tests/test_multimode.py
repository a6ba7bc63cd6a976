"""Multimode Gaussian action, decompositions, and entanglement analysis."""

import numpy as np
import pytest

from hqcsim import fockspace as fs
from hqcsim import multimode as mm
from hqcsim import states as st
from hqcsim.gates import Displace, Passive, Phase, Shear, Squeeze, beamsplitter_matrix
from conftest import (
    fock_vector,
    random_state,
    random_unitary,
    states_overlap_via_fock,
    vectors_overlap,
)

ORACLE_TOL = 1e-8


def oracle_apply(state, gate, cutoff):
    arr = st.to_fock_array(state, cutoff, warn_tail=False)
    out = fs.fock_oracle_apply(arr, gate, loss_tol=1.0)
    return fs.FockBasis(state.modes, cutoff).vector(out)


def gate_overlap_vs_oracle(state, gate, cutoff=32):
    mine = mm.apply_gate(state, gate)
    return vectors_overlap(oracle_apply(state, gate, cutoff), fock_vector(mine, cutoff))


class TestPassive:
    def test_identity(self, rng):
        s = random_state(rng, 2, 2)
        out = mm.apply_passive(s, Passive.make(np.eye(2)))
        assert states_overlap_via_fock(out, s, 25) > 1 - 1e-12

    def test_hong_ou_mandel_structure(self):
        s = st.from_fock_superposition({(1, 1): 1.0}, 2)
        out = mm.apply_passive(s, Passive.make(beamsplitter_matrix()))
        assert out.poly.coeffs[(2, 0)] == pytest.approx(0.5)
        assert out.poly.coeffs[(0, 2)] == pytest.approx(-0.5)
        assert (1, 1) not in out.poly.coeffs

    def test_two_mode_squeezed_cross_term(self, rng):
        lam = 0.45
        A = np.array([[0.0, -lam], [-lam, 0.0]])
        s = st.StellarState.make(2, st.PolyPart.one(2), st.GaussPart.make(A, [0, 0], 0))
        U = random_unitary(rng, 2)
        out = mm.apply_passive(s, Passive.make(U))
        np.testing.assert_allclose(out.gauss.A, U.T @ A @ U, atol=1e-12)
        assert gate_overlap_vs_oracle(st.normalized(s), Passive.make(U), 25) > 1 - 1e-10

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError, match="unitary"):
            Passive.make([[1.0, 0.0], [0.1, 1.0]])

    def test_rank_unchanged(self, rng):
        s = random_state(rng, 3, 3)
        out = mm.apply_passive(s, Passive.make(random_unitary(rng, 3)))
        assert st.stellar_rank(out) == 3


class TestDisplace:
    def test_zero_identity(self, rng):
        s = random_state(rng, 2, 1)
        out = mm.apply_displace(s, [0, 0])
        assert states_overlap_via_fock(out, s, 20) > 1 - 1e-12

    def test_vacuum_to_coherent_product(self):
        out = mm.apply_displace(st.StellarState.vacuum(2), [1.0, 0.0])
        np.testing.assert_allclose(out.gauss.B, [1.0, 0.0])
        assert out.gauss.C == pytest.approx(-0.5)

    def test_zero_translates_in_section(self, rng):
        s = st.from_fock_superposition({(1, 1): 1.0}, 2)
        beta = 0.6 - 0.2j
        out = mm.apply_displace(s, [beta, 0.0])
        assert gate_overlap_vs_oracle(s, Displace.make([beta, 0.0]), 30) > 1 - ORACLE_TOL
        # z1 section zero moved to conj(beta)
        section = [
            (idx[0], c) for idx, c in out.poly.coeffs.items() if idx[1] == 1
        ]
        coeffs = np.zeros(2, dtype=complex)
        for k, c in section:
            coeffs[k] = c
        assert -coeffs[0] / coeffs[1] == pytest.approx(np.conj(beta))


class TestSqueezeMode:
    def test_vacuum_two_modes(self):
        r, th = 0.5, 0.9
        out = mm.apply_squeeze_mode(st.StellarState.vacuum(2), 0, r * np.exp(1j * th))
        assert out.gauss.A[0, 0] == pytest.approx(-np.exp(1j * th) * np.tanh(r))
        assert out.gauss.A[1, 1] == 0
        assert out.gauss.A[0, 1] == 0

    def test_zero_drive_identity(self, rng):
        s = random_state(rng, 2, 2)
        assert mm.apply_squeeze_mode(s, 1, 0) is s

    def test_rank2_state_vs_oracle(self, rng):
        s = st.normalized(
            st.from_fock_superposition({(1, 1): 1.0}, 2)
        )
        xi = 0.5 * np.exp(1j * 2.1)
        assert gate_overlap_vs_oracle(s, Squeeze(1, xi), 40) > 1 - ORACLE_TOL
        out = mm.apply_squeeze_mode(s, 1, xi)
        assert st.stellar_rank(out) == 2

    def test_random_states_vs_oracle(self, rng):
        for _ in range(5):
            s = st.normalized(random_state(rng, 2, 2, amax=0.35))
            xi = 0.4 * np.exp(1j * rng.uniform(0, 2 * np.pi))
            mode = int(rng.integers(2))
            assert gate_overlap_vs_oracle(s, Squeeze(mode, xi), 46) > 1 - ORACLE_TOL


class TestShearPhaseMode:
    def test_shear_vs_oracle(self, rng):
        s = st.normalized(random_state(rng, 2, 2, amax=0.3))
        assert gate_overlap_vs_oracle(s, Shear(0, 0.5), 36) > 1 - ORACLE_TOL

    def test_phase_vs_oracle(self, rng):
        s = st.normalized(random_state(rng, 2, 2))
        assert gate_overlap_vs_oracle(s, Phase(1, 1.2), 30) > 1 - ORACLE_TOL

    def test_phase_rotates_section(self):
        s = st.from_fock_superposition({(2, 0): 1.0}, 2)
        out = mm.apply_phase_mode(s, 0, np.pi / 2)
        assert out.poly.coeffs[(2, 0)] == pytest.approx(-1 / np.sqrt(2))


class TestApplyGaussian:
    def test_empty_spec_identity(self, rng):
        s = random_state(rng, 2, 2)
        out = mm.apply_gaussian(s, mm.GaussianUnitarySpec.make(2, []))
        assert out is s

    def test_squeeze_then_passive_entangles(self):
        spec = mm.GaussianUnitarySpec.make(
            2, [Squeeze(0, 0.6), Passive.make(beamsplitter_matrix())]
        )
        out = mm.apply_gaussian(st.StellarState.vacuum(2), spec)
        assert abs(out.gauss.A[0, 1]) > 0.1

    def test_passive_without_squeezing_never_entangles(self, rng):
        # zero quadratic part stays zero under any passive network
        s = mm.apply_displace(st.StellarState.vacuum(3), [0.5, -0.2j, 0.1])
        out = mm.apply_passive(s, Passive.make(random_unitary(rng, 3)))
        assert np.max(np.abs(out.gauss.A)) < 1e-14

    def test_displace_passive_braiding(self, rng):
        # U D(beta) = D(U^T beta) U in the stellar convention
        s = st.normalized(random_state(rng, 2, 2))
        U = random_unitary(rng, 2)
        beta = np.array([0.4 - 0.1j, -0.3j])
        route1 = mm.apply_passive(mm.apply_displace(s, beta), Passive.make(U))
        route2 = mm.apply_displace(mm.apply_passive(s, Passive.make(U)), U.T @ beta)
        assert states_overlap_via_fock(route1, route2, 30) > 1 - 1e-10
        u, v = fock_vector(route1, 30), fock_vector(route2, 30)
        assert np.max(np.abs(u - v)) < 1e-9

    def test_rank_invariance_sweep(self, rng):
        for _ in range(25):
            m = int(rng.integers(1, 4))
            rank = int(rng.integers(0, 5))
            s = random_state(rng, m, rank, amax=0.4)
            gate = _random_gate(rng, m)
            out = mm.apply_gate(s, gate)
            assert st.stellar_rank(out) == rank

    def test_inverse_program_roundtrip(self, rng):
        s = st.normalized(random_state(rng, 2, 2, amax=0.35))
        spec = mm.GaussianUnitarySpec.make(
            2,
            [
                Squeeze(0, 0.4 * np.exp(0.7j)),
                Passive.make(random_unitary(rng, 2)),
                Displace.make([0.3, -0.2j]),
                Shear(1, 0.6),
            ],
        )
        out = mm.apply_gaussian(mm.apply_gaussian(s, spec), spec.inverse())
        assert states_overlap_via_fock(out, s, 32) > 1 - 1e-9


def _random_gate(rng, m):
    kind = rng.integers(5)
    if kind == 0:
        return Passive.make(random_unitary(rng, m))
    if kind == 1:
        return Displace.make(0.5 * (rng.normal(size=m) + 1j * rng.normal(size=m)))
    if kind == 2:
        return Squeeze(int(rng.integers(m)), 0.5 * np.exp(1j * rng.uniform(0, 2 * np.pi)))
    if kind == 3:
        return Shear(int(rng.integers(m)), float(rng.uniform(-0.8, 0.8)))
    return Phase(int(rng.integers(m)), float(rng.uniform(0, 2 * np.pi)))


class TestTakagi:
    def test_factorization_random(self, rng):
        for m in (2, 3, 4):
            X = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
            A = 0.3 * (X + X.T)
            s, W = mm.takagi(A)
            np.testing.assert_allclose(W @ np.diag(s) @ W.T, A, atol=1e-10)
            np.testing.assert_allclose(W.conj().T @ W, np.eye(m), atol=1e-10)

    def test_zero_matrix(self):
        s, W = mm.takagi(np.zeros((3, 3)))
        assert np.all(s == 0)
        np.testing.assert_allclose(W, np.eye(3))

    def test_degenerate_diagonal(self):
        A = np.diag([0.5, 0.5])
        s, W = mm.takagi(A)
        np.testing.assert_allclose(W @ np.diag(s) @ W.T, A, atol=1e-10)


class TestDecompositions:
    def test_gaussian_state_trivial_poly(self, rng):
        s = st.normalized(random_state(rng, 2, 0))
        poly, spec = mm.decompose_normal(s)
        assert poly.degree() == 0
        rec = mm.reconstruct_normal(poly, spec)
        assert states_overlap_via_fock(rec, s, 25) > 1 - 1e-10

    def test_reconstruction_random(self, rng):
        for _ in range(4):
            s = st.normalized(random_state(rng, 2, 2, amax=0.4))
            poly, spec = mm.decompose_normal(s)
            rec = mm.reconstruct_normal(poly, spec)
            assert states_overlap_via_fock(rec, s, 32) > 1 - 1e-10

    def test_single_mode_inversion(self, rng):
        # z^2 G(a, b): the program parameters invert the Gaussian exponents
        s = st.from_zeros([0.4, -0.4], 0.3, 0.2, 0.0)
        poly, spec = mm.decompose_normal(s)
        rec = mm.reconstruct_normal(poly, spec)
        assert states_overlap_via_fock(rec, s, 30) > 1 - 1e-10

    def test_core_state_gaussian_input(self, rng):
        s = st.normalized(random_state(rng, 2, 0))
        core = mm.core_state_of(s)
        assert st.stellar_rank(core) == 0
        assert np.max(np.abs(core.gauss.A)) == 0
        assert np.max(np.abs(core.gauss.B)) == 0

    def test_core_state_already_core(self):
        s = st.from_fock_superposition({(1, 1): 1.0, (0, 0): 0.5}, 2)
        core = mm.core_state_of(s)
        assert states_overlap_via_fock(core, s, 20) > 1 - 1e-10

    def test_squeezed_photon(self, rng):
        f1 = st.from_fock_superposition({(1,): 1.0}, 1)
        s = mm.apply_squeeze_mode(f1, 0, 0.5)
        core = mm.core_state_of(s)
        assert st.stellar_rank(core) == 1
        rebuilt = mm.apply_gaussian(core, mm.gaussian_program_of(s))
        assert states_overlap_via_fock(rebuilt, s, 35) > 1 - 1e-10

    def test_roundtrip_random(self, rng):
        for _ in range(4):
            s = st.normalized(random_state(rng, 2, 2, amax=0.4))
            core = mm.core_state_of(s)
            assert st.stellar_rank(core) == st.stellar_rank(s)
            rebuilt = mm.apply_gaussian(core, mm.gaussian_program_of(s))
            assert states_overlap_via_fock(rebuilt, s, 32) > 1 - 1e-9


class TestSchmidt:
    def test_product_state(self, rng):
        s1 = st.from_fock_superposition({(1,): 1.0, (0,): 0.4}, 1)
        s2 = st.from_fock_superposition({(2,): 1.0}, 1)
        form = mm.schmidt_form(st.tensor(s1, s2), ([0], [1]))
        assert form.rank == 1
        assert form.separable

    def test_two_mode_squeezed_gaussian_entangled(self):
        lam = 0.5
        s = st.StellarState.make(
            2, st.PolyPart.one(2), st.GaussPart.make([[0, -lam], [-lam, 0]], [0, 0], 0)
        )
        form = mm.schmidt_form(s, ([0], [1]))
        assert form.rank == 1
        assert form.cross_terms[(0, 1)] == pytest.approx(lam)
        assert not form.separable

    def test_polynomial_entanglement(self):
        s = st.from_fock_superposition({(1, 1): 1.0, (0, 0): 1.0}, 2)
        form = mm.schmidt_form(s, ([0], [1]))
        assert form.rank == 2
        assert not form.separable

    def test_reconstruction_from_factors(self, rng):
        s = st.normalized(random_state(rng, 2, 2))
        form = mm.schmidt_form(s, ([0], [1]))
        # P = sum_k sigma_k P_I^k(z_I) P_J^k(z_J) in the joint variables
        rebuilt = {}
        for sv, pl, pr in zip(form.coefficients, form.left_factors, form.right_factors):
            for il, cl in pl.coeffs.items():
                for ir, cr in pr.coeffs.items():
                    key = (il[0], ir[0])
                    rebuilt[key] = rebuilt.get(key, 0) + sv * cl * cr
        for idx, c in s.poly.coeffs.items():
            assert rebuilt.get(idx, 0) == pytest.approx(c, abs=1e-10)

    def test_verdict_matches_purity_oracle(self, rng):
        agree = 0
        for i in range(20):
            if i % 2 == 0:
                a = random_state(rng, 1, int(rng.integers(0, 2)), amax=0.4)
                b = random_state(rng, 1, int(rng.integers(0, 2)), amax=0.4)
                s = st.normalized(st.tensor(a, b))
            else:
                s = st.normalized(random_state(rng, 2, 2, amax=0.4))
            verdict = mm.is_separable(s, ([0], [1]))
            arr = st.to_fock_array(s, 25, warn_tail=False)
            purity = fs.reduced_purity(arr, [0])
            assert verdict == (purity >= 1 - 1e-8)
            agree += 1
        assert agree == 20


class TestBlochMessiah:
    def test_random_program(self, rng):
        spec = mm.GaussianUnitarySpec.make(
            2,
            [
                Squeeze(0, 0.5 * np.exp(0.3j)),
                Passive.make(random_unitary(rng, 2)),
                Displace.make([0.2, -0.1j]),
                Shear(1, 0.7),
                Phase(0, 0.4),
            ],
        )
        canon = mm.bloch_messiah(spec)
        kinds = [type(g).__name__ for g in canon.gate_list]
        assert kinds[0] == "Passive" and kinds[-1] == "Passive"
        s = st.normalized(random_state(rng, 2, 2, amax=0.35))
        o1 = mm.apply_gaussian(s, spec)
        o2 = mm.apply_gaussian(s, canon)
        assert states_overlap_via_fock(o1, o2, 30) > 1 - 1e-9

    def test_degenerate_squeezers(self, rng):
        spec = mm.GaussianUnitarySpec.make(
            2, [Squeeze(0, 0.5), Squeeze(1, 0.5), Passive.make(beamsplitter_matrix())]
        )
        canon = mm.bloch_messiah(spec)
        s = st.normalized(random_state(rng, 2, 1, amax=0.3))
        assert states_overlap_via_fock(
            mm.apply_gaussian(s, spec), mm.apply_gaussian(s, canon), 28
        ) > 1 - 1e-9
