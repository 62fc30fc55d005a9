"""Tests for the MMSE reflection design and unit-modulus projection."""

import numpy as np
import pytest

from rislink.channel import complex_gaussian
from rislink.ris import (mmse_reflection, phase_project, reflection_mse)


def _setup(rng, k=2, m=4, le=6, with_direct=True):
    z = complex_gaussian(rng, (k, m, le), 1.0)
    h = complex_gaussian(rng, (m, k), 1.0) if with_direct else None
    w = complex_gaussian(rng, (k, m), 1.0)
    return w, z, h


class TestPhaseProject:
    """Entry-wise projection onto the unit circle."""

    def test_preserves_phase(self):
        """Projection keeps each entry's angle while fixing the modulus."""
        phi = np.array([3.0 * np.exp(1j * 0.7), 0.1 * np.exp(-1j * 2.0)])
        out = phase_project(phi)
        assert np.allclose(np.abs(out), 1.0)
        assert np.allclose(np.angle(out), np.angle(phi))

    def test_zero_maps_to_one(self):
        """A zero entry has no phase; the projection picks 1."""
        out = phase_project(np.array([0.0 + 0j, 1j]))
        assert out[0] == 1.0 + 0j
        assert np.isclose(out[1], 1j)


class TestMmseReflection:
    """Normal-equation solution of the sum-MSE reflection problem."""

    def test_unconstrained_solution_satisfies_normal_equations(self):
        """B phi = psi at the returned unconstrained solution."""
        rng = np.random.default_rng(0)
        w, z, h = _setup(rng)
        design = mmse_reflection(w, z, h)
        assert np.allclose(design.b_matrix @ design.phi_unconstrained,
                           design.psi), "normal equations violated"

    def test_unconstrained_solution_is_local_minimum(self):
        """Random perturbations never lower the quadratic objective."""
        rng = np.random.default_rng(1)
        w, z, h = _setup(rng)
        design = mmse_reflection(w, z, h)
        base = reflection_mse(w, z, h, design.phi_unconstrained)
        for _ in range(20):
            delta = 1e-3 * complex_gaussian(rng, (6,), 1.0)
            perturbed = reflection_mse(w, z, h,
                                       design.phi_unconstrained + delta)
            assert perturbed >= base - 1e-12, (
                f"perturbation improved the objective: "
                f"{perturbed:.6e} < {base:.6e}")

    def test_matches_least_squares_oracle(self):
        """The solution agrees with an explicit stacked least squares."""
        rng = np.random.default_rng(2)
        k, m, le = 3, 5, 4
        w, z, h = _setup(rng, k=k, m=m, le=le)
        #  stack rows (u, k): [W Z_k]_{u,:} phi = (e_k - W h_k)_u
        a = np.zeros((k * k, le), dtype=complex)
        b = np.zeros(k * k, dtype=complex)
        resid = np.eye(k) - w @ h
        for kk in range(k):
            wz = w @ z[kk]
            for u in range(k):
                a[kk * k + u] = wz[u]
                b[kk * k + u] = resid[u, kk]
        oracle, *_ = np.linalg.lstsq(a, b, rcond=None)
        design = mmse_reflection(w, z, h)
        assert np.allclose(design.phi_unconstrained, oracle, atol=1e-8), (
            "normal-equation solution differs from stacked least squares")

    def test_projected_solution_is_unit_modulus(self):
        """The physical design has phase-only entries."""
        rng = np.random.default_rng(3)
        w, z, h = _setup(rng)
        design = mmse_reflection(w, z, h)
        assert np.allclose(np.abs(design.phi_projected), 1.0)

    def test_design_beats_random_phases_without_direct_path(self):
        """The projected design outperforms random unit-modulus vectors."""
        rng = np.random.default_rng(4)
        w, z, h = _setup(rng, with_direct=False)
        design = mmse_reflection(w, z, None)
        ours = reflection_mse(w, z, None, design.phi_projected)
        better = 0
        for _ in range(50):
            rand_phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
            if reflection_mse(w, z, None, rand_phi) < ours:
                better += 1
        assert better <= 5, (
            f"{better}/50 random phase vectors beat the projected design")

    def test_handles_rank_deficient_normal_matrix(self):
        """A single-user single-antenna system is rank one but solvable."""
        rng = np.random.default_rng(5)
        w, z, h = _setup(rng, k=1, m=1, le=4)
        design = mmse_reflection(w, z, h)
        assert np.all(np.isfinite(design.phi_unconstrained)), (
            "regularized solve should produce finite phases")

    def test_rejects_mismatched_shapes(self):
        """Filters and cascade blocks must agree on (K, M)."""
        rng = np.random.default_rng(6)
        with pytest.raises(ValueError):
            mmse_reflection(np.ones((2, 4)), np.ones((3, 4, 6)), None)


class TestReflectionMse:
    """Objective evaluation used by the alternating design."""

    def test_matches_hand_rolled_loop(self):
        """The einsum objective equals an explicit per-user sum."""
        rng = np.random.default_rng(7)
        w, z, h = _setup(rng)
        phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
        total = 0.0
        for kk in range(2):
            h_eff_k = h[:, kk] + z[kk] @ phi
            e_k = np.zeros(2)
            e_k[kk] = 1.0
            total += np.sum(np.abs(e_k - w @ h_eff_k) ** 2)
        got = reflection_mse(w, z, h, phi)
        assert abs(got - total) < 1e-10, f"{got} != {total}"
