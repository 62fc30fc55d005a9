"""Tests for link budgets, path loss, and the system configuration."""

import json

import numpy as np
import pytest

from rislink.geometry import (LinkBudget, SystemConfig, build_link_budget,
                              dbm_to_linear, noise_power_dbm, path_loss_db)


class TestPathLoss:
    """Closed-form path loss values for both link classes."""

    def test_surface_link_at_500m(self):
        """Surface-leg loss at 500 m equals the intercept plus slope term."""
        expected = 37.3 + 22.0 * np.log10(500.0)
        got = path_loss_db("ris", 500.0)
        assert abs(got - expected) < 1e-12, f"surface PL {got} != {expected}"

    def test_direct_link_at_500m(self):
        """Direct-leg loss at 500 m uses the steeper exponent."""
        expected = 32.4 + 30.0 * np.log10(500.0)
        got = path_loss_db("direct", 500.0)
        assert abs(got - expected) < 1e-12, f"direct PL {got} != {expected}"

    def test_direct_exceeds_surface_loss_at_range(self):
        """Beyond ~2m the direct slope overtakes the surface-leg slope."""
        for d in (50.0, 200.0, 1000.0):
            assert path_loss_db("direct", d) > path_loss_db("ris", d), (
                f"direct loss should dominate at {d} m")

    def test_rejects_unknown_link_kind(self):
        """Only the two calibrated link classes are defined."""
        with pytest.raises(ValueError):
            path_loss_db("tropospheric", 100.0)

    def test_rejects_nonpositive_distance(self):
        """Log-distance loss is undefined at zero range."""
        with pytest.raises(ValueError):
            path_loss_db("direct", 0.0)


class TestNoisePower:
    """Thermal noise power integration over the signal bandwidth."""

    def test_reference_point(self):
        """-170 dBm/Hz over 1 MHz integrates to -110 dBm."""
        got = noise_power_dbm(-170.0, 1e6)
        assert abs(got - (-110.0)) < 1e-12, f"noise power {got} != -110"

    def test_dbm_conversion_round_numbers(self):
        """0 dBm is 1 mW and 20 dBm is 100 mW on the linear scale."""
        assert abs(dbm_to_linear(0.0) - 1.0) < 1e-15
        assert abs(dbm_to_linear(20.0) - 100.0) < 1e-12


class TestSystemConfig:
    """Defaults, derived quantities, and validation of the scenario config."""

    def test_default_dimensions(self):
        """The default deployment is 8 antennas, 4 users, 2x16 elements."""
        cfg = SystemConfig()
        assert cfg.num_ap_antennas == 8
        assert cfg.num_users == 4
        assert cfg.total_elements == 32, (
            f"L_e should be 32, got {cfg.total_elements}")

    def test_symbols_per_block_is_half_bit_count(self):
        """QPSK carries two bits per symbol."""
        cfg = SystemConfig()
        assert cfg.symbols_per_block == cfg.block_len_bits // 2

    def test_symbol_energy_tracks_tx_power(self):
        """Per-user symbol energy is the linear transmit power."""
        cfg = SystemConfig(tx_power_dbm=10.0)
        assert abs(cfg.sigma_x_sq - 10.0) < 1e-12

    def test_rejects_odd_pilot_count(self):
        """Pilot segments must pair up for the partition trick."""
        with pytest.raises(ValueError):
            SystemConfig(num_pilots=15)

    def test_rejects_small_pilot_for_user_count(self):
        """A direct-path pilot needs K orthogonal half-length columns."""
        with pytest.raises(ValueError):
            SystemConfig(num_users=4, num_pilots=6)

    def test_rejects_surface_position_mismatch(self):
        """Each surface needs a coordinate."""
        with pytest.raises(ValueError):
            SystemConfig(num_surfaces=3)

    def test_round_trip_through_file(self, tmp_path):
        """to_file followed by from_file reproduces every field."""
        cfg = SystemConfig(num_users=2, num_pilots=8, tx_power_dbm=17.5,
                           scenario="nlos")
        path = tmp_path / "cfg.json"
        cfg.to_file(str(path))
        back = SystemConfig.from_file(str(path))
        assert back == cfg, "config did not survive the file round trip"

    def test_from_dict_rejects_unknown_keys(self):
        """Typos in config files should fail loudly."""
        with pytest.raises(ValueError, match="unknown config keys"):
            SystemConfig.from_dict({"num_userz": 4})


class TestLinkBudget:
    """Variance synthesis from geometry or from normalized overrides."""

    def test_geometric_los_budget_shapes(self):
        """Budget arrays follow (K,) and (K, L_e) conventions."""
        cfg = SystemConfig()
        budget = build_link_budget(cfg, np.random.default_rng(0))
        assert budget.sigma_h_sq.shape == (cfg.num_users,)
        assert budget.sigma_z_sq.shape == (cfg.num_users, cfg.total_elements)
        assert budget.sigma_n_sq > 0

    def test_nlos_zeroes_direct_variances(self):
        """A blocked direct path carries exactly zero variance."""
        cfg = SystemConfig(scenario="nlos")
        budget = build_link_budget(cfg, np.random.default_rng(0))
        assert np.all(budget.sigma_h_sq == 0.0), (
            "direct variances must vanish when the path is blocked")
        assert np.all(budget.sigma_z_sq > 0.0)

    def test_cascaded_variance_is_product_of_legs(self):
        """Each cascaded variance is the product of its two leg gains."""
        cfg = SystemConfig(num_users=2, num_pilots=8)
        budget = build_link_budget(cfg, np.random.default_rng(3))
        for k in range(cfg.num_users):
            for col in range(cfg.total_elements):
                expected = (budget.sigma_g_sq[col]
                            * budget.sigma_f_sq[col, k])
                got = budget.sigma_z_sq[k, col]
                assert abs(got - expected) < 1e-30, (
                    f"z variance ({k},{col}) {got} != {expected}")

    def test_normalized_budget_uses_overrides(self):
        """The synthetic override bypasses geometry entirely."""
        cfg = SystemConfig(normalized_budget=True, sigma_h_sq_norm=0.7,
                           sigma_z_sq_norm=0.3, sigma_n_sq_norm=0.05)
        budget = build_link_budget(cfg, np.random.default_rng(0))
        assert np.allclose(budget.sigma_h_sq, 0.7)
        assert np.allclose(budget.sigma_z_sq, 0.3)
        assert abs(budget.sigma_n_sq - 0.05) < 1e-15
        assert abs(budget.sigma_x_sq - 1.0) < 1e-15, (
            "normalized budgets fix the symbol energy at one")

    def test_user_drop_stays_inside_radius(self):
        """Dropped users never leave the configured disc."""
        cfg = SystemConfig(user_radius_m=5.0)
        budget = build_link_budget(cfg, np.random.default_rng(11))
        center = np.asarray(cfg.user_center)
        dist = np.linalg.norm(budget.user_positions - center[None, :], axis=1)
        assert np.all(dist <= 5.0 + 1e-9), (
            f"user at {dist.max():.3f} m exceeds the 5 m radius")

    def test_reference_scalars_are_means(self):
        """Scalar reference variances equal the array means."""
        cfg = SystemConfig()
        budget = build_link_budget(cfg, np.random.default_rng(7))
        assert abs(budget.sigma_h_sq_ref - budget.sigma_h_sq.mean()) < 1e-15
        assert abs(budget.sigma_z_sq_ref - budget.sigma_z_sq.mean()) < 1e-15
