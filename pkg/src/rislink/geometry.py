"""Scenario geometry: node placement, path losses, and large-scale variances.

Everything downstream (channel draws, estimators, closed-form predictions)
consumes the per-link variances produced here. Power bookkeeping convention:
the transmit symbol energy ``sigma_x_sq`` carries the (linear) user power,
while channel entries carry the path loss, so the analytic expressions in
:mod:`rislink.analysis` apply without extra scaling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

# Path-loss models, both in dB at distance d meters.
_PL_RIS_A, _PL_RIS_B = 37.3, 22.0      # AP-RIS and RIS-user segments
_PL_DIRECT_A, _PL_DIRECT_B = 32.4, 30.0  # AP-user direct link


def path_loss_db(link_kind: str, distance_m: float) -> float:
    """Path loss in dB for one link.

    ``link_kind`` is ``"direct"`` (AP-user) or ``"ris"`` (AP-RIS or RIS-user,
    both segments share the same exponent model).
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if link_kind == "ris":
        return _PL_RIS_A + _PL_RIS_B * math.log10(distance_m)
    if link_kind == "direct":
        return _PL_DIRECT_A + _PL_DIRECT_B * math.log10(distance_m)
    raise ValueError(f"unknown link kind {link_kind!r}")


def noise_power_dbm(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    """Integrated noise power in dBm over ``bandwidth_hz``."""
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def dbm_to_linear(dbm: float) -> float:
    """dBm to linear milliwatt scale."""
    return 10.0 ** (dbm / 10.0)


@dataclass
class SystemConfig:
    """Full scenario parameterization.

    Distances in meters, frequencies in Hz, powers in dBm. ``scenario`` is
    ``"los"`` (direct AP-user link present) or ``"nlos"`` (blocked; every
    direct-channel variance is exactly zero and estimation starts from the
    reflected path).
    """

    # Array / population sizes
    num_ap_antennas: int = 8            # M
    num_users: int = 4                  # K
    num_surfaces: int = 2               # R
    elements_per_surface: int = 16      # L

    # RF and link budget
    carrier_freq_hz: float = 5e9
    bandwidth_hz: float = 1e6
    noise_psd_dbm_hz: float = -170.0
    tx_power_dbm: float = 20.0          # per-user

    # Geometry (3D coordinates, meters)
    ap_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    surface_positions: tuple[tuple[float, float, float], ...] = (
        (500.0, 10.0, 0.0),
        (500.0, -10.0, 0.0),
    )
    user_center: tuple[float, float, float] = (500.0, 0.0, 0.0)
    user_radius_m: float = 5.0

    scenario: str = "los"

    # Code / packet layout
    block_len_bits: int = 2048          # N_block
    code_rate: float = 0.5              # R_c
    decoder_iters: int = 10             # varsigma
    num_pilots: int = 16                # N_p, stage 1
    num_pilots_tracking: int = 16       # N_p' (LOS preamble) / N_p'' (NLOS)
    idd_iters: int = 2                  # mu
    refine_iters: int = 4               # beta_max
    refine_tol: float = 1e-3

    # Tracking
    block_correlation: float | None = 0.9888   # rho; None -> derive from Doppler
    doppler_hz: float | None = None
    block_duration_s: float | None = None
    frames_per_estimation: int = 20     # N_f

    # Optional override: normalized synthetic variances instead of the
    # geometric link budget (used by desk-scale validation configs).
    normalized_budget: bool = False
    sigma_h_sq_norm: float = 1.0
    sigma_z_sq_norm: float = 1.0
    sigma_n_sq_norm: float = 0.1

    def __post_init__(self) -> None:
        self.validate()

    # -- derived quantities ------------------------------------------------

    @property
    def total_elements(self) -> int:
        """L_e = L * R."""
        return self.elements_per_surface * self.num_surfaces

    @property
    def symbols_per_block(self) -> int:
        """T = N_block / 2 for QPSK."""
        return self.block_len_bits // 2

    @property
    def sigma_x_sq(self) -> float:
        """Per-user symbol energy on the linear power scale."""
        return dbm_to_linear(self.tx_power_dbm)

    def validate(self) -> None:
        if min(self.num_ap_antennas, self.num_users, self.num_surfaces,
               self.elements_per_surface) < 1:
            raise ValueError("M, K, R, L must all be >= 1")
        if self.scenario not in ("los", "nlos"):
            raise ValueError(f"scenario must be 'los' or 'nlos', got {self.scenario!r}")
        if self.num_pilots % 2 != 0:
            raise ValueError("pilot count must be even")
        if self.scenario == "los" and self.num_pilots // 2 < self.num_users:
            raise ValueError(
                "LOS needs N_p/2 >= K so the pilot matrix admits K orthogonal columns")
        if not 0.0 < self.code_rate < 1.0:
            raise ValueError(f"code rate must lie in (0, 1), got {self.code_rate}")
        rho = self.block_correlation
        if rho is not None and not 0.0 <= rho <= 1.0:
            raise ValueError(f"block correlation must lie in [0, 1], got {rho}")
        if self.block_len_bits % 2 != 0:
            raise ValueError("block length must be even (QPSK)")
        if len(self.surface_positions) != self.num_surfaces:
            raise ValueError("one position required per surface")

    # -- config file round-trip --------------------------------------------

    @classmethod
    def from_file(cls, path: str) -> "SystemConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("ap_position", "user_center"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "surface_positions" in kwargs:
            kwargs["surface_positions"] = tuple(tuple(p) for p in kwargs["surface_positions"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_file(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass
class LinkBudget:
    """Per-link variances on the linear power scale.

    ``sigma_h_sq[k]`` is the per-entry variance of the direct channel column
    for user k (exactly zero in NLOS). ``sigma_z_sq[k, l]`` is the per-entry
    variance of the cascaded matrix column for user k through element l,
    i.e. the product of the AP-surface and surface-user link gains. The
    scalar ``sigma_z_sq_ref`` (mean over entries) feeds the closed-form
    expressions, which assume a common variance.
    """

    sigma_h_sq: np.ndarray
    sigma_z_sq: np.ndarray
    sigma_g_sq: np.ndarray          # per-element AP-surface gain
    sigma_f_sq: np.ndarray          # per-(element, user) surface-user gain
    sigma_n_sq: float
    sigma_x_sq: float
    user_positions: np.ndarray = field(repr=False)

    @property
    def sigma_h_sq_ref(self) -> float:
        return float(np.mean(self.sigma_h_sq))

    @property
    def sigma_z_sq_ref(self) -> float:
        return float(np.mean(self.sigma_z_sq))


def build_link_budget(config: SystemConfig, rng: np.random.Generator) -> LinkBudget:
    """Drop users in a disc and derive every per-link variance.

    Deterministic given (config, rng state). The user drop is fixed per
    experiment; Monte Carlo trials of one sweep point share it.
    """
    K = config.num_users
    L = config.elements_per_surface
    L_e = config.total_elements

    center = np.asarray(config.user_center, dtype=float)
    radii = config.user_radius_m * np.sqrt(rng.uniform(0.0, 1.0, size=K))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=K)
    users = np.tile(center, (K, 1))
    users[:, 0] += radii * np.cos(angles)
    users[:, 1] += radii * np.sin(angles)

    if config.normalized_budget:
        sh = config.sigma_h_sq_norm if config.scenario == "los" else 0.0
        sigma_h = np.full(K, sh)
        sigma_g = np.full(L_e, 1.0)
        sigma_f = np.full((L_e, K), config.sigma_z_sq_norm)
        sigma_z = sigma_g[:, None] * sigma_f
        return LinkBudget(
            sigma_h_sq=sigma_h,
            sigma_z_sq=sigma_z.T.copy(),
            sigma_g_sq=sigma_g,
            sigma_f_sq=sigma_f,
            sigma_n_sq=config.sigma_n_sq_norm,
            sigma_x_sq=1.0,
            user_positions=users,
        )

    ap = np.asarray(config.ap_position, dtype=float)
    surfaces = np.asarray(config.surface_positions, dtype=float)

    if config.scenario == "los":
        d_direct = np.linalg.norm(users - ap, axis=1)
        sigma_h = np.array([dbm_to_linear(-path_loss_db("direct", d)) for d in d_direct])
    else:
        sigma_h = np.zeros(K)

    d_ap_ris = np.linalg.norm(surfaces - ap, axis=1)                  # (R,)
    d_ris_user = np.linalg.norm(surfaces[:, None, :] - users[None, :, :], axis=2)  # (R, K)

    gain_g = np.array([dbm_to_linear(-path_loss_db("ris", d)) for d in d_ap_ris])
    gain_f = np.vectorize(lambda d: dbm_to_linear(-path_loss_db("ris", d)))(d_ris_user)

    sigma_g = np.repeat(gain_g, L)                       # (L_e,)
    sigma_f = np.repeat(gain_f, L, axis=0)               # (L_e, K)
    sigma_z = (sigma_g[:, None] * sigma_f).T             # (K, L_e)

    return LinkBudget(
        sigma_h_sq=sigma_h,
        sigma_z_sq=sigma_z,
        sigma_g_sq=sigma_g,
        sigma_f_sq=sigma_f,
        sigma_n_sq=dbm_to_linear(noise_power_dbm(config.noise_psd_dbm_hz, config.bandwidth_hz)),
        sigma_x_sq=config.sigma_x_sq,
        user_positions=users,
    )
