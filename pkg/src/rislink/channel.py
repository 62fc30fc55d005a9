"""Block-fading channel draws, first-order Markov evolution, cascading.

Three equivalent representations of the reflected path are kept consistent
(and cross-checked in tests):

* constituent form: AP-surface matrix ``G`` (M x L_e), surface-user matrix
  ``F`` (L_e x K), phase vector ``phi`` (L_e) applied as a diagonal;
* cascaded form: per-user ``Z_k = G diag(F[:, k])`` stacked into ``Z_all``
  (M x K*L_e), acting on ``x kron phi``;
* equivalent channel ``H + G diag(phi) F`` for one symbol instant.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import j0

from .geometry import LinkBudget


def complex_gaussian(rng: np.random.Generator, shape, var) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries.

    ``var`` is the total per-entry variance (real and imaginary parts carry
    half each) and may broadcast against ``shape``.
    """
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def jakes_correlation(doppler_hz: float, block_duration_s: float) -> float:
    """Classic isotropic-scattering lag-1 block correlation J0(2 pi f_D T_b).

    Convenience only: configured correlation values always take precedence
    (see SystemConfig.block_correlation).
    """
    return float(j0(2.0 * np.pi * doppler_hz * block_duration_s))


@dataclass
class ChannelRealization:
    """One block's small-scale state plus the variances it was drawn from."""

    h_direct: np.ndarray        # (M, K)
    g_ap_surface: np.ndarray    # (M, L_e)
    f_surface_user: np.ndarray  # (L_e, K)
    budget: LinkBudget
    block_index: int = 0

    @property
    def num_ap_antennas(self) -> int:
        return self.h_direct.shape[0]

    @property
    def num_users(self) -> int:
        return self.h_direct.shape[1]

    @property
    def total_elements(self) -> int:
        return self.g_ap_surface.shape[1]


@dataclass
class CascadedChannel:
    """Per-user cascaded matrices and their horizontal concatenation."""

    z_per_user: np.ndarray      # (K, M, L_e)
    z_all: np.ndarray           # (M, K*L_e)


def draw_channels(budget: LinkBudget, rng: np.random.Generator,
                  num_ap_antennas: int) -> ChannelRealization:
    """Draw an i.i.d. Rayleigh block using the budget's per-entry variances."""
    M = num_ap_antennas
    K = budget.sigma_h_sq.shape[0]
    L_e = budget.sigma_g_sq.shape[0]

    h = complex_gaussian(rng, (M, K), budget.sigma_h_sq[None, :])
    g = complex_gaussian(rng, (M, L_e), budget.sigma_g_sq[None, :])
    f = complex_gaussian(rng, (L_e, K), budget.sigma_f_sq)
    return ChannelRealization(h_direct=h, g_ap_surface=g, f_surface_user=f,
                              budget=budget, block_index=0)


def evolve_markov(channel: ChannelRealization, rho: float,
                  rng: np.random.Generator) -> ChannelRealization:
    """Advance one block: rho * old + sqrt(1 - rho^2) * innovation.

    The innovation shares the stationary per-entry variance, so lag-1
    correlation is rho and the marginal distribution is unchanged.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [0, 1], got {rho}")
    b = channel.budget
    w = np.sqrt(max(0.0, 1.0 - rho * rho))

    def step(old, var):
        if w == 0.0:
            return old.copy()
        return rho * old + w * complex_gaussian(rng, old.shape, var)

    return replace(
        channel,
        h_direct=step(channel.h_direct, b.sigma_h_sq[None, :]),
        g_ap_surface=step(channel.g_ap_surface, b.sigma_g_sq[None, :]),
        f_surface_user=step(channel.f_surface_user, b.sigma_f_sq),
        block_index=channel.block_index + 1,
    )


def cascade(channel: ChannelRealization) -> CascadedChannel:
    """Form Z_k = G diag(F[:, k]) and Z_all = [Z_1 ... Z_K].

    Z_all acts on x kron phi: Z_all (x kron phi) == sum_k Z_k phi x_k.
    """
    g = channel.g_ap_surface                       # (M, L_e)
    f = channel.f_surface_user                     # (L_e, K)
    z = g[None, :, :] * f.T[:, None, :]            # (K, M, L_e)
    M, L_e = g.shape
    K = f.shape[1]
    z_all = np.transpose(z, (1, 0, 2)).reshape(M, K * L_e)
    return CascadedChannel(z_per_user=z, z_all=z_all)


def equivalent(channel: ChannelRealization, phi: np.ndarray) -> np.ndarray:
    """Equivalent M x K channel for one phase configuration.

    Requires unit-modulus phases (|phi_i| = 1 within 1e-9).
    """
    phi = np.asarray(phi)
    if phi.shape != (channel.total_elements,):
        raise ValueError(
            f"phase vector must have length {channel.total_elements}, got {phi.shape}")
    if np.any(np.abs(np.abs(phi) - 1.0) > 1e-9):
        raise ValueError("phase entries must be unit modulus")
    return channel.h_direct + channel.g_ap_surface @ (phi[:, None] * channel.f_surface_user)


def equivalent_sweep(channel: ChannelRealization, phases: np.ndarray) -> np.ndarray:
    """Equivalent channels for a whole schedule: (T, M, K) stack.

    ``phases`` is (L_e, T), one column per symbol instant.
    """
    g = channel.g_ap_surface
    f = channel.f_surface_user
    # (T, M, K) = H + G (phi_t * F) per instant, batched.
    reflected = np.einsum("ml,lt,lk->tmk", g, phases, f, optimize=True)
    return channel.h_direct[None, :, :] + reflected
