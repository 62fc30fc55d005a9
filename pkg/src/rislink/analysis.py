"""Closed-form performance predictions and their Monte Carlo validators.

Covers the re-modulation error model, coarse/tracking/refined NMSE
predictions, the post-detection SINR approximation with the induced NMSE
recursion and convergence threshold, effective code rate, a flop-count
model, and the trace identities behind the refined-NMSE derivation.

Conventions: ``error_prob`` (p) is the per-component bit error probability
of the re-modulated symbols, so the symbol BER is 2p. The recursion and
threshold treat the cascaded error variance on the normalized scale where
the per-entry channel variance is ``cascaded_var``; the closed forms are
exact under an i.i.d. channel prior.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as _replace

import numpy as np
from scipy.special import erfc

_ALPHA_VALUES = np.array([1.0, 1.0j, -1.0, -1.0j])


def q_function(x) -> np.ndarray | float:
    """Gaussian tail probability via the complementary error function."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / np.sqrt(2.0))


# ---------------------------------------------------------------------------
# Re-modulation error model


@dataclass
class RemodErrorModel:
    """Distribution of the multiplicative QPSK re-modulation error."""

    eps_b: float

    @property
    def values(self) -> np.ndarray:
        return _ALPHA_VALUES

    @property
    def probs(self) -> np.ndarray:
        e = self.eps_b
        return np.array([(1 - e) ** 2, e * (1 - e), e ** 2, e * (1 - e)])

    @property
    def mean(self) -> float:
        return 1.0 - 2.0 * self.eps_b

    @property
    def variance(self) -> float:
        return 4.0 * self.eps_b * (1.0 - self.eps_b)

    @property
    def ber(self) -> float:
        return 2.0 * self.eps_b

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.choice(4, size=size, p=self.probs)
        return _ALPHA_VALUES[idx]


def remod_error_stats(ber: float) -> RemodErrorModel:
    """Error model at a measured bit error rate (per-component p = BER/2)."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError("ber must lie in [0, 1]")
    return RemodErrorModel(eps_b=ber / 2.0)


# ---------------------------------------------------------------------------
# Inputs bundle


@dataclass
class AnalyticInputs:
    """Parameter bundle shared by the closed forms."""

    t_symbols: int
    num_users: int
    num_elements: int            # total surface elements L_e
    symbol_var: float = 1.0
    noise_var: float = 0.0
    cascaded_var: float = 1.0    # per-entry variance of the cascaded channel
    direct_var: float = 0.0      # per-entry variance of the direct channel
    error_prob: float = 0.0      # p, per-component re-modulation error
    rho: float = 1.0
    sigma_bar_sq: float = 0.0
    coding_gain: float = 7.0
    beta: int = 1
    idd_rounds: int = 2
    decoder_iters: int = 10
    frames_per_estimation: int = 1
    payload_stage1: int = 0
    payload_stage2: int = 0
    num_ap_antennas: int = 8

    def __post_init__(self) -> None:
        if not 0.0 <= self.error_prob <= 0.5:
            raise ValueError("error_prob must lie in [0, 0.5]")

    @property
    def excess_symbols(self) -> int:
        return self.t_symbols - self.num_users * self.num_elements

    def require_tall(self) -> None:
        if self.excess_symbols <= 0:
            raise ValueError(
                "refined-NMSE forms require T > K * L_e "
                f"(T={self.t_symbols}, K*L_e="
                f"{self.num_users * self.num_elements})")


# ---------------------------------------------------------------------------
# NMSE closed forms


def nmse_coarse(rank: int, num_users: int, num_elements: int,
                noise_var: float, cascaded_var: float) -> float:
    """Pilot-only cascaded NMSE: rank deficit plus averaged-noise floor."""
    dim = num_users * num_elements
    if not 0 <= rank <= dim:
        raise ValueError(f"rank must lie in [0, {dim}]")
    return 1.0 - rank / dim + noise_var / (2.0 * cascaded_var)


def tracking_nmse(rho: float, sigma_bar_sq: float) -> float:
    """Starting NMSE when reusing the previous block's estimate."""
    return 2.0 * (1.0 - rho) + sigma_bar_sq


def tracking_gate_rhs(rank: int, num_users: int, num_elements: int,
                      sigma_bar_sq: float, noise_var: float,
                      cascaded_var: float) -> float:
    dim = num_users * num_elements
    return (0.5 + rank / (2.0 * dim) + sigma_bar_sq / 2.0
            - noise_var / (4.0 * cascaded_var))


def tracking_gate(rho: float, rank: int, num_users: int, num_elements: int,
                  sigma_bar_sq: float, noise_var: float,
                  cascaded_var: float) -> bool:
    """True when carrying the estimate over beats re-acquiring it."""
    return rho > tracking_gate_rhs(rank, num_users, num_elements,
                                   sigma_bar_sq, noise_var, cascaded_var)


def nmse_refined_nlos(inputs: AnalyticInputs) -> float:
    """Refined cascaded NMSE with re-modulation errors, no direct path."""
    inputs.require_tall()
    t, k, le, p = (inputs.t_symbols, inputs.num_users,
                   inputs.num_elements, inputs.error_prob)
    mean_sq = (1.0 - 2.0 * p) ** 2
    noise_term = inputs.noise_var / (
        inputs.excess_symbols * inputs.symbol_var * inputs.cascaded_var)
    return le * (k - mean_sq) / t + noise_term + 4.0 * p ** 2


def nmse_refined_los(inputs: AnalyticInputs) -> float:
    """Refined cascaded NMSE with a direct path removed via its own
    imperfect estimate; reduces to the blocked-scenario form as the direct
    variance vanishes."""
    inputs.require_tall()
    t, k, le, p = (inputs.t_symbols, inputs.num_users,
                   inputs.num_elements, inputs.error_prob)
    s_h, s_z = inputs.direct_var, inputs.cascaded_var
    leak = k * s_h / (inputs.noise_var
                      + 2.0 * k * inputs.symbol_var * s_h) + 1.0
    weight = le * s_z / (s_h + le * s_z)
    mean_sq = (1.0 - 2.0 * p) ** 2
    noise_term = inputs.noise_var * leak / (
        inputs.excess_symbols * inputs.symbol_var * s_z)
    return weight * (le * (k - mean_sq) / t + noise_term + 4.0 * p ** 2)


def nmse_floor(inputs: AnalyticInputs) -> float:
    """Refined NMSE at zero re-modulation errors (the performance limit)."""
    clean = _replace(inputs, error_prob=0.0)
    if inputs.direct_var > 0:
        return nmse_refined_los(clean)
    return nmse_refined_nlos(clean)


# ---------------------------------------------------------------------------
# SINR, recursion, threshold


def sinr_mean(inputs: AnalyticInputs, error_var: float) -> float:
    """Mean post-cancellation SINR given the cascaded error variance."""
    denom = error_var + inputs.noise_var / (
        inputs.num_ap_antennas * inputs.symbol_var)
    return inputs.cascaded_var / denom


def _post_decoding_ber(inputs: AnalyticInputs, error_var: float) -> float:
    """Noise-free high-SNR approximation: Q(sqrt(sigma_z^2 G_c / e))."""
    if error_var <= 0:
        return 0.0
    arg = np.sqrt(inputs.cascaded_var * inputs.coding_gain / error_var)
    return float(q_function(arg))


def nmse_recursion(nmse_beta: float, inputs: AnalyticInputs) -> float:
    """One step of the refinement fixed-point map.

    The residual NMSE feeds detection, whose post-decoding BER (in the
    noise-free approximation) re-enters the refined-NMSE form as the
    squared Q term on top of the error-free floor. On the normalized scale
    the cascaded variance cancels inside the Q argument.
    """
    ber = _post_decoding_ber(inputs, nmse_beta)
    return nmse_floor(inputs) + ber ** 2


def iterate_nmse(inputs: AnalyticInputs, start: float = 1.0,
                 max_steps: int = 100, tol: float = 1e-6):
    """Iterate the recursion to (near) fixed point; returns the trajectory."""
    traj = [float(start)]
    for _ in range(max_steps):
        nxt = nmse_recursion(traj[-1], inputs)
        traj.append(nxt)
        if abs(nxt - traj[-2]) < tol:
            break
    return traj


def convergence_threshold(inputs: AnalyticInputs, nmse_beta: float) -> float:
    """Minimum symbol-to-noise variance ratio for the recursion to improve.

    Raises ValueError when the residual error is already at or below the
    squared-Q floor (no SNR can help).
    """
    ber = _post_decoding_ber(inputs, nmse_beta)
    margin = nmse_beta - ber ** 2
    if margin <= 0:
        raise ValueError(
            "no convergence: residual NMSE does not exceed the decision-"
            "error floor")
    if inputs.excess_symbols <= 0:
        raise ValueError("threshold requires T > K * L_e")
    return 1.0 / (inputs.excess_symbols * margin * inputs.cascaded_var)


# ---------------------------------------------------------------------------
# Rate and complexity book-keeping


def effective_code_rate(payload_stage1: int, payload_stage2: int,
                        frames_per_estimation: int, block_bits: int) -> float:
    """Average information rate across one estimation period."""
    if frames_per_estimation < 1:
        raise ValueError("frames_per_estimation must be >= 1")
    if block_bits <= 0:
        raise ValueError("block_bits must be positive")
    n_f = frames_per_estimation
    return (payload_stage1 + (n_f - 1) * payload_stage2) / (n_f * block_bits)


def flop_estimate(num_ap_antennas: int, num_users: int, t_symbols: int,
                  idd_rounds: int, num_elements: int, beta: int) -> float:
    """Order-of-magnitude flop count of the refinement loop."""
    m, k = num_ap_antennas, num_users
    detector = m ** 3 * k * t_symbols * idd_rounds
    regression = num_elements ** 3 * k ** 3
    return (detector + regression) * 2.0 * beta / 3.0


# ---------------------------------------------------------------------------
# Trace-identity Monte Carlo oracle


def _cycled_dft_phases(num_elements: int, t_symbols: int) -> np.ndarray:
    l = np.arange(num_elements)[:, None]
    i = np.arange(t_symbols)[None, :]
    return np.exp(-2j * np.pi * l * (i % num_elements) / num_elements)


def validate_appendix_traces(p: float, num_users: int, num_elements: int,
                             t_symbols: int, n_trials: int = 1000,
                             seed: int = 0) -> dict:
    """Monte Carlo check of the two trace identities and the assembled
    symbol-error MSE term behind the refined-NMSE derivation.

    Uses random QPSK symbol matrices, cycled DFT phase columns, and
    multiplicative re-modulation errors drawn from the error model. The
    reference regression matrix is inverted through the scaled-adjoint
    convention (Lambda_ref^H / (sigma_x^2 T)) that the derivation relies
    on. Returns measured means, predictions, standard errors, and 3-sigma
    verdicts.
    """
    k, le, t = num_users, num_elements, t_symbols
    if k * le > 64 or t > 512:
        raise ValueError("oracle is meant for small instances")
    model = RemodErrorModel(eps_b=p)
    rng = np.random.default_rng(seed)
    sym_var = 1.0
    amp = np.sqrt(sym_var / 2.0)
    phases = _cycled_dft_phases(le, t)

    t1_samples = np.empty(n_trials)
    s1_samples = np.empty(n_trials)
    mse1_samples = np.empty(n_trials)
    m_rx = 4
    for it in range(n_trials):
        x = amp * ((1 - 2 * rng.integers(0, 2, (k, t)))
                   + 1j * (1 - 2 * rng.integers(0, 2, (k, t))))
        alpha = model.sample(rng, (k, t))
        lam = (x[:, None, :] * phases[None, :, :]).reshape(k * le, t)
        lam_ref = ((x * alpha)[:, None, :] * phases[None, :, :]).reshape(k * le, t)
        cross = lam @ lam_ref.conj().T / (sym_var * t)
        t1_samples[it] = np.trace(cross).real
        s1_samples[it] = np.sum(np.abs(cross) ** 2)
        z = (rng.standard_normal((m_rx, k * le))
             + 1j * rng.standard_normal((m_rx, k * le))) / np.sqrt(2.0)
        err = z @ cross - z
        mse1_samples[it] = np.sum(np.abs(err) ** 2)

    mean_factor = 1.0 - 2.0 * p
    t1_pred = mean_factor * k * le
    s1_pred = (k * le) ** 2 / t + mean_factor ** 2 * k * le * (1.0 - le / t)
    mse1_pred = (m_rx * k * le) * (le * (k - mean_factor ** 2) / t
                                   + 4.0 * p ** 2)

    def pack(samples: np.ndarray, pred: float) -> dict:
        mean = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / np.sqrt(n_trials))
        return {"measured": mean, "predicted": float(pred),
                "std_error": se,
                "within_3sigma": bool(abs(mean - pred) <= 3.0 * max(se, 1e-12))}

    return {
        "cross_trace": pack(t1_samples, t1_pred),
        "cross_frobenius": pack(s1_samples, s1_pred),
        "symbol_error_mse": pack(mse1_samples, mse1_pred),
        "trials": n_trials,
        "p": p,
    }
