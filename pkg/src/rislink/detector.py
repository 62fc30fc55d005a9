"""Soft-input soft-output MMSE detection with interference cancellation.

The detector treats each symbol instant independently: priors from the
decoder become soft symbols, the soft interference of the other users is
subtracted, and a per-user MMSE filter (prior-aware through the scaled
variance diagonal) produces a filter output that is demapped under a
Gaussian model. The own-user prior never enters the filter or the demap,
so the demap output is already the extrinsic quantity (posterior minus
prior) that the decoder expects.

An exact enumeration demapper over all joint QPSK hypotheses is kept for
small user counts; it is the reference the production path is tested
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import modem
from .ldpc import LLR_CLIP, LdpcCode, decode

_MU_EPS = 1e-12


@dataclass
class SoftStats:
    """Per-user per-instant soft symbols and variances."""

    soft_symbols: np.ndarray   # (K, T) complex
    variances: np.ndarray      # (K, T) real, in [0, symbol_energy]
    symbol_energy: float

    def delta_diag(self, user: int) -> np.ndarray:
        """Diagonal of the interference-weight matrix for ``user``: (T, K).

        Entries are sigma^2_{x_j} / sigma_x^2 for the other users and
        exactly 1 in the user's own slot.
        """
        d = (self.variances / self.symbol_energy).T.copy()
        d[:, user] = 1.0
        return d


def soft_symbols(prior_llrs: np.ndarray, symbol_energy: float = 1.0) -> SoftStats:
    """Soft QPSK means and variances from per-bit prior LLRs.

    ``prior_llrs``: (K, 2T), interleaved real/imag bit LLRs (positive =
    bit 0). Zero priors give zero mean and full variance.
    """
    llrs = np.atleast_2d(np.asarray(prior_llrs, dtype=np.float64))
    if llrs.shape[-1] % 2:
        raise ValueError("LLR count must be even (2 bits per QPSK symbol)")
    amp = np.sqrt(symbol_energy / 2.0)
    t_re = np.tanh(0.5 * llrs[..., 0::2])
    t_im = np.tanh(0.5 * llrs[..., 1::2])
    mean = amp * (t_re + 1j * t_im)
    var = symbol_energy - np.abs(mean) ** 2
    return SoftStats(soft_symbols=mean, variances=np.maximum(var, 0.0),
                     symbol_energy=symbol_energy)


def sic_filter(h_eff: np.ndarray, delta_diag: np.ndarray, noise_var: float,
               symbol_var: float, user: int) -> np.ndarray:
    """MMSE filter for one user at one instant.

    Solves ((noise_var/symbol_var) I + H diag(delta) H^H) w = h_user.
    ``h_eff``: (M, K); ``delta_diag``: (K,) nonnegative weights with 1 in
    the user's slot by convention (not enforced).
    """
    h = np.asarray(h_eff, dtype=np.complex128)
    d = np.asarray(delta_diag, dtype=np.float64)
    if h.ndim != 2 or d.shape != (h.shape[1],):
        raise ValueError("h_eff must be (M, K) with a matching delta diagonal")
    m = h.shape[0]
    a = (h * d[None, :]) @ h.conj().T + (noise_var / symbol_var) * np.eye(m)
    if noise_var <= 0 and np.linalg.matrix_rank(a) < m:
        raise np.linalg.LinAlgError(
            "singular detection matrix at zero noise variance")
    return np.linalg.solve(a, h[:, user])


@dataclass
class DetectorOutput:
    symbol_estimates: np.ndarray  # (K, T) filter outputs
    extrinsic_llrs: np.ndarray    # (K, 2T), clipped
    effective_gains: np.ndarray   # (K, T) mu_k = Re(w^H h_k) in (0, 1]
    post_sinr: np.ndarray         # (K,) mean mu/(1-mu) per user


def detect(rx: np.ndarray, h_eff: np.ndarray, stats: SoftStats,
           noise_var: float, symbol_var: float) -> DetectorOutput:
    """Soft-interference-cancelling MMSE detection over a block.

    ``rx``: (M, T). ``h_eff``: (M, K) for a static equivalent channel or
    (T, M, K) when the reflection phases vary across the block.
    """
    y = np.asarray(rx, dtype=np.complex128)
    if y.ndim != 2:
        raise ValueError("rx must be (M, T)")
    m, t = y.shape
    h = np.asarray(h_eff, dtype=np.complex128)
    if h.ndim == 2:
        h = np.broadcast_to(h, (t, *h.shape))
    if h.shape[0] != t or h.shape[1] != m:
        raise ValueError(f"h_eff shape {h.shape} incompatible with rx {y.shape}")
    k = h.shape[2]
    if stats.soft_symbols.shape != (k, t):
        raise ValueError("soft stats shape mismatch")

    xs = stats.soft_symbols           # (K, T)
    var_scaled = (stats.variances / stats.symbol_energy).T  # (T, K)

    # per-(instant, user) variance diagonal with 1 in the own slot
    d = np.repeat(var_scaled[:, None, :], k, axis=1)        # (T, K, K)
    uid = np.arange(k)
    d[:, uid, uid] = 1.0

    hd = h[:, None, :, :] * d[:, :, None, :]                # (T, K, M, K)
    gram = np.einsum("tkmj,tnj->tkmn", hd, h.conj())        # (T, K, M, M)
    gram += (noise_var / symbol_var) * np.eye(m)[None, None]

    h_user = np.transpose(h, (0, 2, 1))                     # (T, K, M)
    w = np.linalg.solve(gram, h_user[..., None])[..., 0]    # (T, K, M)

    interf = np.einsum("tmk,kt->tm", h, xs)                 # (T, M) full soft sum
    y_t = y.T                                               # (T, M)
    own = h_user * xs.T[:, :, None]                         # (T, K, M)
    y_clean = y_t[:, None, :] - interf[:, None, :] + own    # (T, K, M)

    z = np.einsum("tkm,tkm->tk", w.conj(), y_clean)         # (T, K)
    mu = np.einsum("tkm,tkm->tk", w.conj(), h_user).real
    mu = np.clip(mu, _MU_EPS, 1.0 - _MU_EPS)

    scale = 2.0 * np.sqrt(2.0) / (np.sqrt(symbol_var) * (1.0 - mu))
    llr_re = scale * z.real
    llr_im = scale * z.imag
    llrs = np.empty((k, 2 * t), dtype=np.float64)
    llrs[:, 0::2] = np.clip(llr_re.T, -LLR_CLIP, LLR_CLIP)
    llrs[:, 1::2] = np.clip(llr_im.T, -LLR_CLIP, LLR_CLIP)

    sinr = (mu / (1.0 - mu)).mean(axis=0)
    return DetectorOutput(symbol_estimates=z.T, extrinsic_llrs=llrs,
                          effective_gains=mu.T, post_sinr=sinr)


def exact_extrinsic_llrs(rx: np.ndarray, h_eff: np.ndarray,
                         prior_llrs: np.ndarray, noise_var: float,
                         symbol_energy: float = 1.0) -> np.ndarray:
    """Brute-force extrinsic LLRs by enumerating all joint QPSK hypotheses.

    Exponential in the user count; intended as a reference for small K.
    ``rx``: (M,) one instant; ``h_eff``: (M, K); ``prior_llrs``: (K, 2).
    Returns (K, 2).
    """
    y = np.asarray(rx, dtype=np.complex128).reshape(-1)
    h = np.asarray(h_eff, dtype=np.complex128)
    k = h.shape[1]
    if k > 8:
        raise ValueError("enumeration oracle limited to small user counts")
    priors = np.asarray(prior_llrs, dtype=np.float64).reshape(k, 2)

    amp = np.sqrt(symbol_energy / 2.0)
    bit_pairs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    points = amp * ((1 - 2 * bit_pairs[:, 0]) + 1j * (1 - 2 * bit_pairs[:, 1]))

    n_hyp = 4 ** k
    idx = np.arange(n_hyp)
    sym_idx = np.stack([(idx // 4 ** u) % 4 for u in range(k)], axis=1)
    x = points[sym_idx]                                     # (n_hyp, K)
    resid = y[None, :] - x @ h.T                            # (n_hyp, M)
    log_like = -np.sum(np.abs(resid) ** 2, axis=1) / noise_var

    bits = bit_pairs[sym_idx]                               # (n_hyp, K, 2)
    # prior log-prob of each bit value: log sigmoid(+/- LLR)
    lp0 = -np.logaddexp(0.0, -priors)                       # (K, 2)
    lp1 = -np.logaddexp(0.0, priors)
    log_prior = np.where(bits == 0, lp0[None], lp1[None]).sum(axis=(1, 2))

    out = np.empty((k, 2))
    metric = log_like + log_prior
    for u in range(k):
        for b in range(2):
            mask0 = bits[:, u, b] == 0
            num = logsumexp(metric[mask0])
            den = logsumexp(metric[~mask0])
            out[u, b] = (num - den) - priors[u, b]
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


@dataclass
class IddResult:
    decoded_bits: np.ndarray    # (K, n) hard codeword decisions
    final_llrs: np.ndarray      # (K, n) posterior LLRs, codeword order
    ber_trace: np.ndarray       # per-round BER vs reference (NaN without one)
    converged: np.ndarray       # (K,) parity satisfied
    data_bits: np.ndarray       # (K, n_data) systematic payload less pilots


def idd_loop(rx_block: np.ndarray, channel_estimate: np.ndarray,
             code: LdpcCode, num_rounds: int, noise_var: float,
             symbol_energy: float, n_sounding: int, n_pilot: int,
             pilot_bits: np.ndarray, decoder_iters: int = 10,
             reference_bits: np.ndarray | None = None) -> IddResult:
    """Alternate detection and decoding with extrinsic LLR exchange.

    ``pilot_bits``: (K, 2*N_p) known bits; their positions are pinned at
    the clip magnitude in every exchanged LLR vector and are never
    overwritten. ``reference_bits`` (K, n codeword order), when given,
    fills ``ber_trace`` with the post-decoding bit error rate per round.
    """
    if num_rounds < 1:
        raise ValueError("need at least one detection round")
    y = np.asarray(rx_block, dtype=np.complex128)
    k = pilot_bits.shape[0]
    t = y.shape[1]
    n_info = t - n_sounding - n_pilot
    if 2 * t != code.n:
        raise ValueError("block symbol count inconsistent with code length")

    pilot_sign = (1.0 - 2.0 * pilot_bits.astype(np.float64)) * LLR_CLIP
    pb_lo, pb_hi = 2 * n_sounding, 2 * (n_sounding + n_pilot)

    def pin_wire(llrs: np.ndarray) -> np.ndarray:
        llrs[:, pb_lo:pb_hi] = pilot_sign
        return llrs

    priors_wire = pin_wire(np.zeros((k, 2 * t)))
    ber_trace = np.full(num_rounds, np.nan)
    posterior_cw = np.zeros((k, code.n))
    converged = np.zeros(k, dtype=bool)

    for rnd in range(num_rounds):
        stats = soft_symbols(priors_wire, symbol_energy)
        det = detect(y, channel_estimate, stats, noise_var, symbol_energy)
        ch_wire = pin_wire(det.extrinsic_llrs.copy())
        ch_cw = modem.codeword_from_wire_bits(ch_wire, n_sounding, n_pilot)

        res = decode(code, ch_cw, max_iters=decoder_iters)
        posterior_cw = np.clip(ch_cw + res.extrinsic_llrs, -LLR_CLIP, LLR_CLIP)
        converged = res.converged

        ext_wire = modem.wire_from_codeword(res.extrinsic_llrs, n_pilot, n_info)
        priors_wire = pin_wire(ext_wire.copy())

        if reference_bits is not None:
            hard = (posterior_cw < 0).astype(np.uint8)
            ber_trace[rnd] = np.mean(hard != reference_bits)

    hard_bits = (posterior_cw < 0).astype(np.uint8)
    data = hard_bits[:, 2 * n_pilot:code.message_len]
    return IddResult(decoded_bits=hard_bits, final_llrs=posterior_cw,
                     ber_trace=ber_trace, converged=converged, data_bits=data)
