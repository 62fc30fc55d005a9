"""Direct and cascaded channel estimation with code-aided refinement.

Stage 1 on a fresh block: in the direct-path scenario the repeated pilot
halves (with negated surface phases) are summed and differenced to separate
the direct and reflected observations, each carrying noise variance
sigma_n^2 / 2; a per-row LMMSE solve gives the direct channel, a low-rank
pilot regression the coarse cascaded estimate. The refinement loop then
alternates detection/decoding with a full-block regression whose matrix is
rebuilt from the re-modulated decoder output.

Stage 2 between scheduled estimations: the previous block's cascaded
estimate is carried over (the block-fading innovation is absorbed by the
refinement), only a short uncoded preamble (direct scenario) or a short
encoded pilot (blocked scenario) is spent.

All LMMSE solves use the exact per-row Gaussian posterior mean. For a row
model y = h A + u with h ~ CN(0, R) and u ~ CN(0, nu I), the estimate is
y (A^H R A + nu I)^-1 A^H R, evaluated through whichever Gram matrix is
smaller; prior_var=None selects plain least squares (pseudo-inverse).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, modem, ris
from .detector import idd_loop, sic_filter
from .ldpc import LdpcCode
from .modem import PhaseSchedule, build_lambda, qpsk_modulate, wire_from_codeword


# ---------------------------------------------------------------------------
# Row-wise LMMSE / LS core


def _as_prior_diag(prior_var, dim: int) -> np.ndarray:
    r = np.asarray(prior_var, dtype=np.float64).reshape(-1)
    if r.size == 1:
        r = np.full(dim, r[0])
    if r.size != dim:
        raise ValueError(f"prior variance length {r.size}, expected {dim}")
    if np.any(r < 0):
        raise ValueError("prior variances must be nonnegative")
    return r


def lmmse_rowwise(y: np.ndarray, a: np.ndarray, prior_var,
                  noise_var: float) -> np.ndarray:
    """Estimate X in Y = X A + U for i.i.d. CN rows of X.

    ``y``: (M, N); ``a``: (D, N); ``prior_var``: scalar or (D,) prior
    variances, or None for least squares. Returns (M, D).
    """
    y = np.asarray(y, dtype=np.complex128)
    a = np.asarray(a, dtype=np.complex128)
    d, n = a.shape
    if y.shape[1] != n:
        raise ValueError(f"column mismatch: y {y.shape} vs a {a.shape}")
    if prior_var is None:
        return y @ np.linalg.pinv(a)
    r = _as_prior_diag(prior_var, d)
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    ahr = a.conj().T * r[None, :]                  # (N, D) = A^H R
    if noise_var == 0:
        return y @ np.linalg.pinv(a)
    if n <= d:
        gram = a.conj().T @ (r[:, None] * a) + noise_var * np.eye(n)
        return y @ np.linalg.solve(gram, ahr)
    gram = a @ ahr + noise_var * np.eye(d)         # (D, D) = A A^H R + nu I
    return np.linalg.solve(gram.T, (y @ ahr).T).T


# ---------------------------------------------------------------------------
# Partitioning (direct-path scenario)


@dataclass
class PartitionedRx:
    """Separated pilot-segment observations, each with noise var sigma_n^2/2."""

    y_direct: np.ndarray     # (M, N_p/2) average of the two halves
    y_reflected: np.ndarray  # (M, N_p/2) half-difference


def split_partitions(rx_pilot: np.ndarray,
                     schedule: PhaseSchedule) -> PartitionedRx:
    """Sum/difference the repeated pilot halves.

    Requires the negated-phase structure: the second half of the schedule's
    pilot block must be the exact negation of the first (the symbol
    repetition is the packet builder's contract).
    """
    y = np.asarray(rx_pilot, dtype=np.complex128)
    n_p = y.shape[1]
    if n_p % 2:
        raise ValueError("pilot segment length must be even to partition")
    half = n_p // 2
    tp = schedule.theta_pilot
    if tp.shape[1] != n_p or not np.allclose(tp[:, half:], -tp[:, :half]):
        raise ValueError(
            "schedule lacks the repeated/negated pilot phase structure")
    y1, y2 = y[:, :half], y[:, half:]
    return PartitionedRx(y_direct=0.5 * (y1 + y2),
                         y_reflected=0.5 * (y1 - y2))


# ---------------------------------------------------------------------------
# LMMSE estimators


def estimate_direct(y_direct: np.ndarray, pilot_partition: np.ndarray,
                    noise_var: float, prior_var) -> np.ndarray:
    """Direct-channel estimate from the averaged partition.

    ``pilot_partition``: (K, N) known pilot symbols over the partition
    instants; ``noise_var`` is the variance of the passed observations
    (sigma_n^2 / 2 after partition averaging). Returns (M, K).
    """
    return lmmse_rowwise(y_direct, pilot_partition, prior_var, noise_var)


def estimate_cascaded_coarse(y_reflected: np.ndarray, lambda_p,
                             prior_var, noise_var: float) -> np.ndarray:
    """Low-rank pilot-only cascaded estimate, (M, K*L_e).

    ``lambda_p``: regression matrix (or LambdaMatrix) with one column per
    pilot instant; rank may be far below the row count, which the prior
    (or the pseudo-inverse) absorbs.
    """
    mat = lambda_p.matrix if hasattr(lambda_p, "matrix") else lambda_p
    return lmmse_rowwise(y_reflected, mat, prior_var, noise_var)


def refine_cascaded(y_casc: np.ndarray, lambda_hat, prior_var,
                    noise_var: float, method: str = "lmmse") -> np.ndarray:
    """Full-block cascaded re-estimate from the decoder-fed regression.

    ``method="lmmse"`` solves the exact row-wise Bayesian regression and
    is the production path. ``method="correlator"`` divides the matched
    filter ``Y A^H`` by the per-column energy of ``A`` instead of the full
    Gram; for constant-modulus symbols that energy is exactly
    ``T * symbol_var``, which is the regime the closed-form refined-NMSE
    expressions describe (they keep the inter-user leakage the exact
    inverse removes).
    """
    mat = lambda_hat.matrix if hasattr(lambda_hat, "matrix") else lambda_hat
    if method == "correlator":
        scale = np.sum(np.abs(mat) ** 2, axis=1)
        if np.any(scale <= 0.0):
            raise ValueError("correlator scale requires nonzero rows")
        return (y_casc @ mat.conj().T) / scale[None, :]
    if method != "lmmse":
        raise ValueError(f"unknown refinement method {method!r}")
    return lmmse_rowwise(y_casc, mat, prior_var, noise_var)


# ---------------------------------------------------------------------------
# Context and state


@dataclass
class EstimatorContext:
    """Everything the receiver knows a priori for one frame layout."""

    code: LdpcCode
    schedule: PhaseSchedule
    scenario: str                 # "los" | "nlos"
    layout: str                   # "coded" | "preamble_los"
    noise_var: float
    symbol_energy: float
    sigma_h_sq: np.ndarray | None  # (K,) direct prior variances, None in nlos
    sigma_z_sq: np.ndarray         # (K*L_e,) cascaded prior variances
    pilot_symbols: np.ndarray      # (K, N_p) known pilot/preamble symbols
    pilot_bits: np.ndarray         # (K, 2*N_p) their bits (coded layout)
    n_sounding: int
    n_pilot: int
    n_info: int
    num_users: int
    num_elements: int
    idd_rounds: int = 2
    decoder_iters: int = 10
    beta_max: int = 3
    tol: float = 1e-3

    @property
    def total_symbols(self) -> int:
        return self.n_sounding + self.n_pilot + self.n_info

    @property
    def pilot_slice(self) -> slice:
        if self.layout == "preamble_los":
            return slice(0, self.n_pilot)
        return slice(self.n_sounding, self.n_sounding + self.n_pilot)

    @property
    def coded_slice(self) -> slice:
        """Instants carrying codeword symbols (wire order within)."""
        if self.layout == "preamble_los":
            return slice(self.n_pilot, self.total_symbols)
        return slice(0, self.total_symbols)

    def frame_phases(self) -> np.ndarray:
        s = self.schedule
        if self.layout == "preamble_los":
            return np.concatenate(
                [s.theta_pilot, s.theta_sounding, s.theta_data], axis=1)
        return s.frame_phases(self.scenario)

    def validate(self) -> None:
        if self.scenario not in ("los", "nlos"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.layout not in ("coded", "preamble_los"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "preamble_los":
            expected = 2 * (self.n_sounding + self.n_info)
        else:
            expected = 2 * self.total_symbols
        if self.code.n != expected:
            raise ValueError(
                f"code length {self.code.n} does not match layout ({expected})")
        if self.frame_phases().shape != (self.num_elements, self.total_symbols):
            raise ValueError("schedule does not cover the frame")


@dataclass
class EstimationState:
    """One point of the refinement trajectory."""

    h_direct: np.ndarray          # (M, K)
    z_all: np.ndarray             # (M, K*L_e)
    beta: int
    nmse_proxy: float             # relative change vs previous estimate
    sigma_bar_sq_est: float       # receiver-side residual-error belief
    block_index: int = 0
    ber: float = float("nan")     # info-bit errors vs reference, when given
    fer: float = float("nan")     # whole-codeword error fraction
    decoder_converged: float = float("nan")  # fraction of users
    phi_design: np.ndarray | None = None
    converged: bool = False
    nmse_trajectory: list = field(default_factory=list)


def _bit_error_belief(posterior_llrs: np.ndarray) -> float:
    """Expected bit-error probability implied by posterior confidences."""
    return float(np.mean(1.0 / (1.0 + np.exp(np.abs(posterior_llrs)))))


def _sigma_bar_estimate(ctx: EstimatorContext, p_hat: float) -> float:
    t = ctx.total_symbols
    k, le = ctx.num_users, ctx.num_elements
    if t <= k * le:
        return float("nan")
    inputs = analysis.AnalyticInputs(
        t_symbols=t, num_users=k, num_elements=le,
        symbol_var=ctx.symbol_energy, noise_var=ctx.noise_var,
        cascaded_var=float(np.mean(ctx.sigma_z_sq)),
        direct_var=(float(np.mean(ctx.sigma_h_sq))
                    if ctx.sigma_h_sq is not None else 0.0),
        error_prob=min(max(p_hat, 0.0), 0.5))
    if ctx.scenario == "los" and ctx.sigma_h_sq is not None:
        return analysis.nmse_refined_los(inputs)
    return analysis.nmse_refined_nlos(inputs)


def _equivalent_from_estimates(h_direct: np.ndarray, z_all: np.ndarray,
                               phases: np.ndarray) -> np.ndarray:
    """Per-instant equivalent channel (T, M, K) from current estimates."""
    m = z_all.shape[0]
    le, t = phases.shape
    k = z_all.shape[1] // le
    z_stack = z_all.reshape(m, k, le)
    h_eff = np.einsum("mkl,lt->tmk", z_stack, phases)
    return h_eff + h_direct[None, :, :]


def _design_reflection(h_direct: np.ndarray, z_all: np.ndarray,
                       noise_var: float, symbol_var: float,
                       phi_init: np.ndarray, rounds: int = 2) -> np.ndarray:
    """Alternate receive filters and reflection phases a few rounds."""
    m = z_all.shape[0]
    le = phi_init.size
    k = z_all.shape[1] // le
    z_per_user = z_all.reshape(m, k, le).transpose(1, 0, 2)  # (K, M, L_e)
    phi = np.asarray(phi_init, dtype=np.complex128).reshape(-1)
    uniform = np.ones(k)
    design = None
    for _ in range(rounds):
        h_eff = h_direct + np.einsum("kml,l->mk", z_per_user, phi)
        w = np.stack([
            sic_filter(h_eff, uniform, noise_var, symbol_var, u).conj()
            for u in range(k)])                      # rows w_k^H
        design = ris.mmse_reflection(w, z_per_user, h_direct)
        phi = design.phi_projected
    return design.phi_projected if design is not None else phi


# ---------------------------------------------------------------------------
# Stage 1: estimation and code-aided refinement


def icce(rx_block: np.ndarray, ctx: EstimatorContext,
         reference_bits: np.ndarray | None = None,
         genie_symbols: np.ndarray | None = None,
         bit_corruptor=None,
         h_init: np.ndarray | None = None,
         z_init: np.ndarray | None = None,
         skip_coarse: bool = False,
         block_index: int = 0) -> list[EstimationState]:
    """Run initial estimation plus the code-aided refinement loop.

    Returns the trajectory of states (index 0 is the pre-refinement
    estimate). ``genie_symbols`` (K, T) replaces the detector/decoder with
    the true transmitted symbols (performance-limit mode).
    ``bit_corruptor(bits, beta)`` may perturb the decoded codewords before
    re-modulation. ``h_init``/``z_init`` with ``skip_coarse`` start the
    loop from a prior estimate (tracking). Non-convergence is reported via
    the final state's flag, never as an exception.
    """
    ctx.validate()
    y = np.asarray(rx_block, dtype=np.complex128)
    m = y.shape[0]
    t = ctx.total_symbols
    if y.shape[1] != t:
        raise ValueError(f"rx block has {y.shape[1]} symbols, expected {t}")
    k, le = ctx.num_users, ctx.num_elements
    es = ctx.symbol_energy
    nu = ctx.noise_var

    # --- initial direct estimate
    if ctx.scenario == "los":
        parts = split_partitions(y[:, ctx.pilot_slice], ctx.schedule)
        half = ctx.n_pilot // 2
        h_direct = estimate_direct(parts.y_direct,
                                   ctx.pilot_symbols[:, :half],
                                   nu / 2.0, ctx.sigma_h_sq)
    else:
        h_direct = np.zeros((m, k), dtype=np.complex128)
    if h_init is not None:
        h_direct = np.asarray(h_init, dtype=np.complex128)

    # --- initial cascaded estimate
    if skip_coarse and z_init is not None:
        z_all = np.asarray(z_init, dtype=np.complex128).copy()
    elif ctx.scenario == "los":
        lam_p = build_lambda(ctx.pilot_symbols[:, :half],
                             ctx.schedule.theta_star, "pilot")
        z_all = estimate_cascaded_coarse(parts.y_reflected, lam_p,
                                         ctx.sigma_z_sq, nu / 2.0)
    else:
        pilot_phases = (ctx.schedule.theta_pilot_joint
                        if ctx.schedule.theta_pilot_joint is not None
                        else ctx.schedule.theta_pilot)
        lam_p = build_lambda(ctx.pilot_symbols, pilot_phases, "pilot")
        z_all = estimate_cascaded_coarse(y[:, ctx.pilot_slice], lam_p,
                                         ctx.sigma_z_sq, nu)

    sigma_bar = _sigma_bar_estimate(ctx, 0.5)
    states = [EstimationState(h_direct=h_direct, z_all=z_all, beta=0,
                              nmse_proxy=float("inf"),
                              sigma_bar_sq_est=sigma_bar,
                              block_index=block_index)]

    frame_phases = ctx.frame_phases()
    coded = ctx.coded_slice
    n_cs = 0 if ctx.layout == "preamble_los" else ctx.n_pilot
    cs_sounding = ctx.n_sounding
    pilot_bits = (ctx.pilot_bits if ctx.layout == "coded"
                  else np.zeros((k, 0), dtype=np.uint8))

    info_bits = slice(2 * n_cs, ctx.code.message_len)

    for beta in range(1, ctx.beta_max + 1):
        if genie_symbols is not None:
            x_hat = np.asarray(genie_symbols, dtype=np.complex128)
            ber = fer = float("nan")
            dec_conv = 1.0
            p_hat = 0.0
        else:
            h_eff = _equivalent_from_estimates(h_direct, z_all,
                                               frame_phases[:, coded])
            idd = idd_loop(y[:, coded], h_eff, ctx.code, ctx.idd_rounds,
                           nu, es, cs_sounding, n_cs, pilot_bits,
                           decoder_iters=ctx.decoder_iters)
            if reference_bits is not None:
                diff = idd.decoded_bits[:, info_bits] \
                    != reference_bits[:, info_bits]
                ber = float(np.mean(diff))
                fer = float(np.mean(np.any(diff, axis=1)))
            else:
                ber = fer = float("nan")
            # Re-modulate the raw posterior hard bits: re-encoding the decided
            # message would amplify isolated message errors across the dense
            # parity relations and poison half the regression frame.
            bits_cw = idd.decoded_bits
            if bit_corruptor is not None:
                bits_cw = bit_corruptor(bits_cw.copy(), beta)
            wire_bits = wire_from_codeword(
                bits_cw, n_cs, (coded.stop - coded.start) - cs_sounding - n_cs)
            x_hat = np.empty((k, t), dtype=np.complex128)
            x_hat[:, coded] = qpsk_modulate(wire_bits, es)
            x_hat[:, ctx.pilot_slice] = ctx.pilot_symbols
            dec_conv = float(np.mean(idd.converged))
            p_hat = _bit_error_belief(idd.final_llrs)

        lam_hat = build_lambda(x_hat, frame_phases, "decoder")
        y_casc = y - h_direct @ x_hat if ctx.scenario == "los" else y
        z_new = refine_cascaded(y_casc, lam_hat, ctx.sigma_z_sq, nu)

        denom = float(np.sum(np.abs(z_all) ** 2))
        proxy = (float(np.sum(np.abs(z_new - z_all) ** 2)) / denom
                 if denom > 0 else float("inf"))
        z_all = z_new

        phi_prev = states[-1].phi_design
        phi_init = (phi_prev if phi_prev is not None
                    else ctx.schedule.theta_data[:, 0]
                    if ctx.n_info > 0 else np.ones(le, dtype=np.complex128))
        phi_design = _design_reflection(h_direct, z_all, nu, es, phi_init)

        converged = proxy < ctx.tol
        states.append(EstimationState(
            h_direct=h_direct, z_all=z_all, beta=beta, nmse_proxy=proxy,
            sigma_bar_sq_est=_sigma_bar_estimate(ctx, p_hat),
            block_index=block_index, ber=ber, fer=fer,
            decoder_converged=dec_conv,
            phi_design=phi_design, converged=converged))
        if converged:
            break

    return states


# ---------------------------------------------------------------------------
# Stage 2: tracking


def ict_step(prev_state: EstimationState | None, new_rx_block: np.ndarray,
             ctx: EstimatorContext,
             stage1_ctx: EstimatorContext | None = None,
             reference_bits: np.ndarray | None = None,
             genie_symbols: np.ndarray | None = None,
             block_index: int = 0) -> list[EstimationState]:
    """One tracking step: reuse the previous cascaded estimate, spend only
    the short pilot of the stage-2 layout, then refine.

    Without a previous state this falls back to full stage-1 estimation
    (using ``stage1_ctx`` when the layouts differ).
    """
    if prev_state is None:
        fallback = stage1_ctx if stage1_ctx is not None else ctx
        return icce(new_rx_block, fallback, reference_bits=reference_bits,
                    genie_symbols=genie_symbols, block_index=block_index)
    return icce(new_rx_block, ctx, reference_bits=reference_bits,
                genie_symbols=genie_symbols,
                h_init=None if ctx.scenario == "los" else prev_state.h_direct,
                z_init=prev_state.z_all, skip_coarse=True,
                block_index=block_index)
