"""Configuration-driven Monte Carlo experiment runner.

Five experiment kinds share one result schema: code-aided estimation sweeps
(`icce_nmse_ber`), the genie-fed performance limit (`performance_limit`),
burst-corrupted refinement (`burst_robustness`), multi-block tracking
(`ict_tracking`), and closed-form sweeps (`formula_sweep`).

Determinism contract: every random draw derives from streams keyed by
(master seed, sweep-point index, trial index), so the emitted CSV is
byte-identical across re-runs regardless of execution order. Wall-clock
timings and other non-deterministic observations go to the JSON sidecar,
never into the CSV.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .channel import (cascade, complex_gaussian, draw_channels,
                      equivalent_sweep, evolve_markov, jakes_correlation)
from .estimator import EstimatorContext, icce, ict_step
from .geometry import LinkBudget, SystemConfig, build_link_budget
from .ldpc import LdpcCode, build_code, encode
from .modem import (build_packet, phase_schedule, pilot_symbol_matrix,
                    qpsk_hard_demod, qpsk_modulate, wire_from_codeword)

EXPERIMENT_KINDS = ("icce_nmse_ber", "ict_tracking", "burst_robustness",
                    "formula_sweep", "performance_limit")

CSV_COLUMNS = ("row_kind", "experiment_id", "p_t_dbm", "beta", "trial_seed",
               "nmse_direct", "nmse_cascaded", "ber", "fer")

_METRICS = ("nmse_direct", "nmse_cascaded", "ber", "fer")


# ---------------------------------------------------------------------------
# Experiment specification


@dataclass
class ExperimentSpec:
    """One experiment: a config, a transmit-power sweep, and a kind."""

    experiment_id: str
    kind: str
    config: SystemConfig
    power_grid_dbm: tuple[float, ...] = (20.0,)
    trials: int = 50
    master_seed: int = 1
    burst_errors: int = 0
    coding_gain: float = 7.0
    out_path: str | None = None

    def __post_init__(self) -> None:
        self.power_grid_dbm = tuple(float(p) for p in self.power_grid_dbm)
        self.validate()

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(
                f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.power_grid_dbm:
            raise ValueError("power grid must be non-empty")
        if self.burst_errors < 0 or self.burst_errors > self.config.block_len_bits:
            raise ValueError("burst length must lie in [0, block length]")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        raw = dict(raw)
        cfg = raw.pop("config", {})
        config = cfg if isinstance(cfg, SystemConfig) else SystemConfig.from_dict(cfg)
        known = {f for f in cls.__dataclass_fields__ if f != "config"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(config=config, **raw)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "kind": self.kind,
            "power_grid_dbm": list(self.power_grid_dbm),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "burst_errors": self.burst_errors,
            "coding_gain": self.coding_gain,
            "out_path": self.out_path,
            "config": self.config.to_dict(),
        }


# ---------------------------------------------------------------------------
# Result table


@dataclass
class ResultRow:
    experiment_id: str
    p_t_dbm: float
    beta: int
    trial_seed: int
    nmse_direct: float
    nmse_cascaded: float
    ber: float
    fer: float
    wall_time: float = 0.0    # memory/sidecar only, never in the CSV


def _fmt(value: float) -> str:
    if np.isnan(value):
        return "nan"
    return f"{value:.10e}"


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sorted_rows(self) -> list[ResultRow]:
        return sorted(self.rows,
                      key=lambda r: (r.p_t_dbm, r.beta, r.trial_seed))

    def aggregates(self) -> list[dict]:
        """Mean/std of every metric per (power, beta), NaN-aware."""
        groups: dict[tuple[float, int], list[ResultRow]] = {}
        for row in self.sorted_rows():
            groups.setdefault((row.p_t_dbm, row.beta), []).append(row)
        out = []
        for (p, beta), rows in sorted(groups.items()):
            entry_mean = {"row_kind": "mean", "p_t_dbm": p, "beta": beta}
            entry_std = {"row_kind": "std", "p_t_dbm": p, "beta": beta}
            for metric in _METRICS:
                vals = np.array([getattr(r, metric) for r in rows])
                valid = vals[~np.isnan(vals)]
                if valid.size:
                    entry_mean[metric] = float(np.mean(valid))
                    entry_std[metric] = float(np.std(valid))
                else:
                    entry_mean[metric] = float("nan")
                    entry_std[metric] = float("nan")
            out.append(entry_mean)
            out.append(entry_std)
        return out

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        exp_id = self.rows[0].experiment_id if self.rows else ""
        for r in self.sorted_rows():
            lines.append(",".join([
                "trial", r.experiment_id, f"{r.p_t_dbm:.4f}", str(r.beta),
                str(r.trial_seed), _fmt(r.nmse_direct),
                _fmt(r.nmse_cascaded), _fmt(r.ber), _fmt(r.fer)]))
        for agg in self.aggregates():
            lines.append(",".join([
                agg["row_kind"], exp_id, f"{agg['p_t_dbm']:.4f}",
                str(agg["beta"]), "", _fmt(agg["nmse_direct"]),
                _fmt(agg["nmse_cascaded"]), _fmt(agg["ber"]),
                _fmt(agg["fer"])]))
        return "\n".join(lines) + "\n"

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.csv_text())
        sidecar = self.meta.copy()
        sidecar["wall_time_s"] = {
            "total": float(sum(r.wall_time for r in self.rows)),
            "per_row_mean": (float(np.mean([r.wall_time for r in self.rows]))
                             if self.rows else 0.0),
        }
        side_path = path[:-4] + ".json" if path.endswith(".csv") else path + ".json"
        with open(side_path, "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Burst corruption


def inject_burst(coded_bits: np.ndarray, b_errors: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Flip a contiguous run of bits at a random offset (per row)."""
    bits = np.atleast_2d(np.asarray(coded_bits)).copy()
    n = bits.shape[1]
    if b_errors > n:
        raise ValueError(f"burst length {b_errors} exceeds block length {n}")
    if b_errors > 0:
        for row in bits:
            off = int(rng.integers(0, n - b_errors + 1))
            row[off:off + b_errors] ^= 1
    return bits.reshape(np.asarray(coded_bits).shape)


def _burst_corruptor(b_errors: int, offsets: np.ndarray):
    """Flip the same per-user windows on every refinement pass."""
    def corrupt(bits: np.ndarray, beta: int) -> np.ndarray:
        for k, off in enumerate(offsets):
            bits[k, off:off + b_errors] ^= 1
        return bits
    return corrupt


# ---------------------------------------------------------------------------
# Shared trial plumbing


def _trial_seed_value(master: int, point: int, trial: int) -> int:
    return int(np.random.SeedSequence((master, point, trial)).generate_state(1)[0])


def _point_budget(cfg: SystemConfig, master: int, point: int) -> LinkBudget:
    # One user drop per experiment: the drop seed ignores the sweep point so
    # a power sweep varies only the transmit power, never the geometry.
    del point
    rng = np.random.default_rng(np.random.SeedSequence((master, 0)))
    return build_link_budget(cfg, rng)


def _transmit(channel, phases: np.ndarray, symbols: np.ndarray,
              noise_var: float, rng: np.random.Generator) -> np.ndarray:
    h_eff = equivalent_sweep(channel, phases)          # (T, M, K)
    clean = np.einsum("tmk,kt->mt", h_eff, symbols)
    return clean + complex_gaussian(rng, clean.shape, noise_var)


@dataclass
class _Stage1Frame:
    x_wire: np.ndarray
    codewords: np.ndarray
    ctx: EstimatorContext


def _build_stage1(cfg: SystemConfig, code: LdpcCode, budget: LinkBudget,
                  rng: np.random.Generator, n_pilot: int | None = None,
                  phi_data: np.ndarray | None = None) -> _Stage1Frame:
    k = cfg.num_users
    le = cfg.total_elements
    es = budget.sigma_x_sq
    n_p = cfg.num_pilots if n_pilot is None else n_pilot
    data_len = code.message_len - 2 * n_p
    data = rng.integers(0, 2, (k, data_len), dtype=np.uint8)
    packets = [build_packet(u, data[u], cfg.scenario, code, es, num_users=k)
               for u in range(k)]
    x_wire = np.stack([p.symbols for p in packets])
    codewords = np.stack([p.codeword_bits for p in packets])
    first = packets[0]
    phi = np.ones(le, dtype=np.complex128) if phi_data is None else phi_data
    sched = phase_schedule(first.n_sounding, first.n_pilot, first.n_info,
                           le, phi, num_users=k)
    pilots = pilot_symbol_matrix(k, first.n_pilot, cfg.scenario, es)
    ctx = EstimatorContext(
        code=code, schedule=sched, scenario=cfg.scenario, layout="coded",
        noise_var=budget.sigma_n_sq, symbol_energy=es,
        sigma_h_sq=(budget.sigma_h_sq if cfg.scenario == "los" else None),
        sigma_z_sq=budget.sigma_z_sq.reshape(-1),
        pilot_symbols=pilots, pilot_bits=qpsk_hard_demod(pilots),
        n_sounding=first.n_sounding, n_pilot=first.n_pilot,
        n_info=first.n_info, num_users=k, num_elements=le,
        idd_rounds=cfg.idd_iters, decoder_iters=cfg.decoder_iters,
        beta_max=cfg.refine_iters, tol=cfg.refine_tol)
    return _Stage1Frame(x_wire=x_wire, codewords=codewords, ctx=ctx)


def _nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    denom = float(np.sum(np.abs(truth) ** 2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(np.abs(estimate - truth) ** 2)) / denom


def _states_to_rows(spec: ExperimentSpec, p_dbm: float, seed_val: int,
                    states, channel, cascaded, wall: float) -> list[ResultRow]:
    rows = []
    split = wall / max(len(states), 1)
    for st in states:
        rows.append(ResultRow(
            experiment_id=spec.experiment_id, p_t_dbm=p_dbm, beta=st.beta,
            trial_seed=seed_val,
            nmse_direct=_nmse(st.h_direct, channel.h_direct),
            nmse_cascaded=_nmse(st.z_all, cascaded.z_all),
            ber=st.ber, fer=st.fer, wall_time=split))
    return rows


# ---------------------------------------------------------------------------
# Monte Carlo kinds


def _run_monte_carlo(spec: ExperimentSpec) -> ResultTable:
    cfg = spec.config
    code = build_code(cfg.block_len_bits, cfg.code_rate, spec.master_seed)
    genie = spec.kind == "performance_limit"
    burst = spec.burst_errors if spec.kind == "burst_robustness" else 0
    table = ResultTable()
    for ip, p_dbm in enumerate(spec.power_grid_dbm):
        cfg_p = replace(cfg, tx_power_dbm=p_dbm)
        budget = _point_budget(cfg_p, spec.master_seed, ip)
        for trial in range(spec.trials):
            seed_val = _trial_seed_value(spec.master_seed, ip, trial)
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.master_seed, ip, trial)))
            t0 = time.perf_counter()
            chan = draw_channels(budget, rng, cfg.num_ap_antennas)
            casc = cascade(chan)
            frame = _build_stage1(cfg_p, code, budget, rng)
            y = _transmit(chan, frame.ctx.frame_phases(), frame.x_wire,
                          budget.sigma_n_sq, rng)
            corruptor = None
            if burst:
                offsets = rng.integers(0, code.n - burst + 1, size=cfg.num_users)
                corruptor = _burst_corruptor(burst, offsets)
            states = icce(y, frame.ctx,
                          reference_bits=None if genie else frame.codewords,
                          genie_symbols=frame.x_wire if genie else None,
                          bit_corruptor=corruptor)
            wall = time.perf_counter() - t0
            table.rows.extend(_states_to_rows(
                spec, p_dbm, seed_val, states, chan, casc, wall))
    table.meta = _meta(spec)
    return table


def _resolve_rho(cfg: SystemConfig) -> float:
    if cfg.block_correlation is not None:
        return cfg.block_correlation
    if cfg.doppler_hz is None or cfg.block_duration_s is None:
        raise ValueError(
            "need block_correlation or (doppler_hz, block_duration_s)")
    return jakes_correlation(cfg.doppler_hz, cfg.block_duration_s)


def _build_stage2_los(cfg: SystemConfig, code2: LdpcCode, budget: LinkBudget,
                      rng: np.random.Generator, phi_data: np.ndarray):
    """Frame = [uncoded partitioned preamble | second codeword]."""
    k, le, es = cfg.num_users, cfg.total_elements, budget.sigma_x_sq
    n_pre = cfg.num_pilots_tracking
    preamble = pilot_symbol_matrix(k, n_pre, "los", es)
    data = rng.integers(0, 2, (k, code2.message_len), dtype=np.uint8)
    cw = encode(code2, data)
    n_sound = (code2.n - code2.message_len) // 2
    n_info = code2.message_len // 2
    wire_bits = wire_from_codeword(cw, 0, n_info)
    x_cw = qpsk_modulate(wire_bits, es)
    x_wire = np.concatenate([preamble, x_cw], axis=1)
    sched = phase_schedule(n_sound, n_pre, n_info, le, phi_data, num_users=k)
    ctx = EstimatorContext(
        code=code2, schedule=sched, scenario="los", layout="preamble_los",
        noise_var=budget.sigma_n_sq, symbol_energy=es,
        sigma_h_sq=budget.sigma_h_sq,
        sigma_z_sq=budget.sigma_z_sq.reshape(-1),
        pilot_symbols=preamble,
        pilot_bits=qpsk_hard_demod(preamble),
        n_sounding=n_sound, n_pilot=n_pre, n_info=n_info,
        num_users=k, num_elements=le,
        idd_rounds=cfg.idd_iters, decoder_iters=cfg.decoder_iters,
        beta_max=cfg.refine_iters, tol=cfg.refine_tol)
    return _Stage1Frame(x_wire=x_wire, codewords=cw, ctx=ctx)


def run_tracking(spec: ExperimentSpec) -> ResultTable:
    """Stage-1 estimation on block 1, tracking on blocks 2..N_f.

    The beta column of tracking rows holds the block index; each row is the
    final refinement state of that block.
    """
    cfg = spec.config
    rho = _resolve_rho(cfg)
    n_f = cfg.frames_per_estimation
    t_sym = cfg.symbols_per_block
    code1 = build_code(cfg.block_len_bits, cfg.code_rate, spec.master_seed)
    code2 = None
    if cfg.scenario == "los":
        n2 = (t_sym - cfg.num_pilots_tracking) * 2
        code2 = build_code(n2, cfg.code_rate, spec.master_seed + 1)
    table = ResultTable()
    for ip, p_dbm in enumerate(spec.power_grid_dbm):
        cfg_p = replace(cfg, tx_power_dbm=p_dbm)
        budget = _point_budget(cfg_p, spec.master_seed, ip)
        for trial in range(spec.trials):
            seed_val = _trial_seed_value(spec.master_seed, ip, trial)
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.master_seed, ip, trial)))
            t0 = time.perf_counter()
            chan = draw_channels(budget, rng, cfg.num_ap_antennas)
            casc = cascade(chan)
            frame = _build_stage1(cfg_p, code1, budget, rng)
            y = _transmit(chan, frame.ctx.frame_phases(), frame.x_wire,
                          budget.sigma_n_sq, rng)
            states = icce(y, frame.ctx, reference_bits=frame.codewords)
            prev = states[-1]
            wall = time.perf_counter() - t0
            final = prev
            table.rows.append(ResultRow(
                experiment_id=spec.experiment_id, p_t_dbm=p_dbm, beta=1,
                trial_seed=seed_val,
                nmse_direct=_nmse(final.h_direct, chan.h_direct),
                nmse_cascaded=_nmse(final.z_all, casc.z_all),
                ber=final.ber, fer=final.fer, wall_time=wall))
            for block in range(2, n_f + 1):
                t0 = time.perf_counter()
                chan = evolve_markov(chan, rho, rng)
                casc = cascade(chan)
                phi = (prev.phi_design if prev.phi_design is not None
                       else np.ones(cfg.total_elements, dtype=np.complex128))
                if cfg.scenario == "los":
                    frame2 = _build_stage2_los(cfg_p, code2, budget, rng, phi)
                else:
                    frame2 = _build_stage1(cfg_p, code1, budget, rng,
                                           n_pilot=cfg.num_pilots_tracking,
                                           phi_data=phi)
                y2 = _transmit(chan, frame2.ctx.frame_phases(),
                               frame2.x_wire, budget.sigma_n_sq, rng)
                traj = ict_step(prev, y2, frame2.ctx,
                                reference_bits=frame2.codewords,
                                block_index=block - 1)
                prev = traj[-1]
                wall = time.perf_counter() - t0
                table.rows.append(ResultRow(
                    experiment_id=spec.experiment_id, p_t_dbm=p_dbm,
                    beta=block, trial_seed=seed_val,
                    nmse_direct=_nmse(prev.h_direct, chan.h_direct),
                    nmse_cascaded=_nmse(prev.z_all, casc.z_all),
                    ber=prev.ber, fer=prev.fer, wall_time=wall))
    table.meta = _meta(spec)
    if cfg.scenario == "los":
        payload1 = code1.message_len - 2 * cfg.num_pilots
        payload2 = code2.message_len
    else:
        payload1 = code1.message_len - 2 * cfg.num_pilots
        payload2 = code1.message_len - 2 * cfg.num_pilots_tracking
    table.meta["effective_code_rate"] = analysis.effective_code_rate(
        payload1, payload2, n_f, cfg.block_len_bits)
    return table


# ---------------------------------------------------------------------------
# Formula sweeps


def _run_formula(spec: ExperimentSpec) -> ResultTable:
    cfg = spec.config
    table = ResultTable()
    for ip, p_dbm in enumerate(spec.power_grid_dbm):
        cfg_p = replace(cfg, tx_power_dbm=p_dbm)
        budget = _point_budget(cfg_p, spec.master_seed, ip)
        inputs = analysis.AnalyticInputs(
            t_symbols=cfg.symbols_per_block, num_users=cfg.num_users,
            num_elements=cfg.total_elements,
            symbol_var=budget.sigma_x_sq, noise_var=budget.sigma_n_sq,
            cascaded_var=budget.sigma_z_sq_ref,
            direct_var=(budget.sigma_h_sq_ref if cfg.scenario == "los" else 0.0),
            coding_gain=spec.coding_gain,
            num_ap_antennas=cfg.num_ap_antennas)
        nmse = 1.0
        h_nmse = float("nan")
        if cfg.scenario == "los":
            h_nmse = budget.sigma_n_sq / (
                budget.sigma_n_sq + 2 * cfg.num_users * budget.sigma_x_sq
                * budget.sigma_h_sq_ref)
        for beta in range(0, cfg.refine_iters + 1):
            ber = float("nan")
            if beta > 0:
                ber = analysis.q_function(
                    np.sqrt(spec.coding_gain / nmse))
                nmse = analysis.nmse_recursion(nmse, inputs)
            table.rows.append(ResultRow(
                experiment_id=spec.experiment_id, p_t_dbm=p_dbm, beta=beta,
                trial_seed=_trial_seed_value(spec.master_seed, ip, 0),
                nmse_direct=h_nmse, nmse_cascaded=float(nmse),
                ber=float(ber), fer=float("nan"), wall_time=0.0))
    table.meta = _meta(spec)
    return table


# ---------------------------------------------------------------------------
# Entry points


def _meta(spec: ExperimentSpec) -> dict:
    cfg = spec.config
    return {
        "experiment": spec.to_dict(),
        "columns": list(CSV_COLUMNS),
        "flop_estimate": analysis.flop_estimate(
            cfg.num_ap_antennas, cfg.num_users, cfg.symbols_per_block,
            cfg.idd_iters, cfg.total_elements, cfg.refine_iters),
    }


def run(spec: ExperimentSpec) -> ResultTable:
    """Dispatch an experiment to its runner."""
    if spec.kind == "formula_sweep":
        return _run_formula(spec)
    if spec.kind == "ict_tracking":
        return run_tracking(spec)
    return _run_monte_carlo(spec)
