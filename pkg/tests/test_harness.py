"""Tests for the experiment runner, result tables, and the CLI."""

import json

import numpy as np
import pytest

from rislink.cli import main as cli_main
from rislink.geometry import SystemConfig
from rislink.harness import (CSV_COLUMNS, ExperimentSpec, ResultRow,
                             ResultTable, inject_burst, run, run_tracking)


def _config(scenario="los", **overrides):
    base = dict(num_users=2, num_surfaces=1, elements_per_surface=8,
                surface_positions=((500.0, 10.0, 0.0),),
                block_len_bits=512, num_pilots=16 if scenario == "los" else 8,
                num_pilots_tracking=8, scenario=scenario, refine_iters=2,
                idd_iters=2, decoder_iters=10, frames_per_estimation=3,
                block_correlation=0.99, normalized_budget=True,
                sigma_h_sq_norm=1.0,
                sigma_z_sq_norm=0.05 if scenario == "los" else 1.0,
                sigma_n_sq_norm=0.02)
    base.update(overrides)
    return SystemConfig(**base)


def _spec(kind="icce_nmse_ber", scenario="los", **overrides):
    base = dict(experiment_id="t", kind=kind, config=_config(scenario),
                power_grid_dbm=(20.0,), trials=2, master_seed=9)
    base.update(overrides)
    return ExperimentSpec(**base)


class TestExperimentSpec:
    """Validation and serialization of experiment descriptions."""

    def test_rejects_unknown_kind(self):
        """Only the five declared experiment kinds run."""
        with pytest.raises(ValueError, match="kind"):
            _spec(kind="quantum_annealing")

    def test_rejects_empty_power_grid(self):
        """A sweep needs at least one operating point."""
        with pytest.raises(ValueError):
            _spec(power_grid_dbm=())

    def test_rejects_oversized_burst(self):
        """Burst length cannot exceed the codeword."""
        with pytest.raises(ValueError):
            _spec(kind="burst_robustness", burst_errors=513)

    def test_dict_round_trip(self):
        """to_dict / from_dict reproduce the spec and nested config."""
        spec = _spec(power_grid_dbm=(10.0, 20.0), trials=7)
        back = ExperimentSpec.from_dict(spec.to_dict())
        assert back.config == spec.config
        assert back.power_grid_dbm == spec.power_grid_dbm
        assert back.trials == 7

    def test_from_dict_rejects_unknown_keys(self):
        """Misspelled experiment keys fail loudly."""
        raw = _spec().to_dict()
        raw["trails"] = 10
        with pytest.raises(ValueError, match="unknown experiment keys"):
            ExperimentSpec.from_dict(raw)


class TestInjectBurst:
    """Contiguous burst corruption of coded bits."""

    def test_flips_exactly_b_contiguous_bits(self):
        """The burst flips b bits in one contiguous run per row."""
        rng = np.random.default_rng(0)
        bits = np.zeros((3, 64), dtype=np.uint8)
        out = inject_burst(bits, 16, rng)
        for row in out:
            assert row.sum() == 16, f"{row.sum()} bits flipped, wanted 16"
            on = np.flatnonzero(row)
            assert on[-1] - on[0] == 15, "flipped bits are not contiguous"

    def test_zero_burst_is_identity(self):
        """b = 0 must leave the bits untouched."""
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, (2, 32), dtype=np.uint8)
        out = inject_burst(bits, 0, rng)
        assert np.array_equal(out, bits)

    def test_does_not_mutate_input(self):
        """The caller's array survives unchanged."""
        rng = np.random.default_rng(2)
        bits = np.zeros((2, 32), dtype=np.uint8)
        before = bits.copy()
        inject_burst(bits, 8, rng)
        assert np.array_equal(bits, before)

    def test_rejects_burst_longer_than_block(self):
        """Bursts cannot wrap past the end of the codeword."""
        with pytest.raises(ValueError):
            inject_burst(np.zeros((1, 16), dtype=np.uint8), 17,
                         np.random.default_rng(0))


class TestResultTable:
    """Aggregation and CSV serialization."""

    def _table(self):
        rows = [
            ResultRow("e", 20.0, 1, 111, 0.1, 0.2, 0.01, 0.0, 0.5),
            ResultRow("e", 20.0, 1, 222, 0.3, 0.4, 0.03, 1.0, 0.5),
            ResultRow("e", 20.0, 2, 111, float("nan"), 0.1, 0.0, 0.0, 0.5),
        ]
        return ResultTable(rows=rows, meta={"experiment": {}})

    def test_aggregates_mean_and_std(self):
        """Group means and population stds match a hand computation."""
        aggs = self._table().aggregates()
        m1 = next(a for a in aggs
                  if a["row_kind"] == "mean" and a["beta"] == 1)
        s1 = next(a for a in aggs
                  if a["row_kind"] == "std" and a["beta"] == 1)
        assert abs(m1["nmse_direct"] - 0.2) < 1e-15
        assert abs(s1["nmse_direct"] - 0.1) < 1e-15
        assert abs(m1["ber"] - 0.02) < 1e-15

    def test_nan_aware_aggregation(self):
        """NaN metrics drop out of their group's statistics."""
        aggs = self._table().aggregates()
        m2 = next(a for a in aggs
                  if a["row_kind"] == "mean" and a["beta"] == 2)
        assert np.isnan(m2["nmse_direct"]), (
            "an all-NaN group should aggregate to NaN")
        assert abs(m2["nmse_cascaded"] - 0.1) < 1e-15

    def test_csv_has_declared_columns_and_no_timing(self):
        """The CSV header matches the schema; wall time never appears."""
        text = self._table().csv_text()
        header = text.splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        assert "wall" not in text, "timing leaked into the deterministic CSV"

    def test_csv_rows_sorted(self):
        """Trial rows sort by (power, beta, seed) regardless of insertion."""
        table = self._table()
        table.rows = table.rows[::-1]
        lines = table.csv_text().splitlines()[1:4]
        seeds = [int(ln.split(",")[4]) for ln in lines]
        betas = [int(ln.split(",")[3]) for ln in lines]
        assert betas == [1, 1, 2]
        assert seeds[:2] == [111, 222]

    def test_sidecar_written_next_to_csv(self, tmp_path):
        """to_csv drops a JSON sidecar with meta and timing."""
        path = str(tmp_path / "out.csv")
        self._table().to_csv(path)
        with open(str(tmp_path / "out.json")) as fh:
            side = json.load(fh)
        assert "wall_time_s" in side
        assert side["wall_time_s"]["total"] > 0


class TestRunExperiments:
    """End-to-end behaviour of each experiment kind."""

    def test_estimation_rows_cover_every_beta(self):
        """Each trial contributes a row per refinement state."""
        table = run(_spec())
        betas = sorted({r.beta for r in table.rows})
        assert betas[0] == 0, "the pre-refinement state must be recorded"
        assert len(table.rows) >= 2 * len(betas)

    def test_refinement_improves_cascaded_nmse(self):
        """Mean refined NMSE beats the coarse starting point."""
        table = run(_spec(trials=4))
        aggs = table.aggregates()
        means = {a["beta"]: a["nmse_cascaded"] for a in aggs
                 if a["row_kind"] == "mean"}
        assert means[max(means)] < means[0] / 5.0, (
            f"refinement did not improve: {means}")

    def test_genie_limit_never_worse_than_decoded(self):
        """The performance limit lower-bounds the decision-directed run."""
        decoded = run(_spec(trials=3))
        genie = run(_spec(kind="performance_limit", trials=3))
        final = max(r.beta for r in genie.rows)
        g = np.mean([r.nmse_cascaded for r in genie.rows if r.beta == final])
        d = np.mean([r.nmse_cascaded for r in decoded.rows
                     if r.beta == final])
        assert g <= d * 1.5, (
            f"genie NMSE {g:.4g} should not exceed decoded {d:.4g}")

    def test_burst_kind_uses_configured_burst(self):
        """Burst corruption degrades the refined NMSE."""
        clean = run(_spec(trials=3))
        burst = run(_spec(kind="burst_robustness", burst_errors=128,
                          trials=3))
        final = max(r.beta for r in clean.rows)
        c = np.mean([r.nmse_cascaded for r in clean.rows if r.beta == final])
        b = np.mean([r.nmse_cascaded for r in burst.rows if r.beta == final])
        assert b > c, f"a 128-bit burst should hurt: {b:.4g} vs {c:.4g}"

    def test_tracking_rows_indexed_by_block(self):
        """Tracking rows use the beta column as the block index."""
        table = run(_spec(kind="ict_tracking", trials=1))
        blocks = sorted({r.beta for r in table.rows})
        assert blocks == [1, 2, 3]
        assert "effective_code_rate" in table.meta

    def test_tracking_runs_in_blocked_scenario(self):
        """The blocked-path stage-2 layout reuses the stage-1 code."""
        table = run(_spec(kind="ict_tracking", scenario="nlos", trials=1))
        final_block = max(r.beta for r in table.rows)
        vals = [r.nmse_cascaded for r in table.rows if r.beta == final_block]
        assert all(v < 0.5 for v in vals), (
            f"tracking lost the channel: {vals}")

    def test_formula_sweep_matches_direct_evaluation(self):
        """Formula rows reproduce the recursion trajectory."""
        from rislink.analysis import AnalyticInputs, iterate_nmse
        spec = _spec(kind="formula_sweep", power_grid_dbm=(20.0,))
        table = run(spec)
        rows = sorted((r for r in table.rows), key=lambda r: r.beta)
        assert abs(rows[0].nmse_cascaded - 1.0) < 1e-15, (
            "the recursion starts from total uncertainty")
        got = [r.nmse_cascaded for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(got, got[1:])), (
            f"formula trajectory increases: {got}")

    def test_csv_byte_identical_across_runs(self):
        """Re-running an experiment reproduces the CSV byte for byte."""
        spec = _spec(trials=3, power_grid_dbm=(15.0, 20.0))
        a = run(spec).csv_text()
        b = run(spec).csv_text()
        assert a == b, "Monte Carlo runner is not deterministic"

    def test_master_seed_changes_results(self):
        """Different master seeds explore different noise realizations."""
        a = run(_spec(master_seed=1)).csv_text()
        b = run(_spec(master_seed=2)).csv_text()
        assert a != b


class TestCli:
    """Subcommand wiring and exit codes."""

    def _write_spec(self, tmp_path, **overrides):
        spec = _spec(**overrides)
        path = tmp_path / "exp.json"
        with open(path, "w") as fh:
            json.dump(spec.to_dict(), fh)
        return str(path)

    def test_sweep_writes_csv_and_sidecar(self, tmp_path):
        """A sweep run produces both artifacts and exits zero."""
        cfg = self._write_spec(tmp_path, trials=2)
        out = str(tmp_path / "result.csv")
        rc = cli_main(["sweep", "--config", cfg, "--out", out,
                       "--profile", "ci"])
        assert rc == 0
        assert (tmp_path / "result.csv").exists()
        assert (tmp_path / "result.json").exists()

    def test_simulate_uses_single_power_point(self, tmp_path):
        """simulate collapses the grid to the config's transmit power."""
        cfg = self._write_spec(tmp_path, power_grid_dbm=(10.0, 20.0, 30.0),
                               trials=2)
        out = str(tmp_path / "sim.csv")
        rc = cli_main(["simulate", "--config", cfg, "--out", out,
                       "--profile", "ci"])
        assert rc == 0
        with open(out) as fh:
            powers = {ln.split(",")[2] for ln in fh.read().splitlines()[1:]}
        assert powers == {"20.0000"}, f"unexpected power points {powers}"

    def test_profile_caps_trials(self, tmp_path):
        """The ci profile caps Monte Carlo trials at five."""
        cfg = self._write_spec(tmp_path, trials=50)
        out = str(tmp_path / "capped.csv")
        rc = cli_main(["sweep", "--config", cfg, "--out", out,
                       "--profile", "ci"])
        assert rc == 0
        with open(out) as fh:
            lines = [ln for ln in fh.read().splitlines()[1:]
                     if ln.startswith("trial")]
        seeds = {ln.split(",")[4] for ln in lines}
        assert len(seeds) == 5, f"{len(seeds)} trials ran under the ci cap"

    def test_trials_flag_overrides_spec(self, tmp_path):
        """--trials replaces the spec's trial count."""
        cfg = self._write_spec(tmp_path, trials=50)
        out = str(tmp_path / "t.csv")
        rc = cli_main(["sweep", "--config", cfg, "--out", out,
                       "--trials", "2"])
        assert rc == 0
        with open(out) as fh:
            lines = [ln for ln in fh.read().splitlines()[1:]
                     if ln.startswith("trial")]
        assert len({ln.split(",")[4] for ln in lines}) == 2

    def test_missing_out_path_fails_without_artifacts(self, tmp_path):
        """No output path means a nonzero exit and no files."""
        cfg = self._write_spec(tmp_path)
        rc = cli_main(["sweep", "--config", cfg, "--profile", "ci"])
        assert rc != 0
        leftovers = [p for p in tmp_path.iterdir()
                     if p.suffix in (".csv",)]
        assert not leftovers, f"error path still wrote {leftovers}"

    def test_bad_config_file_exits_nonzero(self, tmp_path):
        """A malformed config is a usage error, not a crash."""
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = cli_main(["sweep", "--config", str(bad), "--out",
                       str(tmp_path / "x.csv")])
        assert rc != 0

    def test_seed_flag_changes_output(self, tmp_path):
        """--seed overrides the master seed end to end."""
        cfg = self._write_spec(tmp_path, trials=2)
        out_a = str(tmp_path / "a.csv")
        out_b = str(tmp_path / "b.csv")
        assert cli_main(["sweep", "--config", cfg, "--out", out_a,
                         "--seed", "1", "--profile", "ci"]) == 0
        assert cli_main(["sweep", "--config", cfg, "--out", out_b,
                         "--seed", "2", "--profile", "ci"]) == 0
        assert open(out_a).read() != open(out_b).read()

    def test_analyze_prints_report(self, tmp_path, capsys):
        """analyze emits a JSON report with the fixed point."""
        cfg = self._write_spec(tmp_path, kind="formula_sweep")
        rc = cli_main(["analyze", "--config", cfg])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert "nmse_fixed_point" in report
        assert "flop_estimate" in report
