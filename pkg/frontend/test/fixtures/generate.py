#!/usr/bin/env python3
"""
Regenerates the golden fixture CSVs from the simulation harness.

One small deterministic run per experiment kind. The figure tests compare
rendered series against these files byte for byte, so regenerate only when
the harness schema or the runs themselves intentionally change:

    python3 frontend/test/fixtures/generate.py
"""

import dataclasses
import os

from rislink import ExperimentSpec

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.abspath(os.path.join(HERE, "..", "..", ".."))

RUNS = {
    "icce_nmse_ber": ("configs/full_scale.json", {
        "trials": 3, "power_grid_dbm": (12.0, 18.0, 24.0, 30.0)}),
    "performance_limit": ("configs/full_scale.json", {
        "kind": "performance_limit", "experiment_id": "full-scale-genie",
        "trials": 2, "power_grid_dbm": (12.0, 21.0, 30.0)}),
    "formula_sweep": ("configs/full_scale_formula.json", {
        "power_grid_dbm": tuple(float(p) for p in range(12, 31, 3))}),
    "ict_tracking": ("configs/tracking_desk.json", {"trials": 4}),
    "burst_robustness": ("configs/burst_desk.json", {"trials": 4}),
}


def main() -> None:
    from rislink import run

    for kind, (config_path, overrides) in RUNS.items():
        spec = ExperimentSpec.from_file(os.path.join(ROOT, config_path))
        spec = dataclasses.replace(spec, **overrides)
        out = os.path.join(HERE, f"{kind}.csv")
        run(spec).to_csv(out)
        print(f"{kind}: wrote {out}")


if __name__ == "__main__":
    main()
