"""Driving the experiment harness programmatically and through the CLI.

Builds a dynamics certification run, feeds its record to a scaling run as
the hypothesis certificate, and emits plot-ready CSV files -- the same flow
as `viscwave run config.json` from a shell.
"""

import json
from pathlib import Path

from viscwave.harness import config_from_dict, emit_plot_data, main, run

OUT = Path(__file__).parent / "out" / "harness"
OUT.mkdir(parents=True, exist_ok=True)

dyn_cfg = config_from_dict({
    "experiment": "dynamics",
    "symbol": {"name": "shear", "params": {"eps": 0.3}},
    "N": 2,
    "extra": {"n_samples": 150, "T": 150.0, "omega_count": 3},
    "output_dir": str(OUT),
    "seed": 4,
})
dyn_rec = run(dyn_cfg)
print(f"dynamics verdict: {dyn_rec.verdicts['simple_structure']} "
      f"(record {dyn_rec.config_hash})")
cert = OUT / f"dynamics-{dyn_rec.config_hash}" / "record.json"

scal_cfg = config_from_dict({
    "experiment": "scaling",
    "symbol": {"name": "shear", "params": {"eps": 0.3}},
    "N": 16,
    "nu_grid": {"start": 0.4, "ratio": 0.5, "count": 4},
    "omega_grid": {"values": [0.0]},
    "extra": {"certificate": str(cert)},
    "output_dir": str(OUT),
    "seed": 4,
})
scal_rec = run(scal_cfg)
print(f"scaling flags: {scal_rec.flags or 'none'}; fitted: "
      f"{scal_rec.summary['fitted']}")
files = emit_plot_data(scal_rec, "scaling", OUT / "plots")
print(f"plot data: {[f.name for f in files]}")

# the same through the CLI entry point
cfg_path = OUT / "spectrum.json"
cfg_path.write_text(json.dumps({
    "experiment": "spectrum",
    "symbol": {"name": "shear", "params": {"eps": 0.3}},
    "N": 6,
    "nu_grid": {"values": [0.05]},
    "output_dir": str(OUT),
}))
code = main(["run", str(cfg_path), "--strict"])
print(f"CLI exit code: {code}")
code = main(["verify", str(cfg_path)])
print(f"CLI verify exit code: {code}")
