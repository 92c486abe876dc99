"""Experiment harness: configs, deterministic runs, persistence, CLI.

A run is described by one JSON config file; every run re-emits the fully
defaulted config next to its results so the record is self-describing.
Identical config and seed reproduce the metric files bitwise (wall-clock
metadata lives in a separate sidecar that is not part of the comparison).

CLI::

    viscwave run <config.json> [--output-dir D] [--jobs N] [--budget D] [--strict]
    viscwave catalog
    viscwave verify <config.json>

Exit codes: 0 success, 2 config error, 3 failed acceptance verdict under
``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import evolution as evo
from . import resolvent as res
from .errors import InvalidConfig, MissingMetric, ViscwaveError
from .quantize import (DENSE_BUDGET, assemble_P, assemble_Q,
                       random_smooth_field, sobolev_norm)
from .symbols import catalog_names, get_symbol

EXPERIMENTS = ("dynamics", "la1", "spectrum", "scaling", "decomposition",
               "timescale", "limiting")


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    symbol: dict = field(default_factory=lambda: {"name": "shear", "params": {}})
    N: int = 8
    delta: float = 0.1
    s: float = -0.6
    nu_grid: dict = field(default_factory=lambda: {"start": 0.1, "ratio": 0.5,
                                                   "count": 4})
    omega_grid: dict = field(default_factory=lambda: {"values": [0.0]})
    t_spec: dict = field(default_factory=lambda: {"t_min": 0.5,
                                                  "points_per_decade": 16})
    seed: int = 0
    output_dir: str = "runs"
    budget: int = DENSE_BUDGET
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def parse_grid(spec) -> list:
    """Grid descriptors: explicit values, geometric ladders, or log/lin spans."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if "values" in spec:
        return [float(v) for v in spec["values"]]
    if "ratio" in spec:
        start, ratio, count = float(spec["start"]), float(spec["ratio"]), int(spec["count"])
        return [start * ratio ** j for j in range(count)]
    start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
    if spec.get("spacing", "log") == "log":
        return list(np.geomspace(start, stop, num))
    return list(np.linspace(start, stop, num))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise InvalidConfig(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__)
    errors = []
    if "experiment" not in raw:
        errors.append("experiment: required")
    extra = dict(raw.get("extra", {}))
    fields = {}
    for key, val in raw.items():
        if key == "extra":
            continue
        if key in known:
            fields[key] = val
        else:
            extra[key] = val
    fields["extra"] = extra
    fields.setdefault("experiment", "")
    cfg = ExperimentConfig(**fields)
    errors.extend(validate_config(cfg))
    if errors:
        raise InvalidConfig("; ".join(errors))
    return cfg


def validate_config(cfg: ExperimentConfig) -> list:
    errors = []
    if cfg.experiment not in EXPERIMENTS:
        errors.append(f"experiment: {cfg.experiment!r} not one of {EXPERIMENTS}")
    name = cfg.symbol.get("name")
    if name not in catalog_names():
        errors.append(f"symbol.name: {name!r} not in catalog {catalog_names()}")
    else:
        try:
            get_symbol(name, **cfg.symbol.get("params", {}))
        except TypeError as exc:
            errors.append(f"symbol.params: {exc}")
    if cfg.N < 0:
        errors.append("N: must be >= 0 (0 is the single-mode control)")
    if cfg.budget < 1:
        errors.append("budget: must be positive")
    try:
        if not parse_grid(cfg.nu_grid):
            errors.append("nu_grid: empty")
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"nu_grid: {exc}")
    try:
        if not parse_grid(cfg.omega_grid):
            errors.append("omega_grid: empty")
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"omega_grid: {exc}")
    if cfg.experiment in ("scaling", "timescale"):
        if not cfg.extra.get("certificate") and not cfg.extra.get("waive_certificate"):
            errors.append(
                f"{cfg.experiment}: requires extra.certificate (path to a "
                "passing dynamics record) or extra.waive_certificate: true")
    return errors


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    config_hash: str
    experiment: str
    timestamp: str
    code_version: str
    config: dict
    points: list
    flags: list
    verdicts: dict
    summary: dict

    def metric_payload(self) -> dict:
        """The deterministic part of the record (excludes the timestamp)."""
        return {"config_hash": self.config_hash, "experiment": self.experiment,
                "code_version": self.code_version, "config": self.config,
                "points": self.points, "flags": self.flags,
                "verdicts": self.verdicts, "summary": self.summary}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------

def _operators(cfg: ExperimentConfig):
    sym = get_symbol(cfg.symbol["name"], **cfg.symbol.get("params", {}))
    P = assemble_P(sym, cfg.N, budget=cfg.budget)
    Q = assemble_Q(cfg.N)
    return sym, P, Q


def _forcing(cfg: ExperimentConfig):
    decay = float(cfg.extra.get("forcing_decay", max(2.0, cfg.N / 4.0)))
    return random_smooth_field(cfg.N, decay=decay, seed=cfg.seed)


def _pool_map(jobs, fn, items):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_certificate(cfg: ExperimentConfig):
    path = cfg.extra.get("certificate")
    if not path:
        return None
    with open(path) as fh:
        record = json.load(fh)
    report = record.get("summary", {}).get("report", record)
    same_symbol = (record.get("config", {}).get("symbol") == cfg.symbol
                   or report.get("symbol") == cfg.symbol.get("name"))
    if not same_symbol:
        raise InvalidConfig("certificate: was produced for a different symbol")
    return report if report.get("certified") else None


def _run_dynamics(cfg: ExperimentConfig):
    sym, _, _ = _operators(cfg)
    n_samples = int(cfg.extra.get("n_samples", 400))
    T = float(cfg.extra.get("T", 200.0))
    report = dyn.verify_simple_structure(
        sym, delta=cfg.delta, n_samples=n_samples,
        omega_count=int(cfg.extra.get("omega_count", 5)),
        T=T, seed=cfg.seed, n_jobs=cfg.jobs)
    points = report["per_omega"]
    verdicts = {"simple_structure": report["verdict"]}
    return points, [], verdicts, {"report": report,
                                  "coverage": report.get("coverage", 0.0)}


def _run_la1(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    nus, omegas = parse_grid(cfg.nu_grid), parse_grid(cfg.omega_grid)

    def point(args):
        omega, nu = args
        measured, bound = res.check_la1(P, Q, omega, nu, budget=cfg.budget,
                                        seed=cfg.seed)
        return {"omega": omega, "nu": nu, "measured": measured, "bound": bound,
                "ok": bool(measured <= bound * (1.0 + 1e-10))}

    points = _pool_map(cfg.jobs, point, [(o, n) for n in nus for o in omegas])
    ok = all(p["ok"] for p in points)
    return points, [], {"bound_holds": "pass" if ok else "fail"}, {
        "max_ratio": max(p["measured"] / p["bound"] for p in points)}


def _run_spectrum(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    nus = parse_grid(cfg.nu_grid)
    norm_P = P.norm_upper_bound()
    points, ok = [], True
    for nu in nus:
        vals = res.spectrum_Pnu(P, Q, nu, budget=cfg.budget)
        im_ok = bool(np.all(vals.imag <= -nu + 1e-10))
        re_ok = bool(np.all(np.abs(vals.real) <= norm_P + 1e-10))
        ok = ok and im_ok and re_ok
        points.append({"nu": nu, "n_eigs": int(vals.size),
                       "max_im": float(vals.imag.max()),
                       "max_abs_re": float(np.abs(vals.real).max()),
                       "im_ok": im_ok, "re_ok": re_ok,
                       "eigs_re": vals.real.tolist(),
                       "eigs_im": vals.imag.tolist()})
    return points, [], {"containment": "pass" if ok else "fail"}, {
        "norm_P": norm_P}


def _run_scaling(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    certificate = _load_certificate(cfg)
    scan = res.resolvent_scaling_scan(
        P, Q, parse_grid(cfg.omega_grid), parse_grid(cfg.nu_grid), cfg.s,
        certificate=certificate, budget=cfg.budget, seed=cfg.seed,
        n_jobs=cfg.jobs)
    flags = sorted({f for r in scan["records"] for f in r["flags"]})
    verdict = "n/a"
    if scan["certified"] and np.isfinite(scan["fitted"].get("slope_Hs", np.nan)):
        verdict = ("pass" if scan["fitted"]["slope_Hs"] <= 1.0 / 3.0 + 0.1
                   else "fail")
    return scan["records"], flags, {"slope_within_bound": verdict}, {
        "fitted": scan["fitted"], "s": cfg.s}


def _run_decomposition(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    f = _forcing(cfg)
    nus = parse_grid(cfg.nu_grid)
    ts = parse_grid(cfg.extra.get("t_grid", {"values": [1.0, 10.0]}))
    points, worst = [], 0.0
    for nu in nus:
        dec = evo.Decomposer(P, Q, nu, f, delta=cfg.delta, budget=cfg.budget)
        for t in ts:
            r = dec.at_time(t)
            u_direct = evo.propagate(P, Q, nu, f, t=t, budget=cfg.budget)
            err = (np.linalg.norm(r.u_nu_t.flat - u_direct.flat)
                   / max(np.linalg.norm(u_direct.flat), 1e-300))
            worst = max(worst, float(err))
            points.append({"nu": nu, "t": t, "identity_rel_err": float(err),
                           "norm_e_Hm06": r.norms["e"]["Hm06"],
                           "norm_b_L2": r.norms["b"]["L2"],
                           "norm_u_inf_Hm06": r.norms["u_inf"]["Hm06"]})
    verdict = "pass" if worst <= 1e-8 else "fail"
    return points, [], {"identity": verdict}, {"max_identity_rel_err": worst}


def _run_timescale(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    certificate = _load_certificate(cfg)
    flags = [] if certificate else ["hypothesis-unverified"]
    f = _forcing(cfg)
    scan = evo.timescale_scan(
        P, Q, f, float(cfg.extra.get("delta1", 0.15)), parse_grid(cfg.nu_grid),
        s=cfg.s, delta=cfg.delta,
        filter_forcing=bool(cfg.extra.get("filter_forcing", False)),
        points_per_decade=int(cfg.t_spec.get("points_per_decade", 16)),
        t_min=float(cfg.t_spec.get("t_min", 0.5)),
        t_max=cfg.t_spec.get("t_max"), budget=cfg.budget)
    delta2 = scan["fits"]["delta2"]
    verdict = "pass" if np.isfinite(delta2) and delta2 > 0 else "fail"
    summary = {"fits": scan["fits"], "window_sup_u0": scan["window_sup_u0"],
               "window_sup_stationary": scan["window_sup_stationary"]}
    return scan["records"], flags, {"remainder_decays": verdict}, summary


def _run_limiting(cfg: ExperimentConfig):
    _, P, Q = _operators(cfg)
    f = _forcing(cfg)
    omegas = parse_grid(cfg.omega_grid)
    nus = parse_grid(cfg.nu_grid)
    points, ok = [], True
    for omega in omegas:
        limit, info = res.limiting_resolvent(P, omega, f, nus, s=cfg.s,
                                             budget=cfg.budget,
                                             full_output=True)
        monotone = bool(np.all(np.diff(info["increments"]) < 0))
        ok = ok and monotone
        points.append({"omega": omega, "increments": info["increments"],
                       "alpha": info["alpha"], "gap": info["gap"],
                       "limit_norm_Hs": float(sobolev_norm(limit, cfg.s))})
    return points, [], {"cauchy": "pass" if ok else "fail"}, {}


_RUNNERS = {
    "dynamics": _run_dynamics,
    "la1": _run_la1,
    "spectrum": _run_spectrum,
    "scaling": _run_scaling,
    "decomposition": _run_decomposition,
    "timescale": _run_timescale,
    "limiting": _run_limiting,
}


# ---------------------------------------------------------------------------
# Running and persistence
# ---------------------------------------------------------------------------

def run(cfg: ExperimentConfig, persist: bool = True) -> ResultRecord:
    """Run one experiment config; persist CSV/JSON artifacts; return the record."""
    errors = validate_config(cfg)
    if errors:
        raise InvalidConfig("; ".join(errors))
    points, flags, verdicts, summary = _RUNNERS[cfg.experiment](cfg)
    record = ResultRecord(
        config_hash=cfg.config_hash(),
        experiment=cfg.experiment,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        code_version=__version__,
        config=cfg.canonical(),
        points=_jsonable(points),
        flags=list(flags),
        verdicts=dict(verdicts),
        summary=_jsonable(summary),
    )
    if persist:
        persist_record(record, Path(cfg.output_dir))
    return record


def persist_record(record: ResultRecord, output_dir: Path) -> Path:
    run_dir = Path(output_dir) / f"{record.experiment}-{record.config_hash}"
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "record.json", "w") as fh:
        json.dump(_jsonable(record.metric_payload()), fh, indent=2, sort_keys=True)
    with open(run_dir / "run_meta.json", "w") as fh:
        json.dump({"timestamp": record.timestamp,
                   "code_version": record.code_version}, fh, indent=2)
    _write_points_csv(record, run_dir / "points.csv")
    return run_dir


def _scalar_columns(points: list) -> list:
    cols = []
    for p in points:
        for k, v in p.items():
            if isinstance(v, (int, float, bool, np.floating, np.integer)) \
                    and k not in cols:
                cols.append(k)
    return cols


def _write_points_csv(record: ResultRecord, path: Path):
    cols = _scalar_columns(record.points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for p in record.points:
            w.writerow([_csv_cell(p.get(c)) for c in cols])


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def emit_plot_data(record: ResultRecord, kind: str,
                   output_dir: Optional[Path] = None) -> list:
    """Write plot-ready CSVs for a record; raises MissingMetric when the
    record lacks the metrics the kind requires."""
    out = Path(output_dir) if output_dir else \
        Path(record.config["output_dir"]) / f"{record.experiment}-{record.config_hash}"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if kind == "scaling":
        need = {"omega", "nu", "norm_Hs"}
        if not record.points or not need <= set(record.points[0]):
            raise MissingMetric(f"plot kind {kind!r} needs columns {sorted(need)}")
        path = out / "scaling_loglog.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "log10_inv_nu", "log10_norm_Hs",
                        "log10_norm_L2_to_Hs"])
            for p in record.points:
                w.writerow([p["omega"], np.log10(1.0 / p["nu"]),
                            np.log10(p["norm_Hs"]),
                            np.log10(p["norm_L2_to_Hs"])])
        written.append(path)
    elif kind == "timescale":
        need = {"nu", "t", "norm_e_s"}
        if not record.points or not need <= set(record.points[0]):
            raise MissingMetric(f"plot kind {kind!r} needs columns {sorted(need)}")
        nus = sorted({p["nu"] for p in record.points})
        for j, nu in enumerate(nus):
            path = out / f"timescale_nu{j}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "norm_e_s", "norm_b_L2", "norm_u_minus_u0_s"])
                for p in record.points:
                    if p["nu"] == nu:
                        w.writerow([p["t"], p["norm_e_s"], p["norm_b_L2"],
                                    p.get("norm_u_minus_u0_s")])
            written.append(path)
    elif kind == "spectrum":
        if not record.points or "eigs_re" not in record.points[0]:
            raise MissingMetric("plot kind 'spectrum' needs eigenvalue lists")
        for j, p in enumerate(record.points):
            path = out / f"spectrum_nu{j}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["re", "im"])
                for a, b in zip(p["eigs_re"], p["eigs_im"]):
                    w.writerow([a, b])
            written.append(path)
    else:
        raise MissingMetric(f"unknown plot kind {kind!r}")
    return written


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscwave",
                                 description="Viscous internal-wave workbench")
    sub = ap.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config")
    run_p.add_argument("--output-dir", default=None)
    run_p.add_argument("--jobs", type=int, default=None)
    run_p.add_argument("--budget", type=int, default=None)
    run_p.add_argument("--strict", action="store_true",
                       help="exit 3 when an acceptance verdict fails")
    sub.add_parser("catalog", help="list the symbol catalog")
    ver_p = sub.add_parser("verify", help="validate a config without running")
    ver_p.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "catalog":
        for name in catalog_names():
            sym = get_symbol(name)
            print(f"{name}: defaults {sym.params}")
        return 0
    try:
        cfg = load_config(args.config)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "verify":
        print(f"config ok: experiment={cfg.experiment} hash={cfg.config_hash()}")
        return 0
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.budget is not None:
        cfg.budget = args.budget
    try:
        record = run(cfg)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ViscwaveError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    for name, verdict in record.verdicts.items():
        print(f"{name}: {verdict}")
    if args.strict and any(v == "fail" for v in record.verdicts.values()):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
