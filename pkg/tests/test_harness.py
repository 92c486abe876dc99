import hashlib
import json

import numpy as np
import pytest

from viscwave import harness
from viscwave.errors import InvalidConfig, MissingMetric
from viscwave.harness import (ExperimentConfig, config_from_dict, emit_plot_data,
                              load_config, main, parse_grid, run)


def file_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_parse_grid_forms():
    assert parse_grid({"values": [1, 2]}) == [1.0, 2.0]
    assert parse_grid({"start": 0.1, "ratio": 0.5, "count": 3}) == [0.1, 0.05, 0.025]
    lin = parse_grid({"start": 0.0, "stop": 1.0, "num": 3, "spacing": "linear"})
    assert lin == [0.0, 0.5, 1.0]
    log = parse_grid({"start": 1e-3, "stop": 1e-1, "num": 3})
    assert log[1] == pytest.approx(1e-2)


def test_config_validation_messages():
    with pytest.raises(InvalidConfig) as err:
        config_from_dict({"experiment": "bogus", "symbol": {"name": "nope"},
                          "N": -2, "nu_grid": {"values": []}})
    msg = str(err.value)
    assert "experiment" in msg and "symbol.name" in msg
    assert "N:" in msg and "nu_grid" in msg


def test_scaling_requires_certificate_or_waiver():
    with pytest.raises(InvalidConfig) as err:
        config_from_dict({"experiment": "scaling"})
    assert "certificate" in str(err.value)
    cfg = config_from_dict({"experiment": "scaling",
                            "extra": {"waive_certificate": True}})
    assert cfg.extra["waive_certificate"]


def test_la1_toy_record(tmp_path):
    cfg = config_from_dict({
        "experiment": "la1",
        "symbol": {"name": "free", "params": {}},
        "N": 0,
        "nu_grid": {"values": [0.1, 0.01]},
        "omega_grid": {"values": [0.0]},
        "output_dir": str(tmp_path),
    })
    record = run(cfg)
    assert record.verdicts["bound_holds"] == "pass"
    for p in record.points:
        assert p["measured"] == pytest.approx(p["bound"], rel=1e-12)
    assert (tmp_path / f"la1-{cfg.config_hash()}" / "points.csv").exists()


def test_dynamics_free_fails(tmp_path):
    cfg = config_from_dict({
        "experiment": "dynamics",
        "symbol": {"name": "free", "params": {}},
        "N": 2,
        "extra": {"n_samples": 50, "T": 50.0, "omega_count": 2},
        "output_dir": str(tmp_path),
    })
    record = run(cfg)
    assert record.verdicts["simple_structure"] == "fail"
    assert record.summary["coverage"] == 0.0


def test_rerun_is_bitwise_identical(tmp_path):
    raw = {
        "experiment": "spectrum",
        "symbol": {"name": "shear", "params": {"eps": 0.3}},
        "N": 4,
        "nu_grid": {"values": [0.05]},
        "output_dir": str(tmp_path / "a"),
        "seed": 3,
    }
    rec1 = run(config_from_dict(raw))
    d1 = tmp_path / "a" / f"spectrum-{rec1.config_hash}"
    h_rec = file_hash(d1 / "record.json")
    h_csv = file_hash(d1 / "points.csv")
    rec2 = run(config_from_dict(raw))
    assert file_hash(d1 / "record.json") == h_rec
    assert file_hash(d1 / "points.csv") == h_csv
    assert rec1.points == rec2.points


def test_scaling_flags_without_certificate(tmp_path):
    cfg = config_from_dict({
        "experiment": "scaling",
        "symbol": {"name": "free", "params": {}},
        "N": 0,
        "nu_grid": {"values": [0.1, 0.05, 0.025]},
        "omega_grid": {"values": [0.0]},
        "extra": {"waive_certificate": True},
        "output_dir": str(tmp_path),
    })
    record = run(cfg)
    assert "hypothesis-unverified" in record.flags
    assert record.verdicts["slope_within_bound"] == "n/a"


def test_certificate_pipeline(tmp_path):
    dyn_cfg = config_from_dict({
        "experiment": "dynamics",
        "symbol": {"name": "shear", "params": {"eps": 0.3}},
        "N": 2,
        "extra": {"n_samples": 120, "T": 150.0, "omega_count": 2},
        "output_dir": str(tmp_path),
        "seed": 5,
    })
    dyn_rec = run(dyn_cfg)
    assert dyn_rec.verdicts["simple_structure"] == "pass"
    cert_path = tmp_path / f"dynamics-{dyn_rec.config_hash}" / "record.json"

    scal_cfg = config_from_dict({
        "experiment": "scaling",
        "symbol": {"name": "shear", "params": {"eps": 0.3}},
        "N": 6,
        "nu_grid": {"values": [0.4, 0.2, 0.1]},
        "omega_grid": {"values": [0.0]},
        "extra": {"certificate": str(cert_path)},
        "output_dir": str(tmp_path),
    })
    scal_rec = run(scal_cfg)
    assert "hypothesis-unverified" not in scal_rec.flags


def test_emit_plot_data(tmp_path):
    cfg = config_from_dict({
        "experiment": "spectrum",
        "symbol": {"name": "shear", "params": {}},
        "N": 3,
        "nu_grid": {"values": [0.1, 0.05]},
        "output_dir": str(tmp_path),
    })
    record = run(cfg)
    files = emit_plot_data(record, "spectrum", tmp_path / "plots")
    assert len(files) == 2
    header = (tmp_path / "plots" / "spectrum_nu0.csv").read_text().splitlines()[0]
    assert header == "re,im"
    with pytest.raises(MissingMetric):
        emit_plot_data(record, "scaling", tmp_path / "plots")
    empty = harness.ResultRecord(
        config_hash="x", experiment="spectrum", timestamp="", code_version="",
        config=record.config, points=[], flags=[], verdicts={}, summary={})
    with pytest.raises(MissingMetric):
        emit_plot_data(empty, "spectrum", tmp_path / "plots")


def test_cli_roundtrip(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "experiment": "la1",
        "symbol": {"name": "free", "params": {}},
        "N": 0,
        "nu_grid": {"values": [0.1]},
        "omega_grid": {"values": [0.0]},
    }))
    assert main(["verify", str(cfg_path)]) == 0
    assert main(["run", str(cfg_path), "--output-dir", str(tmp_path / "out"),
                 "--strict"]) == 0
    out = capsys.readouterr().out
    assert "bound_holds: pass" in out

    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "shear" in out and "free" in out and "two-param" in out


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    assert main(["verify", str(missing)]) == 2


def test_cli_strict_verdict_exit_code(tmp_path, capsys):
    cfg_path = tmp_path / "dyn.json"
    cfg_path.write_text(json.dumps({
        "experiment": "dynamics",
        "symbol": {"name": "free", "params": {}},
        "N": 2,
        "extra": {"n_samples": 40, "T": 40.0, "omega_count": 2},
        "output_dir": str(tmp_path / "out"),
    }))
    assert main(["run", str(cfg_path), "--strict"]) == 3
    assert main(["run", str(cfg_path)]) == 0
