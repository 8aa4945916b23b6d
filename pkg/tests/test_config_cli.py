import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpmsim.cli import CSV_HEADER, main
from xpmsim.config import (
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    validate_document,
    write_config,
)
from xpmsim.engine import ExperimentConfig
from xpmsim.errors import ConfigValidationError

FAST = {
    "doppler": {"mode": "residual", "n_groups": 3},
    "integrator": {"dt": 4e-12, "t_end": 1.2e-7},
    "acquisition": {"time": 1e-7},
}


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(FAST))
    return path


def test_empty_document_gives_defaults():
    assert config_from_dict({}) == ExperimentConfig()


def test_round_trip_is_exact():
    cfg = config_from_dict(FAST)
    assert config_from_dict(config_to_dict(cfg)) == cfg
    assert config_hash(config_from_dict(config_to_dict(cfg))) == config_hash(cfg)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1e18), st.floats(-1e9, 1e9), st.integers(1, 64),
       st.sampled_from(["off", "free", "residual"]), st.integers(0, 2**63))
def test_round_trip_property(N, delta, n, mode, seed):
    doc = {"medium": {"density": N}, "detunings": {"delta_rad_s": delta},
           "doppler": {"mode": mode, "n_groups": n, "seed": seed}}
    cfg = config_from_dict(doc)
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


def test_hz_fields_are_converted():
    cfg = config_from_dict({"detunings": {"Delta_hz": -800e6, "delta_hz": 1e6}})
    assert cfg.detunings.Delta == pytest.approx(-2 * math.pi * 800e6)
    assert cfg.detunings.delta == pytest.approx(2 * math.pi * 1e6)


def test_default_group_count_follows_method():
    assert config_from_dict({"doppler": {"method": "monte_carlo"}}).doppler.n_groups == 256
    assert config_from_dict({"doppler": {"method": "quadrature"}}).doppler.n_groups == 24


@pytest.mark.parametrize("doc, path", [
    ({"integrator": {"dt": 0}}, "integrator.dt"),
    ({"cavity": {"r_mirror": 1.5}}, "cavity.r_mirror"),
    ({"cavity": {"colour": "red"}}, "cavity.colour"),
    ({"bogus": 1}, "bogus"),
    ({"doppler": {"mode": "sideways"}}, "doppler.mode"),
    ({"detunings": {"delta_hz": 1, "delta_rad_s": 2}}, "detunings"),
    ({"schema_version": 2}, "schema_version"),
    ({"integrator": {"t_end": 1e-8}}, "integrator.t_end"),
])
def test_validation_names_the_field(doc, path):
    with pytest.raises(ConfigValidationError) as exc:
        config_from_dict(doc)
    assert exc.value.path == path
    assert str(exc.value).startswith(path)


def test_non_object_rejected():
    with pytest.raises(ConfigValidationError):
        validate_document([1, 2])


def test_bundled_configs_load():
    for name in ("paper_fig5.json", "paper_fig6.json"):
        cfg = load_config(name)
        assert cfg.doppler.mode == "residual"
        assert cfg.doppler.method == "quadrature"
    assert load_config("paper_fig5.json").acquisition_time == pytest.approx(100e-9)
    assert load_config("paper_fig6.json").acquisition_time == pytest.approx(350e-9)


def test_exit_codes(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "missing.json")]) == 10
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 11
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"integrator": {"dt": 0}}))
    assert main(["validate", str(invalid)]) == 12
    assert "integrator.dt" in capsys.readouterr().err
    blow = tmp_path / "blow.json"
    blow.write_text(json.dumps({"doppler": {"mode": "off"}, "integrator": {"dt": 1e-9},
                                "detunings": {"Delta_hz": -8e9}}))
    assert main(["run", str(blow), "--out", str(tmp_path / "o")]) == 20
    assert "t =" in capsys.readouterr().err
    assert main(["validate", "paper_fig5.json"]) == 0


def test_run_writes_bundle_and_reruns_identically(fast_config, tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(fast_config), "--out", str(out), "--seed", "5"]) == 0
    text = (out / "timeseries.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    cfg = load_config(fast_config)
    assert len(lines) == cfg.n_steps + 2
    summary = json.loads((out / "summary.json").read_text())
    for key in ("peak_phase_rad", "phase_at_acquisition_rad", "optimal_acquisition_time_s",
                "photons_in_control_pulse", "phase_per_photon_rad", "diagnostics"):
        assert key in summary
    prov = summary["provenance"]
    assert prov["seed"] == 5
    assert prov["config_hash"] == config_hash(load_config(out / prov["config_file"]))
    # re-execute from the recorded config: byte-identical outputs
    again = tmp_path / "again"
    assert main(["run", str(out / prov["config_file"]), "--out", str(again)]) == 0
    assert (again / "timeseries.csv").read_text() == text
    assert (again / "summary.json").read_text() == (out / "summary.json").read_text()


def test_masked_phase_is_blank_in_csv(fast_config, tmp_path):
    out = tmp_path / "run"
    main(["run", str(fast_config), "--out", str(out)])
    with open(out / "timeseries.csv") as fh:
        rows = list(csv.DictReader(fh))
    # the probe has not entered the cavity at t = 0
    assert rows[0]["delta_phi_rad"] == ""
    assert all(r["t_s"] != "" for r in rows)


def test_thread_env_does_not_change_output(fast_config, tmp_path, monkeypatch):
    main(["run", str(fast_config), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("XPM_THREADS", "2")
    main(["run", str(fast_config), "--out", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "timeseries.csv").read_bytes()
            == (tmp_path / "b" / "timeseries.csv").read_bytes())


def test_sweep_writes_one_row_per_value(fast_config, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", str(fast_config), "--param", "delta", "--from=-1e8", "--to=1e8",
                 "--steps", "5", "--doppler-mode", "off", "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "delta_rad_s,phase_rad"
    assert len(rows) == 6
    phases = np.array([float(r.split(",")[1]) for r in rows[1:]])
    summary = json.loads((out / "summary.json").read_text())
    i = int(np.argmax(np.abs(phases)))
    assert summary["phase_star_rad"] == phases[i]
    assert summary["delta_star_rad_s"] == pytest.approx(-1e8 + 5e7 * i)
    assert summary["doppler_mode"] == "off"


def test_negative_exponent_bounds_are_values():
    from xpmsim.cli import _join_numeric_values, build_parser

    args = build_parser().parse_args(_join_numeric_values(
        ["sweep", "c.json", "--param", "delta", "--from", "-2e8", "--to", "-1e8", "--steps", "3"]))
    assert (args.start, args.stop, args.steps) == (-2e8, -1e8, 3)


def test_sweep_rejects_bad_steps(fast_config, tmp_path):
    assert main(["sweep", str(fast_config), "--param", "delta", "--from", "0", "--to", "1",
                 "--steps", "0", "--out", str(tmp_path)]) == 12


def test_scale(tmp_path, capsys):
    assert main(["scale", "sec6.json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["qv_enhancement"] == pytest.approx(31.62, rel=1e-3)
    assert report["projected_phase_rad"] == pytest.approx(9.49e-6, rel=1e-3)
    out = tmp_path / "scale.json"
    assert main(["scale", "sec6.json", "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == report
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"new_length": -1}))
    assert main(["scale", str(bad)]) == 12
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["scale", str(bad)]) == 12


def test_write_config_labels(tmp_path):
    doc = write_config(ExperimentConfig(), tmp_path / "c.json", label="x")
    assert json.loads((tmp_path / "c.json").read_text()) == doc
    assert doc["label"] == "x" and doc["schema_version"] == 1
    assert replace(ExperimentConfig(), dt=1e-12) != ExperimentConfig()
