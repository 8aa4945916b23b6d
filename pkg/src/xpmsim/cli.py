"""Command-line entry point ``xpm``.

Exit codes: 0 ok, 10 I/O, 11 parse, 12 validation, 20 numerical blow-up.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from xpmsim import __version__
from xpmsim.config import (
    config_hash,
    load_config,
    read_json,
    with_seed,
    write_config,
)
from xpmsim.design import ScalingScenario, projection_report
from xpmsim.engine import (
    SWEEP_PARAMS,
    ExperimentConfig,
    RunResult,
    calibrate,
    resolve_threads,
    simulate,
    sweep,
    with_doppler_mode,
)
from xpmsim.errors import ConfigIOError, ConfigValidationError, XpmError

log = logging.getLogger("xpmsim")

CSV_HEADER = "t_s,pop1,pop2,Ec_mag,Ep_mag,Ep_out_mag,delta_phi_rad,homodyne_norm"
SWEEP_UNITS = {"delta": "rad_s", "Delta": "rad_s", "control_energy": "J"}


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else f"{x:.17g}"


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    return value


def write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n", encoding="utf-8")


def write_timeseries(path: Path, result: RunResult) -> None:
    columns = [getattr(result, name) for name in RunResult.SERIES]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in zip(*(c.tolist() for c in columns)):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def provenance(config: ExperimentConfig) -> dict:
    return {
        "config_hash": config_hash(config),
        "config_file": "config.json",
        "seed": int(config.doppler.seed),
        "tool_version": __version__,
    }


def _prepare_out(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigIOError(f"cannot create {out}: {exc}") from exc
    return out


def run_command(config: ExperimentConfig, out_dir: str | Path, threads: int | None = None,
                label: str = "") -> dict:
    """Simulate and write ``timeseries.csv``, ``summary.json`` and ``config.json``."""
    out = _prepare_out(out_dir)
    result = simulate(config, threads)
    write_config(config, out / "config.json", label)
    write_timeseries(out / "timeseries.csv", result)
    doc = {"label": label, **result.summary.to_dict(), "diagnostics": result.diagnostics,
           "provenance": provenance(config)}
    write_json(out / "summary.json", doc)
    return {"timeseries": out / "timeseries.csv", "summary": out / "summary.json",
            "provenance": doc["provenance"]}


def sweep_command(config: ExperimentConfig, param: str, values, out_dir: str | Path,
                  threads: int | None = None, label: str = "") -> dict:
    out = _prepare_out(out_dir)
    res = sweep(config, param, values, threads)
    column = f"{param}_{SWEEP_UNITS[param]}"
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{column},phase_rad\n")
        for v, ph in zip(res.values, res.phases):
            fh.write(f"{_fmt(v)},{_fmt(ph)}\n")
    write_config(config, out / "config.json", label)
    doc = {
        "label": label,
        "param": param,
        f"{param}_star_{SWEEP_UNITS[param]}": res.best_value,
        "phase_star_rad": res.best_phase,
        "acquisition_time_s": config.acquisition_time,
        "doppler_mode": config.doppler.mode,
        "provenance": provenance(config),
    }
    write_json(out / "summary.json", doc)
    return {"sweep": out / "sweep.csv", "summary": out / "summary.json", "result": res}


def scale_command(scenario_path: str | Path, out: str | Path | None = None) -> dict:
    doc = read_json(scenario_path)
    if not isinstance(doc, dict):
        raise ConfigValidationError("", "scenario must be a JSON object")
    doc = {k: v for k, v in doc.items() if k not in ("label", "schema_version")}
    try:
        scenario = ScalingScenario(**doc)
    except TypeError as exc:
        raise ConfigValidationError("", str(exc)) from exc
    except ValueError as exc:
        raise ConfigValidationError("", str(exc)) from exc
    report = projection_report(scenario)
    if out is not None:
        write_json(Path(out), report)
    return report


def validate_command(path: str | Path) -> int:
    load_config(path)
    return 0


def _linspace(args) -> np.ndarray:
    if args.steps < 1:
        raise ConfigValidationError("steps", "must be >= 1")
    return np.linspace(args.start, args.stop, args.steps)


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = with_seed(config, args.seed)
    if getattr(args, "doppler_mode", None):
        config = with_doppler_mode(config, args.doppler_mode)
    return config


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xpm", description="Cavity cross-phase modulation simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--out", default="xpm_out")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--doppler-mode", choices=("off", "free", "residual"))

    common(sub.add_parser("run", help="simulate one configuration"))

    p = sub.add_parser("sweep", help="sweep one parameter")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)

    p = sub.add_parser("scale", help="project single-photon phase for a scaling scenario")
    p.add_argument("scenario")
    p.add_argument("--out")

    p = sub.add_parser("validate", help="check a configuration file")
    p.add_argument("config")

    p = sub.add_parser("calibrate", help="fit delta and the metastable density to a target phase")
    p.add_argument("config")
    p.add_argument("--target", type=float, default=5e-3)
    p.add_argument("--from", dest="start", type=float, default=-2e8)
    p.add_argument("--to", dest="stop", type=float, default=2e8)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--write", help="write the calibrated configuration here")
    return ap


def _join_numeric_values(argv: list[str]) -> list[str]:
    """Rewrite ``--from -2e8`` as ``--from=-2e8``.

    argparse only recognises plain negative numbers such as ``-2`` or ``-0.5``
    as values, not exponent forms.
    """
    out: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in ("--from", "--to") and i + 1 < len(argv):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
            continue
        out.append(arg)
        i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_numeric_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            bundle = run_command(_load(args), args.out, resolve_threads(args.threads))
            print(f"wrote {bundle['timeseries']} and {bundle['summary']}")
        elif args.command == "sweep":
            bundle = sweep_command(_load(args), args.param, _linspace(args), args.out,
                                   resolve_threads(args.threads))
            res = bundle["result"]
            print(f"{args.param}* = {res.best_value:.6g}, phase = {res.best_phase:.6g} rad")
        elif args.command == "scale":
            report = scale_command(args.scenario, args.out)
            if args.out is None:
                print(json.dumps(report, indent=2))
        elif args.command == "validate":
            validate_command(args.config)
            print(f"{args.config}: ok")
        elif args.command == "calibrate":
            config = load_config(args.config)
            delta, N, cal = calibrate(config, _linspace(args), args.target,
                                      resolve_threads(args.threads))
            print(json.dumps({"delta_star_rad_s": delta, "density": N}, indent=2))
            if args.write:
                write_config(cal, args.write, label="calibrated")
    except XpmError as exc:
        print(f"xpm: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
