"""Versioned JSON configuration documents.

Rates are in s^-1, lengths in m, energies in J, times in s. Frequency-like
fields carry a unit suffix: ``_rad_s`` for angular frequencies and ``_hz`` for
ordinary ones, converted with a factor 2 pi at load time.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from xpmsim.atomic import AtomicParams, Detunings
from xpmsim.cavity import CavityParams, MediumParams
from xpmsim.doppler import DEFAULT_GROUPS, METHODS, MODES, DopplerSpec
from xpmsim.engine import HOMODYNE_WEIGHTINGS, ExperimentConfig, PulseSpec
from xpmsim.errors import ConfigIOError, ConfigParseError, ConfigValidationError

SCHEMA_VERSION = 1
TWO_PI = 2.0 * math.pi

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _section(props: dict, **extra) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **extra}


_pulse = _section({"energy": _nonneg, "duration": _pos, "delay": _nonneg, "edge_time": _nonneg})

SCHEMA: dict = _section({
    "schema_version": {"type": "integer", "const": SCHEMA_VERSION},
    "label": {"type": "string"},
    "atomic": _section({
        "gamma1": _nonneg, "gamma2": _nonneg, "gamma0": _nonneg,
        "Gamma10": _nonneg, "Gamma21": _nonneg,
        "mu10": _pos, "mu21": _pos, "lambda_c": _pos, "lambda_p": _pos,
    }),
    "cavity": _section({
        "length": _pos,
        "r_mirror": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "t_mirror": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "waist": _pos,
    }),
    "medium": _section({"density": _nonneg, "doppler_fwhm_hz": _nonneg}),
    "control_pulse": _pulse,
    "probe_pulse": _pulse,
    "detunings": _section(
        {"Delta_rad_s": _num, "Delta_hz": _num, "delta_rad_s": _num, "delta_hz": _num},
        allOf=[
            {"not": {"required": ["Delta_rad_s", "Delta_hz"]}},
            {"not": {"required": ["delta_rad_s", "delta_hz"]}},
        ],
    ),
    "doppler": _section({
        "mode": {"enum": list(MODES)},
        "n_groups": {"type": "integer", "minimum": 1},
        "method": {"enum": list(METHODS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    }),
    "integrator": _section({"dt": _pos, "t_end": _pos, "exact_exponential": {"type": "boolean"}}),
    "acquisition": _section({
        "time": _nonneg,
        "homodyne_weighting": {"enum": list(HOMODYNE_WEIGHTINGS)},
    }),
    "control_phase_enabled": {"type": "boolean"},
})

BUNDLED = resources.files("xpmsim") / "configs"


def resolve_path(path: str | Path) -> Path:
    """Return ``path`` if it exists, else the bundled file of that name."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (BUNDLED / str(path), BUNDLED / p.name, BUNDLED / "scenarios" / p.name):
        if candidate.is_file():
            return Path(str(candidate))
    return p


def read_json(path: str | Path) -> Any:
    p = resolve_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: malformed JSON ({exc})") from exc


def _error_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        allowed = set(error.schema.get("properties", {}))
        extra = sorted(k for k in error.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
    return ".".join(parts)


def validate_document(doc: Any) -> None:
    if not isinstance(doc, dict):
        raise ConfigValidationError("", "configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigValidationError(_error_path(err), err.message)


def _angular(section: dict, name: str, default: float) -> float:
    if f"{name}_rad_s" in section:
        return float(section[f"{name}_rad_s"])
    if f"{name}_hz" in section:
        return TWO_PI * float(section[f"{name}_hz"])
    return default


def _build(section_name: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigValidationError:
        raise
    except ValueError as exc:
        raise ConfigValidationError(section_name, str(exc)) from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a configuration document and apply defaults for omitted fields."""
    validate_document(doc)
    base = ExperimentConfig()

    def merged(name: str, obj) -> dict:
        values = dict(vars(obj))
        values.update(doc.get(name, {}))
        return values

    atomic = _build("atomic", AtomicParams, **merged("atomic", base.atomic))
    cavity = _build("cavity", CavityParams, **merged("cavity", base.cavity))
    med = doc.get("medium", {})
    medium = _build("medium", MediumParams,
                    density=float(med.get("density", base.medium.density)),
                    doppler_fwhm=float(med.get("doppler_fwhm_hz", base.medium.doppler_fwhm)))
    control = _build("control_pulse", PulseSpec, **merged("control_pulse", base.control_pulse))
    probe = _build("probe_pulse", PulseSpec, **merged("probe_pulse", base.probe_pulse))
    det = doc.get("detunings", {})
    detunings = _build("detunings", Detunings,
                       Delta=_angular(det, "Delta", base.detunings.Delta),
                       delta=_angular(det, "delta", base.detunings.delta))
    dop = dict(doc.get("doppler", {}))
    method = dop.get("method", base.doppler.method)
    dop.setdefault("n_groups", DEFAULT_GROUPS[method])
    doppler = _build("doppler", DopplerSpec, **{**vars(base.doppler), **dop})
    integ = doc.get("integrator", {})
    acq = doc.get("acquisition", {})
    return _build(
        "", ExperimentConfig,
        atomic=atomic, cavity=cavity, medium=medium, control_pulse=control, probe_pulse=probe,
        detunings=detunings, doppler=doppler,
        dt=float(integ.get("dt", base.dt)),
        t_end=float(integ.get("t_end", base.t_end)),
        exact_exponential=bool(integ.get("exact_exponential", base.exact_exponential)),
        acquisition_time=float(acq.get("time", base.acquisition_time)),
        homodyne_weighting=acq.get("homodyne_weighting", base.homodyne_weighting),
        control_phase_enabled=bool(doc.get("control_phase_enabled", base.control_phase_enabled)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    return config_from_dict(read_json(path))


def config_to_dict(config: ExperimentConfig, label: str = "") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "label": label,
        "atomic": dict(vars(config.atomic)),
        "cavity": dict(vars(config.cavity)),
        "medium": {"density": config.medium.density,
                   "doppler_fwhm_hz": config.medium.doppler_fwhm},
        "control_pulse": dict(vars(config.control_pulse)),
        "probe_pulse": dict(vars(config.probe_pulse)),
        "detunings": {"Delta_rad_s": config.detunings.Delta,
                      "delta_rad_s": config.detunings.delta},
        "doppler": {"mode": config.doppler.mode, "n_groups": int(config.doppler.n_groups),
                    "method": config.doppler.method, "seed": int(config.doppler.seed)},
        "integrator": {"dt": config.dt, "t_end": config.t_end,
                       "exact_exponential": config.exact_exponential},
        "acquisition": {"time": config.acquisition_time,
                        "homodyne_weighting": config.homodyne_weighting},
        "control_phase_enabled": config.control_phase_enabled,
    }


def write_config(config: ExperimentConfig, path: str | Path | None = None, label: str = "") -> dict:
    doc = config_to_dict(config, label)
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(config, doppler=replace(config.doppler, seed=int(seed)))
