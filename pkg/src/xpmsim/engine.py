"""Full cross-phase modulation runs: pulses, per-group integration, observables.

Each velocity group is an independent atom + two-field system. The probe
phase shift is measured against a paired run with the control input switched
off, and observables are averaged over the velocity ensemble.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from xpmsim import _kernel
from xpmsim.atomic import POPULATION_TOL, COHERENCE_TOL, AtomicParams, Detunings
from xpmsim.cavity import (
    CavityParams,
    MediumParams,
    angular_frequency,
    empty_cavity_steady_state,
    energy_to_photons,
    mode_volume,
    peak_field_from_pulse,
    photon_number,
    round_trip_time,
    source_coefficient,
)
from xpmsim.doppler import (
    DEFAULT_GROUPS,
    DopplerSpec,
    EnsembleAccumulator,
    VelocityGroup,
    sample_velocities,
    shifted_detunings,
)
from xpmsim.errors import ConfigValidationError, NumericalBlowupError

log = logging.getLogger(__name__)

PHASE_MASK = 1e-6
TRACE_TOL = 1e-12
HOMODYNE_WEIGHTINGS = ("intensity", "amplitude")

# Pinned by the calibration procedure (see README, "Calibration").
DEFAULT_DENSITY = 9.2308e16  # m^-3
DEFAULT_DELTA = -7.5e7  # rad/s
DEFAULT_DELTA_LARGE = -2.0 * math.pi * 800e6


@dataclass(frozen=True)
class PulseSpec:
    """Flat-top pulse with raised-cosine edges; times in s, energy in J."""

    energy: float
    duration: float
    delay: float = 0.0
    edge_time: float = 2e-9

    def __post_init__(self):
        if not (math.isfinite(self.energy) and self.energy >= 0):
            raise ValueError("energy must be >= 0")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError("duration must be > 0")
        if not math.isfinite(self.delay):
            raise ValueError("delay must be finite")
        if not (0 <= self.edge_time <= self.duration / 2):
            raise ValueError("edge_time must lie in [0, duration/2]")

    @property
    def end(self) -> float:
        return self.delay + self.duration

    @property
    def effective_duration(self) -> float:
        """Duration of the flat-top pulse with the same energy as the shaped one."""
        # each amplitude raised-cosine edge carries 3/8 of the flat-top energy
        return self.duration - 1.25 * self.edge_time


def _default_control() -> PulseSpec:
    return PulseSpec(energy=4.5e-15, duration=30e-9)


def _default_probe() -> PulseSpec:
    return PulseSpec(energy=1e-17, duration=60e-9)


@dataclass(frozen=True)
class ExperimentConfig:
    atomic: AtomicParams = field(default_factory=AtomicParams)
    cavity: CavityParams = field(default_factory=CavityParams)
    medium: MediumParams = field(default_factory=lambda: MediumParams(density=DEFAULT_DENSITY))
    control_pulse: PulseSpec = field(default_factory=_default_control)
    probe_pulse: PulseSpec = field(default_factory=_default_probe)
    detunings: Detunings = field(
        default_factory=lambda: Detunings(DEFAULT_DELTA_LARGE, DEFAULT_DELTA))
    doppler: DopplerSpec = field(default_factory=DopplerSpec)
    dt: float = 2e-12
    t_end: float = 250e-9
    acquisition_time: float = 100e-9
    control_phase_enabled: bool = False
    exact_exponential: bool = False
    homodyne_weighting: str = "intensity"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigValidationError("integrator.dt", "must be > 0")
        pulse_end = max(self.control_pulse.end, self.probe_pulse.end)
        if not self.t_end > pulse_end:
            raise ConfigValidationError(
                "integrator.t_end", f"must exceed the last pulse end ({pulse_end:.3e} s)")
        if self.control_pulse.delay < 0 or self.probe_pulse.delay < 0:
            raise ConfigValidationError("control_pulse.delay", "pulses cannot start before t = 0")
        if self.t_end / self.dt > 5e8:
            raise ConfigValidationError("integrator.dt", "too many steps for t_end")
        if not 0 <= self.acquisition_time <= self.t_end:
            raise ConfigValidationError("acquisition_time", "must lie in [0, t_end]")
        if self.homodyne_weighting not in HOMODYNE_WEIGHTINGS:
            raise ConfigValidationError(
                "homodyne_weighting", f"must be one of {HOMODYNE_WEIGHTINGS}")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt * (1 + 1e-12)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def acquisition_index(self) -> int:
        return min(int(round(self.acquisition_time / self.dt)), self.n_steps)


@dataclass
class GroupSeries:
    """Raw time series of one integrated velocity group."""

    t: np.ndarray
    pops: np.ndarray      # (n, 3) real
    cohs: np.ndarray      # (n, 3) complex: coh10, coh21, coh20
    Ec: np.ndarray
    Ep: np.ndarray
    detunings: Detunings


@dataclass
class Summary:
    peak_phase: float
    phase_at_acquisition: float
    optimal_acquisition_time: float
    photons_in_control_pulse: float
    phase_per_photon: float

    def to_dict(self) -> dict:
        return {
            "peak_phase_rad": self.peak_phase,
            "phase_at_acquisition_rad": self.phase_at_acquisition,
            "optimal_acquisition_time_s": self.optimal_acquisition_time,
            "photons_in_control_pulse": self.photons_in_control_pulse,
            "phase_per_photon_rad": self.phase_per_photon,
        }


@dataclass
class RunResult:
    t: np.ndarray
    pop1: np.ndarray
    pop2: np.ndarray
    Ec_mag: np.ndarray
    Ep_mag: np.ndarray
    Ep_out_mag: np.ndarray
    delta_phi: np.ndarray
    homodyne: np.ndarray
    summary: Summary
    diagnostics: dict
    delta_phi_se: np.ndarray | None = None

    SERIES = ("t", "pop1", "pop2", "Ec_mag", "Ep_mag", "Ep_out_mag", "delta_phi", "homodyne")


def pulse_envelope(spec: PulseSpec, w0: float, t):
    """Incident field envelope (V/m) of ``spec`` at times ``t``.

    The peak is set so the shaped pulse carries the configured energy; with
    ``edge_time = 0`` this is exactly the flat-top peak field.
    """
    t = np.asarray(t, dtype=float)
    if spec.energy == 0:
        return np.zeros_like(t, dtype=complex)
    peak = peak_field_from_pulse(spec.energy, spec.effective_duration, w0)
    x = t - spec.delay
    inside = (x >= 0) & (x <= spec.duration)
    amp = np.where(inside, 1.0, 0.0)
    edge = spec.edge_time
    if edge > 0:
        rise = inside & (x < edge)
        fall = inside & (x > spec.duration - edge)
        amp = np.where(rise, 0.5 * (1 - np.cos(np.pi * x / edge)), amp)
        amp = np.where(fall, 0.5 * (1 - np.cos(np.pi * (spec.duration - x) / edge)), amp)
    return (peak * amp).astype(complex)


def _half_step_envelopes(config: ExperimentConfig, control_on: bool):
    th = np.arange(2 * config.n_steps + 1) * (0.5 * config.dt)
    w0 = config.cavity.waist
    ein_c = pulse_envelope(config.control_pulse, w0, th) if control_on else np.zeros_like(th, complex)
    ein_p = pulse_envelope(config.probe_pulse, w0, th)
    return ein_c, ein_p


def integrate_group(config: ExperimentConfig, group: VelocityGroup, control_on: bool,
                    envelopes=None) -> GroupSeries:
    """Integrate one velocity group from the ground state with an empty cavity.

    Raises
    ------
    NumericalBlowupError
        If the state becomes non-finite; the error names the time.
    """
    at, cav = config.atomic, config.cavity
    det = shifted_detunings(config.detunings, group.velocity, at.lambda_c, at.lambda_p,
                            config.doppler.mode)
    if envelopes is None:
        envelopes = _half_step_envelopes(config, control_on)
    ein_c, ein_p = envelopes
    if not control_on:
        ein_c = np.zeros_like(ein_c)
    tau = round_trip_time(cav)
    N = config.medium.density
    kc = source_coefficient(at.mu10, N, angular_frequency(at.lambda_c), tau)
    kp = source_coefficient(at.mu21, N, angular_frequency(at.lambda_p), tau)
    rates = (float(at.gamma0), float(at.gamma1), float(at.gamma2),
             float(at.Gamma10), float(at.Gamma21))
    n = config.n_steps
    pops, cohs, fields = _kernel.allocate(n)
    bad = _kernel.integrate_rk4(
        n, float(config.dt), ein_c, ein_p, float(det.Delta), float(det.delta), rates,
        float(at.mu10), float(at.mu21), tau, cav.round_trip_gain, float(cav.t_mirror),
        complex(kc), complex(kp), bool(config.control_phase_enabled),
        bool(config.exact_exponential), pops, cohs, fields)
    if bad >= 0:
        raise NumericalBlowupError(bad * config.dt)
    return GroupSeries(config.times, pops, cohs, fields[:, 0], fields[:, 1], det)


def xpm_phase(on_field: np.ndarray, off_field: np.ndarray) -> np.ndarray:
    """Probe phase with control on minus phase with control off, in (-pi, pi].

    Samples where the control-off field is below ``PHASE_MASK`` times its peak
    carry no phase information and are returned as NaN.
    """
    on_field = np.asarray(on_field)
    off_field = np.asarray(off_field)
    if on_field.shape != off_field.shape:
        raise ValueError("on and off series must share a grid")
    mag = np.abs(off_field)
    peak = mag.max() if mag.size else 0.0
    dphi = np.angle(on_field * np.conj(off_field))
    # np.angle maps to [-pi, pi]; fold -pi onto +pi
    dphi = np.where(dphi <= -np.pi, np.pi, dphi)
    valid = (mag >= PHASE_MASK * peak) & (peak > 0)
    return np.where(valid, dphi, np.nan)


def homodyne_product(delta_phi: np.ndarray, transmitted: np.ndarray,
                     weighting: str = "intensity") -> np.ndarray:
    phase = np.nan_to_num(np.asarray(delta_phi, dtype=float), nan=0.0)
    amp = np.abs(np.asarray(transmitted))
    if weighting == "intensity":
        return phase * amp**2
    if weighting == "amplitude":
        return phase * amp
    raise ValueError(f"unknown homodyne weighting {weighting!r}")


def normalise_peak(signal: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(signal)) if signal.size else 0.0
    if peak == 0:
        return np.zeros_like(signal)
    return signal / peak


def homodyne_signal(delta_phi: np.ndarray, transmitted: np.ndarray,
                    weighting: str = "intensity") -> np.ndarray:
    """Balanced-detector output model, normalised to unit peak magnitude.

    The phase is weighted by the transmitted probe: by its intensity (the
    default) or by its amplitude. Masked phase samples contribute zero.
    """
    return normalise_peak(homodyne_product(delta_phi, transmitted, weighting))


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("XPM_THREADS")
    if env:
        threads = int(env)
    return max(1, int(threads or 1))


def _ordered_map(fn: Callable, items: Sequence, threads: int) -> Iterable:
    """Yield fn(item) in input order, keeping at most 2*threads results in flight."""
    if threads <= 1 or len(items) <= 1:
        for item in items:
            yield fn(item)
        return
    window = 2 * threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = []
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


def _group_diagnostics(series: GroupSeries) -> dict:
    pops = series.pops
    trace = pops.sum(axis=1)
    c = series.cohs
    bound = np.stack([pops[:, 1] * pops[:, 0], pops[:, 2] * pops[:, 1], pops[:, 2] * pops[:, 0]], 1)
    return {
        "min_population": float(pops.min()),
        "max_population": float(pops.max()),
        "max_trace": float(trace.max()),
        "max_trace_increase": float(np.max(np.diff(trace), initial=0.0)),
        "coherence_bound_violations": int(np.count_nonzero(np.abs(c) ** 2 > bound + COHERENCE_TOL)),
    }


def _merge_diagnostics(acc: dict | None, new: dict) -> dict:
    if acc is None:
        return dict(new)
    return {
        "min_population": min(acc["min_population"], new["min_population"]),
        "max_population": max(acc["max_population"], new["max_population"]),
        "max_trace": max(acc["max_trace"], new["max_trace"]),
        "max_trace_increase": max(acc["max_trace_increase"], new["max_trace_increase"]),
        "coherence_bound_violations": acc["coherence_bound_violations"]
        + new["coherence_bound_violations"],
    }


def probe_photon_bound(config: ExperimentConfig) -> float:
    """Empty-cavity upper bound on the intracavity probe photon number.

    The empty-cavity field never exceeds the steady state driven by the peak
    incident field, so that steady state bounds the photon number.
    """
    cav, at, probe = config.cavity, config.atomic, config.probe_pulse
    if probe.energy == 0:
        return 0.0
    peak = peak_field_from_pulse(probe.energy, probe.effective_duration, cav.waist)
    return photon_number(empty_cavity_steady_state(peak, cav), mode_volume(cav.waist, cav.length),
                         angular_frequency(at.lambda_p))


def simulate(config: ExperimentConfig, threads: int | None = None) -> RunResult:
    """Doppler-averaged XPM run.

    Every velocity group is integrated with the control on; the control-off
    reference is the same for every group (with no control the atom never
    leaves |0> and the probe sees an empty cavity), so it is integrated once.
    Results are identical for any thread count.
    """
    threads = resolve_threads(threads)
    at, cav = config.atomic, config.cavity
    groups = sample_velocities(config.doppler, config.medium.doppler_fwhm, at.lambda_c)
    envelopes = _half_step_envelopes(config, control_on=True)
    off = integrate_group(config, VelocityGroup(0.0, 1.0), control_on=False, envelopes=envelopes)
    tm = cav.t_mirror

    def run_group(group: VelocityGroup):
        on = integrate_group(config, group, control_on=True, envelopes=envelopes)
        dphi = xpm_phase(on.Ep, off.Ep)
        out_amp = tm * np.abs(on.Ep)
        series = {
            "pop1": on.pops[:, 1],
            "pop2": on.pops[:, 2],
            "Ec_mag": np.abs(on.Ec),
            "Ep_mag": np.abs(on.Ep),
            "Ep_out_mag": out_amp,
            "delta_phi": dphi,
            "delta_phi_sq": dphi**2,
            "homodyne": homodyne_product(dphi, out_amp, config.homodyne_weighting),
        }
        return series, _group_diagnostics(on)

    acc = EnsembleAccumulator()
    diag = None
    for group, (series, gdiag) in zip(groups, _ordered_map(run_group, groups, threads)):
        acc.add(series, group.weight)
        diag = _merge_diagnostics(diag, gdiag)
    avg = acc.result()

    t = config.times
    dphi = avg["delta_phi"]
    se = None
    if config.doppler.method == "monte_carlo" and len(groups) > 1 and config.doppler.mode != "off":
        var = np.maximum(avg["delta_phi_sq"] - dphi**2, 0.0)
        se = np.sqrt(var / (len(groups) - 1))
    homodyne = normalise_peak(avg["homodyne"])

    finite = np.where(np.isfinite(dphi), np.abs(dphi), -1.0)
    i_peak = int(np.argmax(finite))
    peak_phase = float(dphi[i_peak]) if finite[i_peak] >= 0 else 0.0
    acq = float(dphi[config.acquisition_index])
    photons = energy_to_photons(config.control_pulse.energy, at.lambda_c)
    summary = Summary(
        peak_phase=peak_phase,
        phase_at_acquisition=acq,
        optimal_acquisition_time=float(t[int(np.argmax(np.abs(homodyne)))]),
        photons_in_control_pulse=photons,
        phase_per_photon=acq / photons if photons > 0 else 0.0,
    )

    bound = probe_photon_bound(config)
    peak_photons = photon_number(np.max(np.abs(off.Ep)), mode_volume(cav.waist, cav.length),
                                 angular_frequency(at.lambda_p))
    diag.update(
        n_groups=len(groups),
        probe_photon_peak=float(peak_photons),
        probe_photon_bound=float(bound),
    )
    _warn_diagnostics(diag)
    return RunResult(
        t=t, pop1=avg["pop1"], pop2=avg["pop2"], Ec_mag=avg["Ec_mag"], Ep_mag=avg["Ep_mag"],
        Ep_out_mag=avg["Ep_out_mag"], delta_phi=dphi, homodyne=homodyne,
        summary=summary, diagnostics=diag, delta_phi_se=se,
    )


def _warn_diagnostics(diag: dict) -> None:
    if diag["min_population"] < -POPULATION_TOL or diag["max_population"] > 1 + POPULATION_TOL:
        warnings.warn("population left [0, 1] beyond tolerance", RuntimeWarning, stacklevel=3)
    if diag["max_trace_increase"] > TRACE_TOL:
        warnings.warn("trace increased during integration", RuntimeWarning, stacklevel=3)
    if diag["coherence_bound_violations"]:
        log.warning("coherence magnitude exceeded sqrt(pop_i pop_j) at %d samples",
                    diag["coherence_bound_violations"])
    if diag["probe_photon_peak"] > diag["probe_photon_bound"]:
        warnings.warn("probe photon number exceeds the empty-cavity bound",
                      RuntimeWarning, stacklevel=3)


SWEEP_PARAMS = ("delta", "Delta", "control_energy")


def with_parameter(config: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "delta":
        return replace(config, detunings=replace(config.detunings, delta=float(value)))
    if param == "Delta":
        return replace(config, detunings=replace(config.detunings, Delta=float(value)))
    if param == "control_energy":
        return replace(config, control_pulse=replace(config.control_pulse, energy=float(value)))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def with_doppler_mode(config: ExperimentConfig, mode: str) -> ExperimentConfig:
    return replace(config, doppler=replace(config.doppler, mode=mode))


@dataclass
class SweepResult:
    param: str
    values: np.ndarray
    phases: np.ndarray
    best_value: float
    best_phase: float


def sweep(config: ExperimentConfig, param: str, values: Sequence[float],
          threads: int | None = None) -> SweepResult:
    """phase_at_acquisition as a function of one parameter.

    The optimum maximises |phase|; ties resolve to the first value.
    """
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("sweep needs at least one value")
    phases = np.array([
        simulate(with_parameter(config, param, v), threads).summary.phase_at_acquisition
        for v in values
    ])
    i = int(np.argmax(np.abs(np.nan_to_num(phases))))
    return SweepResult(param, values, phases, float(values[i]), float(phases[i]))


def sweep_delta(config: ExperimentConfig, delta_values: Sequence[float],
                threads: int | None = None) -> SweepResult:
    return sweep(config, "delta", delta_values, threads)


def calibrate_density(config: ExperimentConfig, target_phase: float = 5e-3,
                      rtol: float = 1e-3, max_iter: int = 60,
                      threads: int | None = None) -> float:
    """Bisect the metastable density until |phase_at_acquisition| hits the target.

    The upper bracket starts at the configured density (or 1e16 m^-3) and
    doubles until it overshoots.
    """
    def phase(N: float) -> float:
        cfg = replace(config, medium=replace(config.medium, density=N))
        return abs(simulate(cfg, threads).summary.phase_at_acquisition)

    lo, hi = 0.0, config.medium.density or 1e16
    for _ in range(64):
        if phase(hi) >= target_phase:
            break
        lo, hi = hi, 2 * hi
    else:
        raise RuntimeError("could not bracket the target phase")
    mid = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = phase(mid)
        if abs(value - target_phase) <= rtol * target_phase:
            break
        if value < target_phase:
            lo = mid
        else:
            hi = mid
    return mid


def calibrate(config: ExperimentConfig, delta_values: Sequence[float],
              target_phase: float = 5e-3, refine_step: float = 2.5e6, max_rounds: int = 4,
              threads: int | None = None):
    """One-time fit of the two-photon detuning and the metastable density.

    Alternates a delta sweep (``delta_values``, then a ``refine_step`` grid
    around the best point) with density bisection until delta* stops moving,
    since control absorption makes the optimum density dependent.

    Returns ``(delta_star, density, calibrated_config)``.
    """
    if config.medium.density == 0:
        config = replace(config, medium=replace(config.medium, density=1e16))
    coarse = np.asarray(list(delta_values), dtype=float)
    spacing = float(np.min(np.diff(np.sort(coarse)))) if coarse.size > 1 else refine_step
    best = None
    for _ in range(max_rounds):
        rough = sweep_delta(config, coarse, threads).best_value
        fine = np.arange(rough - spacing, rough + spacing + 0.5 * refine_step, refine_step)
        new_best = sweep_delta(config, fine, threads).best_value
        config = with_parameter(config, "delta", new_best)
        N = calibrate_density(config, target_phase, threads=threads)
        config = replace(config, medium=replace(config.medium, density=N))
        log.info("calibration round: delta* = %.6g rad/s, N = %.6g m^-3", new_best, N)
        if best is not None and new_best == best:
            break
        best = new_best
    return config.detunings.delta, config.medium.density, config


def default_groups(method: str) -> int:
    return DEFAULT_GROUPS[method]
