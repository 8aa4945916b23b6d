"""Cross-phase modulation in a metastable-xenon cavity: atom-cavity simulator."""

from xpmsim.atomic import (
    AtomicParams,
    DensityMatrix,
    Detunings,
    DriveAmplitudes,
    bloch_rhs,
    dephasing_rates,
    ground_state,
    linear_steady_coherence,
)
from xpmsim.cavity import CavityParams, MediumParams
from xpmsim.doppler import DopplerSpec, VelocityGroup
from xpmsim.engine import ExperimentConfig, PulseSpec, RunResult, simulate, sweep_delta

__version__ = "0.1.0"

__all__ = [
    "AtomicParams",
    "CavityParams",
    "DensityMatrix",
    "Detunings",
    "DopplerSpec",
    "DriveAmplitudes",
    "ExperimentConfig",
    "MediumParams",
    "PulseSpec",
    "RunResult",
    "VelocityGroup",
    "bloch_rhs",
    "dephasing_rates",
    "ground_state",
    "linear_steady_coherence",
    "simulate",
    "sweep_delta",
]
