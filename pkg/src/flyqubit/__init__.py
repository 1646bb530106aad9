"""Decoherence of flying quantum systems from their own spatial spread.

A system with internal levels moves ballistically through a
position-dependent potential. Because the packet has finite width,
different parts of it see the potential at different times and the
internal state loses purity without any external reservoir. The package
computes this with three solvers of increasing cost (perturbative
correction, exact clock model, full grid propagation) and bounds the same
effect for qubits carried in a moving trap.
"""

__version__ = "0.1.0"

from flyqubit.clock import FlightConfig, Wavepacket, evolve_pointlike, internal_state_exact, trajectory
from flyqubit.core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    pure_state,
    qubit_state,
    state_fidelity,
    trace_distance,
    von_neumann_entropy,
)
from flyqubit.errors import ConfigError, FlyQubitError
from flyqubit.perturbation import approx_state, correction_term, entropy_perturbative, perturbative_series
from flyqubit.potentials import GaussianProfile, PotentialProfile, PotentialTerm, SmoothRectProfile

__all__ = [
    "__version__",
    "FlightConfig",
    "Wavepacket",
    "evolve_pointlike",
    "internal_state_exact",
    "trajectory",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "pure_state",
    "qubit_state",
    "state_fidelity",
    "trace_distance",
    "von_neumann_entropy",
    "ConfigError",
    "FlyQubitError",
    "approx_state",
    "correction_term",
    "entropy_perturbative",
    "perturbative_series",
    "GaussianProfile",
    "PotentialProfile",
    "PotentialTerm",
    "SmoothRectProfile",
]
