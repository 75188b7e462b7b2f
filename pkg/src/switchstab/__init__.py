"""Stochastic stability of switched linear systems with fixed plus exponential dwell times."""

from .model import ModelError, SwitchedLinearSystem, load_fixture, load_system, save_system, validate
from .stability import (
    StabilityCertificate,
    StabilityVerdict,
    check_stochastic_stability,
    solve_coupled_lyapunov,
    verify_certificate,
)
from .sim import estimate_cost, sample_switching_signal
from .region import SweepConfig, sweep

__version__ = "0.1.0"
