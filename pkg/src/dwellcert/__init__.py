"""Certification toolkit for discrete-time switched linear systems under
minimum dwell-time constraints: convex lifted feasibility conditions, a
self-contained semidefinite feasibility solver, state-feedback synthesis,
energy-gain bounds, and independent verification of every certificate.
"""

from . import analysis, errors, linalg, lmi, model, sdp, synthesis, verify
from .analysis import (
    DwellResult,
    GainCurve,
    L2Result,
    gamma_tau_sweep,
    l2_gain,
    min_dwell,
    min_dwell_robust,
)
from .certificates import ControllerGains, LiftedCertificate
from .model import (
    DwellSpec,
    Mode,
    SwitchedSystem,
    SwitchingSignal,
    load_system,
    random_signal,
    save_system,
)
from .sdp import SolveOptions, SolveOutcome, SolveStatus, solve
from .synthesis import SynthesisResult, synthesize, synthesize_l2

__version__ = "0.1.0"
