"""State-feedback synthesis under a minimum dwell-time constraint."""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from . import linalg
from .analysis import GAMMA_BRACKET_CAP, _SCAN_OPTIONS, _timed_solve
from .certificates import ControllerGains, LiftedCertificate
from .errors import (
    CertificateDegenerate,
    InvalidInput,
    NoControllerFound,
    NumericalFailure,
)
from .lmi import LmiProblem, build_l2_synthesis, build_synthesis
from .model import SwitchedSystem
from .sdp import SolveOptions, SolveStatus
from .verify import MarginReport, check_closed_loop

__all__ = ["SynthesisResult", "synthesize", "synthesize_l2", "gain_at"]

# Closed-loop margin floor for boundary-level (gain-minimizing) recoveries:
# strictly negative beyond eigenvalue noise, in certificate-normalized units.
_BOUNDARY_MARGIN = -1e-9


@dataclass(frozen=True)
class SynthesisResult:
    """Recovered gains with the dual certificate that produced them.

    ``gains`` always reproduces as ``U_i(k) @ inv(S_i(k))`` from the stored
    ``transformed_gains`` (U) and ``certificate`` sequences (S).
    """

    gains: ControllerGains
    certificate: LiftedCertificate
    transformed_gains: tuple[tuple[np.ndarray, ...], ...]
    closed_loop: tuple[tuple[np.ndarray, ...], ...]
    verification: MarginReport
    gamma_upper: float | None = None

    def to_dict(self) -> dict:
        return {
            "gains": self.gains.to_dict(),
            "certificate": self.certificate.to_dict(),
            "gamma_upper": self.gamma_upper,
            "verification": self.verification.to_dict(),
        }


def gain_at(gains: ControllerGains, mode: int, k_since_switch: int) -> np.ndarray:
    """Gain active in 0-based ``mode`` ``k_since_switch`` steps after entering it."""
    return gains.gain_at(mode, k_since_switch)


def _recover(
    system: SwitchedSystem,
    tau: int,
    problem: LmiProblem,
    witness: np.ndarray,
    gamma: float | None,
    margin_bound: float | None = None,
) -> SynthesisResult:
    values = problem.vars.unpack(witness)
    s_seqs = []
    u_seqs = []
    k_seqs = []
    for i in range(system.N):
        s_seq, u_seq, k_seq = [], [], []
        for k in range(tau + 1):
            s_mat = np.asarray(values[f"seq:{i + 1}:{k}"])
            u_mat = np.asarray(values[f"gain:{i + 1}:{k}"])
            if linalg.min_eig(s_mat) <= 0:
                raise CertificateDegenerate(
                    f"dual block S_{i + 1}({k}) is not positive definite; "
                    "gains cannot be recovered from this certificate"
                )
            # K = U S^{-1}, via the SPD solve S K' = U'
            k_seq.append(linalg.solve_spd(s_mat, u_mat.T).T)
            s_seq.append(s_mat)
            u_seq.append(u_mat)
        s_seqs.append(tuple(s_seq))
        u_seqs.append(tuple(u_seq))
        k_seqs.append(tuple(k_seq))
    cert = LiftedCertificate(
        form="dual",
        tau=tau,
        epsilon=problem.epsilon if problem.epsilon is not None else 0.0,
        sequences=tuple(s_seqs),
        gamma=gamma,
    )
    gains = ControllerGains(tau=tau, gains=tuple(k_seqs))
    closed = tuple(
        tuple(
            system.modes[i].A + system.modes[i].B @ gains.gain_at(i, k)
            for k in range(tau + 1)
        )
        for i in range(system.N)
    )
    report = check_closed_loop(system, tau, gains, cert, bound=margin_bound)
    if not report.passed:
        raise NumericalFailure(
            f"recovered gains failed the closed-loop power check "
            f"(worst margin {report.worst[1]:.3e})"
        )
    return SynthesisResult(
        gains=gains,
        certificate=cert,
        transformed_gains=tuple(u_seqs),
        closed_loop=closed,
        verification=report,
        gamma_upper=gamma,
    )


def synthesize(
    system: SwitchedSystem, tau: int, options: SolveOptions | None = None
) -> SynthesisResult:
    """Stabilizing gain sequences for dwell-times >= tau.

    Solves the dual synthesis conditions, inverts the recovered dual blocks
    (each must be positive definite) and validates the closed loop against the
    explicit power conditions.  Raises :class:`NoControllerFound` with the
    maximally violated constraint when the conditions do not certify.
    """
    problem = build_synthesis(system, tau)
    outcome, _ = _timed_solve(problem, options or _SCAN_OPTIONS)
    if outcome.status is not SolveStatus.FEASIBLE:
        raise NoControllerFound(
            f"synthesis conditions {outcome.status.value} at tau={tau}",
            diagnostics={
                "status": outcome.status.value,
                "worst_constraint": outcome.worst_constraint,
                "margin": outcome.achieved_margin,
                "iterations": outcome.iterations,
            },
        )
    return _recover(system, tau, problem, outcome.witness, gamma=None)


def synthesize_l2(
    system: SwitchedSystem,
    tau: int,
    gamma: float | None = None,
    tol_rel: float = 1e-3,
    options: SolveOptions | None = None,
) -> tuple[SynthesisResult, float]:
    """Gain sequences that also certify an energy-gain level for the closed loop.

    With ``gamma`` given the fixed-level conditions are solved once; with
    ``gamma=None`` the level is minimized by the same doubling-plus-bisection
    bracket used for analysis.  Returns the result together with the certified
    level.
    """
    options = options or _SCAN_OPTIONS
    if gamma is not None:
        problem = build_l2_synthesis(system, tau, gamma)
        outcome, _ = _timed_solve(problem, options)
        if outcome.status is not SolveStatus.FEASIBLE:
            raise NoControllerFound(
                f"gain-level synthesis {outcome.status.value} at tau={tau}, "
                f"gamma={gamma:g}",
                diagnostics={
                    "status": outcome.status.value,
                    "worst_constraint": outcome.worst_constraint,
                    "margin": outcome.achieved_margin,
                },
            )
        result = _recover(
            system, tau, problem, outcome.witness, gamma=float(gamma),
            margin_bound=_BOUNDARY_MARGIN,
        )
        return result, float(gamma)

    if tol_rel <= 0:
        raise InvalidInput("tol_rel must be positive")
    probes: list[tuple[float, str]] = []

    def probe(level: float):
        problem = build_l2_synthesis(system, tau, level)
        outcome, _ = _timed_solve(problem, options)
        probes.append((level, outcome.status.value))
        return problem, outcome

    level = 1.0
    problem, outcome = probe(level)
    while outcome.status is not SolveStatus.FEASIBLE:
        level *= 2.0
        if level > GAMMA_BRACKET_CAP:
            raise NoControllerFound(
                f"no gain level up to {GAMMA_BRACKET_CAP:g} is achievable at tau={tau}",
                diagnostics={"probes": probes},
            )
        problem, outcome = probe(level)
    best = (level, outcome.witness)
    lo = level / 2.0 if level > 1.0 else 0.0
    while (best[0] - lo) / best[0] > tol_rel:
        mid = 0.5 * (lo + best[0])
        _, outcome = probe(mid)
        if outcome.status is SolveStatus.FEASIBLE:
            best = (mid, outcome.witness)
        else:
            lo = mid
    gamma_upper, witness = best
    problem = build_l2_synthesis(system, tau, gamma_upper)
    result = _recover(
        system, tau, problem, witness, gamma=gamma_upper, margin_bound=_BOUNDARY_MARGIN
    )
    return result, gamma_upper
