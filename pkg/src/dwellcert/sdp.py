"""Small-scale semidefinite feasibility solver.

The built-in backend decides feasibility of ``F_j(x) <= 0`` (strict blocks
pre-shifted by ``+delta*I``) through the phase-I program

    minimize t   subject to   F_j(x) <= t * I  for every block j,

followed along the central path of the log-det barrier with damped Newton
steps.  The verdict logic:

* ``FEASIBLE``  -- the iterate reaches ``t < feas_target`` *and* an
  independent a-posteriori eigenvalue check of every block passes at the
  witness.  The check is part of the contract, not optional; a backend bug
  cannot produce an unsound ``FEASIBLE``.
* ``INFEASIBLE`` -- the stage-end values of ``t`` stall above ``+delta``
  across two consecutive barrier stages (with a guard subtracting the
  remaining observed descent), i.e. the best achievable relaxation level is
  bounded away from zero.
* ``INCONCLUSIVE`` -- iteration or time budget exhausted first.  Never
  reported as infeasible.

Alternative backends can be registered under the same
``(LmiProblem, SolveOptions) -> SolveOutcome`` contract; the a-posteriori
witness check wraps any backend.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import linalg
from .errors import InvalidInput
from .lmi import LmiProblem

__all__ = [
    "SolveStatus",
    "SolveOptions",
    "SolveOutcome",
    "solve",
    "check_witness",
    "register_backend",
    "backends",
]


class SolveStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"


@dataclass
class SolveOptions:
    """Knobs for the feasibility solve.

    ``feas_target`` defaults to ``-delta/2`` of the problem being solved.
    """

    max_newton_iters: int = 200
    barrier_mu_factor: float = 5.0
    feas_target: float | None = None
    witness_check_tol: float = 1e-9
    time_limit_ms: float | None = None
    log_stream: IO[str] | None = None

    def __post_init__(self):
        if self.max_newton_iters < 1:
            raise InvalidInput("max_newton_iters must be positive")
        if self.barrier_mu_factor <= 1:
            raise InvalidInput("barrier_mu_factor must exceed 1")
        if self.witness_check_tol <= 0:
            raise InvalidInput("witness_check_tol must be positive")
        if self.time_limit_ms is not None and self.time_limit_ms <= 0:
            raise InvalidInput("time_limit_ms must be positive")


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    witness: np.ndarray | None
    achieved_margin: float
    iterations: int
    worst_constraint: str | None = None
    check_report: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is SolveStatus.FEASIBLE


def check_witness(
    problem: LmiProblem, x: np.ndarray, tol_nonstrict: float = 1e-9
) -> dict:
    """A-posteriori eigenvalue check of every constraint at a witness.

    Strict blocks must clear ``-delta/2``, non-strict blocks ``tol_nonstrict``.
    Returns a report with the worst margins and a ``passed`` flag.
    """
    worst_strict = -np.inf
    worst_nonstrict = -np.inf
    worst_label = None
    worst_value = -np.inf
    for c in problem.constraints:
        lam = c.max_eig_at(x)
        if c.strict:
            worst_strict = max(worst_strict, lam)
        else:
            worst_nonstrict = max(worst_nonstrict, lam)
        if lam > worst_value:
            worst_value, worst_label = lam, c.label
    passed = worst_strict <= -problem.delta / 2 and worst_nonstrict <= tol_nonstrict
    return {
        "passed": bool(passed),
        "worst_strict": float(worst_strict),
        "worst_nonstrict": float(worst_nonstrict),
        "worst_label": worst_label,
        "strict_bound": -problem.delta / 2,
        "nonstrict_bound": tol_nonstrict,
    }


class _Compiled:
    """Per-block data with strict shifts applied and the t column appended."""

    def __init__(self, problem: LmiProblem):
        m = problem.vars.total_dim
        self.m = m
        self.blocks = []
        for c in problem.constraints:
            f0 = c.F0 + problem.delta * np.eye(c.dim) if c.strict else c.F0
            deriv = np.concatenate([-c.coeff, np.eye(c.dim)[None]], axis=0)
            idx = np.concatenate([c.var_idx, [m]]).astype(int)
            self.blocks.append((f0, c.var_idx, c.coeff, deriv, idx, c.dim))

    def shifted_value(self, block, x: np.ndarray, t: float) -> np.ndarray:
        f0, var_idx, coeff, _, _, dim = block
        g = f0.copy() if var_idx.size == 0 else f0 + np.einsum(
            "a,aij->ij", x[var_idx], coeff
        )
        return t * np.eye(dim) - g

    def max_shifted_eig(self, x: np.ndarray) -> float:
        worst = -np.inf
        for block in self.blocks:
            lam = linalg.max_eig(-self.shifted_value(block, x, 0.0))
            worst = max(worst, lam)
        return worst


def _barrier_solve(problem: LmiProblem, options: SolveOptions) -> SolveOutcome:
    comp = _Compiled(problem)
    m = comp.m
    delta = problem.delta
    feas_target = options.feas_target if options.feas_target is not None else -delta / 2
    deadline = (
        time.monotonic() + options.time_limit_ms / 1000.0
        if options.time_limit_ms is not None
        else None
    )

    x = problem.vars.initial_point()
    t = comp.max_shifted_eig(x) + 1.0
    z = np.concatenate([x, [t]])
    eta = 1.0
    iterations = 0
    stage_ts: list[float] = []
    log = options.log_stream

    def barrier_value(zv: np.ndarray) -> float:
        total = eta * zv[m]
        for block in comp.blocks:
            mat = comp.shifted_value(block, zv[:m], zv[m])
            try:
                chol = np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                return np.inf
            total -= 2.0 * float(np.log(np.diag(chol)).sum())
        return total

    out_of_budget = False
    for _stage in range(60):
        stage_iters = 0
        while stage_iters < 30:
            if iterations >= options.max_newton_iters or (
                deadline is not None and time.monotonic() > deadline
            ):
                out_of_budget = True
                break
            iterations += 1
            stage_iters += 1

            grad = np.zeros(m + 1)
            hess = np.zeros((m + 1, m + 1))
            for block in comp.blocks:
                mat = comp.shifted_value(block, z[:m], z[m])
                chol = np.linalg.cholesky(mat)
                inv = cho_solve((chol, True), np.eye(mat.shape[0]))
                deriv, idx = block[3], block[4]
                ym = np.matmul(inv[None], deriv)
                grad[idx] += -np.einsum("aii->a", ym)
                hess[np.ix_(idx, idx)] += np.einsum("aij,bji->ab", ym, ym)
            grad[m] += eta

            scale = max(1.0, float(hess.diagonal().max()))
            factor = None
            for ridge in (1e-13, 1e-10, 1e-7, 1e-4):
                try:
                    factor = cho_factor(hess + ridge * scale * np.eye(m + 1))
                    break
                except np.linalg.LinAlgError:
                    continue
            if factor is None:
                break
            step = cho_solve(factor, -grad)
            for _ in range(2):  # refine against the ridge perturbation
                step += cho_solve(factor, -grad - hess @ step)
            decrement_sq = float(step @ hess @ step)

            f_current = barrier_value(z)
            alpha = 1.0
            accepted = False
            f_next = np.inf
            for _ in range(60):
                candidate = z + alpha * step
                f_next = barrier_value(candidate)
                if f_next <= f_current + 0.01 * alpha * float(grad @ step):
                    z = candidate
                    accepted = True
                    break
                alpha *= 0.5
            if log is not None:
                log.write(
                    f"iter={iterations} t={z[m]:.9e} eta={eta:.3e} "
                    f"decrement={np.sqrt(max(decrement_sq, 0.0)):.3e}\n"
                )
            if z[m] < feas_target:
                witness = z[:m].copy()
                report = check_witness(problem, witness, options.witness_check_tol)
                if report["passed"]:
                    label, margin = problem.worst_margin(witness)
                    return SolveOutcome(
                        status=SolveStatus.FEASIBLE,
                        witness=witness,
                        achieved_margin=margin,
                        iterations=iterations,
                        worst_constraint=label,
                        check_report=report,
                    )
                feas_target *= 2.0  # paranoia path: demand a deeper point
            if not accepted or decrement_sq / 2 < 1e-7:
                break
            if f_current - f_next < 1e-10 * (1.0 + abs(f_current)):
                break

        stage_ts.append(float(z[m]))
        if len(stage_ts) >= 3:
            d1 = stage_ts[-3] - stage_ts[-2]
            d2 = stage_ts[-2] - stage_ts[-1]
            stall_tol = 1e-5 * (1.0 + abs(stage_ts[-1]))
            remaining_guard = stage_ts[-1] - max(d1 + d2, 0.0)
            if d1 <= stall_tol and d2 <= stall_tol and remaining_guard > delta:
                label, margin = problem.worst_margin(z[:m])
                return SolveOutcome(
                    status=SolveStatus.INFEASIBLE,
                    witness=None,
                    achieved_margin=margin,
                    iterations=iterations,
                    worst_constraint=label,
                )
        if out_of_budget:
            break
        eta *= options.barrier_mu_factor

    label, margin = problem.worst_margin(z[:m])
    return SolveOutcome(
        status=SolveStatus.INCONCLUSIVE,
        witness=None,
        achieved_margin=margin,
        iterations=iterations,
        worst_constraint=label,
    )


Backend = Callable[[LmiProblem, SolveOptions], SolveOutcome]

_BACKENDS: dict[str, Backend] = {"barrier": _barrier_solve}


def register_backend(name: str, backend: Backend) -> None:
    _BACKENDS[name] = backend


def backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def solve(
    problem: LmiProblem,
    options: SolveOptions | None = None,
    backend: str = "barrier",
) -> SolveOutcome:
    """Decide feasibility of an assembled LMI problem.

    Whatever the backend reports, a ``FEASIBLE`` outcome is accepted only if
    the witness passes the independent eigenvalue check at the stated
    tolerances; otherwise the outcome is downgraded to ``INCONCLUSIVE``.
    """
    options = options or SolveOptions()
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise InvalidInput(
            f"unknown backend {backend!r}; registered: {sorted(_BACKENDS)}"
        ) from None
    outcome = fn(problem, options)
    if outcome.status is SolveStatus.FEASIBLE:
        if outcome.witness is None:
            return SolveOutcome(
                SolveStatus.INCONCLUSIVE,
                None,
                outcome.achieved_margin,
                outcome.iterations,
                outcome.worst_constraint,
            )
        report = (
            outcome.check_report
            if outcome.check_report.get("passed")
            else check_witness(problem, outcome.witness, options.witness_check_tol)
        )
        if not report["passed"]:
            return SolveOutcome(
                SolveStatus.INCONCLUSIVE,
                None,
                outcome.achieved_margin,
                outcome.iterations,
                report["worst_label"],
                report,
            )
    return outcome
