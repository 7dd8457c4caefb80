"""High-level drivers: minimum dwell-time search and energy-gain bisection.

The dwell-time scan is a deliberate linear scan (not a bisection): feasibility
is monotone in the dwell-time in exact arithmetic, but a numerically
inconclusive point would silently corrupt a bisection, while a linear scan
records an auditable verdict for every dwell-time it visited.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .certificates import LiftedCertificate
from .errors import GainUnboundedOrUnstable, InvalidInput, NumericalFailure
from .lmi import build_l2, build_lifted
from .model import SwitchedSystem
from .sdp import SolveOptions, SolveOutcome, SolveStatus, solve
from .verify import MarginReport, check_flat, check_l2_window, check_lifted

__all__ = [
    "TauVerdict",
    "DwellResult",
    "L2Result",
    "GainPoint",
    "GainCurve",
    "GAMMA_BRACKET_CAP",
    "min_dwell",
    "min_dwell_robust",
    "l2_gain",
    "gamma_tau_sweep",
]

GAMMA_BRACKET_CAP = 2.0**20

# The scan budget is larger than the SolveOptions default: infeasible points
# near the feasibility boundary need more barrier stages to stall decisively.
_SCAN_OPTIONS = SolveOptions(max_newton_iters=800)


@dataclass(frozen=True)
class TauVerdict:
    tau: int
    status: str
    iterations: int
    margin: float
    time_ms: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "status": self.status,
            "iterations": self.iterations,
            "margin": self.margin,
            "time_ms": round(self.time_ms, 3),
        }


@dataclass(frozen=True)
class DwellResult:
    """Outcome of a minimum dwell-time scan."""

    tau_star: int | None
    per_tau: tuple[TauVerdict, ...]
    certificate: LiftedCertificate | None
    verification: tuple[MarginReport, ...] = ()

    @property
    def certified(self) -> bool:
        return self.tau_star is not None

    def to_dict(self) -> dict:
        return {
            "tau_star": self.tau_star,
            "per_tau": [v.to_dict() for v in self.per_tau],
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "verification": [r.to_dict() for r in self.verification],
        }


def _timed_solve(problem, options) -> tuple[SolveOutcome, float]:
    start = time.perf_counter()
    outcome = solve(problem, options)
    return outcome, (time.perf_counter() - start) * 1000.0


def _scan(
    system: SwitchedSystem,
    tau_max: int,
    form: str,
    options: SolveOptions,
    flat_check: bool,
) -> DwellResult:
    if tau_max < 1:
        raise InvalidInput("tau_max must be >= 1")
    per_tau: list[TauVerdict] = []
    for tau in range(1, tau_max + 1):
        problem = build_lifted(system, tau, form=form)
        outcome, elapsed = _timed_solve(problem, options)
        per_tau.append(
            TauVerdict(
                tau=tau,
                status=outcome.status.value,
                iterations=outcome.iterations,
                margin=outcome.achieved_margin,
                time_ms=elapsed,
            )
        )
        if outcome.status is SolveStatus.FEASIBLE:
            cert = LiftedCertificate.from_witness(problem, outcome.witness)
            reports = [check_lifted(system, tau, cert)]
            if flat_check:
                reports.append(
                    check_flat(system, tau, cert.flat_matrices(), variant="backward")
                )
            if not all(r.passed for r in reports):
                failing = [r.name for r in reports if not r.passed]
                raise NumericalFailure(
                    f"certificate at tau={tau} failed re-verification: {failing}"
                )
            return DwellResult(
                tau_star=tau,
                per_tau=tuple(per_tau),
                certificate=cert,
                verification=tuple(reports),
            )
    return DwellResult(tau_star=None, per_tau=tuple(per_tau), certificate=None)


def min_dwell(
    system: SwitchedSystem,
    tau_max: int,
    form: str = "primal",
    options: SolveOptions | None = None,
) -> DwellResult:
    """Smallest dwell-time (up to ``tau_max``) with a verified stability certificate.

    Scans tau = 1, 2, ... and stops at the first feasible point; the returned
    certificate has passed both the lifted re-check and the flat matrix-power
    cross-check.  ``tau_star`` is None when no tau up to ``tau_max`` certifies.
    """
    if any(m.polytopic and len(m.vertices) > 1 for m in system.modes):
        raise InvalidInput("system has polytopic modes; use min_dwell_robust")
    return _scan(system, tau_max, form, options or _SCAN_OPTIONS, flat_check=True)


def min_dwell_robust(
    system: SwitchedSystem,
    tau_max: int,
    form: str = "primal",
    options: SolveOptions | None = None,
) -> DwellResult:
    """Vertex-wise dwell-time scan for polytopic (or degenerate 1-vertex) modes.

    The flat matrix-power cross-check only applies when every mode is a single
    vertex; genuinely polytopic certificates are re-verified vertex-wise
    through the lifted conditions.
    """
    flat_check = all(len(m.vertices) == 1 for m in system.modes)
    return _scan(system, tau_max, form, options or _SCAN_OPTIONS, flat_check=flat_check)


@dataclass(frozen=True)
class L2Result:
    """Certified energy-gain upper bound at one dwell-time."""

    tau: int
    gamma_upper: float
    tol_rel: float
    certificate: LiftedCertificate
    probes: tuple[tuple[float, str], ...]
    verification: tuple[MarginReport, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "gamma_upper": self.gamma_upper,
            "tol_rel": self.tol_rel,
            "probes": [{"gamma": g, "status": s} for g, s in self.probes],
            "certificate": self.certificate.to_dict(),
            "verification": [r.to_dict() for r in self.verification],
        }


def l2_gain(
    system: SwitchedSystem,
    tau: int,
    tol_rel: float = 1e-3,
    options: SolveOptions | None = None,
) -> L2Result:
    """Bisection for the smallest certifiable energy-gain level at fixed tau.

    Brackets by doubling gamma from 1 until feasible (cap ``2**20``), then
    shrinks until ``(hi - lo)/hi <= tol_rel``.  The returned level always has
    a solver-verified certificate that additionally passes the stacked-window
    oracle.  Raises :class:`GainUnboundedOrUnstable` when the cap is reached,
    which in particular happens below the stability dwell-time.
    """
    if tol_rel <= 0:
        raise InvalidInput("tol_rel must be positive")
    options = options or _SCAN_OPTIONS
    probes: list[tuple[float, str]] = []

    def probe(gamma: float) -> SolveOutcome:
        problem = build_l2(system, tau, gamma)
        outcome, _ = _timed_solve(problem, options)
        probes.append((gamma, outcome.status.value))
        return outcome

    gamma_hi = 1.0
    outcome = probe(gamma_hi)
    while outcome.status is not SolveStatus.FEASIBLE:
        gamma_hi *= 2.0
        if gamma_hi > GAMMA_BRACKET_CAP:
            raise GainUnboundedOrUnstable(
                f"no certifiable gain level up to {GAMMA_BRACKET_CAP:g} at tau={tau}"
            )
        outcome = probe(gamma_hi)
    best = (gamma_hi, outcome.witness)
    gamma_lo = gamma_hi / 2.0 if gamma_hi > 1.0 else 0.0

    while (best[0] - gamma_lo) / best[0] > tol_rel:
        mid = 0.5 * (gamma_lo + best[0])
        outcome = probe(mid)
        if outcome.status is SolveStatus.FEASIBLE:
            best = (mid, outcome.witness)
        else:
            gamma_lo = mid

    gamma_upper, witness = best
    problem = build_l2(system, tau, gamma_upper)
    cert = LiftedCertificate.from_witness(problem, witness, gamma=gamma_upper)
    oracle = check_l2_window(
        system, tau, [cert.block(i, tau) for i in range(system.N)], gamma_upper
    )
    if not oracle.passed:
        raise NumericalFailure(
            f"gain certificate at tau={tau} failed the stacked-window oracle "
            f"(worst margin {oracle.worst[1]:.3e})"
        )
    return L2Result(
        tau=tau,
        gamma_upper=gamma_upper,
        tol_rel=tol_rel,
        certificate=cert,
        probes=tuple(probes),
        verification=(oracle,),
    )


@dataclass(frozen=True)
class GainPoint:
    tau: int
    gamma_upper: float | None
    status: str

    def to_dict(self) -> dict:
        return {"tau": self.tau, "gamma_upper": self.gamma_upper, "status": self.status}


@dataclass(frozen=True)
class GainCurve:
    """Energy-gain bound as a function of the dwell-time."""

    points: tuple[GainPoint, ...]
    tol_rel: float

    def to_csv(self) -> str:
        lines = ["tau,gamma_upper,status"]
        for p in self.points:
            gamma = "" if p.gamma_upper is None else f"{p.gamma_upper:.9g}"
            lines.append(f"{p.tau},{gamma},{p.status}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"tol_rel": self.tol_rel, "points": [p.to_dict() for p in self.points]}


def _sweep_point(args) -> GainPoint:
    system, tau, tol_rel = args
    try:
        result = l2_gain(system, tau, tol_rel)
        return GainPoint(tau=tau, gamma_upper=result.gamma_upper, status="certified")
    except GainUnboundedOrUnstable:
        return GainPoint(tau=tau, gamma_upper=None, status="unbounded_or_unstable")
    except Exception as exc:  # per-point failures are recorded, not fatal
        return GainPoint(tau=tau, gamma_upper=None, status=f"error:{type(exc).__name__}")


def gamma_tau_sweep(
    system: SwitchedSystem,
    taus: list[int],
    tol_rel: float = 1e-3,
    workers: int = 1,
) -> GainCurve:
    """Energy-gain bisection per dwell-time; per-point failures become statuses.

    Points are independent feasibility problems, so ``workers > 1`` fans them
    out over processes; results are merged by index either way.
    """
    taus = list(taus)
    if not taus:
        raise InvalidInput("tau range must be nonempty")
    if sorted(set(taus)) != taus:
        raise InvalidInput("tau values must be strictly increasing")
    jobs = [(system, tau, tol_rel) for tau in taus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(job) for job in jobs]
    return GainCurve(points=tuple(points), tol_rel=tol_rel)
