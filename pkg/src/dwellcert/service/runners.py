"""Command implementations shared by the HTTP endpoints.

Each runner takes a parsed request model, drives the library, and assembles
the :class:`~dwellcert.service.schemas.Report` envelope.  Negative results
(no certifiable dwell-time, no controller, unbounded gain, witness radius
below 1) are regular reports with ``outcome="negative"``; only malformed
inputs raise.
"""

from __future__ import annotations

import os
import time
from contextlib import contextmanager

import numpy as np

from .. import __version__
from ..analysis import gamma_tau_sweep, l2_gain, min_dwell, min_dwell_robust
from ..certificates import ControllerGains, LiftedCertificate
from ..errors import (
    GainUnboundedOrUnstable,
    InvalidInput,
    NoControllerFound,
    ParseError,
)
from ..lmi import build_l2
from ..model import DwellSpec, SwitchedSystem, random_signal, system_from_dict
from ..sdp import SolveOptions, check_witness
from ..synthesis import synthesize, synthesize_l2
from ..verify import (
    MarginReport,
    check_flat,
    check_l2_window,
    check_lifted,
    instability_witness,
    simulate,
)
from .schemas import (
    AnalyzeRequest,
    L2Request,
    L2Response,
    Report,
    SimulateRequest,
    SimulateResponse,
    SynthesizeRequest,
    SynthesizeResponse,
    VerifyRequest,
)

SOLVER_LOG_ENV = "DWELL_SOLVER_LOG"


@contextmanager
def _solver_options():
    """Scan-budget options, with the iteration log attached when requested."""
    path = os.environ.get(SOLVER_LOG_ENV)
    if path:
        with open(path, "a") as stream:
            yield SolveOptions(max_newton_iters=800, log_stream=stream)
    else:
        yield SolveOptions(max_newton_iters=800)


def _load(doc: dict) -> SwitchedSystem:
    return system_from_dict(doc)


def _report(command, outcome, system, results, verification=(), timings=None, seed=None):
    return Report(
        command=command,
        outcome=outcome,
        system=system.digest(),
        results=results,
        verification=[r.to_dict() for r in verification],
        timings_ms=timings or {},
        version=__version__,
        seed=seed,
    )


def run_analyze(request: AnalyzeRequest) -> Report:
    system = _load(request.system)
    start = time.perf_counter()
    with _solver_options() as options:
        if request.robust:
            result = min_dwell_robust(system, request.tau_max, request.form, options)
        else:
            result = min_dwell(system, request.tau_max, request.form, options)
    elapsed = (time.perf_counter() - start) * 1000.0
    return _report(
        command="analyze",
        outcome="positive" if result.certified else "negative",
        system=system,
        results=result.to_dict(),
        verification=result.verification,
        timings={"total": elapsed},
    )


def run_synthesize(request: SynthesizeRequest) -> SynthesizeResponse:
    system = _load(request.system)
    start = time.perf_counter()
    gains_doc = None
    verification = ()
    with _solver_options() as options:
        try:
            if request.l2:
                if request.gamma is not None and request.minimize:
                    raise InvalidInput("pass either a fixed gamma or minimize, not both")
                result, gamma_upper = synthesize_l2(
                    system,
                    request.tau,
                    gamma=request.gamma,
                    tol_rel=request.tol_rel,
                    options=options,
                )
                results = result.to_dict()
                results["gamma_upper"] = gamma_upper
            else:
                result = synthesize(system, request.tau, options)
                results = result.to_dict()
            gains_doc = result.gains.to_dict()
            verification = (result.verification,)
            outcome = "positive"
        except NoControllerFound as exc:
            results = {"reason": str(exc), "diagnostics": exc.diagnostics}
            outcome = "negative"
    elapsed = (time.perf_counter() - start) * 1000.0
    report = _report(
        command="synthesize",
        outcome=outcome,
        system=system,
        results=results,
        verification=verification,
        timings={"total": elapsed},
    )
    return SynthesizeResponse(report=report, gains=gains_doc)


def run_l2(request: L2Request) -> L2Response:
    system = _load(request.system)
    if (request.tau is None) == (request.sweep is None):
        raise InvalidInput("pass exactly one of tau or sweep")
    start = time.perf_counter()
    csv_text = None
    if request.tau is not None:
        with _solver_options() as options:
            try:
                result = l2_gain(system, request.tau, request.tol_rel, options)
                results = result.to_dict()
                verification = result.verification
                outcome = "positive"
            except GainUnboundedOrUnstable as exc:
                results = {"reason": str(exc), "tau": request.tau}
                verification = ()
                outcome = "negative"
    else:
        curve = gamma_tau_sweep(system, request.sweep, request.tol_rel)
        csv_text = curve.to_csv()
        results = curve.to_dict()
        verification = ()
        outcome = (
            "positive"
            if any(p.status == "certified" for p in curve.points)
            else "negative"
        )
    elapsed = (time.perf_counter() - start) * 1000.0
    report = _report(
        command="l2",
        outcome=outcome,
        system=system,
        results=results,
        verification=verification,
        timings={"total": elapsed},
    )
    return L2Response(report=report, csv=csv_text)


def run_simulate(request: SimulateRequest) -> SimulateResponse:
    system = _load(request.system)
    gains = None
    if request.gains is not None:
        gains = ControllerGains.from_dict(request.gains)
        if gains.tau != request.tau:
            raise ParseError(
                f"gains file is for tau={gains.tau}, requested tau={request.tau}"
            )
    lyapunov = None
    if request.certificate is not None:
        lyapunov = LiftedCertificate.from_dict(request.certificate)
        if lyapunov.tau != request.tau:
            raise ParseError(
                f"certificate is for tau={lyapunov.tau}, requested tau={request.tau}"
            )
    start = time.perf_counter()
    signal = random_signal(
        DwellSpec(tau=request.tau),
        horizon=max(request.horizon, request.tau),
        seed=request.seed,
        num_modes=system.N,
    )
    rng = np.random.default_rng(request.seed)
    x0 = rng.standard_normal(system.n)
    w = None
    if any(m.E is not None for m in system.modes):
        w = [
            rng.standard_normal(system.modes[signal.mode_at(t)].p)
            for t in range(request.horizon)
        ]
    trajectory = simulate(
        system,
        signal,
        x0,
        request.horizon,
        w=w,
        gains=gains,
        lyapunov=lyapunov,
    )
    elapsed = (time.perf_counter() - start) * 1000.0
    csv_text = trajectory.to_csv()
    if request.horizon == 0:
        csv_text = csv_text.splitlines()[0] + "\n"
    report = _report(
        command="simulate",
        outcome="positive",
        system=system,
        results={
            "horizon": request.horizon,
            "final_norm": float(np.linalg.norm(trajectory.states[-1])),
            "switch_instants": list(signal.instants),
        },
        timings={"total": elapsed},
        seed=request.seed,
    )
    return SimulateResponse(report=report, csv=csv_text)


def _verify_certificate(system: SwitchedSystem, cert: LiftedCertificate):
    if cert.gamma is None:
        reports = [check_lifted(system, cert.tau, cert)]
        if all(len(m.vertices) == 1 for m in system.modes):
            reports.append(
                check_flat(system, cert.tau, cert.flat_matrices(), variant="backward")
            )
        return reports
    problem = build_l2(system, cert.tau, cert.gamma)
    x = problem.vars.pack(
        {
            f"seq:{i + 1}:{k}": cert.block(i, k)
            for i in range(system.N)
            for k in range(cert.tau + 1)
        }
    )
    lmi_report = check_witness(problem, x, tol_nonstrict=1e-8)
    oracle = check_l2_window(
        system,
        cert.tau,
        [cert.block(i, cert.tau) for i in range(system.N)],
        cert.gamma,
    )
    wrapped = MarginReport(
        name="l2_lmi",
        margins=(("worst", lmi_report["worst_strict"]),),
        passed=lmi_report["passed"],
        details=lmi_report,
    )
    return [wrapped, oracle]


def run_verify(request: VerifyRequest) -> Report:
    system = _load(request.system)
    if (request.certificate is None) == (request.witness is None):
        raise InvalidInput("pass exactly one of certificate or witness")
    start = time.perf_counter()
    if request.certificate is not None:
        cert = LiftedCertificate.from_dict(request.certificate)
        reports = _verify_certificate(system, cert)
        outcome = "positive" if all(r.passed for r in reports) else "negative"
        results = {"tau": cert.tau, "form": cert.form, "gamma": cert.gamma}
        verification = tuple(reports)
    else:
        witness = instability_witness(system, request.witness)
        outcome = "positive" if witness.unstable else "negative"
        results = witness.to_dict()
        verification = ()
    elapsed = (time.perf_counter() - start) * 1000.0
    return _report(
        command="verify",
        outcome=outcome,
        system=system,
        results=results,
        verification=verification,
        timings={"total": elapsed},
    )
