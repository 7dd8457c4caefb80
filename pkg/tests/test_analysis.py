import numpy as np
import pytest

from dwellcert.analysis import (
    GainCurve,
    GainPoint,
    gamma_tau_sweep,
    l2_gain,
    min_dwell,
    min_dwell_robust,
)
from dwellcert.errors import GainUnboundedOrUnstable, InvalidInput
from dwellcert.lmi import build_flat_dwell
from dwellcert.model import system_from_dict
from dwellcert.sdp import SolveOptions, SolveStatus, solve


def contracting_pair(rho=0.1):
    return system_from_dict(
        {
            "n": 2,
            "modes": [
                {"A": [[rho, 0.0], [0.0, rho]]},
                {"A": [[0.0, rho], [rho, 0.0]]},
            ],
        }
    )


class TestMinDwell:
    def test_two_mode_discretized(self, ex1):
        result = min_dwell(ex1, 12)
        assert result.tau_star == 6
        assert [v.status for v in result.per_tau[:-1]] == ["infeasible"] * 5
        assert result.per_tau[-1].status == "feasible"
        assert result.certificate is not None
        assert all(r.passed for r in result.verification)

    def test_dual_form_agrees(self, ex1):
        assert min_dwell(ex1, 12, form="dual").tau_star == 6

    def test_contracting_pair_needs_no_dwell(self):
        assert min_dwell(contracting_pair(), 3).tau_star == 1

    def test_budget_too_small_reports_absent(self, ex1):
        result = min_dwell(ex1, 4)
        assert result.tau_star is None
        assert result.certificate is None
        assert len(result.per_tau) == 4

    def test_polytopic_system_redirected(self, robust_sys):
        with pytest.raises(InvalidInput, match="min_dwell_robust"):
            min_dwell(robust_sys, 4)

    def test_no_feasible_before_infeasible(self, ex2):
        result = min_dwell(ex2, 8)
        assert result.tau_star == 4
        statuses = [v.status for v in result.per_tau]
        first_feasible = statuses.index("feasible")
        assert all(s != "feasible" for s in statuses[:first_feasible])


class TestMinDwellRobust:
    def test_polytope_example(self, robust_sys):
        result = min_dwell_robust(robust_sys, 8)
        assert result.tau_star == 3

    def test_budget_below_boundary(self, robust_sys):
        assert min_dwell_robust(robust_sys, 2).tau_star is None

    def test_single_vertex_matches_nominal(self, ex1):
        doc = {
            "n": 2,
            "modes": [{"vertices": [m.A.tolist()]} for m in ex1.modes],
        }
        degenerate = system_from_dict(doc)
        assert min_dwell_robust(degenerate, 8).tau_star == 6


class TestFlatMonotonicity:
    def test_backward_feasibility_persists_above_boundary(self, ex1):
        opts = SolveOptions(max_newton_iters=800)
        for tau in range(6, 11):
            outcome = solve(build_flat_dwell(ex1, tau, "backward"), opts)
            assert outcome.status is SolveStatus.FEASIBLE, f"tau={tau}"


class TestL2Gain:
    def test_below_stability_boundary_raises(self, ex7):
        with pytest.raises(GainUnboundedOrUnstable):
            l2_gain(ex7, 4)

    def test_certified_level_with_verified_certificate(self, ex7):
        result = l2_gain(ex7, 5)
        assert np.isfinite(result.gamma_upper) and result.gamma_upper > 0
        assert result.certificate.gamma == result.gamma_upper
        assert all(r.passed for r in result.verification)
        # bracket invariant: everything below the last infeasible probe failed
        feasible = [g for g, s in result.probes if s == "feasible"]
        infeasible = [g for g, s in result.probes if s == "infeasible"]
        assert min(feasible) == result.gamma_upper
        assert all(g < result.gamma_upper for g in infeasible)

    def test_zero_gain_system_stays_at_first_bracket(self):
        system = system_from_dict(
            {
                "n": 2,
                "modes": [
                    {
                        "A": [[0.5, 0.0], [0.0, 0.5]],
                        "E": [[0.0], [0.0]],
                        "C": [[0.0, 0.0]],
                        "F": [[0.0]],
                    },
                    {
                        "A": [[0.0, 0.5], [0.5, 0.0]],
                        "E": [[0.0], [0.0]],
                        "C": [[0.0, 0.0]],
                        "F": [[0.0]],
                    },
                ],
            }
        )
        result = l2_gain(system, 1)
        assert result.gamma_upper <= 1.0

    def test_tol_must_be_positive(self, ex7):
        with pytest.raises(InvalidInput):
            l2_gain(ex7, 5, tol_rel=0.0)


class TestGammaTauSweep:
    def test_singleton_range(self, ex7):
        curve = gamma_tau_sweep(ex7, [5])
        assert len(curve.points) == 1
        assert curve.points[0].status == "certified"

    def test_per_point_failures_recorded(self, ex7):
        curve = gamma_tau_sweep(ex7, [4, 5])
        assert curve.points[0].status == "unbounded_or_unstable"
        assert curve.points[0].gamma_upper is None
        assert curve.points[1].status == "certified"

    def test_csv_format(self):
        curve = GainCurve(
            points=(
                GainPoint(tau=5, gamma_upper=9.123456789, status="certified"),
                GainPoint(tau=6, gamma_upper=None, status="error:Boom"),
            ),
            tol_rel=1e-3,
        )
        lines = curve.to_csv().splitlines()
        assert lines[0] == "tau,gamma_upper,status"
        assert lines[1] == "5,9.12345679,certified"
        assert lines[2] == "6,,error:Boom"

    def test_empty_range_rejected(self, ex7):
        with pytest.raises(InvalidInput):
            gamma_tau_sweep(ex7, [])

    def test_nonincreasing_requirement_on_taus(self, ex7):
        with pytest.raises(InvalidInput):
            gamma_tau_sweep(ex7, [5, 5])

    def test_process_parallel_matches_serial(self):
        system = contracting_pair(0.4)
        doc = {
            "n": 2,
            "modes": [
                {
                    "A": m.A.tolist(),
                    "E": [[1.0], [0.0]],
                    "C": [[0.5, 0.0]],
                }
                for m in system.modes
            ],
        }
        io_system = system_from_dict(doc)
        serial = gamma_tau_sweep(io_system, [1, 2], workers=1)
        parallel = gamma_tau_sweep(io_system, [1, 2], workers=2)
        assert [p.to_dict() for p in serial.points] == [
            p.to_dict() for p in parallel.points
        ]
