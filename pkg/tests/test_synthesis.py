import numpy as np
import pytest

from dwellcert.errors import NoControllerFound
from dwellcert.lmi import build_l2, build_l2_synthesis
from dwellcert.model import DwellSpec, random_signal, system_from_dict
from dwellcert.sdp import SolveStatus, solve
from dwellcert.synthesis import gain_at, synthesize, synthesize_l2
from dwellcert.verify import simulate


@pytest.fixture(scope="module")
def ex6_controller(ex6):
    return synthesize(ex6, 2)


class TestSynthesize:
    def test_unstabilizable_at_tau_one(self, ex6):
        with pytest.raises(NoControllerFound) as info:
            synthesize(ex6, 1)
        assert info.value.diagnostics["status"] == "infeasible"
        assert info.value.diagnostics["worst_constraint"]

    def test_gains_at_tau_two(self, ex6, ex6_controller):
        result = ex6_controller
        assert result.gains.tau == 2
        for i, mode in enumerate(ex6.modes):
            for k in range(3):
                assert result.gains.gain_at(i, k).shape == (mode.m, ex6.n)
        assert result.verification.passed

    def test_gain_reproducibility_from_stored_blocks(self, ex6_controller):
        result = ex6_controller
        for i, (u_seq, s_seq) in enumerate(
            zip(result.transformed_gains, result.certificate.sequences)
        ):
            for k, (u, s) in enumerate(zip(u_seq, s_seq)):
                regained = u @ np.linalg.inv(s)
                assert np.max(np.abs(regained - result.gains.gain_at(i, k))) <= 1e-8

    def test_closed_loop_simulations_decay(self, ex6, ex6_controller):
        gains = ex6_controller.gains
        rng = np.random.default_rng(0)
        for seed in range(10):
            sig = random_signal(DwellSpec(tau=2), horizon=120, seed=seed, num_modes=2)
            x0 = rng.standard_normal(5)
            traj = simulate(ex6, sig, x0, 120, gains=gains)
            assert np.linalg.norm(traj.states[-1]) <= 1e-6 * np.linalg.norm(x0)

    def test_open_loop_stable_system_is_easy(self):
        system = system_from_dict(
            {
                "n": 2,
                "modes": [
                    {"A": [[0.5, 0.0], [0.0, 0.5]], "B": [[1.0, 0.0], [0.0, 1.0]]},
                    {"A": [[0.0, 0.5], [0.5, 0.0]], "B": [[1.0, 0.0], [0.0, 1.0]]},
                ],
            }
        )
        result = synthesize(system, 1)
        assert result.verification.passed

    def test_closed_loop_snapshot_matches_gains(self, ex6, ex6_controller):
        result = ex6_controller
        for i, mode in enumerate(ex6.modes):
            for k in range(3):
                expected = mode.A + mode.B @ result.gains.gain_at(i, k)
                assert np.allclose(result.closed_loop[i][k], expected)


class TestGainAt:
    def test_clamping(self, ex6_controller):
        gains = ex6_controller.gains
        assert np.array_equal(gain_at(gains, 0, 0), gains.gains[0][0])
        assert np.array_equal(gain_at(gains, 0, 2), gains.gains[0][2])
        assert np.array_equal(gain_at(gains, 0, 7), gains.gains[0][2])

    def test_serialization_roundtrip(self, ex6_controller):
        from dwellcert.certificates import ControllerGains

        gains = ex6_controller.gains
        again = ControllerGains.from_dict(gains.to_dict())
        assert again.tau == gains.tau
        for i in range(2):
            for k in range(3):
                assert np.allclose(again.gain_at(i, k), gains.gain_at(i, k))


class TestSynthesizeL2:
    def test_not_stabilizable_at_tau_one(self, ex8):
        with pytest.raises(NoControllerFound) as info:
            synthesize_l2(ex8, 1)
        probes = info.value.diagnostics["probes"]
        assert len(probes) == 21  # doubling from 1 up to the 2^20 cap
        assert all(status != "feasible" for _, status in probes)

    def test_finite_level_at_tau_two(self, ex8):
        result, gamma = synthesize_l2(ex8, 2)
        assert np.isfinite(gamma) and gamma > 0
        assert result.gamma_upper == gamma
        assert result.verification.passed

    def test_fixed_level_solvable_when_loose(self, ex8):
        _, gamma = synthesize_l2(ex8, 2)
        result, level = synthesize_l2(ex8, 2, gamma=10 * gamma)
        assert level == 10 * gamma
        assert result.verification.passed

    def test_fixed_level_unsolvable_when_tight(self, ex8):
        _, gamma = synthesize_l2(ex8, 2)
        with pytest.raises(NoControllerFound):
            synthesize_l2(ex8, 2, gamma=gamma / 4)

    def test_closed_loop_energy_ratio_below_level(self, ex8):
        result, gamma = synthesize_l2(ex8, 3)
        rng = np.random.default_rng(1)
        for seed in range(5):
            sig = random_signal(DwellSpec(tau=3), horizon=200, seed=seed, num_modes=2)
            w = [rng.standard_normal(1) for _ in range(200)]
            traj = simulate(ex8, sig, np.zeros(2), 200, w=w, gains=result.gains)
            num = sum(float(z @ z) for z in traj.outputs)
            den = sum(float(v @ v) for v in traj.inputs)
            assert num <= gamma**2 * den * (1 + 1e-6)


class TestDegenerateCertificate:
    def test_indefinite_dual_block_rejected(self):
        from dwellcert.errors import CertificateDegenerate
        from dwellcert.lmi import build_synthesis
        from dwellcert.synthesis import _recover

        system = system_from_dict(
            {
                "n": 2,
                "modes": [
                    {"A": [[0.5, 0.0], [0.0, 0.5]], "B": [[1.0], [0.0]]},
                    {"A": [[0.0, 0.5], [0.5, 0.0]], "B": [[0.0], [1.0]]},
                ],
            }
        )
        problem = build_synthesis(system, 1)
        outcome = solve(problem)
        assert outcome.status is SolveStatus.FEASIBLE
        values = problem.vars.unpack(outcome.witness)
        values["seq:1:0"] = -np.eye(2)
        broken = problem.vars.pack(values)
        with pytest.raises(CertificateDegenerate, match="S_1"):
            _recover(system, 1, problem, broken, gamma=None)


class TestZeroControlReduction:
    def test_l2_synthesis_with_zero_b_matches_l2_feasibility(self):
        # with B = 0 the gain blocks are inert and the dual synthesis
        # conditions decide exactly the analysis question
        doc = {
            "n": 2,
            "modes": [
                {
                    "A": [[0.6, 0.1], [0.0, 0.5]],
                    "B": [[0.0], [0.0]],
                    "E": [[1.0], [0.0]],
                    "C": [[1.0, 0.0]],
                },
                {
                    "A": [[0.5, 0.0], [0.2, 0.6]],
                    "B": [[0.0], [0.0]],
                    "E": [[1.0], [0.0]],
                    "C": [[0.0, 1.0]],
                },
            ],
        }
        system = system_from_dict(doc)
        for gamma in (8.0, 0.2):
            synth = solve(build_l2_synthesis(system, 2, gamma))
            plain = solve(build_l2(system, 2, gamma))
            assert synth.status == plain.status, f"gamma={gamma}"
        assert solve(build_l2(system, 2, 8.0)).status is SolveStatus.FEASIBLE
        assert solve(build_l2(system, 2, 0.2)).status is SolveStatus.INFEASIBLE
