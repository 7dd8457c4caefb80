import json

import numpy as np

from conftest import fixture_path
from dwellcert.cli import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def report_of(out):
    return json.loads(out)


class TestAnalyzeCommand:
    def test_certified(self, capsys, tmp_path):
        cert_path = tmp_path / "cert.json"
        code, out, err = run_cli(
            capsys,
            "analyze",
            str(fixture_path("ex1.json")),
            "--tau-max",
            "8",
            "--cert-out",
            str(cert_path),
        )
        assert code == EXIT_OK
        report = report_of(out)
        assert report["results"]["tau_star"] == 6
        assert "tau*=6" in err
        cert = json.loads(cert_path.read_text())
        assert cert["tau"] == 6 and cert["form"] == "primal"

    def test_robust(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "analyze",
            str(fixture_path("robust.json")),
            "--robust",
            "--tau-max",
            "5",
        )
        assert code == EXIT_OK
        assert report_of(out)["results"]["tau_star"] == 3

    def test_negative_exit(self, capsys):
        code, out, _ = run_cli(
            capsys, "analyze", str(fixture_path("ex1.json")), "--tau-max", "3"
        )
        assert code == EXIT_NEGATIVE

    def test_missing_file_exit(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "missing.json")
        assert code == EXIT_USAGE
        assert "cannot read" in err

    def test_malformed_system_exit(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n": 2, "modes": [], "junk": 1}))
        code, _, err = run_cli(capsys, "analyze", str(bad))
        assert code == EXIT_USAGE
        assert "ParseError" in err


class TestSynthesizeCommand:
    def test_gains_written(self, capsys, tmp_path):
        gains_path = tmp_path / "gains.json"
        code, out, err = run_cli(
            capsys,
            "synthesize",
            str(fixture_path("ex6.json")),
            "--tau",
            "2",
            "--gains-out",
            str(gains_path),
        )
        assert code == EXIT_OK
        gains = json.loads(gains_path.read_text())
        assert gains["tau"] == 2
        assert np.asarray(gains["modes"][0]["K"][0]).shape == (2, 5)
        assert "gains written" in err

    def test_not_stabilizable_exit(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "synthesize",
            str(fixture_path("ex6.json")),
            "--tau",
            "1",
            "--gains-out",
            str(tmp_path / "g.json"),
        )
        assert code == EXIT_NEGATIVE
        assert not (tmp_path / "g.json").exists()

    def test_l2_minimize(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "synthesize",
            str(fixture_path("ex8.json")),
            "--tau",
            "2",
            "--l2",
            "--minimize",
            "--gains-out",
            str(tmp_path / "g.json"),
        )
        assert code == EXIT_OK
        assert np.isfinite(report_of(out)["results"]["gamma_upper"])


class TestL2Command:
    def unstable_io_pair(self, tmp_path):
        doc = {
            "n": 1,
            "modes": [
                {"A": [[2.0]], "E": [[1.0]], "C": [[1.0]], "F": [[0.0]]},
                {"A": [[0.5]], "E": [[1.0]], "C": [[1.0]], "F": [[0.0]]},
            ],
        }
        path = tmp_path / "unstable.json"
        path.write_text(json.dumps(doc))
        return path

    def test_single_tau(self, capsys):
        code, out, _ = run_cli(
            capsys, "l2", str(fixture_path("ex7.json")), "--tau", "5"
        )
        assert code == EXIT_OK
        assert report_of(out)["results"]["gamma_upper"] > 0

    def test_unstable_exit(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "l2", str(self.unstable_io_pair(tmp_path)), "--tau", "1")
        assert code == EXIT_NEGATIVE

    def test_sweep_csv(self, capsys, tmp_path):
        doc = {
            "n": 1,
            "modes": [
                {"A": [[0.5]], "E": [[0.0]], "C": [[0.0]], "F": [[0.0]]},
                {"A": [[0.2]], "E": [[0.0]], "C": [[0.0]], "F": [[0.0]]},
            ],
        }
        system = tmp_path / "tiny.json"
        system.write_text(json.dumps(doc))
        csv_path = tmp_path / "curve.csv"
        code, _, _ = run_cli(
            capsys, "l2", str(system), "--sweep", "1..3", "--csv-out", str(csv_path)
        )
        assert code == EXIT_OK
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "tau,gamma_upper,status"
        assert len(lines) == 4

    def test_bad_sweep_syntax(self, capsys):
        code, _, err = run_cli(
            capsys, "l2", str(fixture_path("ex7.json")), "--sweep", "5-12"
        )
        assert code == EXIT_USAGE
        assert "a..b" in err


class TestSimulateCommand:
    def test_lyapunov_columns_nonincreasing(self, capsys, tmp_path):
        cert_path = tmp_path / "cert.json"
        run_cli(
            capsys,
            "analyze",
            str(fixture_path("ex1.json")),
            "--tau-max",
            "8",
            "--cert-out",
            str(cert_path),
        )
        code, out, _ = run_cli(
            capsys,
            "simulate",
            str(fixture_path("ex1.json")),
            "--tau",
            "6",
            "--seed",
            "3",
            "--horizon",
            "120",
            "--cert",
            str(cert_path),
        )
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        header = lines[0].split(",")
        vf_col, vb_col = header.index("Vf"), header.index("Vb")
        vf = [float(l.split(",")[vf_col]) for l in lines[1:]]
        vb = [float(l.split(",")[vb_col]) for l in lines[1:]]
        assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(vf, vf[1:]))
        assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(vb, vb[1:]))

    def test_horizon_zero_header_only(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "simulate",
            str(fixture_path("ex1.json")),
            "--tau",
            "2",
            "--horizon",
            "0",
        )
        assert code == EXIT_OK
        assert out.strip() == "t,mode,x_1,x_2"

    def test_wrong_tau_gains_rejected(self, capsys, tmp_path):
        gains_path = tmp_path / "gains.json"
        run_cli(
            capsys,
            "synthesize",
            str(fixture_path("ex6.json")),
            "--tau",
            "2",
            "--gains-out",
            str(gains_path),
        )
        code, _, err = run_cli(
            capsys,
            "simulate",
            str(fixture_path("ex6.json")),
            "--tau",
            "3",
            "--gains",
            str(gains_path),
        )
        assert code == EXIT_USAGE
        assert "tau" in err

    def test_output_file(self, capsys, tmp_path):
        out_path = tmp_path / "traj.csv"
        code, out, _ = run_cli(
            capsys,
            "simulate",
            str(fixture_path("ex1.json")),
            "--tau",
            "6",
            "--horizon",
            "10",
            "--out",
            str(out_path),
        )
        assert code == EXIT_OK
        assert len(out_path.read_text().splitlines()) == 12
        report_of(out)  # report JSON on stdout when CSV goes to a file


class TestVerifyCommand:
    def test_witness_unstable(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", str(fixture_path("ex1.json")), "--witness", "1^5 2^5"
        )
        assert code == EXIT_OK
        assert report_of(out)["results"]["rho"] > 1

    def test_witness_stable_exit_two(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", str(fixture_path("ex1.json")), "--witness", "1^1"
        )
        assert code == EXIT_NEGATIVE

    def test_certificate_file(self, capsys, tmp_path):
        cert_path = tmp_path / "cert.json"
        run_cli(
            capsys,
            "analyze",
            str(fixture_path("ex1.json")),
            "--tau-max",
            "8",
            "--cert-out",
            str(cert_path),
        )
        code, out, err = run_cli(
            capsys, "verify", str(fixture_path("ex1.json")), "--cert", str(cert_path)
        )
        assert code == EXIT_OK
        assert "certificate verified" in err

    def test_bad_pattern_exit(self, capsys):
        code, _, _ = run_cli(
            capsys, "verify", str(fixture_path("ex1.json")), "--witness", "^^"
        )
        assert code == EXIT_USAGE


class TestSolverLogEnv:
    def test_log_file_written(self, capsys, tmp_path, monkeypatch):
        log_path = tmp_path / "solver.log"
        monkeypatch.setenv("DWELL_SOLVER_LOG", str(log_path))
        code, _, _ = run_cli(
            capsys, "analyze", str(fixture_path("ex1.json")), "--tau-max", "2"
        )
        assert code == EXIT_NEGATIVE
        text = log_path.read_text()
        assert "eta=" in text and "decrement=" in text
