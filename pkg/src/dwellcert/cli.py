"""Command-line front end.

A thin client over the certification service: every command reads its local
input files, sends one request to the service (in-process by default, or a
remote ``--server`` URL), and writes the outputs.  The JSON report goes to
stdout, a human summary to stderr, and file artifacts (gains, certificates,
CSV) next to wherever the caller pointed them.

Exit codes: 0 for a certified/confirmed result, 2 for a well-posed negative
result, 1 for usage or input errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NEGATIVE = 2

_WITNESS_HELP = (
    "product pattern: whitespace-separated 'mode^power' tokens (1-based modes), "
    "each optionally '@w1,w2,...' with convex vertex weights; a single weight w "
    "on a two-vertex mode means (w, 1-w).  Example: '1^5 2^5' or '1@0.9 1@0 2^2@1'"
)


class CliError(Exception):
    pass


def _read_json(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}") from exc


def _request(path: str, payload: dict, server: str | None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=payload)
    else:
        from .service import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://dwellcert.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(go())
    if response.status_code >= 500:
        raise CliError(f"service error: {response.text}")
    if response.status_code >= 400:
        try:
            body = response.json()
            raise CliError(f"{body.get('error', 'error')}: {body.get('message', response.text)}")
        except (ValueError, KeyError):
            raise CliError(f"request rejected: {response.text}") from None
    return response.json()


def _emit(report: dict, summary: str) -> None:
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    print(summary, file=sys.stderr)


def _exit_code(report: dict) -> int:
    return EXIT_OK if report["outcome"] == "positive" else EXIT_NEGATIVE


def _cmd_analyze(args) -> int:
    system = _read_json(args.system, "system file")
    payload = {
        "system": system,
        "tau_max": args.tau_max,
        "form": args.form,
        "robust": args.robust,
    }
    report = _request("/analyze", payload, args.server)
    tau_star = report["results"]["tau_star"]
    if args.cert_out and report["results"]["certificate"] is not None:
        Path(args.cert_out).write_text(
            json.dumps(report["results"]["certificate"]) + "\n"
        )
    summary = (
        f"certified minimum dwell-time tau*={tau_star}"
        if tau_star is not None
        else f"no certifiable dwell-time up to tau_max={args.tau_max}"
    )
    _emit(report, summary)
    return _exit_code(report)


def _cmd_synthesize(args) -> int:
    system = _read_json(args.system, "system file")
    payload = {
        "system": system,
        "tau": args.tau,
        "l2": args.l2,
        "gamma": args.gamma,
        "minimize": args.minimize,
        "tol_rel": args.tol,
    }
    body = _request("/synthesize", payload, args.server)
    report = body["report"]
    if body.get("gains") is not None:
        Path(args.gains_out).write_text(json.dumps(body["gains"]) + "\n")
        extra = f"; gains written to {args.gains_out}"
        if args.l2:
            extra += f"; gamma_upper={report['results']['gamma_upper']:.6g}"
        summary = f"controller certified for tau={args.tau}{extra}"
    else:
        summary = f"no controller found for tau={args.tau}"
    _emit(report, summary)
    return _exit_code(report)


def _cmd_l2(args) -> int:
    system = _read_json(args.system, "system file")
    sweep = None
    if args.sweep:
        try:
            lo, hi = args.sweep.split("..")
            sweep = list(range(int(lo), int(hi) + 1))
        except ValueError as exc:
            raise CliError(f"--sweep expects 'a..b', got {args.sweep!r}") from exc
    payload = {
        "system": system,
        "tau": args.tau,
        "sweep": sweep,
        "tol_rel": args.tol,
    }
    body = _request("/l2", payload, args.server)
    report = body["report"]
    if body.get("csv") is not None:
        Path(args.csv_out).write_text(body["csv"])
        summary = f"gain curve written to {args.csv_out}"
    elif report["outcome"] == "positive":
        summary = f"gamma_upper={report['results']['gamma_upper']:.6g} at tau={args.tau}"
    else:
        summary = report["results"].get("reason", "no certifiable gain level")
    if args.cert_out and report["results"].get("certificate") is not None:
        Path(args.cert_out).write_text(
            json.dumps(report["results"]["certificate"]) + "\n"
        )
    _emit(report, summary)
    return _exit_code(report)


def _cmd_simulate(args) -> int:
    system = _read_json(args.system, "system file")
    payload = {
        "system": system,
        "tau": args.tau,
        "seed": args.seed,
        "horizon": args.horizon,
        "gains": _read_json(args.gains, "gains file") if args.gains else None,
        "certificate": _read_json(args.cert, "certificate file") if args.cert else None,
    }
    body = _request("/simulate", payload, args.server)
    if args.out:
        Path(args.out).write_text(body["csv"])
        _emit(body["report"], f"trajectory written to {args.out}")
    else:
        sys.stdout.write(body["csv"])
        print(
            f"simulated horizon {args.horizon}, final state norm "
            f"{body['report']['results']['final_norm']:.3e}",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_verify(args) -> int:
    system = _read_json(args.system, "system file")
    payload = {
        "system": system,
        "certificate": _read_json(args.cert, "certificate file") if args.cert else None,
        "witness": args.witness,
    }
    report = _request("/verify", payload, args.server)
    if args.witness:
        rho = report["results"]["rho"]
        verdict = "unstable product confirmed" if report["outcome"] == "positive" else "product stable"
        summary = f"rho={rho:.6g}: {verdict}"
    else:
        summary = (
            "certificate verified"
            if report["outcome"] == "positive"
            else "certificate FAILED verification"
        )
    _emit(report, summary)
    return _exit_code(report)


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwellcert",
        description=(
            "Certify stability, stabilizability and energy-gain bounds of "
            "discrete-time switched linear systems under minimum dwell-time "
            "constraints."
        ),
    )
    parser.add_argument("--version", action="version", version=f"dwellcert {__version__}")
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running dwellcert service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="minimum dwell-time scan with certificates")
    p.add_argument("system", help="system JSON file")
    p.add_argument("--tau-max", type=int, default=16)
    p.add_argument("--form", choices=("primal", "dual"), default="primal")
    p.add_argument("--robust", action="store_true", help="vertex-wise polytopic scan")
    p.add_argument("--cert-out", default=None, help="write the certificate JSON here")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("synthesize", help="state-feedback synthesis at fixed dwell-time")
    p.add_argument("system")
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--l2", action="store_true", help="also certify an energy-gain level")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--gamma", type=float, default=None, help="fixed gain level")
    group.add_argument("--minimize", action="store_true", help="bisect the gain level")
    p.add_argument("--tol", type=float, default=1e-3, help="relative bisection tolerance")
    p.add_argument("--gains-out", default="gains.json")
    p.set_defaults(fn=_cmd_synthesize)

    p = sub.add_parser("l2", help="energy-gain bound at one dwell-time or over a sweep")
    p.add_argument("system")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--tau", type=int, default=None)
    group.add_argument("--sweep", default=None, help="dwell-time range 'a..b'")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--csv-out", default="gain_curve.csv")
    p.add_argument("--cert-out", default=None)
    p.set_defaults(fn=_cmd_l2)

    p = sub.add_parser("simulate", help="seeded dwell-admissible trajectory as CSV")
    p.add_argument("system")
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=120)
    p.add_argument("--gains", default=None, help="close the loop with this gains file")
    p.add_argument("--cert", default=None, help="certificate file for Lyapunov traces")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("verify", help="re-verify a certificate or evaluate a witness")
    p.add_argument("system")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--cert", default=None, help="certificate JSON file")
    group.add_argument("--witness", default=None, help=_WITNESS_HELP)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
