"""Independent verification of certificates and negative results.

Everything here re-derives its verdicts from first principles, on purpose:
certificates are checked against the explicit matrix-power conditions,
infeasibility claims are corroborated by spectral radii of mode products, and
energy-gain certificates are checked against the one-shot stacked-window
(Toeplitz) conditions and against simulated trajectories.  None of the checks
reuse the solver path that produced the object being checked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .certificates import ControllerGains, LiftedCertificate
from .errors import DimensionMismatch, InvalidInput
from .lmi import build_lifted, strictness_margin
from .model import SwitchedSystem, SwitchingSignal
from .sdp import check_witness

__all__ = [
    "MarginReport",
    "InstabilityWitness",
    "Trajectory",
    "check_flat",
    "check_lifted",
    "check_closed_loop",
    "check_l2_window",
    "instability_witness",
    "parse_witness_pattern",
    "random_product",
    "simulate",
]


@dataclass(frozen=True)
class MarginReport:
    """Outcome of one verification pass: labelled margins plus a verdict."""

    name: str
    margins: tuple[tuple[str, float], ...]
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def worst(self) -> tuple[str, float]:
        return max(self.margins, key=lambda item: item[1])

    def to_dict(self) -> dict:
        label, value = self.worst
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_label": label,
            "worst_margin": value,
            "details": self.details,
        }


@dataclass(frozen=True)
class InstabilityWitness:
    """A mode/vertex product whose spectral radius certifies instability when > 1."""

    description: str
    rho: float
    matrix: np.ndarray

    @property
    def unstable(self) -> bool:
        return self.rho > 1.0

    def to_dict(self) -> dict:
        return {"description": self.description, "rho": self.rho, "unstable": self.unstable}


def check_flat(
    system: SwitchedSystem,
    tau: int,
    p_list: list[np.ndarray],
    variant: str = "backward",
) -> MarginReport:
    """Evaluate the explicit matrix-power dwell conditions at given matrices.

    Reports the largest eigenvalue of every step and dwell-coupling condition
    (built directly with ``mat_pow``) plus positive-definiteness of each P.
    Report-only: ``passed`` means every margin clears ``-delta/2`` and every
    P is positive definite.
    """
    if variant not in ("forward", "backward"):
        raise InvalidInput(f"variant must be 'forward' or 'backward', got {variant!r}")
    if len(p_list) != system.N:
        raise InvalidInput(f"need {system.N} matrices, got {len(p_list)}")
    delta = strictness_margin(system)
    margins: list[tuple[str, float]] = []
    pd_ok = True
    smallest_overall = np.inf
    for i, p in enumerate(p_list):
        smallest = linalg.min_eig(p)
        pd_ok = pd_ok and smallest > 0
        smallest_overall = min(smallest_overall, smallest)
        margins.append((f"pd:i={i + 1}", -smallest))
    # The conditions are homogeneous in P, so fix the reporting scale at
    # min_i lambda_min(P_i) = 1; margins are then comparable to delta.
    if pd_ok:
        p_list = [p / smallest_overall for p in p_list]
    powers = [linalg.mat_pow(m.A, tau) for m in system.modes]
    for i, mode in enumerate(system.modes):
        a = mode.A
        margins.append(
            (f"step:i={i + 1}", linalg.max_eig(a.T @ p_list[i] @ a - p_list[i]))
        )
        for j in range(system.N):
            if i == j:
                continue
            at = powers[i]
            if variant == "forward":
                value = linalg.max_eig(at.T @ p_list[j] @ at - p_list[i])
            else:
                value = linalg.max_eig(at.T @ p_list[i] @ at - p_list[j])
            margins.append((f"dwell:i={i + 1},j={j + 1}", value))
    worst = max(v for label, v in margins if not label.startswith("pd:"))
    passed = pd_ok and worst <= -delta / 2
    return MarginReport(
        name=f"flat:{variant}",
        margins=tuple(margins),
        passed=passed,
        details={"delta": delta, "tau": tau, "bound": -delta / 2},
    )


def check_lifted(
    system: SwitchedSystem, tau: int, cert: LiftedCertificate
) -> MarginReport:
    """Re-verify a lifted certificate against the conditions it claims to satisfy.

    Three independent checks: (i) every assembled LMI re-evaluated at the
    certificate, (ii) positive definiteness of every sequence block, and
    (iii) the telescoped power condition
    ``A^tau-composed tail against the anchor`` within ``1e-8``.
    """
    if cert.tau != tau:
        raise InvalidInput(f"certificate is for tau={cert.tau}, not {tau}")
    if cert.num_modes != system.N:
        raise InvalidInput(
            f"certificate has {cert.num_modes} modes, system has {system.N}"
        )
    problem = build_lifted(system, tau, form=cert.form)
    x = problem.vars.pack(
        {
            f"seq:{i + 1}:{k}": cert.block(i, k)
            for i in range(system.N)
            for k in range(tau + 1)
        }
    )
    lmi_report = check_witness(problem, x, tol_nonstrict=1e-8)

    margins: list[tuple[str, float]] = []
    chain_pd = True
    for i in range(system.N):
        for k in range(tau + 1):
            smallest = linalg.min_eig(cert.block(i, k))
            chain_pd = chain_pd and smallest > 0
            margins.append((f"pd:i={i + 1},k={k}", -smallest))

    telescope_tol = 1e-8
    telescope_ok = True
    for i, mode in enumerate(system.modes):
        for kappa, a in enumerate(mode.vertices):
            at = linalg.mat_pow(a, tau)
            if cert.form == "primal":
                gap = at.T @ cert.block(i, tau) @ at - cert.block(i, 0)
            else:
                gap = at @ cert.block(i, 0) @ at.T - cert.block(i, tau)
            value = linalg.max_eig(gap)
            vsuffix = f",v={kappa + 1}" if len(mode.vertices) > 1 else ""
            margins.append((f"telescope:i={i + 1}{vsuffix}", value))
            telescope_ok = telescope_ok and value <= telescope_tol

    margins.append(("lmi_worst", lmi_report["worst_strict"]))
    passed = lmi_report["passed"] and chain_pd and telescope_ok
    return MarginReport(
        name=f"lifted:{cert.form}",
        margins=tuple(margins),
        passed=passed,
        details={
            "lmi": lmi_report,
            "chain_positive": chain_pd,
            "telescope_ok": telescope_ok,
            "telescope_tol": telescope_tol,
        },
    )


def closed_loop_matrices(
    system: SwitchedSystem, gains: ControllerGains
) -> list[list[np.ndarray]]:
    """Step matrices ``A_i + B_i K_i(k)`` for k = 0..tau per mode."""
    out = []
    for i, mode in enumerate(system.modes):
        if mode.B is None:
            raise InvalidInput(f"mode {i + 1} has no B matrix")
        out.append(
            [mode.A + mode.B @ gains.gain_at(i, k) for k in range(gains.tau + 1)]
        )
    return out


def check_closed_loop(
    system: SwitchedSystem,
    tau: int,
    gains: ControllerGains,
    cert: LiftedCertificate,
    bound: float | None = None,
) -> MarginReport:
    """Check recovered gains against the explicit closed-loop dwell conditions.

    Uses ``P_i`` = inverse of the dual tail block; requires the post-dwell step
    condition and the dwell-window product condition to clear ``bound``,
    by default ``-delta/10`` (the congruence that recovers P from the dual
    certificate eats some of the assembly margin).  Gain-level-minimizing
    synthesis sits on the feasibility boundary by construction and passes a
    noise-floor bound instead.
    """
    if cert.form != "dual":
        raise InvalidInput("closed-loop check expects a dual-form certificate")
    delta = strictness_margin(system)
    if bound is None:
        bound = -delta / 10
    abar = closed_loop_matrices(system, gains)
    p_list = cert.flat_matrices()
    # Same homogeneity normalization as check_flat: the certificate scale is
    # arbitrary, the closed-loop conditions are not.
    smallest = min(linalg.min_eig(p) for p in p_list)
    if smallest > 0:
        p_list = [p / smallest for p in p_list]
    margins: list[tuple[str, float]] = []
    products = []
    for i in range(system.N):
        prod = np.eye(system.n)
        for k in range(tau):
            prod = abar[i][k] @ prod  # state propagation: later factors multiply left
        products.append(prod)
        a_tail = abar[i][tau]
        margins.append(
            (
                f"cl_step:i={i + 1}",
                linalg.max_eig(a_tail.T @ p_list[i] @ a_tail - p_list[i]),
            )
        )
    for i in range(system.N):
        for j in range(system.N):
            if i == j:
                continue
            value = linalg.max_eig(products[i].T @ p_list[i] @ products[i] - p_list[j])
            margins.append((f"cl_dwell:i={i + 1},j={j + 1}", value))
    worst = max(v for _, v in margins)
    return MarginReport(
        name="closed_loop",
        margins=tuple(margins),
        passed=worst <= bound,
        details={"bound": bound, "delta": delta},
    )


def _toeplitz_stack(mode, tau: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stacked output map, stacked input map, and the Markov-parameter Toeplitz block."""
    a = mode.A
    e_mat = mode.E if mode.E is not None else np.zeros((mode.n, 0))
    c_mat = mode.C if mode.C is not None else np.zeros((0, mode.n))
    p, q = e_mat.shape[1], c_mat.shape[0]
    f_mat = mode.F if mode.F is not None else np.zeros((q, p))
    powers = [linalg.mat_pow(a, k) for k in range(tau)]
    cal_c = np.vstack([c_mat @ powers[k] for k in range(tau)])  # (tau*q, n)
    cal_e = np.hstack([powers[tau - 1 - k] @ e_mat for k in range(tau)])  # (n, tau*p)
    cal_f = np.zeros((tau * q, tau * p))
    for r in range(tau):
        for c in range(r + 1):
            block = f_mat if r == c else c_mat @ powers[r - c - 1] @ e_mat
            cal_f[r * q : (r + 1) * q, c * p : (c + 1) * p] = block
    return cal_c, cal_e, cal_f


def check_l2_window(
    system: SwitchedSystem, tau: int, p_list: list[np.ndarray], gamma: float
) -> MarginReport:
    """One-shot stacked-window oracle for an energy-gain certificate.

    Builds the stacked output/input maps over one dwell window and evaluates
    both the per-mode one-step gain block and the cross-mode window block
    ``[[-P_j, 0], [0, -gamma^2 I]] + J diag(P_i, I) J'`` with identity blocks
    sized for the full window stack.  Report-only.
    """
    if gamma <= 0:
        raise InvalidInput("gamma must be positive")
    if len(p_list) != system.N:
        raise InvalidInput(f"need {system.N} matrices, got {len(p_list)}")
    n = system.n
    margins: list[tuple[str, float]] = []
    for i, mode in enumerate(system.modes):
        if mode.E is None or mode.C is None:
            raise InvalidInput(f"mode {i + 1} needs E and C for the gain oracle")
        a, e_mat, c_mat = mode.A, mode.E, mode.C
        p_dim, q_dim = mode.p, mode.q
        f_mat = mode.F if mode.F is not None else np.zeros((q_dim, p_dim))
        pi = p_list[i]
        one_step = np.block(
            [
                [a.T @ pi @ a - pi + c_mat.T @ c_mat, a.T @ pi @ e_mat + c_mat.T @ f_mat],
                [
                    (a.T @ pi @ e_mat + c_mat.T @ f_mat).T,
                    e_mat.T @ pi @ e_mat + f_mat.T @ f_mat - gamma**2 * np.eye(p_dim),
                ],
            ]
        )
        margins.append((f"one_step:i={i + 1}", linalg.max_eig(one_step)))

        cal_c, cal_e, cal_f = _toeplitz_stack(mode, tau)
        a_tau = linalg.mat_pow(a, tau)
        window_map = np.block([[a_tau.T, cal_c.T], [cal_e.T, cal_f.T]])
        weight = np.zeros((n + tau * q_dim, n + tau * q_dim))
        weight[:n, :n] = pi
        weight[n:, n:] = np.eye(tau * q_dim)
        quadratic = window_map @ weight @ window_map.T
        for j in range(system.N):
            if i == j:
                continue
            window = quadratic.copy()
            window[:n, :n] -= p_list[j]
            window[n:, n:] -= gamma**2 * np.eye(tau * mode.p)
            margins.append((f"window:i={i + 1},j={j + 1}", linalg.max_eig(window)))
    worst = max(v for _, v in margins)
    tol = 1e-9 * (1.0 + max(linalg.max_abs(p) for p in p_list))
    return MarginReport(
        name="l2_window",
        margins=tuple(margins),
        passed=worst <= tol,
        details={"gamma": gamma, "tau": tau, "tol": tol},
    )


_TOKEN_RE = re.compile(
    r"^(?P<mode>\d+)(?:\^(?P<power>\d+))?(?:@(?P<weights>[-0-9.,eE+]+))?$"
)


def parse_witness_pattern(text: str) -> list[tuple[int, int, tuple[float, ...] | None]]:
    """Parse a product pattern like ``"1^5 2^5"`` or ``"1@0.9 1@0 2^2@1"``.

    Tokens are ``mode[^power][@w1,w2,...]`` with 1-based modes; weights select
    a convex vertex combination (a single weight w means ``(w, 1-w)`` for
    two-vertex modes).  Returns ``(mode_0based, power, weights)`` entries.
    """
    entries = []
    for token in text.split():
        match = _TOKEN_RE.match(token)
        if match is None:
            raise InvalidInput(f"cannot parse witness token {token!r}")
        mode = int(match.group("mode"))
        if mode < 1:
            raise InvalidInput(f"mode indices are 1-based, got {mode}")
        power = int(match.group("power") or 1)
        weights = None
        if match.group("weights") is not None:
            try:
                weights = tuple(float(w) for w in match.group("weights").split(","))
            except ValueError as exc:
                raise InvalidInput(f"bad weights in token {token!r}") from exc
        entries.append((mode - 1, power, weights))
    if not entries:
        raise InvalidInput("empty witness pattern")
    return entries


def _combine_vertices(mode, weights: tuple[float, ...] | None, label: str) -> np.ndarray:
    if weights is None:
        if len(mode.vertices) > 1:
            raise InvalidInput(f"{label}: polytopic mode needs vertex weights")
        return mode.vertices[0]
    if len(weights) == 1 and len(mode.vertices) == 2:
        weights = (weights[0], 1.0 - weights[0])
    if len(weights) != len(mode.vertices):
        raise InvalidInput(
            f"{label}: {len(weights)} weights for {len(mode.vertices)} vertices"
        )
    if any(w < -1e-12 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise InvalidInput(f"{label}: weights must be convex (sum to 1, nonnegative)")
    return sum(w * v for w, v in zip(weights, mode.vertices))


def instability_witness(
    system: SwitchedSystem,
    pattern: list[tuple[int, int]] | list[tuple[int, int, tuple[float, ...] | None]] | str,
) -> InstabilityWitness:
    """Spectral radius of a mode/vertex product.

    A periodic dwell-admissible switching signal realizing the pattern is
    unstable iff the returned radius exceeds 1, so this is the standard
    falsification companion to an infeasibility verdict.
    """
    if isinstance(pattern, str):
        entries = parse_witness_pattern(pattern)
    else:
        entries = [e if len(e) == 3 else (e[0], e[1], None) for e in pattern]
    if not entries:
        raise InvalidInput("empty witness pattern")
    product = np.eye(system.n)
    parts = []
    for mode_idx, power, weights in entries:
        if not 0 <= mode_idx < system.N:
            raise InvalidInput(f"mode {mode_idx + 1} out of range (N={system.N})")
        if power < 1:
            raise InvalidInput("powers must be >= 1")
        factor = _combine_vertices(
            system.modes[mode_idx], weights, f"mode {mode_idx + 1}"
        )
        product = product @ linalg.mat_pow(factor, power)
        suffix = "" if weights is None else "@" + ",".join(f"{w:g}" for w in weights)
        parts.append(f"{mode_idx + 1}^{power}{suffix}")
    return InstabilityWitness(
        description=" ".join(parts),
        rho=linalg.spectral_radius(product),
        matrix=product,
    )


def random_product(
    system: SwitchedSystem, tau: int, samples: int, seed: int
) -> InstabilityWitness:
    """Sampled falsification over the product set of a polytopic system.

    Draws random convex vertex combinations for each of ``tau`` factors per
    mode, cycles once through all modes, and returns the largest spectral
    radius found.  Sampling is vertex-biased (half pure vertices, half sparse
    Dirichlet draws) because destabilizing products sit near the vertex set.
    A tool for finding counterexamples, never a proof of robustness.
    """
    if samples < 1:
        raise InvalidInput("samples must be >= 1")
    if tau < 1:
        raise InvalidInput("tau must be >= 1")
    rng = np.random.default_rng(seed)

    def draw_weights(eta: int) -> np.ndarray:
        if eta == 1:
            return np.array([1.0])
        if rng.random() < 0.5:
            weights = np.zeros(eta)
            weights[rng.integers(eta)] = 1.0
            return weights
        return rng.dirichlet(0.3 * np.ones(eta))

    best: InstabilityWitness | None = None
    for _ in range(samples):
        product = np.eye(system.n)
        parts = []
        for i, mode in enumerate(system.modes):
            eta = len(mode.vertices)
            for _k in range(tau):
                weights = draw_weights(eta)
                factor = sum(w * v for w, v in zip(weights, mode.vertices))
                product = factor @ product
                if eta > 1:
                    parts.append(f"{i + 1}@" + ",".join(f"{w:.3f}" for w in weights))
                else:
                    parts.append(f"{i + 1}")
        rho = linalg.spectral_radius(product)
        if best is None or rho > best.rho:
            best = InstabilityWitness(
                description=" ".join(parts), rho=rho, matrix=product
            )
    assert best is not None
    return best


@dataclass(frozen=True)
class Trajectory:
    """Simulated run: states plus optional control/input/output/Lyapunov traces.

    ``states[t]`` is x(t) for t = 0..horizon; per-step lists (``controls``,
    ``inputs``, ``outputs``) have one entry per step t = 0..horizon-1 and may
    hold vectors of different lengths when channel dimensions vary by mode.
    """

    states: np.ndarray
    modes: tuple[int, ...]
    signal: SwitchingSignal
    controls: tuple[np.ndarray, ...] | None = None
    inputs: tuple[np.ndarray, ...] | None = None
    outputs: tuple[np.ndarray, ...] | None = None
    lyapunov_f: tuple[float, ...] | None = None
    lyapunov_b: tuple[float, ...] | None = None

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    def to_csv(self) -> str:
        """CSV dump: ``t,mode,x_1..x_n[,u_*][,w_*][,z_*][,Vf,Vb]``.

        Variable-width channels are padded to the widest mode; 1-based modes.
        """
        n = self.states.shape[1]
        header = ["t", "mode"] + [f"x_{i + 1}" for i in range(n)]

        def width(seq):
            return max((len(v) for v in seq), default=0) if seq is not None else 0

        wu, ww, wz = width(self.controls), width(self.inputs), width(self.outputs)
        header += [f"u_{i + 1}" for i in range(wu)]
        header += [f"w_{i + 1}" for i in range(ww)]
        header += [f"z_{i + 1}" for i in range(wz)]
        if self.lyapunov_f is not None:
            header += ["Vf", "Vb"]
        lines = [",".join(header)]
        for t in range(self.states.shape[0]):
            row = [str(t), str(self.modes[t] + 1)]
            row += [f"{v:.12g}" for v in self.states[t]]
            for seq, w in ((self.controls, wu), (self.inputs, ww), (self.outputs, wz)):
                if w == 0:
                    continue
                vec = seq[t] if seq is not None and t < len(seq) else np.zeros(0)
                row += [f"{v:.12g}" for v in vec] + [""] * (w - len(vec))
            if self.lyapunov_f is not None:
                row += [f"{self.lyapunov_f[t]:.12g}", f"{self.lyapunov_b[t]:.12g}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _lyapunov_weights(
    system: SwitchedSystem,
    lyapunov: list[np.ndarray] | LiftedCertificate | None,
) -> tuple[str, list[list[np.ndarray]], int] | None:
    """Normalize the Lyapunov argument to per-mode weight sequences.

    Flat matrices become constant sequences; a dual certificate is converted
    to the equivalent primal weights by inverting its blocks.
    """
    if lyapunov is None:
        return None
    if isinstance(lyapunov, LiftedCertificate):
        cert = lyapunov
        if cert.num_modes != system.N:
            raise DimensionMismatch(
                f"certificate has {cert.num_modes} modes, system has {system.N}"
            )
        weights = []
        for i in range(system.N):
            seq = []
            for k in range(cert.tau + 1):
                block = cert.block(i, k)
                if cert.form == "dual":
                    block = linalg.solve_spd(block, np.eye(block.shape[0]))
                seq.append(block)
            weights.append(seq)
        return ("certificate", weights, cert.tau)
    mats = [linalg.as_sym_matrix(p, f"P_{i + 1}") for i, p in enumerate(lyapunov)]
    if len(mats) != system.N:
        raise DimensionMismatch(f"need {system.N} Lyapunov matrices, got {len(mats)}")
    return ("flat", [[p] for p in mats], 0)


def simulate(
    system: SwitchedSystem,
    signal: SwitchingSignal,
    x0,
    horizon: int,
    w: list | None = None,
    gains: ControllerGains | None = None,
    lyapunov: list[np.ndarray] | LiftedCertificate | None = None,
) -> Trajectory:
    """Run the exact switched recursion for ``horizon`` steps.

    ``w`` supplies one exogenous input vector per step (dimension of the
    active mode); ``gains`` closes the loop through the dwell-clamped feedback
    law.  With ``lyapunov`` given, the forward trace ``Vf`` uses the active
    mode's (step-indexed, for certificates) weight and the backward trace
    ``Vb`` carries the previous segment's weight across each switch.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (system.n,):
        raise DimensionMismatch(f"x0 has dimension {x.shape[0]}, state is {system.n}")
    if horizon < 0:
        raise InvalidInput("horizon must be >= 0")
    if any(m >= system.N for m in signal.modes):
        raise DimensionMismatch("signal uses a mode index beyond the system's N")
    if w is not None and len(w) < horizon:
        raise DimensionMismatch(f"need {horizon} input vectors, got {len(w)}")

    weights = _lyapunov_weights(system, lyapunov)
    states = np.zeros((horizon + 1, system.n))
    states[0] = x
    modes = [signal.mode_at(t) for t in range(horizon + 1)]
    controls: list[np.ndarray] = []
    inputs: list[np.ndarray] = []
    outputs: list[np.ndarray] = []
    has_output = any(m.C is not None for m in system.modes)

    def weight_at(t: int, backward: bool) -> np.ndarray:
        kind, seqs, tau = weights
        ref = t - 1 if backward and t > 0 else t
        mode = modes[ref]
        if kind == "flat":
            return seqs[mode][0]
        k = min(t - signal.segment_start(ref), tau)
        return seqs[mode][k]

    vf: list[float] = []
    vb: list[float] = []
    for t in range(horizon + 1):
        if weights is not None:
            vf.append(float(states[t] @ weight_at(t, backward=False) @ states[t]))
            vb.append(float(states[t] @ weight_at(t, backward=True) @ states[t]))
        if t == horizon:
            break
        mode = system.modes[modes[t]]
        a = mode.A
        x_t = states[t]
        u_t = np.zeros(mode.m)
        if gains is not None:
            if mode.B is None:
                raise DimensionMismatch(f"mode {modes[t] + 1} has no B for feedback")
            k_since = t - signal.segment_start(t)
            k_mat = gains.gain_at(modes[t], k_since)
            if k_mat.shape != (mode.m, system.n):
                raise DimensionMismatch(
                    f"gain for mode {modes[t] + 1} has shape {k_mat.shape}, "
                    f"expected ({mode.m}, {system.n})"
                )
            u_t = k_mat @ x_t
        w_t = np.zeros(mode.p)
        if w is not None:
            w_t = np.asarray(w[t], dtype=float).reshape(-1)
            if w_t.shape != (mode.p,):
                raise DimensionMismatch(
                    f"input at t={t} has dimension {w_t.shape[0]}, "
                    f"mode {modes[t] + 1} expects {mode.p}"
                )
        x_next = a @ x_t
        if mode.B is not None and mode.m:
            x_next = x_next + mode.B @ u_t
        if mode.E is not None and mode.p:
            x_next = x_next + mode.E @ w_t
        states[t + 1] = x_next
        controls.append(u_t)
        inputs.append(w_t)
        if mode.C is not None:
            z_t = mode.C @ x_t
            if mode.D is not None and mode.m:
                z_t = z_t + mode.D @ u_t
            if mode.F is not None and mode.p:
                z_t = z_t + mode.F @ w_t
            outputs.append(z_t)
        elif has_output:
            outputs.append(np.zeros(0))

    return Trajectory(
        states=states,
        modes=tuple(modes),
        signal=signal,
        controls=tuple(controls) if gains is not None else None,
        inputs=tuple(inputs) if w is not None else None,
        outputs=tuple(outputs) if has_output else None,
        lyapunov_f=tuple(vf) if weights is not None else None,
        lyapunov_b=tuple(vb) if weights is not None else None,
    )
