"""Switched-system data model, switching signals, and the system file schema.

A system file is a JSON document::

    {
      "n": 2,
      "modes": [
        {"A": [[0.1, 0.2], [-2.5, -0.1]], "B": [[0.0], [1.0]]},
        {"vertices": [[[0.7, 0.8], [-0.5, -0.9]], [[0.9, 2.2], [0.0, -0.4]]]}
      ],
      "preprocess": {"type": "expm", "T": 0.5}
    }

A mode carries either a nominal ``A`` or a list of polytope ``vertices``
(never both).  ``B``, ``E``, ``C``, ``D``, ``F`` are optional and may have
different input/output dimensions in different modes.  Unknown keys are
rejected.  The optional ``preprocess`` block replaces every ``A`` (and every
vertex) by ``expm(A * T)`` at load time, so discretized fixtures are
self-contained.

Nominal modes are normalized internally to single-vertex polytopes so that
vertex-wise code paths subsume the nominal ones.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InvalidInput, ParseError

__all__ = [
    "Mode",
    "SwitchedSystem",
    "SwitchingSignal",
    "DwellSpec",
    "load_system",
    "save_system",
    "system_from_dict",
    "system_to_dict",
    "random_signal",
]

_MODE_KEYS = {"A", "vertices", "B", "E", "C", "D", "F"}
_TOP_KEYS = {"n", "modes", "preprocess"}
_PREPROCESS_KEYS = {"type", "T"}


@dataclass(frozen=True)
class Mode:
    """One subsystem: a polytope of state matrices plus optional channel matrices.

    ``vertices`` always holds at least one matrix; a nominal mode is the
    single-vertex case with ``polytopic=False``.
    """

    vertices: tuple[np.ndarray, ...]
    B: np.ndarray | None = None
    E: np.ndarray | None = None
    C: np.ndarray | None = None
    D: np.ndarray | None = None
    F: np.ndarray | None = None
    polytopic: bool = False

    @property
    def A(self) -> np.ndarray:
        """Nominal state matrix; the single vertex of a non-polytopic mode."""
        if self.polytopic and len(self.vertices) > 1:
            raise InvalidInput("polytopic mode has no single nominal A matrix")
        return self.vertices[0]

    @property
    def n(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def m(self) -> int:
        """Control input dimension (0 when B is absent)."""
        return 0 if self.B is None else self.B.shape[1]

    @property
    def p(self) -> int:
        """Exogenous input dimension (0 when E is absent)."""
        return 0 if self.E is None else self.E.shape[1]

    @property
    def q(self) -> int:
        """Controlled output dimension (0 when C is absent)."""
        return 0 if self.C is None else self.C.shape[0]


@dataclass(frozen=True)
class SwitchedSystem:
    """N >= 2 modes sharing one state dimension."""

    n: int
    modes: tuple[Mode, ...]

    def __post_init__(self):
        if len(self.modes) < 2:
            raise ParseError(f"a switched system needs at least 2 modes, got {len(self.modes)}")
        for i, mode in enumerate(self.modes):
            _check_mode(mode, self.n, i)

    @property
    def N(self) -> int:
        return len(self.modes)

    @property
    def polytopic(self) -> bool:
        return any(m.polytopic for m in self.modes)

    def max_entry(self) -> float:
        """Largest state-matrix entry magnitude, used for tolerance scaling."""
        return max(linalg.max_abs(v) for mode in self.modes for v in mode.vertices)

    def digest(self) -> dict:
        """Dimension summary for reports."""
        return {
            "N": self.N,
            "n": self.n,
            "polytopic": self.polytopic,
            "modes": [
                {
                    "vertices": len(m.vertices),
                    "m": m.m,
                    "p": m.p,
                    "q": m.q,
                }
                for m in self.modes
            ],
        }


def _check_mode(mode: Mode, n: int, index: int) -> None:
    label = f"mode {index + 1}"
    if len(mode.vertices) < 1:
        raise ParseError(f"{label} has no vertices")
    for k, v in enumerate(mode.vertices):
        if v.shape != (n, n):
            raise DimensionMismatch(
                f"{label} vertex {k + 1}: expected {n}x{n} A matrix, got {v.shape[0]}x{v.shape[1]}"
            )
    m, p, q = mode.m, mode.p, mode.q
    checks = [
        ("B", mode.B, (n, m)),
        ("E", mode.E, (n, p)),
        ("C", mode.C, (q, n)),
        ("D", mode.D, (q, m)),
        ("F", mode.F, (q, p)),
    ]
    for name, mat, shape in checks:
        if mat is not None and mat.shape != shape:
            raise DimensionMismatch(
                f"{label} matrix {name}: expected {shape[0]}x{shape[1]}, got {mat.shape[0]}x{mat.shape[1]}"
            )
    if mode.D is not None and mode.B is None:
        raise DimensionMismatch(f"{label} has D but no B")
    if mode.F is not None and mode.E is None:
        raise DimensionMismatch(f"{label} has F but no E")


def _parse_matrix(obj, context: str) -> np.ndarray:
    try:
        mat = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"not a numeric matrix: {exc}", context) from exc
    if mat.ndim != 2:
        raise ParseError(f"expected a nested [[...]] matrix, got {mat.ndim} dimension(s)", context)
    if not np.all(np.isfinite(mat)):
        raise ParseError("matrix has non-finite entries", context)
    return mat


def system_from_dict(doc: dict) -> SwitchedSystem:
    """Build a validated SwitchedSystem from a parsed system document."""
    if not isinstance(doc, dict):
        raise ParseError("system document must be a JSON object")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}", "top level")
    if "n" not in doc or "modes" not in doc:
        raise ParseError("system document needs 'n' and 'modes'", "top level")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise ParseError(f"'n' must be a positive integer, got {n!r}", "n")
    if not isinstance(doc["modes"], list):
        raise ParseError("'modes' must be a list", "modes")

    transform = _parse_preprocess(doc.get("preprocess"))

    modes = []
    for i, mode_doc in enumerate(doc["modes"]):
        ctx = f"modes[{i}]"
        if not isinstance(mode_doc, dict):
            raise ParseError("mode must be a JSON object", ctx)
        extra = set(mode_doc) - _MODE_KEYS
        if extra:
            raise ParseError(f"unknown keys {sorted(extra)}", ctx)
        has_a = "A" in mode_doc
        has_vertices = "vertices" in mode_doc
        if has_a == has_vertices:
            raise ParseError("mode needs exactly one of 'A' or 'vertices'", ctx)
        if has_a:
            vertices = (_parse_matrix(mode_doc["A"], f"{ctx}.A"),)
        else:
            raw = mode_doc["vertices"]
            if not isinstance(raw, list) or not raw:
                raise ParseError("'vertices' must be a non-empty list", ctx)
            vertices = tuple(
                _parse_matrix(v, f"{ctx}.vertices[{k}]") for k, v in enumerate(raw)
            )
        if transform is not None:
            vertices = tuple(transform(v) for v in vertices)
        extras = {
            key: _parse_matrix(mode_doc[key], f"{ctx}.{key}")
            for key in ("B", "E", "C", "D", "F")
            if key in mode_doc
        }
        modes.append(Mode(vertices=vertices, polytopic=has_vertices, **extras))
    return SwitchedSystem(n=n, modes=tuple(modes))


def _parse_preprocess(doc):
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise ParseError("'preprocess' must be an object", "preprocess")
    extra = set(doc) - _PREPROCESS_KEYS
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}", "preprocess")
    if doc.get("type") != "expm":
        raise ParseError(f"unsupported preprocess type {doc.get('type')!r}", "preprocess.type")
    t = doc.get("T")
    if not isinstance(t, (int, float)) or not np.isfinite(t):
        raise ParseError("'T' must be a finite number", "preprocess.T")
    return lambda a: linalg.expm(a * float(t))


def system_to_dict(system: SwitchedSystem) -> dict:
    """Inverse of :func:`system_from_dict` on the post-preprocess data model."""
    modes = []
    for mode in system.modes:
        doc: dict = {}
        if mode.polytopic:
            doc["vertices"] = [v.tolist() for v in mode.vertices]
        else:
            doc["A"] = mode.A.tolist()
        for key in ("B", "E", "C", "D", "F"):
            mat = getattr(mode, key)
            if mat is not None:
                doc[key] = mat.tolist()
        modes.append(doc)
    return {"n": system.n, "modes": modes}


def load_system(path: str | Path) -> SwitchedSystem:
    """Load and validate a system file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read system file: {exc}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}"
        ) from exc
    return system_from_dict(doc)


def save_system(system: SwitchedSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=2) + "\n")


@dataclass(frozen=True)
class DwellSpec:
    """Minimum dwell-time constraint: every stay in a mode lasts >= tau steps."""

    tau: int

    def __post_init__(self):
        if self.tau < 1:
            raise InvalidInput(f"minimum dwell-time must be >= 1, got {self.tau}")


@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant mode selection.

    ``instants[q]`` is the time the q-th segment starts (``instants[0] == 0``)
    and ``modes[q]`` its 0-based mode index; the last segment extends
    indefinitely.  Consecutive modes differ and every dwell time is >= 1.
    """

    instants: tuple[int, ...]
    modes: tuple[int, ...]

    def __post_init__(self):
        if not self.instants or self.instants[0] != 0:
            raise InvalidInput("switching instants must start at 0")
        if len(self.instants) != len(self.modes):
            raise InvalidInput("one mode per segment required")
        if any(b - a < 1 for a, b in zip(self.instants, self.instants[1:])):
            raise InvalidInput("switching instants must be strictly increasing")
        if any(a == b for a, b in zip(self.modes, self.modes[1:])):
            raise InvalidInput("consecutive segments must use different modes")

    @property
    def dwell_times(self) -> tuple[int, ...]:
        """Completed dwell times (the open last segment is excluded)."""
        return tuple(b - a for a, b in zip(self.instants, self.instants[1:]))

    def mode_at(self, t: int) -> int:
        """0-based active mode at time t >= 0."""
        if t < 0:
            raise InvalidInput("time must be >= 0")
        idx = int(np.searchsorted(np.asarray(self.instants), t, side="right")) - 1
        return self.modes[idx]

    def segment_start(self, t: int) -> int:
        """Start instant of the segment containing t."""
        idx = int(np.searchsorted(np.asarray(self.instants), t, side="right")) - 1
        return self.instants[idx]


def random_signal(
    spec: DwellSpec, horizon: int, seed: int, num_modes: int
) -> SwitchingSignal:
    """Deterministic dwell-admissible signal covering at least ``horizon`` steps.

    Every dwell time is drawn uniformly from ``[tau, 3*tau]`` and consecutive
    modes always differ.
    """
    if num_modes < 2:
        raise InvalidInput("need at least 2 modes")
    if horizon < spec.tau:
        raise InvalidInput(f"horizon {horizon} shorter than dwell-time {spec.tau}")
    rng = random.Random(seed)
    instants = [0]
    modes = [rng.randrange(num_modes)]
    while instants[-1] < horizon:
        dwell = rng.randint(spec.tau, 3 * spec.tau)
        instants.append(instants[-1] + dwell)
        nxt = rng.randrange(num_modes - 1)
        if nxt >= modes[-1]:
            nxt += 1
        modes.append(nxt)
    return SwitchingSignal(instants=tuple(instants), modes=tuple(modes))
