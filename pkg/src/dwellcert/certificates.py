"""Certificate and controller-gain containers with their JSON wire formats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInput, NotPositiveDefinite, ParseError
from .lmi import LmiProblem

__all__ = ["LiftedCertificate", "ControllerGains"]


@dataclass(frozen=True)
class LiftedCertificate:
    """Per-mode matrix sequences certifying a dwell-time property.

    ``form="primal"`` sequences chain forward through ``A' X(k+1) A <= X(k)``;
    ``form="dual"`` through ``A X(k) A' <= X(k+1)``.  ``gamma`` is present on
    energy-gain certificates.
    """

    form: str
    tau: int
    epsilon: float
    sequences: tuple[tuple[np.ndarray, ...], ...]
    gamma: float | None = None

    def __post_init__(self):
        if self.form not in ("primal", "dual"):
            raise InvalidInput(f"unknown certificate form {self.form!r}")
        if len(self.sequences) < 2:
            raise InvalidInput("certificate needs at least two mode sequences")
        for i, seq in enumerate(self.sequences):
            if len(seq) != self.tau + 1:
                raise InvalidInput(
                    f"mode {i + 1} sequence has {len(seq)} blocks, expected tau+1={self.tau + 1}"
                )

    @property
    def num_modes(self) -> int:
        return len(self.sequences)

    def block(self, mode: int, k: int) -> np.ndarray:
        """Sequence block of 0-based ``mode`` at step ``k``."""
        return self.sequences[mode][k]

    def flat_matrices(self) -> list[np.ndarray]:
        """Per-mode quadratic-function matrices for the flat (power) conditions.

        Primal certificates use the tail block directly; dual certificates use
        its inverse (which must therefore be positive definite).
        """
        out = []
        for i, seq in enumerate(self.sequences):
            tail = seq[self.tau]
            if self.form == "primal":
                out.append(tail)
            else:
                if linalg.min_eig(tail) <= 0:
                    raise NotPositiveDefinite(
                        f"mode {i + 1} tail block is not positive definite"
                    )
                out.append(linalg.solve_spd(tail, np.eye(tail.shape[0])))
        return out

    @classmethod
    def from_witness(
        cls, problem: LmiProblem, witness: np.ndarray, gamma: float | None = None
    ) -> "LiftedCertificate":
        """Extract the certified sequences from a solver witness."""
        meta = problem.meta
        if "tau" not in meta or "form" not in meta:
            raise InvalidInput("problem was not built by a lifted-family builder")
        tau = meta["tau"]
        values = problem.vars.unpack(witness)
        num_modes = max(
            int(name.split(":")[1]) for name in values if name.startswith("seq:")
        )
        sequences = tuple(
            tuple(np.asarray(values[f"seq:{i}:{k}"]) for k in range(tau + 1))
            for i in range(1, num_modes + 1)
        )
        if gamma is None:
            gamma = meta.get("gamma")
        return cls(
            form=meta["form"],
            tau=tau,
            epsilon=problem.epsilon if problem.epsilon is not None else 0.0,
            sequences=sequences,
            gamma=gamma,
        )

    def to_dict(self) -> dict:
        doc = {
            "form": self.form,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "modes": [{"seq": [m.tolist() for m in seq]} for seq in self.sequences],
        }
        if self.gamma is not None:
            doc["gamma"] = self.gamma
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LiftedCertificate":
        try:
            sequences = tuple(
                tuple(np.asarray(m, dtype=float) for m in mode["seq"])
                for mode in doc["modes"]
            )
            return cls(
                form=doc["form"],
                tau=int(doc["tau"]),
                epsilon=float(doc["epsilon"]),
                sequences=sequences,
                gamma=None if doc.get("gamma") is None else float(doc["gamma"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed certificate document: {exc}") from exc
        except InvalidInput as exc:
            raise ParseError(str(exc)) from exc


@dataclass(frozen=True)
class ControllerGains:
    """Per-mode gain sequences for the dwell-clamped feedback law.

    Within the first ``tau`` steps after a switch into mode i the control is
    ``K_i(k) x``; from step ``tau`` onwards the gain index clamps at ``tau``.
    """

    tau: int
    gains: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        for i, seq in enumerate(self.gains):
            if len(seq) != self.tau + 1:
                raise InvalidInput(
                    f"mode {i + 1} has {len(seq)} gains, expected tau+1={self.tau + 1}"
                )
            for k, mat in enumerate(seq):
                if not np.all(np.isfinite(mat)):
                    raise InvalidInput(f"gain K_{i + 1}({k}) has non-finite entries")

    @property
    def num_modes(self) -> int:
        return len(self.gains)

    def gain_at(self, mode: int, k_since_switch: int) -> np.ndarray:
        """Active gain of 0-based ``mode``, ``k_since_switch`` steps after entry."""
        if not 0 <= mode < len(self.gains):
            raise InvalidInput(f"mode index {mode} out of range")
        if k_since_switch < 0:
            raise InvalidInput("steps since switch must be >= 0")
        return self.gains[mode][min(k_since_switch, self.tau)]

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "modes": [{"K": [k.tolist() for k in seq]} for seq in self.gains],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ControllerGains":
        try:
            gains = tuple(
                tuple(np.asarray(k, dtype=float) for k in mode["K"])
                for mode in doc["modes"]
            )
            return cls(tau=int(doc["tau"]), gains=gains)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed gains document: {exc}") from exc
        except InvalidInput as exc:
            raise ParseError(str(exc)) from exc
