"""Assembly of dwell-time certification conditions as affine LMI problems.

Every builder returns a standard-form feasibility problem over a flattened
decision vector: symmetric matrix variables enter through their upper-triangle
entries (svec), rectangular gain variables entry by entry.  Each constraint is
``F0 + sum_k x_k F_k <= 0`` (negative semidefinite), with strict constraints
additionally required ``<= -delta * I`` for a scale-aware margin ``delta``.

Scale handling: the lifted stability and synthesis conditions are jointly
homogeneous in the decision variables together with the switch margin, so the
margin is fixed at ``COUPLING_MARGIN`` and the scale freedom is removed by a
``>= I`` normalization block on the anchor variable.  The fixed-gain-level
conditions are *not* homogeneous (they carry constant gain blocks), so there
the anchor is only required positive definite and no normalization is added.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from . import linalg
from .errors import InvalidInput, MissingMatrix
from .model import DwellSpec, Mode, SwitchedSystem

__all__ = [
    "COUPLING_MARGIN",
    "VarSpace",
    "AffineLmi",
    "LmiProblem",
    "strictness_margin",
    "build_arbitrary",
    "build_flat_dwell",
    "build_lifted",
    "build_synthesis",
    "build_l2",
    "build_l2_synthesis",
    "problem_size",
    "dump_sdpa",
]

# Fixed switch-coupling margin; see module docstring for why this is a
# constant rather than a decision variable.
COUPLING_MARGIN = 1e-6


def strictness_margin(system: SwitchedSystem) -> float:
    """Margin delta used to realize strict inequalities as ``<= -delta*I``."""
    return 1e-7 * (1.0 + system.max_entry())


@lru_cache(maxsize=None)
def _sym_basis(dim: int) -> tuple[np.ndarray, ...]:
    """Upper-triangle entry basis: R = sum_l x_l * basis_l, svec order."""
    out = []
    for p in range(dim):
        for q in range(p, dim):
            e = np.zeros((dim, dim))
            e[p, q] = 1.0
            e[q, p] = 1.0
            out.append(e)
    return tuple(out)


@lru_cache(maxsize=None)
def _rect_basis(rows: int, cols: int) -> tuple[np.ndarray, ...]:
    out = []
    for r in range(rows):
        for c in range(cols):
            e = np.zeros((rows, cols))
            e[r, c] = 1.0
            out.append(e)
    return tuple(out)


class VarSpace:
    """Flattened decision vector layout.

    Symmetric blocks contribute ``dim*(dim+1)/2`` scalars each, rectangular
    blocks ``rows*cols``, scalars one apiece, in declaration order.
    """

    def __init__(
        self,
        sym_blocks: Iterable[tuple[str, int]] = (),
        rect_blocks: Iterable[tuple[str, int, int]] = (),
        scalar_vars: Iterable[str] = (),
    ):
        self.sym_blocks = tuple(sym_blocks)
        self.rect_blocks = tuple(rect_blocks)
        self.scalar_vars = tuple(scalar_vars)
        self._layout: dict[str, tuple[str, int, tuple[int, ...]]] = {}
        offset = 0
        for name, dim in self.sym_blocks:
            self._register(name, "sym", offset, (dim, dim))
            offset += dim * (dim + 1) // 2
        for name, rows, cols in self.rect_blocks:
            self._register(name, "rect", offset, (rows, cols))
            offset += rows * cols
        for name in self.scalar_vars:
            self._register(name, "scalar", offset, ())
            offset += 1
        self.total_dim = offset

    def _register(self, name, kind, offset, shape):
        if name in self._layout:
            raise InvalidInput(f"duplicate variable block name {name!r}")
        self._layout[name] = (kind, offset, shape)

    def indices(self, name: str) -> np.ndarray:
        kind, offset, shape = self._layout[name]
        if kind == "sym":
            count = shape[0] * (shape[0] + 1) // 2
        elif kind == "rect":
            count = shape[0] * shape[1]
        else:
            count = 1
        return np.arange(offset, offset + count)

    def basis(self, name: str) -> tuple[np.ndarray, ...]:
        kind, _, shape = self._layout[name]
        if kind == "sym":
            return _sym_basis(shape[0])
        if kind == "rect":
            return _rect_basis(*shape)
        raise InvalidInput(f"{name!r} is a scalar, it has no matrix basis")

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray | float]:
        """Reassemble matrices (and scalars) from a decision vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.total_dim,):
            raise InvalidInput(
                f"decision vector has length {x.shape}, expected {self.total_dim}"
            )
        out: dict[str, np.ndarray | float] = {}
        for name, (kind, offset, shape) in self._layout.items():
            if kind == "sym":
                dim = shape[0]
                mat = np.zeros((dim, dim))
                l = offset
                for p in range(dim):
                    for q in range(p, dim):
                        mat[p, q] = mat[q, p] = x[l]
                        l += 1
                out[name] = mat
            elif kind == "rect":
                rows, cols = shape
                out[name] = x[offset : offset + rows * cols].reshape(rows, cols)
            else:
                out[name] = float(x[offset])
        return out

    def pack(self, values: dict[str, np.ndarray | float]) -> np.ndarray:
        """Inverse of :meth:`unpack`; missing blocks stay zero."""
        x = np.zeros(self.total_dim)
        for name, value in values.items():
            if name not in self._layout:
                raise InvalidInput(f"unknown variable block {name!r}")
            kind, offset, shape = self._layout[name]
            if kind == "sym":
                mat = linalg.as_sym_matrix(value, name)
                if mat.shape != shape:
                    raise InvalidInput(f"{name!r} expects shape {shape}, got {mat.shape}")
                l = offset
                for p in range(shape[0]):
                    for q in range(p, shape[0]):
                        x[l] = mat[p, q]
                        l += 1
            elif kind == "rect":
                mat = linalg.as_matrix(value, name)
                if mat.shape != shape:
                    raise InvalidInput(f"{name!r} expects shape {shape}, got {mat.shape}")
                x[offset : offset + mat.size] = mat.reshape(-1)
            else:
                x[offset] = float(value)
        return x

    def initial_point(self) -> np.ndarray:
        """Identity for every symmetric block, zero elsewhere."""
        x = np.zeros(self.total_dim)
        for name, dim in self.sym_blocks:
            offset = self._layout[name][1]
            l = offset
            for p in range(dim):
                for q in range(p, dim):
                    if p == q:
                        x[l] = 1.0
                    l += 1
        return x


@dataclass(frozen=True)
class AffineLmi:
    """One constraint ``F0 + sum x[var_idx[a]] * coeff[a] <= 0`` (or ``<= -delta*I``).

    ``label`` names the condition instance (mode / step / vertex indices,
    1-based) for diagnostics.
    """

    label: str
    F0: np.ndarray
    var_idx: np.ndarray
    coeff: np.ndarray
    strict: bool

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        if self.var_idx.size == 0:
            return self.F0.copy()
        return self.F0 + np.einsum("a,aij->ij", x[self.var_idx], self.coeff)

    def max_eig_at(self, x: np.ndarray) -> float:
        return linalg.max_eig(self.evaluate(x))


@dataclass(frozen=True)
class LmiProblem:
    """Affine LMI feasibility problem with scale bookkeeping.

    ``epsilon`` is the fixed switch-coupling margin for lifted-family
    problems (None for the flat builders); it is also the bookkeeping token
    that :func:`problem_size` counts as one extra variable and one extra
    LMI row to mirror the usual complexity accounting.
    """

    vars: VarSpace
    constraints: tuple[AffineLmi, ...]
    delta: float
    normalization: str
    epsilon: float | None = None
    meta: dict = field(default_factory=dict)

    def evaluate_margins(self, x: np.ndarray) -> list[tuple[str, bool, float]]:
        """(label, strict, max eigenvalue) of every constraint at x."""
        return [(c.label, c.strict, c.max_eig_at(x)) for c in self.constraints]

    def worst_margin(self, x: np.ndarray) -> tuple[str, float]:
        """Label and value of the largest constraint eigenvalue at x."""
        margins = self.evaluate_margins(x)
        label, _, value = max(margins, key=lambda item: item[2])
        return label, value


class _Assembler:
    def __init__(self, space: VarSpace, delta: float):
        self.space = space
        self.delta = delta
        self.constraints: list[AffineLmi] = []

    def add(
        self,
        label: str,
        dim: int,
        f0: np.ndarray,
        terms: Iterable[tuple[str, Callable[[np.ndarray], np.ndarray]]],
        strict: bool,
    ) -> None:
        acc: dict[int, np.ndarray] = {}
        for name, op in terms:
            idx = self.space.indices(name)
            for l, basis_mat in enumerate(self.space.basis(name)):
                contribution = op(basis_mat)
                key = int(idx[l])
                if key in acc:
                    acc[key] = acc[key] + contribution
                else:
                    acc[key] = contribution
        var_idx = np.array(sorted(acc), dtype=int)
        coeff = (
            np.stack([linalg.symmetrize(acc[k]) for k in var_idx])
            if var_idx.size
            else np.zeros((0, dim, dim))
        )
        self.constraints.append(
            AffineLmi(
                label=label,
                F0=linalg.symmetrize(np.asarray(f0, dtype=float)),
                var_idx=var_idx,
                coeff=coeff,
                strict=strict,
            )
        )


def _require_nominal(system: SwitchedSystem, builder: str) -> None:
    if any(m.polytopic and len(m.vertices) > 1 for m in system.modes):
        raise InvalidInput(f"{builder} requires nominal modes (single vertex each)")


def _check_tau(tau: int | DwellSpec) -> int:
    t = tau.tau if isinstance(tau, DwellSpec) else int(tau)
    if t < 1:
        raise InvalidInput(f"dwell-time must be >= 1, got {t}")
    return t


def _seq(i: int, k: int) -> str:
    return f"seq:{i + 1}:{k}"


def _gain(i: int, k: int) -> str:
    return f"gain:{i + 1}:{k}"


def build_arbitrary(system: SwitchedSystem) -> LmiProblem:
    """Quadratic-stability conditions valid for every switching sequence.

    One strict step condition per ordered mode pair (including i == j),
    vertex-wise for polytopic modes, with a ``P_i >= I`` scale normalization.
    """
    n = system.n
    delta = strictness_margin(system)
    space = VarSpace(sym_blocks=[(f"P:{i + 1}", n) for i in range(system.N)])
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    for i, mode in enumerate(system.modes):
        for kappa, a in enumerate(mode.vertices):
            vsuffix = f",v={kappa + 1}" if len(mode.vertices) > 1 else ""
            for j in range(system.N):
                terms = [
                    (f"P:{j + 1}", lambda e, a=a: a.T @ e @ a),
                    (f"P:{i + 1}", lambda e: -e),
                ]
                asm.add(f"step:i={i + 1},j={j + 1}{vsuffix}", n, np.zeros((n, n)), terms, strict=True)
        asm.add(f"scale:i={i + 1}", n, ident, [(f"P:{i + 1}", lambda e: -e)], strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="P_i >= I removes the joint scale freedom",
        epsilon=None,
        meta={"builder": "arbitrary"},
    )


def build_flat_dwell(
    system: SwitchedSystem, tau: int | DwellSpec, variant: str = "backward"
) -> LmiProblem:
    """Dwell-time conditions on explicit matrix powers ``A_i^tau``.

    ``variant="forward"`` couples modes through ``A_i'^tau P_j A_i^tau - P_i``,
    ``"backward"`` through ``A_i'^tau P_i A_i^tau - P_j``.  The powers are
    numeric data, so this builder realizes the nonconvex power form directly and
    serves as the oracle the lifted conditions are checked against.
    """
    if variant not in ("forward", "backward"):
        raise InvalidInput(f"variant must be 'forward' or 'backward', got {variant!r}")
    _require_nominal(system, "build_flat_dwell")
    t = _check_tau(tau)
    n = system.n
    delta = strictness_margin(system)
    space = VarSpace(sym_blocks=[(f"P:{i + 1}", n) for i in range(system.N)])
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    powers = [linalg.mat_pow(mode.A, t) for mode in system.modes]
    for i, mode in enumerate(system.modes):
        a = mode.A
        asm.add(
            f"step:i={i + 1}",
            n,
            np.zeros((n, n)),
            [(f"P:{i + 1}", lambda e, a=a: a.T @ e @ a - e)],
            strict=True,
        )
        at = powers[i]
        for j in range(system.N):
            if i == j:
                continue
            if variant == "forward":
                terms = [
                    (f"P:{j + 1}", lambda e, at=at: at.T @ e @ at),
                    (f"P:{i + 1}", lambda e: -e),
                ]
            else:
                terms = [
                    (f"P:{i + 1}", lambda e, at=at: at.T @ e @ at),
                    (f"P:{j + 1}", lambda e: -e),
                ]
            asm.add(f"dwell:i={i + 1},j={j + 1}", n, np.zeros((n, n)), terms, strict=True)
        asm.add(f"scale:i={i + 1}", n, ident, [(f"P:{i + 1}", lambda e: -e)], strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="P_i >= I removes the joint scale freedom",
        epsilon=None,
        meta={"builder": "flat_dwell", "tau": t, "variant": variant},
    )


def build_lifted(
    system: SwitchedSystem, tau: int | DwellSpec, form: str = "primal"
) -> LmiProblem:
    """Convex lifted dwell-time conditions over per-mode matrix sequences.

    ``form="primal"`` chains the conditions forward through
    ``A' X(k+1) A - X(k) <= 0`` with a strict tail at ``k = tau`` and anchor
    ``X(0) >= I``; ``form="dual"`` is the transposed-chain variant with anchor
    ``X(tau) >= I``.  Polytopic modes contribute one copy of every
    mode-dependent constraint per vertex.
    """
    if form not in ("primal", "dual"):
        raise InvalidInput(f"form must be 'primal' or 'dual', got {form!r}")
    t = _check_tau(tau)
    n = system.n
    eps = COUPLING_MARGIN
    delta = strictness_margin(system)
    space = VarSpace(
        sym_blocks=[(_seq(i, k), n) for i in range(system.N) for k in range(t + 1)]
    )
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    for i, mode in enumerate(system.modes):
        for kappa, a in enumerate(mode.vertices):
            vsuffix = f",v={kappa + 1}" if len(mode.vertices) > 1 else ""
            if form == "primal":
                tail = [(_seq(i, t), lambda e, a=a: a.T @ e @ a - e)]
            else:
                tail = [(_seq(i, t), lambda e, a=a: a @ e @ a.T - e)]
            asm.add(f"tail:i={i + 1}{vsuffix}", n, np.zeros((n, n)), tail, strict=True)
            for k in range(t):
                if form == "primal":
                    terms = [
                        (_seq(i, k + 1), lambda e, a=a: a.T @ e @ a),
                        (_seq(i, k), lambda e: -e),
                    ]
                else:
                    terms = [
                        (_seq(i, k), lambda e, a=a: a @ e @ a.T),
                        (_seq(i, k + 1), lambda e: -e),
                    ]
                asm.add(
                    f"chain:i={i + 1},k={k}{vsuffix}", n, np.zeros((n, n)), terms, strict=False
                )
        anchor = _seq(i, 0) if form == "primal" else _seq(i, t)
        asm.add(f"scale:i={i + 1}", n, ident, [(anchor, lambda e: -e)], strict=False)
    for i in range(system.N):
        for j in range(system.N):
            if i == j:
                continue
            if form == "primal":
                terms = [(_seq(i, 0), lambda e: e), (_seq(j, t), lambda e: -e)]
            else:
                terms = [(_seq(j, t), lambda e: e), (_seq(i, 0), lambda e: -e)]
            asm.add(f"switch:i={i + 1},j={j + 1}", n, eps * ident, terms, strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="anchor block >= I removes the joint (X, margin) scale freedom",
        epsilon=eps,
        meta={"builder": "lifted", "tau": t, "form": form},
    )


def build_synthesis(system: SwitchedSystem, tau: int | DwellSpec) -> LmiProblem:
    """State-feedback synthesis conditions in dual (congruence) form.

    Decision blocks are the dual sequences ``S_i(k)`` and the transformed
    gains ``U_i(k) = K_i(k) S_i(k)``; the step conditions are the 2n-size
    Schur-complement blocks linear in ``(S, U)``.
    """
    _require_nominal(system, "build_synthesis")
    for i, mode in enumerate(system.modes):
        if mode.B is None:
            raise MissingMatrix("B", i + 1)
    t = _check_tau(tau)
    n = system.n
    eps = COUPLING_MARGIN
    delta = strictness_margin(system)
    space = VarSpace(
        sym_blocks=[(_seq(i, k), n) for i in range(system.N) for k in range(t + 1)],
        rect_blocks=[
            (_gain(i, k), system.modes[i].m, n)
            for i in range(system.N)
            for k in range(t + 1)
        ],
    )
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    zeros2 = np.zeros((2 * n, 2 * n))

    def step_terms(i: int, k_new: int, k_old: int):
        a, b = system.modes[i].A, system.modes[i].B

        def s_old(e, a=a):
            out = np.zeros((2 * n, 2 * n))
            out[:n, n:] = a @ e
            out[n:, :n] = e @ a.T
            out[n:, n:] = -e
            return out

        def s_new(e):
            out = np.zeros((2 * n, 2 * n))
            out[:n, :n] = -e
            return out

        def u_old(r, b=b):
            out = np.zeros((2 * n, 2 * n))
            out[:n, n:] = b @ r
            out[n:, :n] = r.T @ b.T
            return out

        return [
            (_seq(i, k_old), s_old),
            (_gain(i, k_old), u_old),
            (_seq(i, k_new), s_new),
        ]

    for i in range(system.N):
        asm.add(
            f"synth_tail:i={i + 1}", 2 * n, zeros2, step_terms(i, t, t), strict=True
        )
        for k in range(t):
            asm.add(
                f"synth_chain:i={i + 1},k={k}",
                2 * n,
                zeros2,
                step_terms(i, k + 1, k),
                strict=False,
            )
        asm.add(f"scale:i={i + 1}", n, ident, [(_seq(i, t), lambda e: -e)], strict=False)
    for i in range(system.N):
        for j in range(system.N):
            if i == j:
                continue
            terms = [(_seq(j, t), lambda e: e), (_seq(i, 0), lambda e: -e)]
            asm.add(f"switch:i={i + 1},j={j + 1}", n, eps * ident, terms, strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="S_i(tau) >= I removes the joint (S, U, margin) scale freedom",
        epsilon=eps,
        meta={"builder": "synthesis", "tau": t, "form": "dual"},
    )


def _io_matrices(mode: Mode, i: int, need_b: bool) -> tuple[np.ndarray, ...]:
    if mode.E is None:
        raise MissingMatrix("E", i + 1)
    if mode.C is None:
        raise MissingMatrix("C", i + 1)
    e_mat, c_mat = mode.E, mode.C
    f_mat = mode.F if mode.F is not None else np.zeros((mode.q, mode.p))
    if not need_b:
        return e_mat, c_mat, f_mat
    if mode.B is None:
        raise MissingMatrix("B", i + 1)
    d_mat = mode.D if mode.D is not None else np.zeros((mode.q, mode.m))
    return e_mat, c_mat, f_mat, mode.B, d_mat


def build_l2(system: SwitchedSystem, tau: int | DwellSpec, gamma: float) -> LmiProblem:
    """Fixed-gain-level feasibility conditions (primal chain with input/output rows).

    Certifies that the worst-case output/input energy ratio under the dwell-time
    constraint is below ``gamma``.  Not homogeneous in the decision sequences
    (the gain level enters as a constant block), so the anchor ``X_i(0)`` is
    required positive definite without a ``>= I`` normalization.
    """
    _require_nominal(system, "build_l2")
    if not (gamma > 0 and np.isfinite(gamma)):
        raise InvalidInput(f"gamma must be positive and finite, got {gamma}")
    t = _check_tau(tau)
    n = system.n
    eps = COUPLING_MARGIN
    delta = strictness_margin(system)
    space = VarSpace(
        sym_blocks=[(_seq(i, k), n) for i in range(system.N) for k in range(t + 1)]
    )
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    for i, mode in enumerate(system.modes):
        e_mat, c_mat, f_mat = _io_matrices(mode, i, need_b=False)
        a = mode.A
        p = mode.p
        dim = n + p
        f0 = np.zeros((dim, dim))
        f0[:n, :n] = c_mat.T @ c_mat
        f0[:n, n:] = c_mat.T @ f_mat
        f0[n:, :n] = f_mat.T @ c_mat
        f0[n:, n:] = f_mat.T @ f_mat - gamma**2 * np.eye(p)

        def x_new(e, a=a, e_mat=e_mat, dim=dim):
            out = np.zeros((dim, dim))
            out[:n, :n] = a.T @ e @ a
            out[:n, n:] = a.T @ e @ e_mat
            out[n:, :n] = e_mat.T @ e @ a
            out[n:, n:] = e_mat.T @ e @ e_mat
            return out

        def x_old(e, dim=dim):
            out = np.zeros((dim, dim))
            out[:n, :n] = -e
            return out

        asm.add(
            f"gain_tail:i={i + 1}",
            dim,
            f0,
            [(_seq(i, t), lambda e, x_new=x_new, x_old=x_old: x_new(e) + x_old(e))],
            strict=True,
        )
        for k in range(t):
            asm.add(
                f"gain_chain:i={i + 1},k={k}",
                dim,
                f0,
                [(_seq(i, k + 1), x_new), (_seq(i, k), x_old)],
                strict=False,
            )
        asm.add(
            f"pos:i={i + 1}", n, np.zeros((n, n)), [(_seq(i, 0), lambda e: -e)], strict=True
        )
    for i in range(system.N):
        for j in range(system.N):
            if i == j:
                continue
            terms = [(_seq(i, 0), lambda e: e), (_seq(j, t), lambda e: -e)]
            asm.add(f"switch:i={i + 1},j={j + 1}", n, eps * ident, terms, strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="anchor X_i(0) > 0 only; gain blocks forbid rescaling",
        epsilon=eps,
        meta={"builder": "l2", "tau": t, "gamma": float(gamma), "form": "primal"},
    )


def build_l2_synthesis(
    system: SwitchedSystem, tau: int | DwellSpec, gamma: float
) -> LmiProblem:
    """Fixed-gain-level synthesis conditions, dual chain with closed-loop substitution.

    The closed-loop step matrices ``A_i + B_i K_i(k)`` and output matrices
    ``C_i + D_i K_i(k)`` enter through ``U_i(k) = K_i(k) S_i(k)``.  The dual
    gain blocks are expanded one Schur-complement level further than the
    analysis form so that every ``S``-quadratic term becomes linear in
    ``(S, U)``: blocks are ``(n + p_i + q_i + n)``-sized with the step variable
    ``S_i(k)`` on the trailing diagonal.  With zero ``E``, ``C``, ``F``, ``D``
    the conditions reduce to the plain synthesis blocks.
    """
    _require_nominal(system, "build_l2_synthesis")
    if not (gamma > 0 and np.isfinite(gamma)):
        raise InvalidInput(f"gamma must be positive and finite, got {gamma}")
    t = _check_tau(tau)
    n = system.n
    eps = COUPLING_MARGIN
    delta = strictness_margin(system)
    space = VarSpace(
        sym_blocks=[(_seq(i, k), n) for i in range(system.N) for k in range(t + 1)],
        rect_blocks=[
            (_gain(i, k), system.modes[i].m, n)
            for i in range(system.N)
            for k in range(t + 1)
        ],
    )
    asm = _Assembler(space, delta)
    ident = np.eye(n)
    for i, mode in enumerate(system.modes):
        e_mat, c_mat, f_mat, b_mat, d_mat = _io_matrices(mode, i, need_b=True)
        a = mode.A
        p, q = mode.p, mode.q
        dim = n + p + q + n
        s0, s1, s2, s3 = 0, n, n + p, n + p + q
        f0 = np.zeros((dim, dim))
        f0[s0:s1, s1:s2] = e_mat
        f0[s1:s2, s0:s1] = e_mat.T
        f0[s1:s2, s1:s2] = -(gamma**2) * np.eye(p)
        f0[s1:s2, s2:s3] = f_mat.T
        f0[s2:s3, s1:s2] = f_mat
        f0[s2:s3, s2:s3] = -np.eye(q)

        def s_old(e, a=a, c_mat=c_mat, dim=dim):
            out = np.zeros((dim, dim))
            out[s0:s1, s3:] = a @ e
            out[s3:, s0:s1] = e @ a.T
            out[s2:s3, s3:] = c_mat @ e
            out[s3:, s2:s3] = e @ c_mat.T
            out[s3:, s3:] = -e
            return out

        def s_new(e, dim=dim):
            out = np.zeros((dim, dim))
            out[s0:s1, s0:s1] = -e
            return out

        def u_old(r, b_mat=b_mat, d_mat=d_mat, dim=dim):
            out = np.zeros((dim, dim))
            out[s0:s1, s3:] = b_mat @ r
            out[s3:, s0:s1] = r.T @ b_mat.T
            out[s2:s3, s3:] = d_mat @ r
            out[s3:, s2:s3] = r.T @ d_mat.T
            return out

        asm.add(
            f"gain_synth_tail:i={i + 1}",
            dim,
            f0,
            [(_seq(i, t), lambda e: s_old(e) + s_new(e)), (_gain(i, t), u_old)],
            strict=True,
        )
        for k in range(t):
            asm.add(
                f"gain_synth_chain:i={i + 1},k={k}",
                dim,
                f0,
                [
                    (_seq(i, k), s_old),
                    (_seq(i, k + 1), s_new),
                    (_gain(i, k), u_old),
                ],
                strict=False,
            )
    for i in range(system.N):
        for j in range(system.N):
            if i == j:
                continue
            terms = [(_seq(j, t), lambda e: e), (_seq(i, 0), lambda e: -e)]
            asm.add(f"switch:i={i + 1},j={j + 1}", n, eps * ident, terms, strict=False)
    return LmiProblem(
        vars=space,
        constraints=tuple(asm.constraints),
        delta=delta,
        normalization="S_i(tau) > 0 via the strict tail diagonal; gain blocks forbid rescaling",
        epsilon=eps,
        meta={"builder": "l2_synthesis", "tau": t, "gamma": float(gamma), "form": "dual"},
    )


def problem_size(problem: LmiProblem) -> tuple[int, int]:
    """(number of scalar decision variables, total LMI dimension).

    Lifted-family problems fix the switch margin instead of solving for it;
    it is counted back as one variable and one 1x1 LMI row so the totals match
    the standard complexity accounting of the underlying conditions.
    """
    extra = 1 if problem.epsilon is not None else 0
    nvars = problem.vars.total_dim + extra
    dim = sum(c.dim for c in problem.constraints) + extra
    return nvars, dim


def dump_sdpa(problem: LmiProblem) -> str:
    """Sparse SDPA-style text listing for cross-checking with external solvers.

    Field order per data line: ``k block row col value`` (1-based block/row/col,
    upper triangle only), where ``k = 0`` is the constant block F0 and
    ``k >= 1`` refers to decision variable k.  The listed problem is
    ``F0 + sum_k x_k F_k <= 0`` per block; strict blocks are marked in the
    comments together with the margin delta they must clear.
    """
    lines = [
        '"dwellcert LMI dump: F0 + sum_k x_k F_k <= 0 per block"',
        f'"delta (strict margin) = {problem.delta!r}"',
        f'"epsilon (fixed switch margin) = {problem.epsilon!r}"',
        '"data lines: k block row col value (k=0 is F0; 1-based indices; upper triangle)"',
    ]
    for idx, c in enumerate(problem.constraints):
        kind = "strict" if c.strict else "nonstrict"
        lines.append(f'"block {idx + 1}: {c.label} [{kind}]"')
    lines.append(str(problem.vars.total_dim))
    lines.append(str(len(problem.constraints)))
    lines.append(" ".join(str(c.dim) for c in problem.constraints))

    def emit(k: int, block: int, mat: np.ndarray):
        for r in range(mat.shape[0]):
            for cidx in range(r, mat.shape[1]):
                v = float(mat[r, cidx])
                if v != 0.0:
                    lines.append(f"{k} {block} {r + 1} {cidx + 1} {v!r}")

    for bidx, c in enumerate(problem.constraints):
        emit(0, bidx + 1, c.F0)
        for a, k in enumerate(c.var_idx):
            emit(int(k) + 1, bidx + 1, c.coeff[a])
    return "\n".join(lines) + "\n"
