"""Dense real matrix kernel.

Small-matrix routines used everywhere else in the package: symmetric
eigendecomposition, spectral radius of a general square matrix, integer matrix
powers, the matrix exponential, and SPD linear solves.  Eigenvalue work is
delegated to LAPACK through numpy; the matrix exponential is a
scaling-and-squaring diagonal Pade approximant.

All comparisons elsewhere use the absolute-plus-relative convention
``tol * (1 + max_abs(.))`` because the systems handled here span entry
magnitudes from roughly 0.1 to 10.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidInput, NotPositiveDefinite, NumericalFailure

__all__ = [
    "as_matrix",
    "as_sym_matrix",
    "sym_eig",
    "min_eig",
    "max_eig",
    "spectral_radius",
    "mat_pow",
    "expm",
    "solve_spd",
    "max_abs",
    "symmetrize",
]


def max_abs(a: np.ndarray) -> float:
    """Largest entry magnitude, the norm used in tolerance scaling."""
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-d float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidInput(f"{name} must be a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput(f"{name} has non-finite entries")
    return m


def as_sym_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate a square matrix and return its symmetrized copy."""
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {m.shape}")
    return symmetrize(m)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def sym_eig(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, q)`` with eigenvalues ``w`` ascending and ``q`` orthonormal
    such that ``s = q @ diag(w) @ q.T``.
    """
    s = as_sym_matrix(s, "sym_eig input")
    try:
        w, q = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK is robust here
        raise NumericalFailure(f"symmetric eigendecomposition failed: {exc}") from exc
    return w, q


def min_eig(s: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(sym_eig(s)[0][0])


def max_eig(s: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(sym_eig(s)[0][-1])


def spectral_radius(a: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a general square matrix."""
    a = as_matrix(a, "spectral_radius input")
    if a.shape[0] != a.shape[1]:
        raise InvalidInput("spectral_radius needs a square matrix")
    try:
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"QR eigenvalue iteration did not converge: {exc}") from exc


def mat_pow(a: np.ndarray, k: int) -> np.ndarray:
    """Integer matrix power by repeated squaring; ``a**0`` is the identity."""
    a = as_matrix(a, "mat_pow input")
    if a.shape[0] != a.shape[1]:
        raise InvalidInput("mat_pow needs a square matrix")
    if k < 0:
        raise InvalidInput("mat_pow exponent must be >= 0")
    result = np.eye(a.shape[0])
    base = a.copy()
    e = int(k)
    while e:
        if e & 1:
            result = result @ base
        e >>= 1
        if e:
            base = base @ base
    return result


def _pade6_coeffs() -> np.ndarray:
    m = 6
    return np.array(
        [
            math.factorial(2 * m - j)
            * math.factorial(m)
            / (math.factorial(2 * m) * math.factorial(j) * math.factorial(m - j))
            for j in range(m + 1)
        ]
    )


_PADE6 = _pade6_coeffs()


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential via scaling-and-squaring with a diagonal Pade(6,6).

    The argument is scaled so its 1-norm is at most 0.5 before the rational
    approximation, then the result is squared back.
    """
    a = as_matrix(a, "expm input")
    if a.shape[0] != a.shape[1]:
        raise InvalidInput("expm needs a square matrix")
    norm1 = float(np.linalg.norm(a, 1))
    s = max(0, math.ceil(math.log2(norm1 / 0.5))) if norm1 > 0.5 else 0
    x = a / (2.0**s)
    n = a.shape[0]
    ident = np.eye(n)
    powers = [ident, x]
    for _ in range(2, 7):
        powers.append(powers[-1] @ x)
    num = sum(_PADE6[j] * powers[j] for j in range(7))
    den = sum(_PADE6[j] * (-1) ** j * powers[j] for j in range(7))
    result = np.linalg.solve(den, num)
    for _ in range(s):
        result = result @ result
    return result


def solve_spd(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``s @ x = b`` for symmetric positive definite ``s`` via Cholesky."""
    s = as_sym_matrix(s, "solve_spd matrix")
    b = np.asarray(b, dtype=float)
    rhs = b.reshape(-1, 1) if b.ndim == 1 else as_matrix(b, "solve_spd rhs")
    if rhs.shape[0] != s.shape[0]:
        raise InvalidInput(
            f"solve_spd shapes incompatible: {s.shape} vs {rhs.shape}"
        )
    try:
        factor = cho_factor(s, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky breakdown: {exc}") from exc
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    x = cho_solve(factor, rhs)
    return x[:, 0] if b.ndim == 1 else x
