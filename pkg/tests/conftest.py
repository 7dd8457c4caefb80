from pathlib import Path

import numpy as np
import pytest

from dwellcert.lmi import AffineLmi, LmiProblem, VarSpace
from dwellcert.model import load_system

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def system(name: str):
    return load_system(FIXTURES / name)


@pytest.fixture(scope="session")
def ex1():
    return system("ex1.json")


@pytest.fixture(scope="session")
def ex2():
    return system("ex2.json")


@pytest.fixture(scope="session")
def ex3():
    return system("ex3.json")


@pytest.fixture(scope="session")
def robust_sys():
    return system("robust.json")


@pytest.fixture(scope="session")
def ex6():
    return system("ex6.json")


@pytest.fixture(scope="session")
def ex7():
    return system("ex7.json")


@pytest.fixture(scope="session")
def ex8():
    return system("ex8.json")


def taylor_expm(a: np.ndarray, terms: int = 30) -> np.ndarray:
    """Scaled 30-term Taylor oracle for the matrix exponential.

    Independent of the package implementation: plain series summation after
    halving the argument until its max-norm is below 0.5, then squaring back.
    """
    a = np.asarray(a, dtype=float)
    s = 0
    norm = np.max(np.abs(a)) if a.size else 0.0
    while norm > 0.5:
        norm /= 2.0
        s += 1
    x = a / (2.0**s)
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms + 1):
        term = term @ x / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


def naive_mat_pow(a: np.ndarray, k: int) -> np.ndarray:
    """Sequential-multiplication oracle for integer matrix powers."""
    result = np.eye(a.shape[0])
    for _ in range(k):
        result = result @ a
    return result


def random_spd(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    m = rng.standard_normal((dim, dim))
    return scale * (m @ m.T + dim * np.eye(dim))


def scalar_problem(blocks, num_vars, delta=1e-7):
    """Assemble a problem over scalar variables from (F0, {var: coeff}, strict) specs."""
    space = VarSpace(scalar_vars=[f"x{i}" for i in range(num_vars)])
    constraints = []
    for idx, (f0, coeffs, strict) in enumerate(blocks):
        f0 = np.asarray(f0, dtype=float)
        var_idx = np.array(sorted(coeffs), dtype=int)
        coeff = (
            np.stack([np.asarray(coeffs[k], dtype=float) for k in var_idx])
            if len(coeffs)
            else np.zeros((0, f0.shape[0], f0.shape[0]))
        )
        constraints.append(
            AffineLmi(
                label=f"block:{idx + 1}",
                F0=f0,
                var_idx=var_idx,
                coeff=coeff,
                strict=strict,
            )
        )
    return LmiProblem(
        vars=space,
        constraints=tuple(constraints),
        delta=delta,
        normalization="test problem",
    )


def random_problem(seed, feasible, num_vars=None):
    """Random scalar-variable LMI problem with known status.

    Feasible instances are built around a hidden witness with margin >= 0.1;
    infeasible ones embed a constant positive definite block.
    """
    rng = np.random.default_rng(seed)
    m = num_vars or int(rng.integers(2, 7))
    witness = rng.standard_normal(m)
    blocks = []
    for _ in range(int(rng.integers(2, 5))):
        dim = int(rng.integers(1, 5))
        active = rng.choice(m, size=min(m, int(rng.integers(1, m + 1))), replace=False)
        coeffs = {}
        total = np.zeros((dim, dim))
        for k in active:
            c = rng.standard_normal((dim, dim))
            c = 0.5 * (c + c.T)
            coeffs[int(k)] = c
            total = total + witness[k] * c
        margin = rng.uniform(0.1, 1.0)
        bump = rng.standard_normal((dim, dim))
        pd = bump @ bump.T + margin * np.eye(dim)
        f0 = -total - pd
        blocks.append((f0, coeffs, bool(rng.integers(0, 2))))
    if not feasible:
        dim = int(rng.integers(1, 4))
        level = rng.uniform(0.1, 2.0)
        blocks.append((level * np.eye(dim), {}, False))
    return scalar_problem(blocks, m)
