"""Shared fixtures: cached parity solves reused across test modules."""

import functools

import numpy as np
import pytest

from oscspec import OperatorConfig, Parity, StopRule, build_problem, solve_parity


@functools.lru_cache(maxsize=32)
def solved_parity(M: int, parity_name: str, n: int, target: float = 1e-11,
                  max_steps: int = 400):
    """Converged fixed point and trace for one parity problem, cached."""
    problem = build_problem(M, Parity(parity_name))
    cfg = OperatorConfig(truncation=n)
    stop = StopRule(max_steps=max_steps, target_residual=target)
    fixed, trace = solve_parity(problem, cfg, stop)
    return problem, cfg, fixed, trace


@pytest.fixture(scope="session")
def m2_even_300():
    return solved_parity(2, "even", 300, target=1e-12)


@pytest.fixture(scope="session")
def m2_odd_300():
    return solved_parity(2, "odd", 300, target=1e-12)


@pytest.fixture(scope="session")
def m2_even_500():
    return solved_parity(2, "even", 500)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_growth_sequence(rng, n: int, alpha: float = 4.0 / 3.0,
                           amplitude: float = 5.5, wobble: float = 0.3):
    """Random positive sequence in the growth class amplitude * k**alpha."""
    from oscspec import EnergySequence, TailModel

    k = np.arange(1, n + 1, dtype=float)
    noise = rng.uniform(-wobble, wobble, size=n)
    return EnergySequence(amplitude * k ** alpha * np.exp(noise),
                          TailModel(amplitude, alpha))
