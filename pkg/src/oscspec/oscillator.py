"""Quantization problems for the potential q**(2M) and the merged spectrum.

Each parity class of the oscillator spectrum solves its own fixed-point
equation: the kernel angle is theta = (M-1) pi / (M+1), the critical growth
exponent is 2M/(M+1), and the parity offsets differ by a constant.  Seeds are
normalized by the semiclassical growth coefficient so the iteration starts
inside the attraction basin, and the two converged parities interlace into
the full spectrum.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InterlacingViolation, NoConvergence
from .quantize import (
    IterationTrace,
    KernelParams,
    OffsetSequence,
    OperatorConfig,
    StopRule,
    iterate,
)
from .sequences import EnergySequence, TailModel


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class OscillatorProblem:
    """One parity class of the oscillator quantization problem."""

    M: int
    parity: Parity
    kernel: KernelParams
    alpha: float
    nu: float
    offsets: OffsetSequence


@dataclass(frozen=True)
class SpectrumResult:
    """Merged spectrum with per-parity diagnostics."""

    energies: np.ndarray
    even_fixed_point: EnergySequence
    odd_fixed_point: EnergySequence
    residuals: dict
    iterations: dict


def growth_constant(M: int) -> float:
    """Semiclassical growth coefficient nu of the spectrum E_k ~ nu k**alpha.

    nu = (2 sqrt(pi) M Gamma(3/2 + 1/(2M)) / Gamma(1/(2M)))**alpha, evaluated
    through log-gamma so the relative accuracy stays at machine level.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    alpha = 2.0 * M / (M + 1.0)
    log_base = (
        math.log(2.0)
        + 0.5 * math.log(math.pi)
        + math.log(M)
        + float(gammaln(1.5 + 0.5 / M))
        - float(gammaln(0.5 / M))
    )
    return math.exp(alpha * log_base)


def build_problem(M: int, parity: Parity) -> OscillatorProblem:
    """Assemble kernel angle, growth data and parity offsets; validates the
    offset admissibility conditions and fails construction on violation."""
    if M < 2:
        raise ValueError("M must be at least 2 (the potential q**2 is not covered)")
    theta = (M - 1) * math.pi / (M + 1)
    kernel = KernelParams(theta)
    alpha = 2.0 * M / (M + 1.0)
    quarter = (M - 1) / (4.0 * (M + 1))
    if parity is Parity.EVEN:
        offsets = OffsetSequence(constant=-0.75 + quarter)
    else:
        offsets = OffsetSequence(constant=-0.25 - quarter)
    offsets.validate(kernel)
    return OscillatorProblem(M=M, parity=parity, kernel=kernel, alpha=alpha,
                             nu=growth_constant(M), offsets=offsets)


def seed_sequence(problem: OscillatorProblem, n: int) -> EnergySequence:
    """Critically normalized seed 2**alpha nu k**alpha with matching tail.

    Both parity classes grow like 2**alpha nu k**alpha because they pick
    every other level of the full spectrum.
    """
    amplitude = 2.0 ** problem.alpha * problem.nu
    k = np.arange(1, n + 1, dtype=float)
    return EnergySequence(amplitude * k ** problem.alpha,
                          TailModel(amplitude, problem.alpha))


def solve_parity(problem: OscillatorProblem, cfg: OperatorConfig,
                 stop: StopRule) -> tuple[EnergySequence, IterationTrace]:
    """Iterate from the seed to the parity fixed point.

    Raises NoConvergence when the sup residual has not reached the stopping
    target within stop.max_steps.
    """
    trace = iterate(seed_sequence(problem, cfg.truncation), problem.offsets,
                    problem.kernel, cfg, stop)
    if not trace.residual_sup or trace.residual_sup[-1] > stop.target_residual:
        last = trace.residual_sup[-1] if trace.residual_sup else math.inf
        raise NoConvergence(
            f"{problem.parity.value} parity residual {last:.3e} above target "
            f"{stop.target_residual:.3e} after {trace.steps} steps"
        )
    return trace.iterates[-1], trace


def merge_spectrum(even: EnergySequence, odd: EnergySequence,
                   residuals: dict | None = None,
                   iterations: dict | None = None) -> SpectrumResult:
    """Interleave parity fixed points into the full spectrum.

    Level 2i-2 comes from even entry i and level 2i-1 from odd entry i.  The
    merged list must be strictly increasing; a violation signals truncation
    or convergence failure and is raised rather than warned about.
    """
    if len(even) != len(odd):
        raise InterlacingViolation(
            f"parity prefixes differ in length: {len(even)} vs {len(odd)}"
        )
    merged = np.empty(2 * len(even))
    merged[0::2] = even.values
    merged[1::2] = odd.values
    gaps = np.diff(merged)
    if not np.all(gaps > 0):
        where = int(np.argmin(gaps))
        raise InterlacingViolation(
            f"merged levels not strictly increasing at position {where} "
            f"(values {merged[where]:.12g} and {merged[where + 1]:.12g})"
        )
    return SpectrumResult(
        energies=merged,
        even_fixed_point=even,
        odd_fixed_point=odd,
        residuals=residuals or {},
        iterations=iterations or {},
    )


def thread_count() -> int:
    """Worker count from the OSCSPEC_THREADS environment variable, default 1."""
    raw = os.environ.get("OSCSPEC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def compute_spectrum(M: int, cfg: OperatorConfig, stop: StopRule,
                     threads: int | None = None) -> SpectrumResult:
    """Solve both parities (concurrently when threads allow) and merge."""
    problems = {p: build_problem(M, p) for p in Parity}
    workers = thread_count() if threads is None else threads
    if workers >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = {p: pool.submit(solve_parity, prob, cfg, stop)
                       for p, prob in problems.items()}
            solved = {p: f.result() for p, f in futures.items()}
    else:
        solved = {p: solve_parity(prob, cfg, stop) for p, prob in problems.items()}
    residuals = {p.value: solved[p][1].residual_sup[-1] for p in Parity}
    iterations = {p.value: solved[p][1].steps for p in Parity}
    return merge_spectrum(solved[Parity.EVEN][0], solved[Parity.ODD][0],
                          residuals=residuals, iterations=iterations)
