"""Independent finite-difference eigensolver for H = -d^2/dq^2 + q**(2M).

Ground-truth reference for the fixed-point solver, kept deliberately free of
any code shared with the operator modules: plain second-order central
differences with Dirichlet ends on a symmetric interval, a tridiagonal
eigensolver, and Richardson extrapolation across grid doublings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NotSorted, ResolutionError


@dataclass(frozen=True)
class OracleConfig:
    """Discretization parameters.

    grid_points is the interior point count of the coarsest level; each
    refinement level doubles it.  domain_halfwidth of None defers to
    suggest_halfwidth at call time.  The tolerance bounds the disagreement
    between the two finest Richardson extrapolants, per eigenvalue.
    """

    grid_points: int = 2048
    domain_halfwidth: float | None = None
    refinement_levels: int = 3
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.grid_points < 64:
            raise ValueError("grid_points must be at least 64")
        if self.domain_halfwidth is not None and not self.domain_halfwidth > 0:
            raise ValueError("domain_halfwidth must be positive")
        if self.refinement_levels < 1:
            raise ValueError("refinement_levels must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


def suggest_halfwidth(M: int, count: int) -> float:
    """Half-width L with L**(2M) at least four times the top requested level.

    The growth estimate nu (count + 2)**alpha comes from the semiclassical
    coefficient; the factor four keeps a classically forbidden pad between
    the turning point and the boundary so the Dirichlet error stays
    negligible against the discretization error.  The count is floored at
    ten: for very low levels the pad must be generous in absolute terms or
    the boundary error alone exceeds the accuracy of the extrapolation.
    """
    from .oscillator import growth_constant

    alpha = 2.0 * M / (M + 1.0)
    top = growth_constant(M) * (max(count, 10) + 2.0) ** alpha
    return float((4.0 * top) ** (1.0 / (2 * M)))


def _grid_eigenvalues(power: int, count: int, points: int, halfwidth: float) -> np.ndarray:
    """Lowest eigenvalues of the Dirichlet discretization of -u'' + q**power u."""
    h = 2.0 * halfwidth / (points + 1)
    q = -halfwidth + h * np.arange(1, points + 1)
    diagonal = 2.0 / h**2 + q**power
    off = np.full(points - 1, -1.0 / h**2)
    return eigh_tridiagonal(diagonal, off, select="i", select_range=(0, count - 1))[0]


def _richardson_eigenvalues(power: int, count: int, cfg: OracleConfig,
                            halfwidth: float) -> np.ndarray:
    """Eigenvalues extrapolated across refinement levels.

    Central differences carry an even error expansion in h, so the classic
    Richardson table with orders h**2, h**4, ... applies; the two deepest
    diagonal entries must agree to cfg.tolerance per eigenvalue.
    """
    levels = [
        _grid_eigenvalues(power, count, cfg.grid_points * 2**lvl, halfwidth)
        for lvl in range(cfg.refinement_levels)
    ]
    table = [levels]
    for order in range(1, cfg.refinement_levels):
        weight = 4.0**order
        previous = table[-1]
        table.append([
            (weight * previous[i + 1] - previous[i]) / (weight - 1.0)
            for i in range(len(previous) - 1)
        ])
    best = table[-1][0]
    if cfg.refinement_levels >= 2:
        runner_up = table[-2][-1]
        disagreement = np.abs(best - runner_up)
        if disagreement.max() > cfg.tolerance:
            worst = int(disagreement.argmax())
            raise ResolutionError(
                f"finest refinement levels disagree by {disagreement[worst]:.3e} "
                f"at eigenvalue {worst} (tolerance {cfg.tolerance:.3e})"
            )
    return best


def hamiltonian_eigenvalues(M: int, count: int, cfg: OracleConfig) -> np.ndarray:
    """Lowest `count` eigenvalues of -d^2/dq^2 + q**(2M), sorted ascending."""
    if M < 2:
        raise ValueError("M must be at least 2; harmonic_reference_eigenvalues covers q**2")
    if count < 1:
        raise ValueError("count must be at least 1")
    if count * 8 > cfg.grid_points:
        raise ValueError("count must be far below grid_points for discretization accuracy")
    halfwidth = cfg.domain_halfwidth or suggest_halfwidth(M, count)
    return _richardson_eigenvalues(2 * M, count, cfg, halfwidth)


def harmonic_reference_eigenvalues(count: int, cfg: OracleConfig) -> np.ndarray:
    """Sanity mode with potential q**2, whose exact levels are 2k + 1.

    Exposed for testing the discretization machinery only; the production
    solver starts at M = 2.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    halfwidth = cfg.domain_halfwidth or float(np.sqrt(4.0 * (2.0 * count + 1.0)))
    return _richardson_eigenvalues(2, count, cfg, halfwidth)


def parity_split(energies) -> tuple[np.ndarray, np.ndarray]:
    """Even-index and odd-index levels of a strictly increasing spectrum."""
    arr = np.asarray(energies, dtype=float)
    if arr.size >= 2 and not np.all(np.diff(arr) > 0):
        raise NotSorted("energies must be strictly increasing")
    return arr[0::2].copy(), arr[1::2].copy()
