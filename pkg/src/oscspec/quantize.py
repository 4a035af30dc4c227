"""The exact quantization operator.

The operator maps a positive sequence X to the sequence Y solving, level by
level, the counting equation

    (1/pi) * sum_k angle_kernel(X_k, Y_j) = Q_j,

where the sum runs over the full sequence (stored prefix plus tail model) and
Q is an admissible offset sequence.  Because the left side depends on Y only
through Y_j and is strictly increasing in it, each component has a unique root
and the components solve independently.

This module provides the two pair kernels, the counting function and its
logarithmic derivative, the implicit solve, the row-stochastic derivative
matrix of the operator in log coordinates, and the iteration driver.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, ConditionViolation, NoConvergence, TailDivergence
from .sequences import EnergySequence, TailModel

_LOG8 = math.log(8.0)
# widest admissible bracket: total expansion factor 2**64 on either side
_MAX_HALFWIDTH = 64.0 * math.log(2.0)


@dataclass(frozen=True)
class KernelParams:
    """Angle parameter of the pair kernels, in radians, strictly inside (0, pi)."""

    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"theta must lie strictly between 0 and pi, got {self.theta}")

    @property
    def sin(self) -> float:
        return math.sin(self.theta)

    @property
    def cos(self) -> float:
        return math.cos(self.theta)


@dataclass(frozen=True)
class OffsetSequence:
    """Right-hand side Q of the counting equations.

    Stored in closed form Q_k = k + constant, with optional explicit
    overrides for small k given as (k, value) pairs.  Admissibility asks for
    Q_k = k + O(1) (automatic here) and the strict lower bound
    Q_k > (k - 1/2) theta / pi for every k, without which the operator has no
    fixed point at all.  ``validate`` checks the overrides individually and
    the closed-form rule by a single inequality at the smallest plain index,
    which suffices because the margin grows linearly in k.
    """

    constant: float
    overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        seen = set()
        for k, v in self.overrides:
            if k < 1 or k != int(k):
                raise ValueError(f"override index must be a positive integer, got {k}")
            if k in seen:
                raise ValueError(f"duplicate override for k={k}")
            seen.add(k)

    def values(self, n: int) -> np.ndarray:
        """Q_1 .. Q_n as an array."""
        out = np.arange(1, n + 1, dtype=float) + self.constant
        for k, v in self.overrides:
            if k <= n:
                out[k - 1] = v
        return out

    def value(self, k: int) -> float:
        for kk, v in self.overrides:
            if kk == k:
                return v
        return k + self.constant

    def o1_bound(self) -> float:
        """Bound on |Q_k - k| over all k."""
        b = abs(self.constant)
        for k, v in self.overrides:
            b = max(b, abs(v - k))
        return b

    def validate(self, kernel: KernelParams) -> None:
        """Raise ConditionViolation unless Q_k > (k - 1/2) theta/pi for all k."""
        rate = kernel.theta / math.pi
        for k, v in self.overrides:
            if not v > (k - 0.5) * rate:
                raise ConditionViolation(
                    f"offset Q_{k}={v} does not exceed (k - 1/2) theta/pi = {(k - 0.5) * rate}", k=k
                )
        plain = 1
        covered = {k for k, _ in self.overrides}
        while plain in covered:
            plain += 1
        # margin k(1 - theta/pi) + constant + theta/(2 pi) increases in k,
        # so the bound at the smallest plain index proves all larger ones
        if not plain + self.constant > (plain - 0.5) * rate:
            raise ConditionViolation(
                f"closed-form offsets fail at k={plain}: "
                f"{plain + self.constant} <= {(plain - 0.5) * rate}",
                k=plain,
            )


@dataclass(frozen=True)
class OperatorConfig:
    """Numerical parameters of the truncated operator."""

    truncation: int = 500
    root_tol: float = 1e-12
    max_root_iters: int = 100
    tail_quadrature_points: int = 64

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be at least 1")
        if not self.root_tol > 0:
            raise ValueError("root_tol must be positive")
        if self.max_root_iters < 1:
            raise ValueError("max_root_iters must be at least 1")
        if self.tail_quadrature_points < 2:
            raise ValueError("tail_quadrature_points must be at least 2")


@dataclass(frozen=True)
class DerivativeMatrix:
    """Derivative of the operator in logarithmic coordinates, truncated.

    ``entries[i, j]`` is the sensitivity of output level i+1 to input level
    j+1; ``row_defect[i]`` is the derivative mass carried by tail indices
    beyond the truncation.  Every entry is positive and each row plus its
    defect sums to one: the matrix is stochastic once the tail is counted.
    """

    entries: np.ndarray
    row_defect: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        defect = np.asarray(self.row_defect, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("entries must be a square matrix")
        if defect.shape != (entries.shape[0],):
            raise ValueError("row_defect length must match the matrix size")
        if not np.all(entries > 0):
            raise ValueError("all derivative entries must be strictly positive")
        if np.any(defect < 0):
            raise ValueError("row defects must be nonnegative")
        gap = np.abs(entries.sum(axis=1) + defect - 1.0)
        if gap.max() > 1e-12:
            raise ValueError(f"rows plus defect must sum to 1 within 1e-12, worst gap {gap.max():.3e}")
        entries = entries.copy()
        entries.setflags(write=False)
        defect = defect.copy()
        defect.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_defect", defect)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class StopRule:
    """Stopping policy for the iteration driver."""

    max_steps: int = 200
    target_residual: float = 1e-10
    rate_epsilon: float = 1.0


@dataclass
class IterationTrace:
    """Iterates with per-step residuals in logarithmic coordinates.

    residual_sup[n] and residual_weighted[n] measure the step from
    iterates[n] to iterates[n+1]; the weighted residual uses the configured
    rate_epsilon.
    """

    iterates: list[EnergySequence] = field(default_factory=list)
    residual_sup: list[float] = field(default_factory=list)
    residual_weighted: list[float] = field(default_factory=list)
    rate_epsilon: float = 1.0

    @property
    def steps(self) -> int:
        return len(self.residual_sup)


def angle_kernel(kernel: KernelParams, e_source, e_probe):
    """Phase contributed by a level e_source to the count at energy e_probe.

    Continuous (0, pi)-valued branch: the two-argument arctangent of
    (sin theta, e_source/e_probe + cos theta).  Decreasing in the ratio
    e_source/e_probe, tending to theta as the ratio vanishes and to 0 as it
    grows; a single-argument arctangent would jump when the second argument
    changes sign for theta beyond pi/2.
    """
    ratio = np.asarray(e_source, dtype=float) / np.asarray(e_probe, dtype=float)
    return np.arctan2(kernel.sin, ratio + kernel.cos)


def derivative_kernel(kernel: KernelParams, e_a, e_b):
    """Symmetric pair kernel E E' / (E^2 + 2 cos theta E E' + E'^2).

    Evaluated as 1 / (r + 2 cos theta + 1/r) with r = e_a/e_b, which is
    scale invariant and stays finite for extreme magnitude mismatches.
    """
    ratio = np.asarray(e_a, dtype=float) / np.asarray(e_b, dtype=float)
    return 1.0 / (ratio + 2.0 * kernel.cos + 1.0 / ratio)


@functools.lru_cache(maxsize=8)
def _gauss_nodes(npts: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (u + 1.0), 0.5 * w


def _tail_rule(n: int, tail: TailModel, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature surrogate for sums over tail indices k > n.

    The sum is approximated by the integral of the tail integrand over
    [n + 1/2, inf), mapped onto (0, 1] by s = (n + 1/2) u**(-1/(a-1)).  The
    substitution absorbs the power decay, so the transformed integrand is
    bounded and smooth and a fixed Gauss-Legendre rule suffices.

    Returns extrapolated sequence values at the nodes and the combined
    quadrature-times-Jacobian weights.
    """
    a = tail.exponent
    if a <= 1.0:
        raise TailDivergence(f"tail exponent must exceed 1, got {a}")
    u, w = _gauss_nodes(npts)
    s0 = n + 0.5
    s = s0 * u ** (-1.0 / (a - 1.0))
    jac = s0 / (a - 1.0) * u ** (-a / (a - 1.0))
    return tail.amplitude * (s + tail.shift) ** a, w * jac


def _extended(X: EnergySequence, cfg: OperatorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stored entries plus tail nodes, with unit weights on the prefix."""
    tail_values, tail_weights = _tail_rule(len(X), X.tail, cfg.tail_quadrature_points)
    return (
        np.concatenate([X.values, tail_values]),
        np.concatenate([np.ones(len(X)), tail_weights]),
    )


def _counting_all(X: EnergySequence, probes: np.ndarray, kernel: KernelParams,
                  cfg: OperatorConfig) -> np.ndarray:
    """Counting function at every probe energy at once."""
    xe, we = _extended(X, cfg)
    ratios = xe[None, :] / probes[:, None]
    return np.arctan2(kernel.sin, ratios + kernel.cos) @ we / math.pi


def counting_component(X: EnergySequence, y_level: float, kernel: KernelParams,
                       cfg: OperatorConfig) -> float:
    """One component of the counting function: (1/pi) sum_k angle_kernel(X_k, y).

    Strictly increasing in y_level; the tail of the sum is evaluated by the
    quadrature rule of the tail model.
    """
    return float(_counting_all(X, np.asarray([y_level], dtype=float), kernel, cfg)[0])


def counting_derivative(X: EnergySequence, y_level: float, kernel: KernelParams,
                        cfg: OperatorConfig) -> float:
    """Derivative of counting_component with respect to ln(y_level).

    Equals (sin theta / pi) times the sum of derivative_kernel(X_k, y) over
    the full sequence; strictly positive.
    """
    xe, we = _extended(X, cfg)
    ratios = xe / y_level
    p = 1.0 / (ratios + 2.0 * kernel.cos + 1.0 / ratios)
    return float(p @ we * (kernel.sin / math.pi))


def apply_quantization(X: EnergySequence, Q: OffsetSequence, kernel: KernelParams,
                       cfg: OperatorConfig) -> EnergySequence:
    """Apply the operator: solve the counting equation at every stored level.

    Each component is solved by a safeguarded Newton iteration in the log
    coordinate y_j = ln Y_j: Newton steps use the analytic derivative and
    fall back to bisection on a sign-changing bracket, which starts at
    [X_j/8, 8 X_j] and expands geometrically (up to a total factor of 2**64
    per side) if it does not straddle the root.  A component is accepted when
    |phi_j - Q_j| <= root_tol, or when its bracket collapses to a few ulps of
    y_j: at large truncations one ulp of y_j moves phi_j by more than any
    fixed tolerance, so an absolute tolerance alone is not reachable in
    double precision.

    The output keeps the input tail exponent and shift.  Its amplitude is the
    input amplitude times the closed-form drift factor D(a)**(-a), the
    asymptotic per-application rescaling of power sequences of exponent a;
    the factor is one at the critical exponent, so the tail of an iteration
    started on a critically normalized seed is pinned.

    Raises BracketFailure if expansion runs out, NoConvergence if
    max_root_iters is exhausted.
    """
    values = X.values
    n = len(values)
    xe, we = _extended(X, cfg)
    sin_t, cos_t = kernel.sin, kernel.cos
    q = Q.values(n)

    def count_minus_q(y: np.ndarray, idx: np.ndarray) -> np.ndarray:
        ratios = xe[None, :] / np.exp(y)[:, None]
        phi = np.arctan2(sin_t, ratios + cos_t) @ we / math.pi
        return phi - q[idx]

    def count_and_slope(y: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ratios = xe[None, :] / np.exp(y)[:, None]
        phi = np.arctan2(sin_t, ratios + cos_t) @ we / math.pi
        p = 1.0 / (ratios + 2.0 * cos_t + 1.0 / ratios)
        return phi - q[idx], p @ we * (sin_t / math.pi)

    x_log = np.log(values)
    y = x_log.copy()
    lo = x_log - _LOG8
    hi = x_log + _LOG8

    # expand until f(lo) < 0 < f(hi); phi is increasing in y so sign
    # information at the bounds is conclusive
    idx_all = np.arange(n)
    f_lo = count_minus_q(lo, idx_all)
    f_hi = count_minus_q(hi, idx_all)
    while True:
        bad_lo = f_lo >= 0
        bad_hi = f_hi <= 0
        if not bad_lo.any() and not bad_hi.any():
            break
        if np.max(x_log - lo) > _MAX_HALFWIDTH or np.max(hi - x_log) > _MAX_HALFWIDTH:
            worst = int(np.argmax(np.where(bad_lo | bad_hi, np.abs(f_lo) + np.abs(f_hi), -1.0)))
            raise BracketFailure(
                f"no sign change bracketing level {worst + 1} within a 2**64 expansion"
            )
        lo[bad_lo] -= _LOG8
        hi[bad_hi] += _LOG8
        if bad_lo.any():
            f_lo[bad_lo] = count_minus_q(lo[bad_lo], idx_all[bad_lo])
        if bad_hi.any():
            f_hi[bad_hi] = count_minus_q(hi[bad_hi], idx_all[bad_hi])

    eps = np.finfo(float).eps
    active = idx_all
    for _ in range(cfg.max_root_iters):
        f, slope = count_and_slope(y[active], active)
        positive = f > 0
        hi[active[positive]] = y[active[positive]]
        lo[active[~positive]] = y[active[~positive]]
        keep = np.abs(f) > cfg.root_tol
        # bracket collapsed to machine resolution: accept the midpoint
        resolved = (hi[active] - lo[active]) <= 8.0 * eps * np.maximum(1.0, np.abs(y[active]))
        keep &= ~resolved
        active = active[keep]
        if active.size == 0:
            break
        f = f[keep]
        slope = slope[keep]
        proposal = y[active] - f / slope
        outside = ~np.isfinite(proposal) | (proposal <= lo[active]) | (proposal >= hi[active])
        proposal[outside] = 0.5 * (lo[active][outside] + hi[active][outside])
        y[active] = proposal
    if active.size:
        raise NoConvergence(
            f"{active.size} level(s) unresolved after {cfg.max_root_iters} iterations, "
            f"first at level {int(active[0]) + 1}"
        )

    out_values = np.exp(y)
    factor = _tail_drift_factor(kernel.theta, X.tail.exponent)
    return EnergySequence(out_values, TailModel(X.tail.amplitude * factor,
                                                X.tail.exponent, X.tail.shift))


def _tail_drift_factor(theta: float, exponent: float) -> float:
    """Asymptotic per-application rescaling D**(-a) of exponent-a power tails,
    with D = sin(theta/a) / sin(pi/a); equal to one at a = 1 + theta/pi."""
    drift = math.sin(theta / exponent) / math.sin(math.pi / exponent)
    return drift ** (-exponent)


def derivative_matrix(X: EnergySequence, Y: EnergySequence, kernel: KernelParams,
                      cfg: OperatorConfig) -> DerivativeMatrix:
    """Derivative of the operator at X in log coordinates, rows normalized.

    entries[i, j] = K(X_j, Y_i) / Z_i with K the derivative kernel and Z_i the
    full-sequence sum including the tail of X; row_defect[i] is the tail share
    of Z_i.  The caller is responsible for Y = apply_quantization(X); this is
    not re-verified.
    """
    xe, we = _extended(X, cfg)
    ratios = xe[None, :] / Y.values[:, None]
    p = 1.0 / (ratios + 2.0 * kernel.cos + 1.0 / ratios)
    n = len(X)
    z = p @ we
    entries = p[:, :n] / z[:, None]
    defect = (p[:, n:] @ we[n:]) / z
    return DerivativeMatrix(entries, defect)


def iterate(X0: EnergySequence, Q: OffsetSequence, kernel: KernelParams,
            cfg: OperatorConfig, stop: StopRule) -> IterationTrace:
    """Apply the operator repeatedly, recording residuals per step.

    Stops when the sup-log residual drops to stop.target_residual or after
    stop.max_steps applications.  Residuals are measured between consecutive
    iterates in log coordinates, plain sup and k**rate_epsilon weighted.
    Solver errors are re-raised with the step index attached.
    """
    trace = IterationTrace(iterates=[X0], rate_epsilon=stop.rate_epsilon)
    current = X0
    k = np.arange(1, len(X0) + 1, dtype=float)
    weights = k ** stop.rate_epsilon
    for step in range(stop.max_steps):
        try:
            nxt = apply_quantization(current, Q, kernel, cfg)
        except (BracketFailure, NoConvergence) as exc:
            raise type(exc)(f"step {step + 1}: {exc}") from exc
        delta = np.abs(np.log(nxt.values) - np.log(current.values))
        trace.iterates.append(nxt)
        trace.residual_sup.append(float(delta.max()))
        trace.residual_weighted.append(float((weights * delta).max()))
        current = nxt
        if trace.residual_sup[-1] <= stop.target_residual:
            break
    return trace
