"""Asymptotic diagnostics of the quantization operator.

Closed-form and quadrature evaluation of the drift of power sequences, the
critical growth exponent, the contraction integrals governing weighted
perturbations, adapted norms, sub/super-solution brackets, and empirical rate
measurement on iteration traces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, InsufficientData
from .quantize import (
    DerivativeMatrix,
    KernelParams,
    OffsetSequence,
    OperatorConfig,
    IterationTrace,
    _counting_all,
)
from .sequences import EnergySequence, LogSequence, TailModel

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=400)


def _power_tail_quad(f, cut: float, decay: float) -> float:
    """Integral of f over [cut, inf) for integrands decaying like s**(-decay).

    The substitution u = (cut/s)**(decay - 1) maps the range onto (0, 1] and
    turns the power tail into a bounded integrand.  Callers must keep decay
    safely above one; integrands with a nearly divergent leading power should
    subtract it analytically first.
    """
    scale = 1.0 / (decay - 1.0)

    def transformed(u: float) -> float:
        s = cut * u ** (-scale)
        return f(s) * cut * scale * u ** (-decay * scale)

    return quad(transformed, 0.0, 1.0, **_QUAD_OPTS)[0]


@dataclass(frozen=True)
class DriftReport:
    alpha: float
    theta: float
    integral_value: float
    closed_value: float

    @property
    def abs_gap(self) -> float:
        return abs(self.integral_value - self.closed_value)


@dataclass(frozen=True)
class ContractionReport:
    epsilon: float
    s_eps: float
    s_zero: float
    factor: float
    predicted_rate_at_1: float


class BracketKind(enum.Enum):
    SUPER = "SUPER"
    SUB = "SUB"


@dataclass(frozen=True)
class BracketCertificate:
    """Numerical sub/super-solution certificate over the stored levels.

    A SUPER certificate checks that the counting function at the sequence
    itself is at least the offsets (so one application can only move the
    sequence down); SUB is the mirror statement.  max_violation is the worst
    signed excess against the tested inequality, and the certificate is
    verified when it stays within the slack.
    """

    kind: BracketKind
    sequence: EnergySequence
    verified: bool
    max_violation: float


def drift_integral(alpha: float, kernel: KernelParams) -> float:
    """Per-application rescaling exponent integral for power growth alpha.

    (1/pi) times the integral over s in (0, inf) of the angle kernel branch
    atan2(sin theta, s**alpha + cos theta).  Split at s = 1 with s -> 1/s on
    the lower part, so both pieces decay and adaptive quadrature reaches
    absolute accuracy well below 1e-11.  Defined only for alpha > 1.
    """
    if alpha <= 1.0:
        raise DomainError(f"drift integral diverges for alpha <= 1, got {alpha}")
    sin_t, cos_t = kernel.sin, kernel.cos

    def upper(s: float) -> float:
        return math.atan2(sin_t, s ** alpha + cos_t)

    def lower(s: float) -> float:
        return math.atan2(sin_t, s ** (-alpha) + cos_t) / (s * s)

    def upper_remainder(s: float) -> float:
        # angle kernel minus its leading sin(theta) s**-alpha term, in a form
        # free of cancellation; decays like s**(-2 alpha)
        p = s ** alpha
        x = sin_t / (p + cos_t)
        return (math.atan(x) - x) - sin_t * cos_t / (p * (p + cos_t))

    # the integrands turn over within O(1/alpha) of s = 1; a knot there keeps
    # the adaptive rule efficient for large exponents.  Beyond the knot the
    # leading power integrates in closed form, which stays exact even as
    # alpha -> 1 where the tail is nearly divergent.
    knot = 1.0 + 4.0 / alpha
    lead = sin_t * knot ** (1.0 - alpha) / (alpha - 1.0)
    hi = (quad(upper, 1.0, knot, **_QUAD_OPTS)[0] + lead
          + _power_tail_quad(upper_remainder, knot, 2.0 * alpha))
    lo = quad(lower, 1.0, knot, **_QUAD_OPTS)[0] + _power_tail_quad(lower, knot, 2.0)
    return (hi + lo) / math.pi


def drift_closed(alpha: float, kernel: KernelParams) -> float:
    """Closed form sin(theta/alpha) / sin(pi/alpha) of the drift."""
    if alpha <= 1.0:
        raise DomainError(f"drift is defined for alpha > 1, got {alpha}")
    return math.sin(kernel.theta / alpha) / math.sin(math.pi / alpha)


def drift_report(alpha: float, kernel: KernelParams) -> DriftReport:
    return DriftReport(alpha, kernel.theta, drift_integral(alpha, kernel),
                       drift_closed(alpha, kernel))


def critical_exponent(kernel: KernelParams) -> float:
    """The growth exponent with unit drift: 1 + theta/pi."""
    return 1.0 + kernel.theta / math.pi


def critical_exponent_from_drift(kernel: KernelParams, xtol: float = 1e-12) -> float:
    """Bisection root of drift_integral(alpha) = 1 over [1 + 1e-6, 64].

    Verification mode for the closed form: the drift decreases strictly in
    alpha from +inf to theta/pi, so the root is unique.
    """
    lo, hi = 1.0 + 1e-6, 64.0
    if drift_integral(lo, kernel) < 1.0 or drift_integral(hi, kernel) > 1.0:
        raise DomainError("drift does not cross 1 inside [1 + 1e-6, 64]")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if drift_integral(mid, kernel) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def contraction_integral(epsilon: float, kernel: KernelParams) -> float:
    """Weighted contraction integral at the critical exponent.

    Integral over s in (0, inf) of s**(-epsilon) / (s**a + 2 cos theta +
    s**(-a)) with a the critical exponent, evaluated in the symmetrized form
    over [1, inf) with integrand (s**(-eps) + s**(eps-2)) / (...).  Returns
    math.inf when |epsilon - 1| >= a, where the integral diverges.
    """
    a = critical_exponent(kernel)
    if abs(epsilon - 1.0) >= a:
        return math.inf
    two_cos = 2.0 * kernel.cos

    def integrand(s: float) -> float:
        return (s ** (-epsilon) + s ** (epsilon - 2.0)) / (s ** a + two_cos + s ** (-a))

    def tail_piece(power: float) -> float:
        # integral over [knot, inf) of s**-power / (s**a + 2cos + s**-a):
        # closed-form leading s**-(power + a) plus a remainder decaying like
        # s**-(power + 2a), which keeps the substitution exponent tame even
        # next to the divergence edge of the strip
        def remainder(s: float) -> float:
            p = s ** a
            den = p + two_cos + 1.0 / p
            return -s ** (-power) * (two_cos + 1.0 / p) / (den * p)

        lead = knot ** (1.0 - power - a) / (power + a - 1.0)
        return lead + _power_tail_quad(remainder, knot, power + 2.0 * a)

    # the two symmetrized terms decay like s**-(eps + a) and s**-(2 - eps + a);
    # both exponents exceed one inside the convergence strip
    knot = 2.0
    head = quad(integrand, 1.0, knot, **_QUAD_OPTS)[0]
    return head + tail_piece(epsilon) + tail_piece(2.0 - epsilon)


def contraction_closed(epsilon: float, kernel: KernelParams) -> float:
    """Closed form of the contraction integral.

    (pi / (a sin theta)) * sin((1-eps) theta / a) / sin((1-eps) pi / a) for
    0 < |eps - 1| < a, with limit theta / (a sin theta) at eps = 1 and
    math.inf beyond the convergence strip.
    """
    a = critical_exponent(kernel)
    gap = 1.0 - epsilon
    if abs(gap) >= a:
        return math.inf
    if gap == 0.0:
        return kernel.theta / (a * kernel.sin)
    return (math.pi / (a * kernel.sin)) * math.sin(gap * kernel.theta / a) / math.sin(gap * math.pi / a)


def contraction_factor(epsilon: float, kernel: KernelParams) -> ContractionReport:
    """Predicted geometric rate S_eps / S_0 for eps-weighted perturbations."""
    s_eps = contraction_closed(epsilon, kernel)
    s_zero = contraction_closed(0.0, kernel)
    factor = math.inf if math.isinf(s_eps) else s_eps / s_zero
    return ContractionReport(
        epsilon=epsilon,
        s_eps=s_eps,
        s_zero=s_zero,
        factor=factor,
        predicted_rate_at_1=critical_exponent(kernel) - 1.0,
    )


def spectral_rate_estimate(D: DerivativeMatrix, epsilon: float, steps: int) -> float:
    """Geometric decay rate of the truncated derivative matrix acting on
    the profile v_k = k**(-epsilon).

    Applies the stored block `steps` times and fits the slope of the log of
    the epsilon-weighted sup norms over the last half of the steps.
    """
    if steps < 2:
        raise InsufficientData("at least two steps are needed to fit a rate")
    n = D.size
    k = np.arange(1, n + 1, dtype=float)
    weights = k ** epsilon
    v = k ** (-epsilon)
    norms = np.empty(steps)
    for i in range(steps):
        v = D.entries @ v
        norms[i] = np.max(weights * np.abs(v))
    window = np.arange(steps // 2, steps)
    slope = np.polyfit(window, np.log(norms[window]), 1)[0]
    return float(np.exp(slope))


def adapted_norm(u: LogSequence, epsilon: float, n_cut: int) -> float:
    """Boundary-adapted weighted norm sup_k |u_k| / min(n_cut**-eps, k**-eps).

    Flattens the weight over k <= n_cut, which is what makes the derivative a
    uniform contraction there; equivalent to the plain weighted norm within a
    factor n_cut**eps.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    if len(u) == 0:
        return 0.0
    k = np.arange(1, len(u) + 1, dtype=float)
    reference = np.minimum(float(n_cut) ** (-epsilon), k ** (-epsilon))
    return float(np.max(np.abs(u.entries) / reference))


def upper_bracket(A: float, n: int, kernel: KernelParams) -> EnergySequence:
    """Super-solution candidate (k + A)**a at the critical exponent a.

    The tail model carries the shift, so the sequence is represented exactly
    at every index.  For A large enough one application moves it down; A = 0
    degenerates to the plain critical power.
    """
    if A < 0:
        raise DomainError("A must be nonnegative")
    a = critical_exponent(kernel)
    k = np.arange(1, n + 1, dtype=float)
    return EnergySequence((k + A) ** a, TailModel(1.0, a, shift=A))


def lower_bracket(n_param: int, n: int, kernel: KernelParams) -> EnergySequence:
    """Sub-solution candidate: geometric staircase then shifted power.

    Entries n_param**(k - n_param**2) for k below n_param**2 and
    (k - n_param**2 + n_param)**a from there on, at the critical exponent a.
    The truncation must reach past the staircase.
    """
    if n_param < 2:
        raise DomainError("n_param must be at least 2")
    square = n_param * n_param
    if n <= square:
        raise DomainError(f"truncation {n} must exceed n_param**2 = {square}")
    a = critical_exponent(kernel)
    k = np.arange(1, n + 1, dtype=float)
    values = np.empty(n)
    stair = k < square
    values[stair] = float(n_param) ** (k[stair] - square)
    values[~stair] = (k[~stair] - square + n_param) ** a
    return EnergySequence(values, TailModel(1.0, a, shift=float(n_param - square)))


def verify_bracket(X: EnergySequence, Q: OffsetSequence, kernel: KernelParams,
                   cfg: OperatorConfig, slack: float = 1e-8,
                   kind: BracketKind | None = None) -> BracketCertificate:
    """Certify X as a sub- or super-solution over the stored levels.

    Evaluates d_j = phi_j(X, X_j) - Q_j for every stored j.  All d_j >= -slack
    certifies SUPER (one application moves X down), all d_j <= slack certifies
    SUB.  With kind omitted, the better-satisfied hypothesis is reported; a
    fixed point satisfies both within solver noise.
    """
    diffs = _counting_all(X, X.values, kernel, cfg) - Q.values(len(X))
    super_violation = float(-diffs.min())
    sub_violation = float(diffs.max())
    if kind is None:
        kind = BracketKind.SUPER if super_violation <= sub_violation else BracketKind.SUB
    violation = super_violation if kind is BracketKind.SUPER else sub_violation
    return BracketCertificate(kind=kind, sequence=X, verified=violation <= slack,
                              max_violation=violation)


def empirical_rate(trace: IterationTrace, reference: EnergySequence, epsilon: float,
                   floor: float = 1e-10) -> float:
    """Fitted geometric rate of epsilon-weighted errors against a reference.

    Least-squares slope of the log error over the geometric regime: the first
    quarter of the steps is dropped as transient and steps with error at or
    below the floor are dropped as noise (the floor default is 100 times the
    default root tolerance).  Returns lambda = exp(slope).
    """
    if len(trace.iterates) < 4:
        raise InsufficientData("need at least 4 iterates to fit a rate")
    ref_log = np.log(reference.values)
    k = np.arange(1, len(reference) + 1, dtype=float)
    weights = k ** epsilon
    errors = np.array([
        np.max(weights * np.abs(np.log(it.values) - ref_log)) for it in trace.iterates
    ])
    steps = np.arange(len(errors))
    usable = (steps >= len(errors) // 4) & (errors > floor)
    if usable.sum() < 2:
        raise InsufficientData("fewer than 2 points remain in the geometric regime")
    slope = np.polyfit(steps[usable], np.log(errors[usable]), 1)[0]
    return float(np.exp(slope))
