"""Sequence containers, logarithmic coordinates, weighted norms and the
entrywise partial order shared by all numerical modules.

Sequences are stored as a finite positive prefix plus an analytic tail model
standing in for every index beyond the truncation.  All containers are
immutable values and all operations are pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, TailDivergence


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TailModel:
    """Power-law extrapolation of a sequence beyond its stored prefix.

    Entry k > N is modelled as ``amplitude * (k + shift)**exponent``.  The
    shift is zero for plain power tails; the bracket constructions use it to
    represent shifted powers exactly.
    """

    amplitude: float
    exponent: float
    shift: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"tail amplitude must be positive, got {self.amplitude}")
        if not self.exponent > 0:
            raise ValueError(f"tail exponent must be positive, got {self.exponent}")

    def value(self, k):
        """Extrapolated entry at (array of) index k."""
        return self.amplitude * (np.asarray(k, dtype=float) + self.shift) ** self.exponent

    def scaled(self, lam: float) -> "TailModel":
        return TailModel(lam * self.amplitude, self.exponent, self.shift)


@dataclass(frozen=True)
class EnergySequence:
    """Finite prefix of a positive sequence plus its tail model.

    ``values[i]`` holds entry k = i + 1 in dimensionless energy units.  Kernel
    sums over the full sequence use the tail model for k > N; their
    convergence requires a tail exponent strictly above one.
    """

    values: np.ndarray
    tail: TailModel

    def __post_init__(self):
        arr = _frozen_array(self.values, "values")
        if arr.size < 1:
            raise ValueError("at least one stored entry is required")
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
            raise ValueError("all entries must be finite and strictly positive")
        if not self.tail.exponent > 1:
            raise TailDivergence(
                f"tail exponent must exceed 1 for summable kernel tails, got {self.tail.exponent}"
            )
        if not arr.size + 0.5 + self.tail.shift > 0:
            raise ValueError("tail shift would make extrapolated entries nonpositive")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def with_values(self, values) -> "EnergySequence":
        """Same tail model, new stored entries."""
        return EnergySequence(values, self.tail)

    def scaled(self, lam: float) -> "EnergySequence":
        """Dilated copy: entries and tail amplitude multiplied by lam."""
        if not lam > 0:
            raise ValueError("scale factor must be positive")
        return EnergySequence(lam * self.values, self.tail.scaled(lam))


@dataclass(frozen=True)
class LogSequence:
    """Natural logarithms of an EnergySequence prefix (or differences of such)."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_array(self.entries, "entries"))

    def __len__(self) -> int:
        return self.entries.size


@dataclass(frozen=True)
class WeightedNorm:
    """Weighted supremum norm: sup over k of k**epsilon * |v_k|."""

    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("weight exponent must be nonnegative")


class Ordering(enum.Enum):
    LE = "LE"
    GE = "GE"
    EQ = "EQ"
    INCOMPARABLE = "INCOMPARABLE"


def log_coords(X: EnergySequence) -> LogSequence:
    """Logarithmic coordinates of the stored prefix."""
    return LogSequence(np.log(X.values))


def weighted_norm(v: LogSequence, w: WeightedNorm) -> float:
    """sup_k k**epsilon |v_k| over the stored entries (the tail is not scanned:
    compared sequences share tail models by construction)."""
    if len(v) == 0:
        return 0.0
    k = np.arange(1, len(v) + 1, dtype=float)
    return float(np.max(k ** w.epsilon * np.abs(v.entries)))


def partial_compare(X: EnergySequence, Xprime: EnergySequence) -> Ordering:
    """Entrywise partial order, tail amplitudes included.

    Comparisons are exact, with no tolerance: order arguments downstream are
    order-theoretic and a caller wanting fuzz applies it before comparing.
    Requires equal stored lengths and identical tail exponent and shift.
    """
    if len(X) != len(Xprime):
        raise LengthMismatch(f"cannot compare prefixes of length {len(X)} and {len(Xprime)}")
    if X.tail.exponent != Xprime.tail.exponent or X.tail.shift != Xprime.tail.shift:
        raise ValueError("compared sequences must share tail exponent and shift")
    le = bool(np.all(X.values <= Xprime.values)) and X.tail.amplitude <= Xprime.tail.amplitude
    ge = bool(np.all(X.values >= Xprime.values)) and X.tail.amplitude >= Xprime.tail.amplitude
    if le and ge:
        return Ordering.EQ
    if le:
        return Ordering.LE
    if ge:
        return Ordering.GE
    return Ordering.INCOMPARABLE
