"""Domain types and geometry for ensembles of magnetization vectors.

An ensemble couples three aligned sequences: Larmor frequencies ``e_i``,
positive weights ``w_i`` and one unit vector per frequency.  The weighted
metric ``d(a, b) = sum_i w_i |a_i - b_i|`` (Euclidean norm per spin) is the
distance used by all convergence diagnostics.

Randomness policy
-----------------
Every random draw in this package goes through ``numpy.random.default_rng``
seeded from an explicit integer.  Batch procedures (Monte-Carlo sampling)
split streams with ``numpy.random.SeedSequence.spawn`` so that per-sample
results are reproducible and independent of execution order; see
``analysis.basin_monte_carlo``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "SpinState",
    "FrequencySet",
    "WeightVector",
    "EnsembleState",
    "ControlValue",
    "make_spin",
    "weighted_distance",
    "random_ensemble",
    "target_state",
    "unit_weights",
    "geometric_weights",
]

#: Tolerance on | |spin| - 1 | accepted at construction time.
UNIT_NORM_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


class ControlValue(NamedTuple):
    """Transverse field pair ``(u1, u2)`` = (-Bx, By)."""

    u1: float
    u2: float


@dataclass(frozen=True)
class SpinState:
    """A single magnetization vector on the unit sphere."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))


def make_spin(x: float, y: float, z: float) -> SpinState:
    """Build a unit spin by scaling ``(x, y, z)``.

    Raises:
        ValueError: if the input vector is zero (no direction to keep).
    """
    n = float(np.sqrt(x * x + y * y + z * z))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector into a spin state")
    return SpinState(x / n, y / n, z / n)


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """Ordered Larmor frequencies, each inside a bounded interval.

    Pairwise distinctness is reported, not enforced: a repeated frequency
    degrades the invariant-set certificate (see ``spectral.vandermonde_det``)
    and triggers a warning here.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.atleast_1d(self.values)))
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("frequencies must form a nonempty 1-d sequence")
        if self.p > 1 and self.min_gap == 0.0:
            warnings.warn(
                "repeated Larmor frequency: equilibria may be non-hyperbolic "
                "and the invariant-set certificate vanishes",
                stacklevel=2,
            )

    @property
    def p(self) -> int:
        return int(self.values.size)

    @property
    def min_gap(self) -> float:
        """Smallest pairwise separation; 0.0 for a repeated frequency."""
        if self.p < 2:
            return float("inf")
        s = np.sort(self.values)
        return float(np.min(np.abs(np.diff(s))))


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Positive weights, one per frequency."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.atleast_1d(self.values)))
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("weights must form a nonempty 1-d sequence")
        if np.any(self.values <= 0):
            raise ValueError("weights must be strictly positive")

    @property
    def p(self) -> int:
        return int(self.values.size)

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def is_unit(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.values - 1.0) <= tol))


def unit_weights(p: int) -> WeightVector:
    return WeightVector(np.ones(p))


def geometric_weights(p: int, base: float = 2.0) -> WeightVector:
    """Weights ``base**-i`` for i = 1..p (monotone decreasing).

    ``base=2`` gives the summable family used for the countable-ensemble
    metric; ``base=1.1`` reproduces the slow-convergence experiment.
    """
    if base <= 1.0:
        raise ValueError("geometric weights need base > 1")
    return WeightVector(float(base) ** -(np.arange(1, p + 1, dtype=float)))


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Frequencies, weights and one unit spin per index.

    ``spins`` is a read-only ``(p, 3)`` array; rows are ``(x, y, z)``.
    All value types in this module are immutable: evolving a state produces
    a new ``EnsembleState``.
    """

    freqs: FrequencySet
    weights: WeightVector
    spins: np.ndarray

    def __post_init__(self):
        spins = _readonly(np.atleast_2d(self.spins))
        object.__setattr__(self, "spins", spins)
        if spins.shape != (self.freqs.p, 3):
            raise ValueError(
                f"spins shape {spins.shape} does not match {self.freqs.p} frequencies"
            )
        if self.weights.p != self.freqs.p:
            raise ValueError(
                f"{self.weights.p} weights for {self.freqs.p} frequencies"
            )
        norms = np.linalg.norm(spins, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if not worst <= UNIT_NORM_TOL:  # NaN-safe comparison
            raise ValueError(f"spin norms deviate from 1 by {worst:.3e}")

    @property
    def p(self) -> int:
        return self.freqs.p

    def spin(self, i: int) -> SpinState:
        x, y, z = self.spins[i]
        return SpinState(float(x), float(y), float(z))

    def with_spins(self, spins: np.ndarray) -> "EnsembleState":
        """Same frequencies and weights, new spin configuration."""
        return EnsembleState(self.freqs, self.weights, spins)

    @property
    def x(self) -> np.ndarray:
        return self.spins[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.spins[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.spins[:, 2]


def _require_comparable(a: EnsembleState, b: EnsembleState) -> None:
    if a.p != b.p:
        raise ValueError(f"ensemble sizes differ: {a.p} vs {b.p}")
    if not np.array_equal(a.freqs.values, b.freqs.values):
        raise ValueError("ensembles do not share frequencies")
    if not np.array_equal(a.weights.values, b.weights.values):
        raise ValueError("ensembles do not share weights")


def weighted_distance(a: EnsembleState, b: EnsembleState) -> float:
    """Weighted product-space metric ``sum_i w_i |a_i - b_i|``.

    Both states must share frequencies and weights.
    """
    _require_comparable(a, b)
    per_spin = np.linalg.norm(a.spins - b.spins, axis=1)
    return float(np.dot(a.weights.values, per_spin))


def spins_from_band(rng: np.random.Generator, p: int, z_lo: float, z_hi: float) -> np.ndarray:
    """Sample ``p`` unit spins with ``z`` uniform in ``[z_lo, z_hi]``.

    The transverse part is uniform on the circle of radius sqrt(1 - z^2);
    for the full band ``[-1, 1]`` this is the uniform (Haar) measure on the
    sphere.  Draw order: all z first, then all angles.
    """
    z = rng.uniform(z_lo, z_hi, p)
    phi = rng.uniform(0.0, 2.0 * np.pi, p)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def random_ensemble(
    seed: int,
    p: int,
    freq_interval: Sequence[float] = (1.0, 4.0),
    z_range: Sequence[float] = (-1.0, 1.0),
    weights: WeightVector | None = None,
) -> EnsembleState:
    """Seeded random ensemble: frequencies uniform on an interval, spins in a z-band.

    Deterministic per seed: the same seed always yields bit-identical output.
    Frequencies are redrawn wholesale in the (measure-zero) event of an exact
    collision.

    Args:
        seed: RNG seed (``numpy.random.default_rng``).
        p: number of spins, >= 1.
        freq_interval: ``(lo, hi)`` with ``lo < hi``.
        z_range: ``(z_lo, z_hi)`` with ``-1 <= z_lo <= z_hi <= 1``.
        weights: defaults to unit weights.
    """
    lo, hi = float(freq_interval[0]), float(freq_interval[1])
    z_lo, z_hi = float(z_range[0]), float(z_range[1])
    if p < 1:
        raise ValueError("need at least one spin")
    if not lo < hi:
        raise ValueError(f"empty frequency interval [{lo}, {hi}]")
    if not (-1.0 <= z_lo <= z_hi <= 1.0):
        raise ValueError(f"invalid z range [{z_lo}, {z_hi}]")
    if weights is None:
        weights = unit_weights(p)
    if weights.p != p:
        raise ValueError(f"{weights.p} weights for {p} spins")

    rng = np.random.default_rng(seed)
    freqs = rng.uniform(lo, hi, p)
    while np.unique(freqs).size < p:
        freqs = rng.uniform(lo, hi, p)
    spins = spins_from_band(rng, p, z_lo, z_hi)
    return EnsembleState(FrequencySet(freqs), weights, spins)


def target_state(
    p: int,
    sign: int,
    freqs: FrequencySet | None = None,
    weights: WeightVector | None = None,
) -> EnsembleState:
    """Uniform pole state: every spin at ``(0, 0, sign)``.

    ``sign=-1`` is the stabilization target; ``sign=+1`` the opposite pole.
    Frequencies default to ``1..p`` and weights to unit when not supplied.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    if freqs is None:
        freqs = FrequencySet(np.arange(1, p + 1, dtype=float))
    if weights is None:
        weights = unit_weights(p)
    spins = np.zeros((p, 3))
    spins[:, 2] = float(sign)
    return EnsembleState(freqs, weights, spins)


def target_like(s: EnsembleState, sign: int) -> EnsembleState:
    """Pole state sharing ``s``'s frequencies and weights (comparable via the metric)."""
    return target_state(s.p, sign, freqs=s.freqs, weights=s.weights)
