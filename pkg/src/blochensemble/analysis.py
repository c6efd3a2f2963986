"""Convergence diagnostics: Lyapunov traces, averaged Fourier coefficients,
omega-limit estimation, truncated-feedback schedules and basin sampling.

The central quantity is the weighted z-sum ``V = sum_i w_i z_i``, which
decreases along every summed-feedback trajectory at the analytic rate
``-u1^2 - u2^2`` (matching weight convention).  The averaged (Bohr) Fourier
coefficients ``a(f, omega) = lim (1/T) int_0^T f(t) e^{-i omega t} dt`` of
the free transverse sums detect invariant states in the countable case:
they vanish for every omega exactly on the pole equilibria.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional

import numpy as np
from numpy.random import SeedSequence, default_rng

from .core import (
    EnsembleState,
    FrequencySet,
    WeightVector,
    spins_from_band,
    target_like,
)
from .dynamics import (
    ControlLaw,
    IntegratorConfig,
    LawKind,
    Method,
    Trajectory,
    control_value,
    integrate,
)

__all__ = [
    "lyapunov",
    "lyapunov_rate",
    "LyapunovTrace",
    "lyapunov_trace",
    "FourierCoefficients",
    "bohr_fourier_closed",
    "bohr_fourier_numeric",
    "OmegaLimit",
    "omega_limit",
    "ScheduleEntry",
    "ConvergenceSchedule",
    "convergence_schedule",
    "SampleOutcome",
    "BasinEstimate",
    "basin_monte_carlo",
]


def lyapunov(s: EnsembleState) -> float:
    """Weighted z-sum ``V = sum_i w_i z_i`` (bounded by the total weight)."""
    return float(np.dot(s.weights.values, s.z))


def lyapunov_rate(s: EnsembleState, law: ControlLaw) -> float:
    """Analytic dV/dt along the closed loop at state ``s``.

    Summed laws give ``-u1^2 - u2^2`` in their own weight convention; the
    full-sum and damping laws require unit ensemble weights (their V is the
    plain z-sum).  The damping law yields ``sign * rate * p * (Xbar^2 + Ybar^2)``.

    Raises:
        ValueError: on a weight-convention mismatch.
    """
    if law.kind in (LawKind.FULL_SUM, LawKind.RADIATION_DAMPING):
        if not s.weights.is_unit():
            raise ValueError(
                f"{law.kind.value} law uses the unit-weight V; ensemble weights are not unit"
            )
    if law.kind is LawKind.ZERO:
        return 0.0
    if law.kind is LawKind.RADIATION_DAMPING:
        xbar, ybar = control_value(law, s)
        return float(law.sign * law.rate * s.p * (xbar**2 + ybar**2))
    u = control_value(law, s)
    return -(u.u1**2 + u.u2**2)


@dataclass(frozen=True, eq=False)
class LyapunovTrace:
    """Sampled V and its analytic rate along a trajectory."""

    times: np.ndarray
    values: np.ndarray
    rates: np.ndarray


def lyapunov_trace(traj: Trajectory) -> LyapunovTrace:
    """Analytic V and dV/dt per sample, from the recorded controls."""
    u = traj.controls
    kind = traj.law.kind
    if kind is LawKind.ZERO:
        rates = np.zeros(traj.n_samples)
    elif kind is LawKind.RADIATION_DAMPING:
        rates = traj.law.sign * traj.law.rate * traj.p * (u[:, 0] ** 2 + u[:, 1] ** 2)
    else:
        rates = -(u[:, 0] ** 2 + u[:, 1] ** 2)
    return LyapunovTrace(times=traj.times, values=traj.lyapunov, rates=rates)


class FourierCoefficients(NamedTuple):
    """Averaged coefficients of the free transverse sums at ``+-e_i``."""

    f_plus: complex   # a(f, e_i)
    f_minus: complex  # a(f, -e_i)
    g_plus: complex   # a(g, e_i)
    g_minus: complex  # a(g, -e_i)


def bohr_fourier_closed(s0: EnsembleState, i: int) -> FourierCoefficients:
    """Closed-form averaged coefficients for spin ``i`` (0-based).

    Under zero control the weighted transverse sums
    ``f(t) = sum_j w_j x_j(t)`` and ``g(t) = sum_j w_j y_j(t)`` are uniform
    almost-periodic; their averaged coefficients at ``+-e_i`` depend only on
    the initial transverse components of spin ``i``:

        a(f, e_i) = w_i (x0 + i y0) / 2      a(f, -e_i) = w_i (x0 - i y0) / 2
        a(g, e_i) = w_i (y0 - i x0) / 2      a(g, -e_i) = w_i (i x0 + y0) / 2

    For the summable family ``w_i = 2^-i`` (1-based) these are the familiar
    ``(x0 + i y0) / 2^{i+1}`` forms.  Distinct frequencies assumed (repeats
    would stack coefficients; construction warns).
    """
    x0, y0 = float(s0.spins[i, 0]), float(s0.spins[i, 1])
    w = float(s0.weights.values[i])
    return FourierCoefficients(
        f_plus=w * (x0 + 1j * y0) / 2.0,
        f_minus=w * (x0 - 1j * y0) / 2.0,
        g_plus=w * (y0 - 1j * x0) / 2.0,
        g_minus=w * (1j * x0 + y0) / 2.0,
    )


def bohr_fourier_numeric(traj: Trajectory, omega: float, component: str = "f") -> complex:
    """Trapezoidal estimate of ``(1/T) int_0^T f(t) e^{-i omega t} dt``.

    ``component`` selects the weighted x-sum ('f') or y-sum ('g').  The
    trajectory must come from the zero law (free precession).  Accuracy
    degrades like 1/(T * gap) where gap is the distance from ``omega`` to
    the nearest spectral line ``+-e_j``; a warning is issued when the
    horizon is shorter than ten beat periods of that gap.
    """
    if traj.law.kind is not LawKind.ZERO:
        raise ValueError("averaged coefficients are defined on zero-control runs")
    if component not in ("f", "g"):
        raise ValueError("component must be 'f' or 'g'")
    w = traj.weights.values
    col = 0 if component == "f" else 1
    series = traj.states[:, :, col] @ w
    t = traj.times
    horizon = float(t[-1] - t[0])

    lines = np.concatenate([traj.freqs.values, -traj.freqs.values])
    gaps = np.abs(lines - omega)
    off_line = gaps[gaps > 1e-12]
    if off_line.size:
        needed = 10.0 * 2.0 * np.pi / float(off_line.min())
        if np.all(gaps > 1e-12) and horizon < needed:
            warnings.warn(
                f"horizon {horizon:.3g} < {needed:.3g} (ten beat periods of the "
                f"nearest line): averaged coefficient may be inaccurate",
                stacklevel=2,
            )
    integrand = series * np.exp(-1j * omega * t)
    return complex(np.trapezoid(integrand, t) / horizon)


class OmegaLimit(NamedTuple):
    """Tail summary of a trajectory: per-spin mean and worst excursion."""

    mean_spins: np.ndarray
    dispersion: float


def omega_limit(traj: Trajectory, tail_fraction: float = 0.1) -> OmegaLimit:
    """Mean state over the trailing window plus the maximum deviation from it.

    A converged run shows dispersion at the 1e-3 scale with the mean at a
    pole pattern; an orbiting tail shows order-one dispersion.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    m = traj.n_samples
    n_tail = max(1, int(round(tail_fraction * m)))
    tail = traj.states[m - n_tail :]
    mean = tail.mean(axis=0)
    dispersion = float(np.max(np.linalg.norm(tail - mean[None], axis=2)))
    return OmegaLimit(mean_spins=mean, dispersion=dispersion)


class ScheduleEntry(NamedTuple):
    n: int
    t_hit: Optional[float]
    converged: bool


@dataclass(frozen=True)
class ConvergenceSchedule:
    """Per-truncation hitting times of the epsilon-ball around the down state."""

    epsilon: float
    n_bar: int
    entries: tuple

    @property
    def all_converged(self) -> bool:
        return all(e.converged for e in self.entries)


def minimal_truncation(epsilon: float) -> int:
    """Smallest N with 2^(1-N) < epsilon: beyond it the tail weights alone
    cannot push the metric above epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = 1
    while 2.0 ** (1 - n) >= epsilon:
        n += 1
    return n


def convergence_schedule(
    family: Mapping[int, Trajectory], epsilon: float
) -> ConvergenceSchedule:
    """Asymptotic-pointwise convergence table from truncated-feedback runs.

    ``family`` maps N to the trajectory run with the truncated(N) law on
    weights 2^-i.  For each N the hitting time is the first sample time
    after which the weighted distance to the down state never exceeds
    epsilon within the horizon; a run that ends outside the ball is
    recorded as unconverged rather than failing.
    """
    n_bar = minimal_truncation(epsilon)
    entries = []
    for n in sorted(family):
        traj = family[n]
        if traj.law.kind is not LawKind.TRUNCATED or traj.law.trunc_n != n:
            raise ValueError(f"trajectory for N={n} was not run with truncated({n})")
        w = traj.weights.values
        expected = 2.0 ** -(np.arange(1, w.size + 1, dtype=float))
        if not np.allclose(w, expected, rtol=0, atol=1e-12):
            raise ValueError("convergence schedule assumes weights 2^-i")
        down = target_like(traj.ensemble_at(0), -1)
        dist = np.linalg.norm(traj.states - down.spins[None], axis=2) @ w
        above = np.nonzero(dist > epsilon)[0]
        if above.size == 0:
            entries.append(ScheduleEntry(n, float(traj.times[0]), True))
        elif above[-1] + 1 >= dist.size:
            entries.append(ScheduleEntry(n, None, False))
        else:
            entries.append(ScheduleEntry(n, float(traj.times[above[-1] + 1]), True))
    return ConvergenceSchedule(epsilon=epsilon, n_bar=n_bar, entries=tuple(entries))


class SampleOutcome(NamedTuple):
    index: int
    converged: bool
    final_max_z: float
    stopped_early: bool


@dataclass(frozen=True)
class BasinEstimate:
    """Monte-Carlo summary of the attraction basin of the down state."""

    samples: int
    converged: int
    z_threshold: float
    horizon: float
    outcomes: tuple

    @property
    def fraction(self) -> float:
        return self.converged / self.samples


def basin_monte_carlo(
    freqs: FrequencySet,
    weights: WeightVector,
    samples: int,
    horizon: float,
    z_threshold: float = -0.99,
    seed: int = 0,
    h: float = 0.01,
    stride: int = 100,
    method: Method = Method.RK4_RENORM,
) -> BasinEstimate:
    """Fraction of uniformly drawn initial states steered below ``z_threshold``.

    Initial spins are Haar-uniform on each sphere; the closed loop uses the
    full sum for unit weights and the weighted sum otherwise.  A run counts
    as converged when every ``z_i(T) < z_threshold``.

    Early-stop shortcut: V = sum_i w_i z_i never increases along the loop,
    so once every ``z_i < s`` with ``s = -1 + (1 + thr) * w_min / (2 W)``
    (W the total weight) we have, at every later time,
    ``w_j (1 + z_j) <= sum_i w_i (1 + z_i) < W (1 + s)``, hence
    ``z_j < -1 + (1 + thr)/2 < thr``.  Runs that hit the absorbing level
    stop there and count converged; others integrate to the horizon.

    Samples draw from independent child seeds (``SeedSequence.spawn``), so
    the estimate is reproducible and order-independent.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if not -1.0 < z_threshold < 1.0:
        raise ValueError("z_threshold must lie in (-1, 1)")
    p = freqs.p
    law = ControlLaw.full_sum() if weights.is_unit() else ControlLaw.weighted()
    w = weights.values
    stop_z = -1.0 + 0.5 * (1.0 + z_threshold) * float(np.min(w)) / float(np.sum(w))
    cfg = IntegratorConfig(t_final=horizon, h=h, method=method)

    outcomes = []
    n_conv = 0
    for idx, child in enumerate(SeedSequence(seed).spawn(samples)):
        rng = default_rng(child)
        s0 = EnsembleState(freqs, weights, spins_from_band(rng, p, -1.0, 1.0))
        traj = integrate(s0, law, cfg, stride=stride, stop_below=stop_z)
        final_max_z = float(traj.final_state.z.max())
        conv = traj.stopped_early or final_max_z < z_threshold
        n_conv += conv
        outcomes.append(SampleOutcome(idx, bool(conv), final_max_z, traj.stopped_early))
    return BasinEstimate(
        samples=samples,
        converged=n_conv,
        z_threshold=z_threshold,
        horizon=horizon,
        outcomes=tuple(outcomes),
    )
