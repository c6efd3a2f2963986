"""Controlled ensemble vector fields, feedback laws and time integration.

Each spin obeys ``dX/dt = Omega(e, u) X`` with the skew generator

    Omega = [[0, -e, u2], [e, 0, u1], [-u2, -u1, 0]],

so every tangent is orthogonal to its spin and the flow lives on the product
of unit spheres.  Feedback laws close the loop by computing ``(u1, u2)``
from transverse sums; the damping mode feeds back averages instead and is
integrated with flipped frequency/field signs (see ``rde_rhs``).

Two structure-preserving integrators are provided: a classical 4-stage
Runge-Kutta step followed by per-spin renormalization, and a Lie-Euler step
that rotates each spin exactly by its own frozen generator (axis-angle
formula).  Both renormalize to shed floating-point drift on long horizons.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backend import kernel
from .core import ControlValue, EnsembleState, FrequencySet, WeightVector

__all__ = [
    "LawKind",
    "ControlLaw",
    "Method",
    "IntegratorConfig",
    "CutoffParams",
    "Trajectory",
    "control_value",
    "bloch_rhs",
    "closed_loop_rhs",
    "cutoff_rhs",
    "rde_rhs",
    "step",
    "integrate",
]

# codes shared with the kernels
_LAW_ZERO, _LAW_SUM, _LAW_RDE = 0, 1, 2
_STOP_NONE, _STOP_BELOW, _STOP_ABOVE = 0, 1, 2


class LawKind(enum.Enum):
    ZERO = "zero"
    FULL_SUM = "full-sum"
    WEIGHTED = "weighted"
    TRUNCATED = "truncated"
    RADIATION_DAMPING = "radiation-damping"


@dataclass(frozen=True)
class ControlLaw:
    """Tagged feedback choice.

    Use the constructors: ``ControlLaw.zero()``, ``.full_sum()``,
    ``.weighted()``, ``.truncated(n)``, ``.radiation_damping(rate, sign)``.
    """

    kind: LawKind
    trunc_n: Optional[int] = None
    rate: Optional[float] = None
    sign: Optional[int] = None

    def __post_init__(self):
        if self.kind is LawKind.TRUNCATED:
            if self.trunc_n is None or self.trunc_n < 1:
                raise ValueError("truncated law needs trunc_n >= 1")
        if self.kind is LawKind.RADIATION_DAMPING:
            if self.rate is None or self.rate <= 0:
                raise ValueError("damping rate must be positive")
            if self.sign not in (-1, 1):
                raise ValueError("damping sign must be -1 or +1")

    @classmethod
    def zero(cls) -> "ControlLaw":
        return cls(LawKind.ZERO)

    @classmethod
    def full_sum(cls) -> "ControlLaw":
        return cls(LawKind.FULL_SUM)

    @classmethod
    def weighted(cls) -> "ControlLaw":
        return cls(LawKind.WEIGHTED)

    @classmethod
    def truncated(cls, n: int) -> "ControlLaw":
        return cls(LawKind.TRUNCATED, trunc_n=int(n))

    @classmethod
    def radiation_damping(cls, rate: float, sign: int = 1) -> "ControlLaw":
        return cls(LawKind.RADIATION_DAMPING, rate=float(rate), sign=int(sign))


class Method(enum.Enum):
    RK4_RENORM = "rk4"
    LIE_EULER = "lie-euler"


_METHOD_CODE = {Method.RK4_RENORM: 0, Method.LIE_EULER: 1}


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration parameters.

    The default step 0.01 resolves the fastest closed-loop timescale for
    frequencies up to ~4 and controls bounded by the total weight.
    """

    t_final: float
    h: float = 0.01
    method: Method = Method.RK4_RENORM

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be positive")
        if self.t_final < self.h:
            raise ValueError("t_final must cover at least one step")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.h)))


@dataclass(frozen=True)
class CutoffParams:
    """Saturation levels for the ambient-space extension of the closed loop.

    ``a`` clips spin radii, ``b`` clips control magnitudes; both must exceed
    1 so the saturations are inactive on the product of unit spheres.
    """

    a: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        if self.a <= 1.0 or self.b <= 1.0:
            raise ValueError("cut-off levels must exceed 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled closed-loop run.

    ``states`` has shape (n_samples, p, 3); sample 0 is the initial state
    and the last sample is the final integrated state.  ``lyapunov`` holds
    the weighted z-sum in the law's own weight convention (unit weights for
    full-sum and damping runs, ensemble weights for weighted runs, weights
    of the first N spins for truncated runs), which is the quantity with
    monotone decrease along stabilizing laws.  ``controls`` holds the
    recorded pair per sample: the feedback value, or the transverse
    averages for damping runs.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    lyapunov: np.ndarray
    sample_stride: int
    freqs: FrequencySet
    weights: WeightVector
    law: ControlLaw
    h: float
    method: Method
    stopped_early: bool = False

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def p(self) -> int:
        return int(self.states.shape[1])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def ensemble_at(self, i: int) -> EnsembleState:
        return EnsembleState(self.freqs, self.weights, self.states[i])

    @property
    def final_state(self) -> EnsembleState:
        return self.ensemble_at(-1)

    def max_norm_drift(self) -> float:
        """Largest | |spin| - 1 | over all samples and spins."""
        norms = np.linalg.norm(self.states, axis=2)
        return float(np.max(np.abs(norms - 1.0)))

    def max_lyapunov_increase(self) -> float:
        """Largest positive jump of V between consecutive samples (0 if none)."""
        dv = np.diff(self.lyapunov)
        return float(max(0.0, dv.max())) if dv.size else 0.0


def _law_arrays(law: ControlLaw, s: EnsembleState):
    """Kernel parameters for a law: (code, ctrl_weights, n_ctrl, rate, sign, eff_freqs, lyap_weights)."""
    p = s.p
    w = s.weights.values
    e = s.freqs.values
    if law.kind is LawKind.ZERO:
        return _LAW_ZERO, np.zeros(p), 0, 0.0, 1, e, w.copy()
    if law.kind is LawKind.FULL_SUM:
        return _LAW_SUM, np.ones(p), p, 0.0, 1, e, np.ones(p)
    if law.kind is LawKind.WEIGHTED:
        return _LAW_SUM, w.copy(), p, 0.0, 1, e, w.copy()
    if law.kind is LawKind.TRUNCATED:
        n = law.trunc_n
        if n > p:
            raise ValueError(f"truncation {n} exceeds ensemble size {p}")
        lw = np.zeros(p)
        lw[:n] = w[:n]
        return _LAW_SUM, w.copy(), n, 0.0, 1, e, lw
    # damping: flipped frequency signs, averages fed back through the rate
    return _LAW_RDE, np.zeros(p), 0, law.rate, law.sign, law.sign * e, np.ones(p)


def control_value(law: ControlLaw, s: EnsembleState) -> ControlValue:
    """Feedback pair for a state.

    Summed laws return ``(sum w y, sum w x)`` over their active index range;
    the damping law returns the transverse averages ``(Xbar, Ybar)`` used in
    reports (its effective field is formed inside ``rde_rhs``).
    """
    if law.kind is LawKind.ZERO:
        return ControlValue(0.0, 0.0)
    if law.kind is LawKind.RADIATION_DAMPING:
        return ControlValue(float(np.mean(s.x)), float(np.mean(s.y)))
    if law.kind is LawKind.FULL_SUM:
        cw, n = np.ones(s.p), s.p
    elif law.kind is LawKind.WEIGHTED:
        cw, n = s.weights.values, s.p
    else:  # truncated
        n = law.trunc_n
        if n > s.p:
            raise ValueError(f"truncation {n} exceeds ensemble size {s.p}")
        cw = s.weights.values
    return ControlValue(
        float(np.dot(cw[:n], s.y[:n])), float(np.dot(cw[:n], s.x[:n]))
    )


def bloch_rhs(s: EnsembleState, u: ControlValue) -> np.ndarray:
    """Tangent array (p, 3) of the controlled precession field."""
    e = s.freqs.values
    out = np.empty_like(s.spins)
    out[:, 0] = -e * s.y + u.u2 * s.z
    out[:, 1] = e * s.x + u.u1 * s.z
    out[:, 2] = -u.u2 * s.x - u.u1 * s.y
    return out


def rde_rhs(s: EnsembleState, rate: float, sign: int = 1) -> np.ndarray:
    """Damping-mode tangent: the coil back-action field.

    With ``sign=+1`` the transverse averages act as ``u = -rate*(Ybar, Xbar)``
    and the up pole attracts; ``sign=-1`` flips the right-hand side (static
    field inverted), turning the down pole into the attractor.  The field
    stays skew-symmetric per spin, so tangents remain orthogonal to spins
    and the spheres are invariant.
    """
    if rate <= 0:
        raise ValueError("damping rate must be positive")
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    xbar = float(np.mean(s.x))
    ybar = float(np.mean(s.y))
    u1 = -sign * rate * ybar
    u2 = -sign * rate * xbar
    e = sign * s.freqs.values
    out = np.empty_like(s.spins)
    out[:, 0] = -e * s.y + u2 * s.z
    out[:, 1] = e * s.x + u1 * s.z
    out[:, 2] = -u2 * s.x - u1 * s.y
    return out


def closed_loop_rhs(s: EnsembleState, law: ControlLaw) -> np.ndarray:
    """Tangent array of the autonomous closed-loop field for any law."""
    if law.kind is LawKind.RADIATION_DAMPING:
        return rde_rhs(s, law.rate, law.sign)
    return bloch_rhs(s, control_value(law, s))


# ambient-space generators: frequency term, u2 coupling, u1 coupling
_GEN_A = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_GEN_B = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_GEN_C = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])


def cutoff_rhs(
    spins: np.ndarray,
    freqs: FrequencySet,
    weights: WeightVector,
    params: CutoffParams = CutoffParams(),
) -> np.ndarray:
    """Saturated extension of the weighted closed loop to the ambient space.

    Defined for arbitrary (p, 3) points: spin arguments are radially clipped
    to norm ``a`` and the weighted control sums are clipped to ``[-b, b]``,
    which makes the field globally Lipschitz.  On unit spheres with controls
    inside the clip level it coincides exactly with
    ``bloch_rhs(s, control_value(weighted))``.
    """
    spins = np.atleast_2d(np.asarray(spins, dtype=float))
    if spins.shape != (freqs.p, 3):
        raise ValueError(f"state shape {spins.shape} does not match {freqs.p} frequencies")
    w = weights.values
    sx = float(np.dot(w, spins[:, 0]))
    sy = float(np.dot(w, spins[:, 1]))
    u2 = float(np.clip(sx, -params.b, params.b))
    u1 = float(np.clip(sy, -params.b, params.b))

    norms = np.linalg.norm(spins, axis=1)
    scale = np.ones_like(norms)
    over = norms > params.a
    scale[over] = params.a / norms[over]
    psi = spins * scale[:, None]

    gen = (
        freqs.values[:, None, None] * _GEN_A[None, :, :]
        + u2 * _GEN_B[None, :, :]
        + u1 * _GEN_C[None, :, :]
    )
    return np.einsum("ijk,ik->ij", gen, psi)


def _run(
    s0: EnsembleState,
    law: ControlLaw,
    cfg: IntegratorConfig,
    stride: int,
    stop_mode: int = _STOP_NONE,
    stop_z: float = 0.0,
):
    """Allocate buffers, call the active kernel, return raw sample arrays."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    p = s0.p
    law_code, cw, n_ctrl, rate, sign, ef, lw = _law_arrays(law, s0)
    n_steps = cfg.n_steps
    max_rec = n_steps // stride + 2

    X = np.array(s0.spins, dtype=float, order="C", copy=True)
    ef = np.ascontiguousarray(ef, dtype=float)
    cw = np.ascontiguousarray(cw, dtype=float)
    lw = np.ascontiguousarray(lw, dtype=float)
    times = np.empty(max_rec)
    states = np.empty((max_rec, p, 3))
    controls = np.empty((max_rec, 2))
    lyap = np.empty(max_rec)
    bufs = [np.empty((p, 3)) for _ in range(5)]

    n_rec, steps_done, status = kernel.run_loop(
        X, ef, cw, n_ctrl, law_code, rate, sign,
        _METHOD_CODE[cfg.method], cfg.h, n_steps, stride,
        lw, stop_mode, stop_z,
        times, states, controls, lyap, *bufs,
    )
    if status != 0:
        raise RuntimeError(
            f"non-finite value during integration at t={steps_done * cfg.h:.6g} "
            f"(step {steps_done}); law={law.kind.value}, h={cfg.h}"
        )
    stopped = steps_done < n_steps
    return (
        times[:n_rec].copy(),
        states[:n_rec].copy(),
        controls[:n_rec].copy(),
        lyap[:n_rec].copy(),
        stopped,
    )


def step(s: EnsembleState, law: ControlLaw, cfg: IntegratorConfig) -> EnsembleState:
    """One integration step of length ``cfg.h``; returns the new state."""
    one = IntegratorConfig(t_final=cfg.h, h=cfg.h, method=cfg.method)
    _, states, _, _, _ = _run(s, law, one, stride=1)
    return s.with_spins(states[-1])


def integrate(
    s0: EnsembleState,
    law: ControlLaw,
    cfg: IntegratorConfig,
    stride: int = 100,
    stop_below: Optional[float] = None,
    stop_above: Optional[float] = None,
) -> Trajectory:
    """Integrate the closed loop, sampling every ``stride`` steps.

    The final state is always recorded.  ``stop_below``/``stop_above`` end
    the run early once every z-component is below/above the threshold
    (mutually exclusive); the stopping sample becomes the final one and the
    trajectory is flagged ``stopped_early``.
    """
    if stop_below is not None and stop_above is not None:
        raise ValueError("choose at most one of stop_below/stop_above")
    stop_mode, stop_z = _STOP_NONE, 0.0
    if stop_below is not None:
        stop_mode, stop_z = _STOP_BELOW, float(stop_below)
    elif stop_above is not None:
        stop_mode, stop_z = _STOP_ABOVE, float(stop_above)

    times, states, controls, lyap, stopped = _run(
        s0, law, cfg, stride, stop_mode, stop_z
    )
    return Trajectory(
        times=times,
        states=states,
        controls=controls,
        lyapunov=lyap,
        sample_stride=stride,
        freqs=s0.freqs,
        weights=s0.weights,
        law=law,
        h=cfg.h,
        method=cfg.method,
        stopped_early=stopped,
    )
