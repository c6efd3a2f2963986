"""Pure-numpy integration loop, fallback for the compiled kernel.

Same stepping rules and recording layout as ``_kernels.pyx``.  Vectorized
across spins, but the per-step Python overhead makes it roughly two orders
of magnitude slower on long horizons; ``benchmarks/bench_kernel.py``
measures the gap.  Results agree with the compiled kernel up to
floating-point summation order.
"""

from __future__ import annotations

import numpy as np

LAW_ZERO = 0
LAW_SUM = 1
LAW_RDE = 2

METHOD_RK4 = 0
METHOD_LIE = 1

STOP_NONE = 0
STOP_BELOW = 1
STOP_ABOVE = 2


def _control(X, cw, n_ctrl, law, rde_rate, rde_sign):
    """Return (u1, u2, rec1, rec2); see the compiled kernel for conventions."""
    if law == LAW_SUM:
        u1 = float(np.dot(cw[:n_ctrl], X[:n_ctrl, 1]))
        u2 = float(np.dot(cw[:n_ctrl], X[:n_ctrl, 0]))
        return u1, u2, u1, u2
    if law == LAW_RDE:
        xbar = float(np.mean(X[:, 0]))
        ybar = float(np.mean(X[:, 1]))
        return -rde_sign * rde_rate * ybar, -rde_sign * rde_rate * xbar, xbar, ybar
    return 0.0, 0.0, 0.0, 0.0


def _rhs(X, ef, cw, n_ctrl, law, rde_rate, rde_sign):
    u1, u2, _, _ = _control(X, cw, n_ctrl, law, rde_rate, rde_sign)
    out = np.empty_like(X)
    out[:, 0] = -ef * X[:, 1] + u2 * X[:, 2]
    out[:, 1] = ef * X[:, 0] + u1 * X[:, 2]
    out[:, 2] = -u2 * X[:, 0] - u1 * X[:, 1]
    return out

def _renormalize(X):
    n = np.linalg.norm(X, axis=1)
    n[n == 0.0] = 1.0
    X /= n[:, None]


def _rk4_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, h):
    k1 = _rhs(X, ef, cw, n_ctrl, law, rde_rate, rde_sign)
    k2 = _rhs(X + 0.5 * h * k1, ef, cw, n_ctrl, law, rde_rate, rde_sign)
    k3 = _rhs(X + 0.5 * h * k2, ef, cw, n_ctrl, law, rde_rate, rde_sign)
    k4 = _rhs(X + h * k3, ef, cw, n_ctrl, law, rde_rate, rde_sign)
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _renormalize(X)


def _lie_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, h):
    # frozen control; per-spin axis-angle rotation with vector (-u1, u2, e_i)*h
    u1, u2, _, _ = _control(X, cw, n_ctrl, law, rde_rate, rde_sign)
    r = np.empty_like(X)
    r[:, 0] = -h * u1
    r[:, 1] = h * u2
    r[:, 2] = h * ef
    theta = np.linalg.norm(r, axis=1)
    active = theta > 0.0
    if np.any(active):
        k = r[active] / theta[active, None]
        v = X[active]
        t = theta[active, None]
        c, s = np.cos(t), np.sin(t)
        cross = np.cross(k, v)
        dot = np.sum(k * v, axis=1, keepdims=True)
        X[active] = v * c + cross * s + k * dot * (1.0 - c)
    _renormalize(X)


def _record(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, lw, j, t,
            times, states, controls, lyap):
    _, _, r1, r2 = _control(X, cw, n_ctrl, law, rde_rate, rde_sign)
    v = float(np.dot(lw, X[:, 2]))
    times[j] = t
    states[j] = X
    controls[j, 0] = r1
    controls[j, 1] = r2
    lyap[j] = v
    return np.isfinite(v) and np.isfinite(r1) and np.isfinite(r2)


def run_loop(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, method, h, n_steps,
             stride, lw, stop_mode, stop_z,
             times, states, controls, lyap, k1, k2, k3, k4, xt):
    """Drop-in replacement for ``_kernels.run_loop`` (buffers k1..xt unused here)."""
    ok = _record(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, lw, 0, 0.0,
                 times, states, controls, lyap)
    j = 1
    k = 0
    if not ok:
        return j, k, 1

    for k in range(1, n_steps + 1):
        if method == METHOD_RK4:
            _rk4_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, h)
        else:
            _lie_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, h)

        if stop_mode == STOP_BELOW:
            stop_hit = bool(np.all(X[:, 2] < stop_z))
        elif stop_mode == STOP_ABOVE:
            stop_hit = bool(np.all(X[:, 2] > stop_z))
        else:
            stop_hit = False

        if k % stride == 0 or k == n_steps or stop_hit:
            ok = _record(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, lw, j, k * h,
                         times, states, controls, lyap)
            j += 1
            if not ok:
                return j, k, 1
            if stop_hit:
                break

    return j, k, 0
