# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration loop for closed-loop ensemble dynamics.

Semantics are shared with the pure-numpy fallback ``_kernels_py``: the two
backends implement the same stepping rules and recording layout, differing
only in floating-point summation order.  See ``backend`` for selection.
"""

from libc.math cimport sqrt, sin, cos, isfinite

# law codes (keep in sync with _kernels_py and dynamics)
DEF LAW_ZERO = 0
DEF LAW_SUM = 1
DEF LAW_RDE = 2

# method codes
DEF METHOD_RK4 = 0
DEF METHOD_LIE = 1

# early-stop modes
DEF STOP_NONE = 0
DEF STOP_BELOW = 1
DEF STOP_ABOVE = 2


cdef inline void _control(double[:, ::1] X, const double[::1] cw, int n_ctrl, int law,
                          double rde_rate, int rde_sign, int p,
                          double* u1, double* u2, double* rec1, double* rec2) noexcept nogil:
    """Effective control (u1, u2) plus the pair recorded in trajectories.

    For summed feedback both pairs coincide; for the damping mode the
    recorded pair is the transverse average (Xbar, Ybar).
    """
    cdef double sx = 0.0, sy = 0.0
    cdef int i
    if law == LAW_SUM:
        for i in range(n_ctrl):
            sy += cw[i] * X[i, 1]
            sx += cw[i] * X[i, 0]
        u1[0] = sy
        u2[0] = sx
        rec1[0] = sy
        rec2[0] = sx
    elif law == LAW_RDE:
        for i in range(p):
            sx += X[i, 0]
            sy += X[i, 1]
        sx /= p
        sy /= p
        u1[0] = -rde_sign * rde_rate * sy
        u2[0] = -rde_sign * rde_rate * sx
        rec1[0] = sx
        rec2[0] = sy
    else:
        u1[0] = 0.0
        u2[0] = 0.0
        rec1[0] = 0.0
        rec2[0] = 0.0


cdef inline void _rhs(double[:, ::1] X, const double[::1] ef, const double[::1] cw, int n_ctrl,
                      int law, double rde_rate, int rde_sign, int p,
                      double[:, ::1] out) noexcept nogil:
    """Closed-loop vector field: d/dt (x, y, z)_i with state feedback."""
    cdef double u1, u2, r1, r2
    cdef int i
    _control(X, cw, n_ctrl, law, rde_rate, rde_sign, p, &u1, &u2, &r1, &r2)
    for i in range(p):
        out[i, 0] = -ef[i] * X[i, 1] + u2 * X[i, 2]
        out[i, 1] = ef[i] * X[i, 0] + u1 * X[i, 2]
        out[i, 2] = -u2 * X[i, 0] - u1 * X[i, 1]


cdef inline void _renormalize(double[:, ::1] X, int p) noexcept nogil:
    cdef int i
    cdef double n
    for i in range(p):
        n = sqrt(X[i, 0] * X[i, 0] + X[i, 1] * X[i, 1] + X[i, 2] * X[i, 2])
        if n > 0.0:
            X[i, 0] /= n
            X[i, 1] /= n
            X[i, 2] /= n


cdef inline void _rk4_step(double[:, ::1] X, const double[::1] ef, const double[::1] cw, int n_ctrl,
                           int law, double rde_rate, int rde_sign, int p, double h,
                           double[:, ::1] k1, double[:, ::1] k2, double[:, ::1] k3,
                           double[:, ::1] k4, double[:, ::1] xt) noexcept nogil:
    cdef int i, c
    cdef double h2 = 0.5 * h, h6 = h / 6.0
    _rhs(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, k1)
    for i in range(p):
        for c in range(3):
            xt[i, c] = X[i, c] + h2 * k1[i, c]
    _rhs(xt, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, k2)
    for i in range(p):
        for c in range(3):
            xt[i, c] = X[i, c] + h2 * k2[i, c]
    _rhs(xt, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, k3)
    for i in range(p):
        for c in range(3):
            xt[i, c] = X[i, c] + h * k3[i, c]
    _rhs(xt, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, k4)
    for i in range(p):
        for c in range(3):
            X[i, c] += h6 * (k1[i, c] + 2.0 * k2[i, c] + 2.0 * k3[i, c] + k4[i, c])
    _renormalize(X, p)


cdef inline void _lie_step(double[:, ::1] X, const double[::1] ef, const double[::1] cw, int n_ctrl,
                           int law, double rde_rate, int rde_sign, int p, double h) noexcept nogil:
    """Advance each spin by the exact rotation generated by the frozen field.

    The per-spin generator is skew-symmetric with rotation vector
    (-u1, u2, e_i); the axis-angle (Rodrigues) update is applied directly.
    """
    cdef double u1, u2, r1, r2
    cdef double rx, ry, rz, theta, c, s, kx, ky, kz, dot, cx, cy, cz
    cdef double vx, vy, vz
    cdef int i
    _control(X, cw, n_ctrl, law, rde_rate, rde_sign, p, &u1, &u2, &r1, &r2)
    rx = -h * u1
    ry = h * u2
    for i in range(p):
        rz = h * ef[i]
        theta = sqrt(rx * rx + ry * ry + rz * rz)
        if theta == 0.0:
            continue
        c = cos(theta)
        s = sin(theta)
        kx = rx / theta
        ky = ry / theta
        kz = rz / theta
        vx = X[i, 0]
        vy = X[i, 1]
        vz = X[i, 2]
        cx = ky * vz - kz * vy
        cy = kz * vx - kx * vz
        cz = kx * vy - ky * vx
        dot = kx * vx + ky * vy + kz * vz
        X[i, 0] = vx * c + cx * s + kx * dot * (1.0 - c)
        X[i, 1] = vy * c + cy * s + ky * dot * (1.0 - c)
        X[i, 2] = vz * c + cz * s + kz * dot * (1.0 - c)
    _renormalize(X, p)


cdef inline bint _record(double[:, ::1] X, const double[::1] ef, const double[::1] cw, int n_ctrl,
                         int law, double rde_rate, int rde_sign, int p,
                         const double[::1] lw, long j, double t,
                         double[::1] times, double[:, :, ::1] states,
                         double[:, ::1] controls, double[::1] lyap) noexcept nogil:
    """Store sample j at time t; returns False when a non-finite value shows up."""
    cdef double u1, u2, r1, r2, v = 0.0
    cdef int i, c
    _control(X, cw, n_ctrl, law, rde_rate, rde_sign, p, &u1, &u2, &r1, &r2)
    times[j] = t
    controls[j, 0] = r1
    controls[j, 1] = r2
    for i in range(p):
        for c in range(3):
            states[j, i, c] = X[i, c]
        v += lw[i] * X[i, 2]
    lyap[j] = v
    return isfinite(v) and isfinite(r1) and isfinite(r2)


def run_loop(double[:, ::1] X, const double[::1] ef, const double[::1] cw, int n_ctrl, int law,
             double rde_rate, int rde_sign, int method, double h, long n_steps,
             long stride, const double[::1] lw, int stop_mode, double stop_z,
             double[::1] times, double[:, :, ::1] states, double[:, ::1] controls,
             double[::1] lyap,
             double[:, ::1] k1, double[:, ::1] k2, double[:, ::1] k3,
             double[:, ::1] k4, double[:, ::1] xt):
    """Integrate ``n_steps`` closed-loop steps, sampling every ``stride`` steps.

    ``X`` is advanced in place.  Sample 0 is the initial state; the state
    after the last executed step is always the last sample.  With a stop
    mode, integration ends at the first step whose state satisfies the
    threshold condition on every z-component.

    Returns:
        (n_recorded, steps_done, status) with status 0 = ok, 1 = non-finite
        value encountered (recorded sample kept for diagnostics).
    """
    cdef int p = X.shape[0]
    cdef long j = 0, k = 0
    cdef bint ok, stop_hit
    cdef int i, status = 0

    ok = _record(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, lw,
                 0, 0.0, times, states, controls, lyap)
    j = 1
    if not ok:
        return j, k, 1

    with nogil:
        for k in range(1, n_steps + 1):
            if method == METHOD_RK4:
                _rk4_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, h,
                          k1, k2, k3, k4, xt)
            else:
                _lie_step(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, h)

            stop_hit = False
            if stop_mode == STOP_BELOW:
                stop_hit = True
                for i in range(p):
                    if X[i, 2] >= stop_z:
                        stop_hit = False
                        break
            elif stop_mode == STOP_ABOVE:
                stop_hit = True
                for i in range(p):
                    if X[i, 2] <= stop_z:
                        stop_hit = False
                        break

            if k % stride == 0 or k == n_steps or stop_hit:
                ok = _record(X, ef, cw, n_ctrl, law, rde_rate, rde_sign, p, lw,
                             j, k * h, times, states, controls, lyap)
                j += 1
                if not ok:
                    status = 1
                    break
                if stop_hit:
                    break

    return j, k, status
