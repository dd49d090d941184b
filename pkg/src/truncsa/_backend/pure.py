"""Pure-Python kernels: the portable twin of the compiled core.

Every function here has the same name, signature and -- crucially -- the same
floating-point operation order as its Cython counterpart in ``_core.pyx``, so
the two backends produce bit-identical results on the same platform.  Keep the
two files in lockstep when editing either.

Hot paths are written against plain Python floats; callers pass preallocated
NumPy arrays that the loops fill in place.
"""

import math

BACKEND_NAME = "pure"

# Asymptotic tail coefficients B_{2k}/(2k) for psi, k = 1..6.
_DG_C2 = 1.0 / 12.0
_DG_C4 = -1.0 / 120.0
_DG_C6 = 1.0 / 252.0
_DG_C8 = -1.0 / 240.0
_DG_C10 = 1.0 / 132.0
_DG_C12 = -691.0 / 32760.0

# Tail coefficients B_{2k} for psi', k = 1..6.
_TG_B2 = 1.0 / 6.0
_TG_B4 = -1.0 / 30.0
_TG_B6 = 1.0 / 42.0
_TG_B8 = -1.0 / 30.0
_TG_B10 = 5.0 / 66.0
_TG_B12 = -691.0 / 2730.0

_SHIFT_CUTOFF = 6.0


def digamma(x):
    """psi(x) for x > 0: upward recurrence below 6, then the log expansion."""
    acc = 0.0
    while x < _SHIFT_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    w = 1.0 / (x * x)
    tail = w * (_DG_C2 + w * (_DG_C4 + w * (_DG_C6 + w * (_DG_C8 + w * (_DG_C10 + w * _DG_C12)))))
    return acc + math.log(x) - 0.5 / x - tail


def trigamma(x):
    """psi'(x) for x > 0: upward recurrence below 6, then the 1/x expansion."""
    acc = 0.0
    while x < _SHIFT_CUTOFF:
        acc += 1.0 / (x * x)
        x += 1.0
    w = 1.0 / (x * x)
    tail = x * w * w * (_TG_B2 + w * (_TG_B4 + w * (_TG_B6 + w * (_TG_B8 + w * (_TG_B10 + w * _TG_B12)))))
    return acc + 1.0 / x + 0.5 * w + tail


def digamma_array(x, out):
    for i in range(x.shape[0]):
        out[i] = digamma(x[i])


def trigamma_array(x, out):
    for i in range(x.shape[0]):
        out[i] = trigamma(x[i])


def poly_path(z_init, z0, coeffs, a_scale, u_scale, eps, out_z, out_prop, out_hit):
    """Scalar polynomial-drift recursion with symmetric log-expanding bounds.

    Drift at z is -(C_1 u + ... + C_l u^l) with u = z - z0, step 1/(a_scale*t),
    clamp to [-log(u_scale*t), log(u_scale*t)] (no clamp when u_scale <= 0).
    Returns 0 on success, else the 1-based step index of the first non-finite
    proposal.
    """
    cs = [float(c) for c in coeffs]       # plain floats: faster, no overflow warnings
    n = len(cs)
    z = float(z_init)
    z0 = float(z0)
    for t in range(1, eps.shape[0] + 1):
        u = z - z0
        acc = cs[n - 1]
        for i in range(n - 2, -1, -1):
            acc = acc * u + cs[i]
        r = -(acc * u)
        gamma = 1.0 / (a_scale * t)
        prop = z + gamma * (r + float(eps[t - 1]))
        out_prop[t - 1] = prop
        if not math.isfinite(prop):
            return t
        if u_scale > 0.0:
            bound = math.log(u_scale * t)
            if prop > bound:
                z = bound
            elif prop < -bound:
                z = -bound
            else:
                z = prop
        else:
            z = prop
        out_z[t - 1] = z
        out_hit[t - 1] = 1 if z != prop else 0
    return 0


def gamma_shape_path(theta_init, logx, moving, c1, c2, lo_fixed, hi_fixed,
                     out_theta, out_prop, out_hit, out_dig, out_trig):
    """Recursive Gamma-shape likelihood updates with clamping bounds.

    Update: theta + (logx[t] - psi(theta)) / (t * psi'(theta)), clamped to
    [c1/sqrt(log(t+2)), c2*(t+2)] when ``moving`` else [lo_fixed, hi_fixed].
    psi/psi' evaluated at the pre-update theta are exported for diagnostics.
    Returns 0 on success, else the failing 1-based step index.
    """
    th = float(theta_init)
    for t in range(1, logx.shape[0] + 1):
        dg = digamma(th)
        tg = trigamma(th)
        out_dig[t - 1] = dg
        out_trig[t - 1] = tg
        prop = th + (float(logx[t - 1]) - dg) / (t * tg)
        out_prop[t - 1] = prop
        if not math.isfinite(prop):
            return t
        if moving:
            lo = c1 / math.sqrt(math.log(t + 2.0))
            hi = c2 * (t + 2.0)
        else:
            lo = lo_fixed
            hi = hi_fixed
        if prop < lo:
            th = lo
        elif prop > hi:
            th = hi
        else:
            th = prop
        out_theta[t - 1] = th
        out_hit[t - 1] = 1 if th != prop else 0
    return 0


def ar1_path(x0, theta, xi, out_x):
    """X_t = theta*X_{t-1} + xi_t for t = 1..len(xi); out_x gets X_1..X_T."""
    x = float(x0)
    theta = float(theta)
    for t in range(xi.shape[0]):
        x = theta * x + float(xi[t])
        out_x[t] = x


def ar1_rls(theta0, info0, x, out_theta, out_info):
    """Recursive least squares on an autoregressive path x = (X_0, ..., X_T)."""
    th = float(theta0)
    info = float(info0)
    xp = float(x[0])
    for t in range(1, x.shape[0]):
        xn = float(x[t])
        info = info + xp * xp
        th = th + xp * (xn - th * xp) / info
        out_theta[t - 1] = th
        out_info[t - 1] = info
        xp = xn
