"""Hot inner loops, compiled with numba when available.

Every kernel here is a plain sequential recurrence, written so the same
source runs both JIT-compiled and as ordinary Python.  The fallback path is
selected by the environment variable ``JACOBILOG_NO_NUMBA=1`` (or by numba
simply not being importable); ``benchmarks/bench_kernels.py`` compares the
two.  Kernels are compiled with ``nogil=True`` so the Monte Carlo driver can
run replicas on a thread pool.

State convention for the two-vector recursion: the pair (psi_k, psi_{k-1})
is kept as a unit direction (u1, u2), Euclidean norm 1, plus an
accumulated log-scale s_k (Kahan-compensated), so that
exp(s_k) * (u1, u2) reconstructs the raw pair.  Raw values are never stored;
they overflow double range around k ~ 300.

Flag bits stored per step:
  1  delta undefined at k (psi_{k-1} == 0, delta reported as +inf)
  2  psi_k == 0 exactly
  4  dead state: both components vanished, recursion stopped
"""

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("JACOBILOG_NO_NUMBA", "").lower() in ("1", "true", "yes")

if NUMBA_DISABLED:
    HAVE_NUMBA = False
else:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

if not HAVE_NUMBA:
    def njit(*args, **kwargs):
        # identity decorator: same source, interpreted
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


FLAG_NO_DELTA = 1
FLAG_PSI_ZERO = 2
FLAG_DEAD = 4

# 2*pi split into a double-double pair for argument reduction: subtracting
# both parts loses ~1e-32 per wrap instead of ~2.4e-16.
TWO_PI_HI = 6.283185307179586
TWO_PI_LO = 2.4492935982947064e-16
PI = 3.141592653589793


@njit(cache=True, nogil=True)
def evolve_kernel(coef1, coef2, u1, u2, s, sign, delta, flags):
    """Run the full normalized recursion, filling per-step arrays for k = 0..n.

    coef1[k], coef2[k] are the step coefficients
        x1 = coef1[k] * u1[k-1] - coef2[k] * u2[k-1]
        x2 = u1[k-1]
    with coef1[0], coef2[0], coef2[1] unused.
    """
    n = coef1.shape[0] - 1
    u1[0] = 1.0
    u2[0] = 0.0
    s[0] = 0.0
    sign[0] = 1
    delta[0] = np.inf
    flags[0] = FLAG_NO_DELTA

    a1 = 1.0
    a2 = 0.0
    acc = 0.0
    comp = 0.0  # Kahan compensation for the log-scale accumulator
    for k in range(1, n + 1):
        x1 = coef1[k] * a1 - coef2[k] * a2
        x2 = a1
        m = np.sqrt(x1 * x1 + x2 * x2)
        if m == 0.0:
            for j in range(k, n + 1):
                u1[j] = 0.0
                u2[j] = 0.0
                s[j] = -np.inf
                sign[j] = 0
                delta[j] = np.nan
                flags[j] = FLAG_DEAD
            return
        a1 = x1 / m
        a2 = x2 / m
        y = np.log(m) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t

        u1[k] = a1
        u2[k] = a2
        s[k] = acc
        f = 0
        if a1 > 0.0:
            sign[k] = 1
        elif a1 < 0.0:
            sign[k] = -1
        else:
            sign[k] = 0
            f |= FLAG_PSI_ZERO
        if a2 != 0.0:
            delta[k] = a1 / a2 - 1.0
        else:
            delta[k] = np.inf
            f |= FLAG_NO_DELTA
        flags[k] = f


@njit(cache=True, nogil=True)
def propagate_kernel(coef1, coef2, k_from, k_to, v1, v2):
    """Apply recursion steps k_from+1 .. k_to to the pair (v1, v2).

    Returns (v1, v2, log_scale, ok); ok=False means the state vanished.
    """
    acc = 0.0
    comp = 0.0
    for k in range(k_from + 1, k_to + 1):
        x1 = coef1[k] * v1 - coef2[k] * v2
        x2 = v1
        m = np.sqrt(x1 * x1 + x2 * x2)
        if m == 0.0:
            return 0.0, 0.0, -np.inf, False
        v1 = x1 / m
        v2 = x2 / m
        y = np.log(m) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return v1, v2, acc, True


@njit(cache=True, nogil=True)
def sturm_kernel(d, a2, tiny):
    """Count eigenvalues <= shift via sign agreements of renormalized minors.

    d[k] = shift - b_k for k = 1..n (index 0 unused) is the diagonal of the
    shifted matrix, a2[k] = a_k^2 (a2[0] unused).  The minor recursion
        p_k = d[k] * p_{k-1} - a2[k-1] * p_{k-2}
    is renormalized by its largest magnitude each step; exact zeros are
    replaced by ``tiny`` carrying the predecessor's sign, which counts an
    eigenvalue sitting exactly on the shift as <= (inertia convention).
    """
    n = d.shape[0] - 1
    count = 0
    pm1 = 1.0  # p_{k-1}
    pm2 = 0.0  # p_{k-2}
    for k in range(1, n + 1):
        if k == 1:
            p = d[1]
        else:
            p = d[k] * pm1 - a2[k - 1] * pm2
        if p == 0.0:
            p = tiny if pm1 >= 0.0 else -tiny
        if (p > 0.0) == (pm1 > 0.0):
            count += 1
        m = abs(p)
        if abs(pm1) > m:
            m = abs(pm1)
        pm2 = pm1 / m
        pm1 = p / m
    return count


@njit(cache=True, nogil=True)
def angle_residue_kernel(theta, l_from, l_to, res, comp):
    """Kahan-add theta[l] for l in (l_from, l_to], reducing into (-pi, pi].

    The running sum is wrapped as it goes (never per term), so the residue
    keeps full precision even when the unreduced total would be ~1e4.
    """
    for l in range(l_from + 1, l_to + 1):
        y = theta[l] - comp
        t = res + y
        comp = (t - res) - y
        res = t
        while res > PI:
            y = -TWO_PI_HI - comp
            t = res + y
            comp = (t - res) - y
            res = t
            y = -TWO_PI_LO - comp
            t = res + y
            comp = (t - res) - y
            res = t
    return res, comp


@njit(cache=True, nogil=True)
def block_scan_kernel(coef1, coef2, theta, k0, l_begin, res, comp, eps_i,
                      thresh, l_cap, v1, v2):
    """Scan stopping-time candidates l >= l_begin for one oscillatory block.

    On entry (v1, v2) is the state propagated through step k0 + l_begin and
    (res, comp) the reduced angle residue over (l_i, l_begin].  Each failed
    candidate advances the state one recursion step and accumulates the next
    rotation angle.  Returns
        (l_stop, v1, v2, log_scale, res, comp, stopped, ok)
    where stopped=False means l_cap was hit first (truncated search) and
    ok=False means the state vanished mid-scan.
    """
    acc = 0.0
    acc_c = 0.0
    l = l_begin
    while True:
        dlt = res
        test = dlt + 0.5 * dlt * dlt * eps_i - eps_i
        if abs(test) <= thresh:
            return l, v1, v2, acc, res, comp, True, True
        if l >= l_cap:
            return l, v1, v2, acc, res, comp, False, True
        l += 1
        y = theta[l] - comp
        t = res + y
        comp = (t - res) - y
        res = t
        while res > PI:
            y = -TWO_PI_HI - comp
            t = res + y
            comp = (t - res) - y
            res = t
            y = -TWO_PI_LO - comp
            t = res + y
            comp = (t - res) - y
            res = t
        k = k0 + l
        x1 = coef1[k] * v1 - coef2[k] * v2
        x2 = v1
        m = np.sqrt(x1 * x1 + x2 * x2)
        if m == 0.0:
            return l, 0.0, 0.0, -np.inf, res, comp, False, False
        v1 = x1 / m
        v2 = x2 / m
        y = np.log(m) - acc_c
        t = acc + y
        acc_c = (t - acc) - y
        acc = t


@njit(cache=True, nogil=True)
def deltabar_kernel(u, v, delta1, out):
    """Linearized recursion: out[1] = delta1, out[k] = u[k] + v[k]*out[k-1]."""
    kmax = out.shape[0] - 1
    if kmax >= 1:
        out[1] = delta1
    for k in range(2, kmax + 1):
        out[k] = u[k] + v[k] * out[k - 1]


@njit(cache=True, nogil=True)
def second_order_kernel(v, deltabar, out):
    """Second-order correction: out[k] = -v[k]*deltabar[k-1]^2 + v[k]*out[k-1]."""
    kmax = out.shape[0] - 1
    if kmax >= 1:
        out[1] = 0.0
    for k in range(2, kmax + 1):
        d = deltabar[k - 1]
        out[k] = v[k] * (out[k - 1] - d * d)


@njit(cache=True, nogil=True)
def backward_weights_kernel(v, out):
    """Backward pass out[j] = 1 + v[j+1]*out[j+1], out[kmax] = 1."""
    kmax = out.shape[0] - 1
    out[kmax] = 1.0
    for j in range(kmax - 1, 0, -1):
        out[j] = 1.0 + v[j + 1] * out[j + 1]
