"""Slow reference implementations the tests compare against.

Everything here trades speed for being independently checkable: eigenvalues
via interlacing bisection on the exact minor sequence in extended precision,
the Levy window by the obvious quadratic scan, and a normal quantile by
bisection on the package's own cdf.  None of this is imported by the package.
"""

import math

import numpy as np
from mpmath import mp

from jacobilog.charpoly import phi_exact


def eig_bisect(mat, dps=60, tol=None):
    """All eigenvalues of the unscaled J_n by bisection, as mpf, ascending.

    Uses the strict interlacing of the minor roots: the k roots of phi_k are
    separated by the k-1 roots of phi_{k-1} whenever the off-diagonal entries
    are nonzero (true almost surely for the sampled ensembles).  Each
    bracketing interval therefore contains exactly one simple root and plain
    bisection on the sign of phi_k isolates it.
    """
    n = mat.n
    with mp.workdps(dps):
        if tol is None:
            tol = mp.mpf(10) ** (-(dps - 15))
        b = [mp.mpf(float(x)) for x in mat.b]
        a2 = [mp.mpf(float(x)) ** 2 for x in mat.a]

        def phi_k(k, x):
            pm1, p = mp.mpf(1), x - b[0]
            for j in range(2, k + 1):
                pm1, p = p, (x - b[j - 1]) * p - a2[j - 2] * pm1
            return p if k >= 1 else pm1

        rad = max(abs(float(x)) for x in mat.b) + 2.0 * max(
            [abs(float(x)) for x in mat.a], default=0.0)
        lo_all = mp.mpf(-(rad + 1.0))
        hi_all = mp.mpf(rad + 1.0)
        roots = [b[0]]
        for k in range(2, n + 1):
            edges = [lo_all] + roots + [hi_all]
            new = []
            for lo, hi in zip(edges[:-1], edges[1:]):
                flo = phi_k(k, lo)
                fhi = phi_k(k, hi)
                if mp.sign(flo) == mp.sign(fhi):
                    raise ArithmeticError(
                        "interlacing bracket failed; degenerate sample")
                while hi - lo > tol * max(1, abs(lo), abs(hi)):
                    mid = (lo + hi) / 2
                    fm = phi_k(k, mid)
                    if fm == 0:
                        lo = hi = mid
                        break
                    if mp.sign(fm) == mp.sign(flo):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                new.append((lo + hi) / 2)
            roots = new
        return roots


def eig_count_below(mat, x, dps=60):
    """#{eigenvalues of J_n / sqrt(n) <= x} from the bisection roots."""
    n = mat.n
    with mp.workdps(dps):
        thresh = mp.mpf(float(x)) * mp.sqrt(n)
        return sum(1 for r in eig_bisect(mat, dps=dps) if r <= thresh)


def psi_oracle(mat, z, alpha, dps=80):
    """psi_n = phi_n / (sqrt(n!) prod alpha_i) in extended precision."""
    n = mat.n
    with mp.workdps(dps):
        phi_n = phi_exact(mat, z)[n]
        denom = mp.sqrt(mp.factorial(n))
        for i in range(1, n + 1):
            denom *= mp.mpf(float(alpha[i]))
        return phi_n / denom


def levy_brute(samples, eps):
    """O(N^2) sliding-window maximum; same closed-window convention as the
    production estimator (windows anchored at sample points)."""
    s = np.asarray(samples, dtype=np.float64)
    n = s.size
    best = 0
    for i in range(n):
        cnt = int(np.count_nonzero((s >= s[i]) & (s <= s[i] + 2.0 * eps)))
        best = max(best, cnt)
    return best / n


def norm_ppf(p, lo=-12.0, hi=12.0, iters=80):
    """Standard normal quantile by bisection on erf; enough accuracy for
    building quantile grids (about 1e-12 in x)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if 0.5 * (1.0 + math.erf(mid / math.sqrt(2.0))) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
