"""Normalized characteristic-polynomial recursion for Jacobi matrices.

The raw minor recursion

    phi_k = (z*sqrt(n) - b_k) * phi_{k-1} - a_{k-1}^2 * phi_{k-2}

computes det(z*sqrt(n) I_k - J_k) over the bottom-right order-k minors but
grows super-exponentially (factorially in k), so everything here works with
the normalized sequence

    psi_k = phi_k / (sqrt(k!) * alpha_1 * ... * alpha_k)

evolved as a renormalized two-vector (psi_k, psi_{k-1}) in log-scale.  The
per-index normalizers alpha_k solve alpha^2 - z_k*alpha + (1 - c_k) = 0
(taking the larger root) while z_k = z*sqrt(n/k) stays above 2, and are 1
from the critical window onward.  Three index regimes matter downstream:

    scalar       k <= k0 - l0        (one growing direction, delta_k small)
    transition   k0 - l0 < k <= k0 + l0
    oscillatory  k > k0 + l0         (rotating two-dimensional dynamics)

with k0 = floor(z^2 n / 4) and l0 = floor(kappa * k0^(1/3)).

``phi_exact`` is the slow extended-precision reference for the raw minors,
capped at small n; everything else is double precision.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import _kernels
from .ensemble import JacobiMatrix, c_values
from .errors import DomainError, NumericError

DEFAULT_KAPPA = 4.0
PHI_EXACT_CAP = 64

FLAG_NO_DELTA = _kernels.FLAG_NO_DELTA
FLAG_PSI_ZERO = _kernels.FLAG_PSI_ZERO
FLAG_DEAD = _kernels.FLAG_DEAD


@dataclass(frozen=True)
class CriticalIndices:
    """k0, l0 and the regime boundaries they induce for one (n, z, kappa)."""

    n: int
    z: float
    kappa: float
    k0: int
    l0: int

    @property
    def scalar_end(self) -> int:
        """Last index of the scalar regime, k0 - l0."""
        return self.k0 - self.l0

    @property
    def osc_start(self) -> int:
        """First index past the transition window, k0 + l0 + 1."""
        return self.k0 + self.l0 + 1

    def regime(self, k: int) -> str:
        if k <= self.k0 - self.l0:
            return "scalar"
        if k <= self.k0 + self.l0:
            return "transition"
        return "oscillatory"

    def zk(self, k):
        """z_k = z * sqrt(n/k)."""
        return self.z * np.sqrt(self.n / np.asarray(k, dtype=np.float64))


def critical_indices(n: int, z: float, kappa: float = DEFAULT_KAPPA) -> CriticalIndices:
    """Locate the critical window.  z must lie in (-2, 2) excluding 0."""
    if n < 1:
        raise DomainError(f"matrix size must be >= 1, got {n}")
    if z == 0.0 or abs(z) >= 2.0:
        raise DomainError(f"z must lie in (-2, 2) excluding 0, got {z}")
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    k0 = int(math.floor(z * z * n / 4.0))
    l0 = int(math.floor(kappa * k0 ** (1.0 / 3.0)))
    return CriticalIndices(n=n, z=z, kappa=kappa, k0=k0, l0=l0)


def alpha_sequence(n: int, z: float, kappa: float = DEFAULT_KAPPA,
                   c_rule: str = "gbe") -> np.ndarray:
    """Per-index normalizers alpha_k, k = 1..n (index 0 is a 1.0 pad).

    For k < k0 - l0 the dominant root of alpha^2 - z_k alpha + (1 - c_k);
    1 afterwards.  Both roots share the sign of z (their product is
    1 - c_k > 0), and the dominant one is z_k/2 + sign(z) sqrt(disc): taking
    the "+" branch for z < 0 would select the near-zero root and the
    normalized recursion would overflow.  A negative discriminant (possible
    only for c-rules dipping below 0) raises NumericError naming the first
    offending index.
    """
    idx = critical_indices(n, z, kappa)
    alpha = np.ones(n + 1)
    kmax = min(idx.scalar_end - 1, n)  # strict k < k0 - l0
    if kmax >= 1:
        k = np.arange(1, kmax + 1, dtype=np.float64)
        zk = z * np.sqrt(n / k)
        disc = zk * zk / 4.0 - 1.0 + c_values(c_rule, k)
        if np.any(disc < 0.0):
            bad = int(k[np.argmax(disc < 0.0)])
            raise NumericError(
                f"negative discriminant in the scalar normalizer at k={bad} "
                f"(z={z}, n={n}, c_rule={c_rule!r})"
            )
        alpha[1 : kmax + 1] = zk / 2.0 + math.copysign(1.0, z) * np.sqrt(disc)
    return alpha


def _recursion_coefficients(mat: JacobiMatrix, z: float, kappa: float,
                            c_rule: str | None = None):
    """alpha and the step coefficients of the normalized recursion.

    coef1[k] = (z_k - b_k/sqrt(k)) / alpha_k
    coef2[k] = (a_{k-1}^2 / sqrt(k(k-1))) / (alpha_k * alpha_{k-1})
    both indexed 1..n (coef2[1] = 0, second component of X_0 is 0 anyway).
    """
    n = mat.n
    if c_rule is None:
        c_rule = mat.spec.c_rule if mat.spec.kind == "general" else "gbe"
    idx = critical_indices(n, z, kappa)
    alpha = alpha_sequence(n, z, kappa, c_rule)
    k = np.arange(1, n + 1, dtype=np.float64)
    zk = z * np.sqrt(n / k)
    coef1 = np.zeros(n + 1)
    coef2 = np.zeros(n + 1)
    coef1[1:] = (zk - mat.b / np.sqrt(k)) / alpha[1:]
    if n > 1:
        kk = k[1:]  # 2..n
        coef2[2:] = (mat.a**2 / np.sqrt(kk * (kk - 1.0))) / (alpha[2:] * alpha[1:-1])
    return idx, alpha, coef1, coef2


@dataclass(frozen=True)
class RecursionTrace:
    """Full history of the normalized recursion for one matrix.

    Arrays are indexed by k = 0..n.  (u1, u2) is the renormalized direction
    of (psi_k, psi_{k-1}), s the accumulated log-scale, so
    exp(s[k]) * (u1[k], u2[k]) reconstructs the pair.  sign[k] is the sign
    of psi_k, delta[k] = psi_k/psi_{k-1} - 1 (+inf sentinel when
    psi_{k-1} = 0, see the flag bits in _kernels).
    """

    mat: JacobiMatrix
    z: float
    kappa: float
    indices: CriticalIndices
    alpha: np.ndarray
    coef1: np.ndarray
    coef2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    s: np.ndarray
    sign: np.ndarray
    delta: np.ndarray
    flags: np.ndarray

    @property
    def n(self) -> int:
        return self.mat.n

    def log_abs_psi(self, k: int) -> float:
        """log |psi_k|; -inf if psi_k = 0."""
        u = self.u1[k]
        if u == 0.0:
            return -np.inf
        return float(self.s[k] + np.log(abs(u)))

    def x_vector(self, k: int) -> np.ndarray:
        """Reconstruct (psi_k, psi_{k-1}) as raw floats (overflows for large k)."""
        return np.exp(self.s[k]) * np.array([self.u1[k], self.u2[k]])

    def end_ratio(self) -> float:
        """|psi_n / psi_{n-1}|; +inf if psi_{n-1} = 0."""
        if self.u2[self.n] == 0.0:
            return np.inf
        return float(abs(self.u1[self.n] / self.u2[self.n]))

    def regimes(self) -> np.ndarray:
        ks = np.arange(self.n + 1)
        out = np.full(self.n + 1, "oscillatory", dtype="<U11")
        out[ks <= self.indices.k0 + self.indices.l0] = "transition"
        out[ks <= self.indices.scalar_end] = "scalar"
        return out

    def to_csv(self, target) -> None:
        """Write per-step rows (k,u1,u2,s,sign,delta,regime); UTF-8, LF."""
        close = False
        if isinstance(target, (str, bytes)):
            fh = open(target, "w", encoding="utf-8", newline="\n")
            close = True
        else:
            fh = target
        try:
            fh.write("k,u1,u2,s,sign,delta,regime\n")
            regime = self.regimes()
            # k = 0 is the seed state (1, 0), not a step; the file carries one
            # row per recursion step so downstream row counts equal n.
            for k in range(1, self.n + 1):
                fh.write(
                    f"{k},{self.u1[k]:.17g},{self.u2[k]:.17g},{self.s[k]:.17g},"
                    f"{int(self.sign[k])},{self.delta[k]:.17g},{regime[k]}\n"
                )
        finally:
            if close:
                fh.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def evolve(mat: JacobiMatrix, z: float, kappa: float = DEFAULT_KAPPA,
           c_rule: str | None = None) -> RecursionTrace:
    """Run the normalized recursion over the whole matrix.

    c_rule None means: use the rule implied by the ensemble spec.
    """
    n = mat.n
    idx, alpha, coef1, coef2 = _recursion_coefficients(mat, z, kappa, c_rule)
    u1 = np.empty(n + 1)
    u2 = np.empty(n + 1)
    s = np.empty(n + 1)
    sign = np.empty(n + 1, dtype=np.int8)
    delta = np.empty(n + 1)
    flags = np.zeros(n + 1, dtype=np.uint8)
    _kernels.evolve_kernel(coef1, coef2, u1, u2, s, sign, delta, flags)
    return RecursionTrace(
        mat=mat, z=z, kappa=kappa, indices=idx, alpha=alpha,
        coef1=coef1, coef2=coef2, u1=u1, u2=u2, s=s, sign=sign,
        delta=delta, flags=flags,
    )


def phi_exact(mat: JacobiMatrix, z: float, cap: int = PHI_EXACT_CAP):
    """Raw minor sequence phi_0..phi_n in extended precision (mpmath).

    Oracle-grade and slow; refuses n beyond ``cap`` (default 64).  Inputs are
    converted exactly (binary64 -> mpf), so this is the exact minor sequence
    of the sampled matrix.
    """
    if mat.n > cap:
        raise DomainError(f"phi_exact is an oracle for n <= {cap}, got n={mat.n}")
    with mp.workdps(80):
        zs = mp.mpf(z) * mp.sqrt(mat.n)
        phis = [mp.mpf(1)]
        prev2 = mp.mpf(0)  # phi_{-1}
        prev1 = mp.mpf(1)  # phi_0
        for k in range(1, mat.n + 1):
            cur = (zs - mp.mpf(float(mat.b[k - 1]))) * prev1
            if k >= 2:
                cur -= mp.mpf(float(mat.a[k - 2])) ** 2 * prev2
            phis.append(cur)
            prev2, prev1 = prev1, cur
    return phis


def log_factorial(n: int) -> float:
    """log n!, by direct summation up to 10^3 and log-gamma beyond."""
    if n <= 1000:
        return math.fsum(math.log(i) for i in range(2, n + 1))
    return math.lgamma(n + 1.0)


def log_cn_exact(n: int, z: float, kappa: float = DEFAULT_KAPPA,
                 c_rule: str = "gbe") -> float:
    """log of the deterministic normalizing constant,
    (log n! - n log n)/2 + sum_i log |alpha_i|.

    For z < 0 some alpha_i are negative; only the modulus ever enters the
    statistics, so the absolute value is summed.
    """
    alpha = alpha_sequence(n, z, kappa, c_rule)
    return 0.5 * (log_factorial(n) - n * math.log(n)) + math.fsum(
        np.log(np.abs(alpha[1:]))
    )


def log_cn_asymptotic(n: int, z: float) -> float:
    """Leading asymptotics (log n)/8 + n (z^2/4 - 1/2) of log_cn_exact."""
    if z == 0.0 or abs(z) >= 2.0:
        raise DomainError(f"z must lie in (-2, 2) excluding 0, got {z}")
    return math.log(n) / 8.0 + n * (z * z / 4.0 - 0.5)


def w_statistic(trace: RecursionTrace, v: float | None = None) -> float:
    """Normalized log-determinant fluctuation,
    (log|psi_n| + (log n)/6) / sqrt(v log n / 2).

    v defaults to the noise variance of the trace's ensemble.
    """
    if v is None:
        v = trace.mat.spec.variance
    n = trace.n
    if n < 2:
        raise DomainError("w statistic needs n >= 2")
    num = trace.log_abs_psi(n) + math.log(n) / 6.0
    return num / math.sqrt(v * math.log(n) / 2.0)


def transfer_matrices(mat: JacobiMatrix, z: float, k: int,
                      kappa: float = DEFAULT_KAPPA):
    """The deterministic and noise transfer matrices (A_k, W_k) at index k.

    X_k = (A_k + W_k) X_{k-1} reproduces one step of the normalized
    recursion.  k = 1 is excluded: the step from X_0 involves psi_{-1}
    and has no two-by-two form.
    """
    if not 2 <= k <= mat.n:
        raise DomainError(f"k must be in 2..{mat.n}, got {k}")
    c_rule = mat.spec.c_rule if mat.spec.kind == "general" else "gbe"
    alpha = alpha_sequence(mat.n, z, kappa, c_rule)
    zk = z * math.sqrt(mat.n / k)
    ck = c_values(c_rule, k)
    ak = alpha[k]
    akm1 = alpha[k - 1]
    gk = float(mat.noise_g()[k - 2])
    bk = float(mat.b[k - 1])
    amat = np.array([[zk / ak, -(1.0 - ck) / (ak * akm1)], [1.0, 0.0]])
    wmat = np.array([
        [-bk / (ak * math.sqrt(k)), -gk / (ak * akm1 * math.sqrt(k))],
        [0.0, 0.0],
    ])
    return amat, wmat
