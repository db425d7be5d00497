"""Linearized analysis of the recursion below the critical index.

For k in the scalar regime (k <= k0 - l0) the increment delta_k =
psi_k/psi_{k-1} - 1 stays small and obeys

    delta_k = u_k + v_k * delta_{k-1} / (1 + delta_{k-1})

with per-index coefficients (u_k, v_k) built from the sampled noise and the
deterministic normalizers.  Dropping the denominator gives the linearized
sequence bardelta_k = u_k + v_k bardelta_{k-1}, whose window sums drive the
variance of the log-magnitude; the second-order correction barDelta_k =
v_k (barDelta_{k-1} - bardelta_{k-1}^2) tracks the bias.  This module
computes those sequences and a per-replica diagnostic record.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, charpoly
from .charpoly import CriticalIndices, RecursionTrace
from .ensemble import JacobiMatrix, c_values
from .errors import DomainError


def coefficient_pair(zk, ck, gk, bk, alpha_k, alpha_km1, k):
    """(u_k, v_k) from one index's ingredients; scalar form for checks."""
    v = (1.0 - ck + gk / math.sqrt(k)) / (alpha_k * alpha_km1)
    u = zk / alpha_k - 1.0 - v - bk / (alpha_k * math.sqrt(k))
    return u, v


@dataclass
class ScalarCoefficients:
    """Per-k linearization coefficients on 2 <= k <= kmax = k0 - l0.

    Arrays are indexed by k directly; entries 0 and 1 are NaN padding.
    delta1 is the exact first increment psi_1 - 1, supplied so callers can
    seed the linearized recursion without re-deriving it.
    """

    indices: CriticalIndices
    kmax: int
    u: np.ndarray
    v: np.ndarray
    delta1: float

    @property
    def empty(self) -> bool:
        return self.kmax < 2


def scalar_coefficients(mat: JacobiMatrix, indices: CriticalIndices,
                        c_rule: str | None = None) -> ScalarCoefficients:
    """Build (u_k, v_k) for the scalar regime of one sampled matrix."""
    if c_rule is None:
        c_rule = mat.spec.c_rule if mat.spec.kind == "general" else "gbe"
    n, z, kappa = indices.n, indices.z, indices.kappa
    if mat.n != n:
        raise DomainError(f"matrix has n={mat.n} but indices have n={n}")
    kmax = min(indices.scalar_end, n)
    alpha = charpoly.alpha_sequence(n, z, kappa, c_rule)
    b1 = float(mat.b[0])
    delta1 = (z * math.sqrt(n) - b1) / alpha[1] - 1.0
    if kmax < 2:
        warnings.warn("scalar regime is empty (k0 - l0 < 2)", stacklevel=2)
        return ScalarCoefficients(indices, kmax, np.empty(0), np.empty(0), delta1)

    k = np.arange(2, kmax + 1, dtype=np.float64)
    zk = z * np.sqrt(n / k)
    ck = c_values(c_rule, k)
    gk = mat.noise_g()[: kmax - 1]
    bk = mat.b[1:kmax]
    ak = alpha[2: kmax + 1]
    akm1 = alpha[1:kmax]
    sq = np.sqrt(k)
    u = np.full(kmax + 1, np.nan)
    v = np.full(kmax + 1, np.nan)
    v[2:] = (1.0 - ck + gk / sq) / (ak * akm1)
    u[2:] = zk / ak - 1.0 - v[2:] - bk / (ak * sq)
    return ScalarCoefficients(indices, kmax, u, v, delta1)


def linearized_delta(coeffs: ScalarCoefficients, delta1: float) -> np.ndarray:
    """bardelta_k on 1 <= k <= kmax by the forward recursion."""
    kmax = coeffs.kmax
    out = np.full(max(kmax, 1) + 1, np.nan)
    out[1] = delta1
    if kmax >= 2:
        _kernels.deltabar_kernel(coeffs.u, coeffs.v, delta1, out)
    return out


def linearized_delta_closed(coeffs: ScalarCoefficients, delta1: float) -> np.ndarray:
    """bardelta_k by the explicit sum; dual evaluation for cross-checks.

    bardelta_k = sum_j u_j prod_{l=j+1}^k v_l + delta1 prod_{l=2}^k v_l,
    evaluated through cumulative products.  Valid while the products stay in
    double range (fine for the n <= 1e3 agreement check; the recursive form
    is the one used in production).
    """
    kmax = coeffs.kmax
    out = np.full(max(kmax, 1) + 1, np.nan)
    out[1] = delta1
    if kmax < 2:
        return out
    prods = np.ones(kmax + 1)
    prods[2:] = np.cumprod(coeffs.v[2:])
    terms = coeffs.u[2:] / prods[2:]
    out[2:] = prods[2:] * (delta1 + np.cumsum(terms))
    return out


def linearized_Delta(coeffs: ScalarCoefficients, deltabar: np.ndarray) -> np.ndarray:
    """barDelta_k on 1 <= k <= kmax; barDelta_1 = 0."""
    kmax = coeffs.kmax
    out = np.full(max(kmax, 1) + 1, np.nan)
    out[1] = 0.0
    if kmax >= 2:
        _kernels.second_order_kernel(coeffs.v, deltabar, out)
    return out


def backward_weights(coeffs: ScalarCoefficients) -> np.ndarray:
    """W_j = 1 + v_{j+1} W_{j+1} for 1 <= j <= kmax, one backward pass."""
    kmax = coeffs.kmax
    out = np.full(max(kmax, 1) + 1, np.nan)
    if kmax >= 1:
        out[kmax] = 1.0
    if kmax >= 2:
        _kernels.backward_weights_kernel(coeffs.v, out)
    return out


@dataclass
class LinearizedTrace:
    """bardelta/barDelta sequences plus window-sum helpers for one replica."""

    coeffs: ScalarCoefficients
    deltabar: np.ndarray
    Deltabar: np.ndarray

    def window(self, epsilon: float) -> tuple[int, int]:
        """Index window [(1-eps) k0, k0 - l0], clipped to the valid range."""
        k0 = self.coeffs.indices.k0
        lo = max(1, math.ceil((1.0 - epsilon) * k0))
        return lo, self.coeffs.kmax

    def sum_deltabar(self, epsilon: float) -> float:
        lo, hi = self.window(epsilon)
        if lo > hi:
            return math.nan
        return math.fsum(self.deltabar[lo: hi + 1])

    def sum_Deltabar(self, epsilon: float) -> float:
        lo, hi = self.window(epsilon)
        if lo > hi:
            return math.nan
        return math.fsum(self.Deltabar[lo: hi + 1])

    def weights(self) -> np.ndarray:
        return backward_weights(self.coeffs)


def linearize(mat: JacobiMatrix, indices: CriticalIndices,
              c_rule: str | None = None) -> LinearizedTrace:
    """Convenience wrapper: coefficients plus both linearized sequences."""
    coeffs = scalar_coefficients(mat, indices, c_rule)
    dbar = linearized_delta(coeffs, coeffs.delta1)
    Dbar = linearized_Delta(coeffs, dbar)
    return LinearizedTrace(coeffs, dbar, Dbar)


@dataclass
class ScalarReport:
    """Window sums and endpoint scalings for one replica."""

    n: int
    z: float
    kappa: float
    epsilon: float
    window_lo: int
    window_hi: int
    sum_deltabar: float
    sum_Deltabar: float
    edge_scaled: float
    max_abs_delta: float
    degenerate: bool = False


def scalar_report(mat: JacobiMatrix, indices: CriticalIndices,
                  epsilon: float = 0.1,
                  trace: RecursionTrace | None = None) -> ScalarReport:
    """Per-replica diagnostics over the window [(1-eps) k0, k0 - l0].

    Reports the linearized window sums, |delta_{k0-l0}| * k0^{1/3}, and the
    largest |delta_k| seen anywhere in the scalar regime.  A degenerate
    window produces a warning record with NaN fields rather than an error.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must be in (0, 1), got {epsilon}")
    k0 = indices.k0
    kmax = min(indices.scalar_end, indices.n)
    if (1.0 - epsilon) * k0 <= 1.0 or kmax < 2:
        warnings.warn("degenerate scalar window; report carries NaN fields",
                      stacklevel=2)
        return ScalarReport(indices.n, indices.z, indices.kappa, epsilon,
                            0, -1, math.nan, math.nan, math.nan, math.nan,
                            degenerate=True)
    if trace is None:
        trace = charpoly.evolve(mat, indices.z, indices.kappa)
    lin = linearize(mat, indices)
    delta = trace.delta[1: kmax + 1]
    finite = np.isfinite(delta)
    max_abs = float(np.abs(delta[finite]).max()) if finite.any() else math.nan
    edge = trace.delta[kmax]
    edge_scaled = abs(edge) * k0 ** (1.0 / 3.0) if np.isfinite(edge) else math.nan
    lo, hi = lin.window(epsilon)
    return ScalarReport(indices.n, indices.z, indices.kappa, epsilon, lo, hi,
                        lin.sum_deltabar(epsilon), lin.sum_Deltabar(epsilon),
                        edge_scaled, max_abs)


def scalar_csv(trace: RecursionTrace, lin: LinearizedTrace) -> str:
    """Per-k CSV of the actual and linearized increments, LF line endings."""
    kmax = lin.coeffs.kmax
    buf = io.StringIO()
    buf.write("k,delta,delta_bar,Delta_bar\n")
    for k in range(1, kmax + 1):
        buf.write("%d,%.17g,%.17g,%.17g\n"
                  % (k, trace.delta[k], lin.deltabar[k], lin.Deltabar[k]))
    return buf.getvalue()
