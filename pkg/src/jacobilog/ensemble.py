"""Random Jacobi (symmetric tridiagonal) matrix ensembles.

A matrix is stored as the off-diagonal vector ``a`` (length n-1) and the
diagonal vector ``b`` (length n), oriented so that ``b[0]`` is b_1, the
bottom-right corner entry, with ``a[0]`` = a_1 next to it.  The order-k
principal minors used throughout the package are the bottom-right ones, so
the recursion consumes b_1, a_1, b_2, a_2, ... in array order.

Two ensembles are supported:

* ``gbe``: the tridiagonal realization of the Gaussian beta ensemble.
  Diagonal entries are centered Gaussians with variance v = 2/beta, and
  sqrt(beta) * a_i is chi-distributed with i*beta degrees of freedom,
  realized as the square root of a gamma variate with shape i*beta/2 and
  scale 2.
* ``general``: a_{k-1} = sqrt( sqrt(k(k-1)) * (1 - c_k + g_k/sqrt(k)) )
  with b_k, g_k independent centered draws of common variance v from a
  fixed palette of laws, and c_k given by a named decay rule.  A draw of
  g_k making the radicand negative is rejected and redrawn; a rejection
  rate above 1% over the whole sequence marks the ensemble degenerate.

Reproducibility contract: sampling is driven by a counter-based generator
(numpy Philox) keyed by the (root, stream) pair, with the diagonal drawn
before the off-diagonal, so a given Seed always yields bit-identical
matrices regardless of what else ran in the process.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpecError, DomainError

NOISE_LAWS = ("gaussian", "uniform", "laplace", "zero")
C_RULES = ("gbe", "zero", "half")


def gbe_ck(k):
    """Exact decay sequence c_k = 1 - sqrt((k-1)/k) matching the gbe ensemble.

    Centering the squared off-diagonal: E a_{k-1}^2 = k-1, so
    g_k = (a_{k-1}^2 - (k-1))/sqrt(k-1) is centered with variance exactly
    2/beta.  k*c_k -> 1/2.  Accepts scalars or arrays, k >= 1.
    """
    k = np.asarray(k, dtype=np.float64)
    return (1.0 - np.sqrt((k - 1.0) / k)).item() if k.ndim == 0 else 1.0 - np.sqrt((k - 1.0) / k)


def c_values(rule, k):
    """Evaluate a named c-rule at indices k (scalar or array, k >= 1)."""
    if rule == "gbe":
        return gbe_ck(k)
    k = np.asarray(k, dtype=np.float64)
    if rule == "zero":
        out = np.zeros_like(k)
    elif rule == "half":
        out = 1.0 / (2.0 * k)
    else:
        raise DomainError(f"unknown c rule {rule!r}; expected one of {C_RULES}")
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class Seed:
    """(root, stream) pair keying a splittable counter-based generator.

    Distinct pairs give statistically independent streams; the same pair
    reproduces the exact byte-for-byte sample.  Monte Carlo drivers use
    stream = replica index.
    """

    root: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(np.random.SeedSequence([self.root, self.stream]))
        )

    def with_stream(self, stream: int) -> "Seed":
        return Seed(self.root, stream)


@dataclass(frozen=True)
class EnsembleSpec:
    """Which ensemble to draw from.

    kind="gbe" uses ``beta`` only; kind="general" uses ``v`` (common variance
    of the b and g noise), the two law names, and the c-rule name.  JSON
    round-trips via :meth:`to_json` / :meth:`from_json` with the compact
    schema ``{"kind":"gbe","beta":2.0}`` or
    ``{"kind":"general","v":1.0,"b_law":"gaussian","g_law":"uniform","c":"gbe"}``.
    """

    kind: str = "gbe"
    beta: float = 2.0
    v: float = 1.0
    b_law: str = "gaussian"
    g_law: str = "gaussian"
    c_rule: str = "gbe"

    def __post_init__(self):
        if self.kind not in ("gbe", "general"):
            raise DomainError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "gbe" and not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.kind == "general":
            if not self.v > 0:
                raise DomainError(f"noise variance v must be positive, got {self.v}")
            for law in (self.b_law, self.g_law):
                if law not in NOISE_LAWS:
                    raise DomainError(
                        f"unknown noise law {law!r}; palette is {NOISE_LAWS} "
                        "(heavy-tailed laws are not accepted)"
                    )
            if self.c_rule not in C_RULES:
                raise DomainError(f"unknown c rule {self.c_rule!r}; expected one of {C_RULES}")

    @property
    def variance(self) -> float:
        """The common noise variance v (2/beta for gbe)."""
        return 2.0 / self.beta if self.kind == "gbe" else self.v

    def to_json(self) -> str:
        if self.kind == "gbe":
            payload = {"kind": "gbe", "beta": self.beta}
        else:
            payload = {
                "kind": "general",
                "v": self.v,
                "b_law": self.b_law,
                "g_law": self.g_law,
                "c": self.c_rule,
            }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleSpec":
        data = json.loads(text)
        kind = data.get("kind")
        if kind == "gbe":
            return cls(kind="gbe", beta=float(data.get("beta", 2.0)))
        if kind == "general":
            return cls(
                kind="general",
                v=float(data.get("v", 1.0)),
                b_law=data.get("b_law", "gaussian"),
                g_law=data.get("g_law", "gaussian"),
                c_rule=data.get("c", "gbe"),
            )
        raise DomainError(f"unknown ensemble kind {kind!r} in config")


@dataclass(frozen=True)
class JacobiMatrix:
    """One sampled matrix: n, off-diagonal a (len n-1), diagonal b (len n).

    ``spec`` records the generating ensemble so downstream code can recover
    the c-rule and noise variance without carrying them separately.
    """

    n: int
    a: np.ndarray
    b: np.ndarray
    spec: EnsembleSpec

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"matrix size must be >= 1, got {self.n}")
        if len(self.b) != self.n or len(self.a) != self.n - 1:
            raise DomainError(
                f"shape mismatch: n={self.n} but len(a)={len(self.a)}, len(b)={len(self.b)}"
            )

    def to_dense(self) -> np.ndarray:
        """Dense symmetric matrix with b_n at top-left and b_1 at bottom-right."""
        j = np.diag(self.b[::-1])
        if self.n > 1:
            off = self.a[::-1]
            j += np.diag(off, 1) + np.diag(off, -1)
        return j

    def noise_g(self) -> np.ndarray:
        """Recover g_k for k = 2..n from a and the ensemble's c-rule.

        Inverts a_{k-1}^2 = sqrt(k(k-1)) * (1 - c_k + g_k/sqrt(k)); for the
        gbe spec this reduces to (a_{k-1}^2 - (k-1))/sqrt(k-1).
        """
        k = np.arange(2, self.n + 1, dtype=np.float64)
        c = c_values(self.spec.c_rule if self.spec.kind == "general" else "gbe", k)
        return np.sqrt(k) * (self.a**2 / np.sqrt(k * (k - 1.0)) - (1.0 - c))


def _draw(rng, law, variance, size):
    if law == "gaussian":
        return rng.normal(0.0, math.sqrt(variance), size)
    if law == "uniform":
        half = math.sqrt(3.0 * variance)  # width 2*half, variance half^2/3
        return rng.uniform(-half, half, size)
    if law == "laplace":
        return rng.laplace(0.0, math.sqrt(variance / 2.0), size)
    if law == "zero":
        return np.zeros(size)
    raise DomainError(f"unknown noise law {law!r}")


def sample_gbe(n: int, beta: float, seed: Seed) -> JacobiMatrix:
    """Draw one gbe matrix of size n at inverse temperature beta."""
    spec = EnsembleSpec(kind="gbe", beta=beta)
    if n < 1:
        raise DomainError(f"matrix size must be >= 1, got {n}")
    rng = seed.generator()
    b = rng.normal(0.0, math.sqrt(2.0 / beta), n)
    i = np.arange(1, n, dtype=np.float64)
    gam = rng.gamma(shape=i * beta / 2.0, scale=2.0)
    a = np.sqrt(gam / beta)
    return JacobiMatrix(n=n, a=a, b=b, spec=spec)


def sample_general(n: int, spec: EnsembleSpec, seed: Seed) -> JacobiMatrix:
    """Draw one matrix from a general spec, rejection-resampling bad g draws.

    The draw order is: all of b, then the g vector, then per-round redraws of
    the indices whose radicand came out negative.  A total rejection count
    above 1% of n-1 raises DegenerateSpecError.
    """
    if spec.kind == "gbe":
        return sample_gbe(n, spec.beta, seed)
    if n < 1:
        raise DomainError(f"matrix size must be >= 1, got {n}")
    rng = seed.generator()
    b = _draw(rng, spec.b_law, spec.v, n)
    if n == 1:
        return JacobiMatrix(n=1, a=np.zeros(0), b=b, spec=spec)
    k = np.arange(2, n + 1, dtype=np.float64)
    base = np.sqrt(k * (k - 1.0))
    c = c_values(spec.c_rule, k)
    g = _draw(rng, spec.g_law, spec.v, n - 1)
    radicand = base * (1.0 - c + g / np.sqrt(k))
    rejections = 0
    bad = radicand < 0.0
    while bad.any():
        rejections += int(bad.sum())
        if rejections > 0.01 * (n - 1):
            raise DegenerateSpecError(
                f"rejection rate exceeded 1% ({rejections} redraws over {n - 1} "
                f"off-diagonal entries); spec {spec.to_json()} is degenerate"
            )
        g[bad] = _draw(rng, spec.g_law, spec.v, int(bad.sum()))
        radicand[bad] = base[bad] * (1.0 - (c[bad] if np.ndim(c) else c) + g[bad] / np.sqrt(k[bad]))
        bad = radicand < 0.0
    a = np.sqrt(radicand)
    return JacobiMatrix(n=n, a=a, b=b, spec=spec)


def sample(n: int, spec: EnsembleSpec, seed: Seed) -> JacobiMatrix:
    """Dispatch on spec.kind."""
    if spec.kind == "gbe":
        return sample_gbe(n, spec.beta, seed)
    return sample_general(n, spec, seed)
