"""Monte Carlo harness, Sturm spectral counts, and distribution tests.

The centerpiece is :func:`mc_clt`, which drives N independent replicas of
the recursion and aggregates the normalized statistic w into a report.
Replicas are keyed by stream index, so the report is a pure function of
(spec, n, z, kappa, N, seed) no matter how many worker threads run the
replicas; reduction always happens in replica order.

Spectral checks live here too: a renormalized Sturm count for the
empirical spectral distribution, the semicircle CDF, a KS test against a
callable CDF, and the Levy concentration function of a sample computed
exactly by a sliding window.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import charpoly, oscillatory, scalar_regime
from ._kernels import sturm_kernel
from .charpoly import DEFAULT_KAPPA
from .ensemble import EnsembleSpec, JacobiMatrix, Seed, sample
from .errors import DiagnosticUnavailableError, DomainError, ScheduleError

RATIO_EPS = (1e-1, 1e-2, 1e-3, 1e-4)
ESD_GRID_LO = -2.5
ESD_GRID_HI = 2.5
ESD_GRID_POINTS = 101

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x):
    """Standard normal CDF, elementwise."""
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    flat = arr.ravel()
    res = out.ravel()
    for i in range(flat.size):
        res[i] = 0.5 * (1.0 + math.erf(flat[i] / _SQRT2))
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def semicircle_cdf(x):
    """CDF of the semicircle law on [-2, 2].

    F(x) = 1/2 + x sqrt(4 - x^2)/(4 pi) + arcsin(x/2)/pi on the support,
    clamped to 0 and 1 outside.  Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    xx = np.clip(arr, -2.0, 2.0)
    out = 0.5 + xx * np.sqrt(4.0 - xx * xx) / (4.0 * math.pi) \
        + np.arcsin(xx / 2.0) / math.pi
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def ks_test(samples, cdf):
    """Kolmogorov-Smirnov statistic and asymptotic p-value.

    D is the exact sup-distance between the empirical CDF of ``samples``
    and the callable ``cdf``.  The p-value is the asymptotic Kolmogorov
    tail 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2) at lambda =
    sqrt(N) D, truncated at 100 terms and clamped to [0, 1]; it is only
    meaningful for moderate lambda, which every use here satisfies.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise DomainError("ks_test needs a nonempty sample")
    f = np.asarray(cdf(s), dtype=float)
    i = np.arange(1, n + 1, dtype=float)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1.0) / n)), 0.0)
    lam = math.sqrt(n) * d
    p = 0.0
    for j in range(1, 101):
        p += (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
    p = min(max(2.0 * p, 0.0), 1.0)
    return d, p


def levy_q(samples, eps):
    """Largest fraction of the sample inside any closed window of radius eps.

    Q(eps) = sup_x #{i : x - eps <= s_i <= x + eps} / N.  The sup is
    attained with the window's left edge at a sample point, so a sort and
    one searchsorted sweep compute it exactly in O(N log N).
    """
    if eps <= 0:
        raise DomainError(f"levy_q needs eps > 0, got {eps}")
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise DomainError("levy_q needs a nonempty sample")
    hi = np.searchsorted(s, s + 2.0 * eps, side="right")
    counts = hi - np.arange(n)
    return float(counts.max()) / n


def sturm_count(mat: JacobiMatrix, x: float) -> int:
    """Number of eigenvalues of J/sqrt(n) at or below x.

    Runs the shifted minor recursion d_k = (x sqrt(n) - b_k) d_{k-1} -
    a_{k-1}^2 d_{k-2} with per-step renormalization and counts sign
    agreements of consecutive minors.  An exact zero pivot is replaced by
    n * eps * scale carrying the predecessor's sign, which resolves the
    tie toward counting the eigenvalue as <= x.
    """
    n = mat.n
    shift = float(x) * math.sqrt(n)
    d = np.empty(n + 1)
    d[0] = np.nan
    d[1:] = shift - mat.b
    a2 = np.zeros(n)
    if n >= 2:
        a2[1:] = mat.a ** 2
    scale = max(float(np.max(np.abs(d[1:]))), float(a2.max()) if n >= 2 else 0.0, 1.0)
    tiny = n * np.finfo(float).eps * scale
    return int(sturm_kernel(d, a2, tiny))


@dataclass
class EsdReport:
    """Empirical spectral distribution of one sample against the semicircle."""

    n: int
    grid: np.ndarray
    esd: np.ndarray
    semicircle: np.ndarray
    sup_distance: float

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "grid": [float(v) for v in self.grid],
            "esd": [float(v) for v in self.esd],
            "semicircle": [float(v) for v in self.semicircle],
            "sup_distance": float(self.sup_distance),
        }
        return json.dumps(payload, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["x,esd,semicircle"]
        for x, e, f in zip(self.grid, self.esd, self.semicircle):
            lines.append("%.17g,%.17g,%.17g" % (x, e, f))
        return "\n".join(lines) + "\n"


def default_grid() -> np.ndarray:
    return np.linspace(ESD_GRID_LO, ESD_GRID_HI, ESD_GRID_POINTS)


def esd_report(spec: EnsembleSpec, n: int, seed: Seed,
               grid: np.ndarray | None = None) -> EsdReport:
    """Sturm-count ESD of a single sampled matrix along a sorted grid."""
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("esd grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) < 0):
        raise DomainError("esd grid must be sorted ascending")
    if isinstance(seed, int):
        seed = Seed(seed)
    mat = sample(n, spec, seed)
    esd = np.empty(grid.size)
    for i, x in enumerate(grid):
        esd[i] = sturm_count(mat, float(x)) / n
    semi = semicircle_cdf(grid)
    sup = float(np.max(np.abs(esd - semi)))
    return EsdReport(n=n, grid=grid, esd=esd, semicircle=semi, sup_distance=sup)


# Flags 2 (exact zero of psi) and 4 (dead trace) poison the statistic;
# flag 1 only marks a delta sentinel somewhere along the way.
_EXCLUDE_FLAGS = 0x2 | 0x4


@dataclass
class CltReport:
    """Aggregate of one Monte Carlo run of the w statistic.

    ``mean``/``var``/``skew``/``kurt`` are over replicas with no
    poisoning flag; ``kurt`` is excess kurtosis.  ``ratio_tail`` maps
    epsilon to the empirical P(|psi_n / psi_{n-1}| <= epsilon).  The
    per-replica arrays keep every replica, flagged or not.
    """

    config: dict
    n_samples: int
    mean: float
    var: float
    skew: float
    kurt: float
    ks_d: float
    ks_p: float
    ratio_tail: dict
    diagnostics: dict
    replica_w: np.ndarray = field(repr=False)
    replica_log_psi: np.ndarray = field(repr=False)
    replica_delta_end: np.ndarray = field(repr=False)
    replica_flags: np.ndarray = field(repr=False)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "n_samples": self.n_samples,
            "mean": self.mean,
            "var": self.var,
            "skew": self.skew,
            "kurt": self.kurt,
            "ks_d": self.ks_d,
            "ks_p": self.ks_p,
            "ratio_tail": self.ratio_tail,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(payload, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["replica,w,log_psi_n,delta_end,flags"]
        for r in range(self.replica_w.size):
            lines.append("%d,%.17g,%.17g,%.17g,%d" % (
                r + 1, self.replica_w[r], self.replica_log_psi[r],
                self.replica_delta_end[r], self.replica_flags[r]))
        return "\n".join(lines) + "\n"


def _moments(w: np.ndarray):
    n = w.size
    if n == 0:
        return math.nan, math.nan, math.nan, math.nan
    mean = float(np.mean(w))
    c = w - mean
    m2 = float(np.mean(c * c))
    var = float(np.var(w, ddof=1)) if n >= 2 else 0.0
    if m2 <= 0:
        return mean, var, 0.0, -3.0
    m3 = float(np.mean(c ** 3))
    m4 = float(np.mean(c ** 4))
    return mean, var, m3 / m2 ** 1.5, m4 / (m2 * m2) - 3.0


def _iqr(x: np.ndarray) -> float:
    q1, q3 = np.percentile(x, [25.0, 75.0])
    return float(q3 - q1)


def _replica_record(spec, n, z, kappa, indices, root, r, diag, epsilon, tau):
    mat = sample(n, spec, root.with_stream(r))
    tr = charpoly.evolve(mat, z, kappa)
    flags = int(np.bitwise_or.reduce(tr.flags[1:]))
    rec = {
        "w": charpoly.w_statistic(tr),
        "log_psi": tr.log_abs_psi(n),
        "delta_end": float(tr.delta[n]),
        "flags": flags,
        "ratio": tr.end_ratio(),
    }
    if "scalar" in diag:
        rep = scalar_regime.scalar_report(mat, indices, epsilon, trace=tr)
        rec["scalar"] = (rep.sum_deltabar, rep.sum_Deltabar,
                         rep.edge_scaled, rep.degenerate)
    if "transition" in diag:
        try:
            rec["transition"] = oscillatory.transition_stat(tr, indices)
        except DiagnosticUnavailableError:
            rec["transition"] = math.nan
    if "blocks" in diag:
        try:
            bt = oscillatory.blocks(tr, indices, kappa=kappa, tau=tau)
        except (DiagnosticUnavailableError, ScheduleError):
            rec["blocks"] = None
        else:
            ratios = {}
            for i in range(1, bt.i_star):
                if bt.advanced[i + 1]:
                    ratios[i] = bt.t_log[i + 1] - bt.t_log[i]
            rec["blocks"] = (bt.i_star, bt.halt, bt.schedule.i0,
                             tuple(bt.schedule.jw[1:bt.schedule.t0 + 1]), ratios)
    return rec


def mc_clt(spec: EnsembleSpec, n: int, z: float, kappa: float = DEFAULT_KAPPA,
           N: int = 100, seed: Seed | int = 0, diagnostics=(),
           threads: int | None = None, epsilon: float = 0.1,
           tau: float = 1.0 / 3.0) -> CltReport:
    """Monte Carlo estimate of the law of the w statistic.

    Replica r (r = 1..N) draws its matrix from stream r of ``seed`` and
    contributes one w value.  ``diagnostics`` is an iterable drawn from
    {"scalar", "transition", "blocks"}; enabled sections run the extra
    per-replica reductions and land in the report's diagnostics dict.
    ``threads`` only sets the worker pool size; the report is
    byte-identical for any value.  Replica warnings (regime clamps,
    degenerate windows) are suppressed here, the report carries counts
    instead.
    """
    if N < 2:
        raise DomainError(f"mc_clt needs N >= 2 replicas, got {N}")
    if not (0.0 < abs(z) < 2.0):
        raise DomainError(f"mc_clt needs 0 < |z| < 2, got z = {z}")
    if isinstance(seed, int):
        seed = Seed(seed)
    diag = frozenset(diagnostics)
    bad = diag - {"scalar", "transition", "blocks"}
    if bad:
        raise DomainError(f"unknown diagnostics flags: {sorted(bad)}")
    indices = charpoly.critical_indices(n, z, kappa)
    if threads is None:
        threads = min(os.cpu_count() or 1, N)
    threads = max(1, int(threads))

    def work(r):
        return _replica_record(spec, n, z, kappa, indices, seed, r,
                               diag, epsilon, tau)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if threads == 1:
            records = [work(r) for r in range(1, N + 1)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                records = list(pool.map(work, range(1, N + 1)))

    w = np.array([rec["w"] for rec in records])
    log_psi = np.array([rec["log_psi"] for rec in records])
    delta_end = np.array([rec["delta_end"] for rec in records])
    flags = np.array([rec["flags"] for rec in records], dtype=np.int64)
    ratio = np.array([rec["ratio"] for rec in records])

    ok = (flags & _EXCLUDE_FLAGS) == 0
    w_ok = w[ok]
    mean, var, skew, kurt = _moments(w_ok)
    if w_ok.size:
        ks_d, ks_p = ks_test(w_ok, norm_cdf)
    else:
        ks_d, ks_p = math.nan, math.nan
    ratio_ok = ratio[ok]
    ratio_tail = {}
    for eps in RATIO_EPS:
        frac = float(np.mean(ratio_ok <= eps)) if ratio_ok.size else math.nan
        ratio_tail["%.0e" % eps] = frac

    diagnostics_out = {
        "n_flagged": int(np.count_nonzero(flags)),
        "n_excluded": int(np.count_nonzero(~ok)),
    }
    if "scalar" in diag:
        rows = [rec["scalar"] for rec in records]
        good = [t for t in rows if not t[3] and math.isfinite(t[0])
                and math.isfinite(t[1])]
        sd = np.array([t[0] for t in good])
        sD = np.array([t[1] for t in good])
        edge = np.array([t[2] for t in good if math.isfinite(t[2])])
        diagnostics_out["scalar"] = {
            "epsilon": epsilon,
            "n_used": len(good),
            "mean_sum_deltabar": float(np.mean(sd)) if len(good) else math.nan,
            "var_sum_deltabar": float(np.var(sd, ddof=1)) if len(good) >= 2 else math.nan,
            "mean_sum_Deltabar": float(np.mean(sD)) if len(good) else math.nan,
            "median_edge_scaled": float(np.median(edge)) if edge.size else math.nan,
        }
    if "transition" in diag:
        vals = np.array([rec["transition"] for rec in records])
        vals = vals[np.isfinite(vals)]
        diagnostics_out["transition"] = {
            "n_used": int(vals.size),
            "median": float(np.median(vals)) if vals.size else math.nan,
            "iqr": _iqr(vals) if vals.size else math.nan,
        }
    if "blocks" in diag:
        infos = [rec["blocks"] for rec in records if rec["blocks"] is not None]
        halts = {}
        istars = []
        per_block = {}
        jw = None
        i0 = None
        for i_star, halt, sched_i0, sched_jw, ratios in infos:
            halts[halt] = halts.get(halt, 0) + 1
            istars.append(i_star)
            if jw is None:
                jw, i0 = sched_jw, sched_i0
            for i, val in ratios.items():
                per_block.setdefault(i, []).append(val)
        table = {}
        for i in sorted(per_block):
            vals = per_block[i]
            table[str(i)] = {
                "j": float(jw[i - 1]) if jw and i - 1 < len(jw) else math.nan,
                "alive": len(vals),
                "var_log_t_ratio": float(np.var(vals, ddof=1)) if len(vals) >= 2 else math.nan,
            }
        diagnostics_out["blocks"] = {
            "tau": tau,
            "n_used": len(infos),
            "i0": i0 if i0 is not None else 0,
            "mean_i_star": float(np.mean(istars)) if istars else math.nan,
            "halts": dict(sorted(halts.items())),
            "per_block": table,
        }

    config = {
        "spec": json.loads(spec.to_json()),
        "n": n,
        "z": z,
        "kappa": kappa,
        "N": N,
        "seed": {"root": seed.root, "stream": seed.stream},
        "diagnostics": sorted(diag),
    }
    return CltReport(
        config=config, n_samples=N, mean=mean, var=var, skew=skew, kurt=kurt,
        ks_d=ks_d, ks_p=ks_p, ratio_tail=ratio_tail,
        diagnostics=diagnostics_out, replica_w=w, replica_log_psi=log_psi,
        replica_delta_end=delta_end, replica_flags=flags)
