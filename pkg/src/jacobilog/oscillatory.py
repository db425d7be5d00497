"""Rotation-angle machinery above the critical index.

Past k0 + l0 the step matrix A_k has complex eigenvalues and the two-vector
X_k spins.  Conjugating by a per-index basis Q_l turns the noise-free step
at k0 + l into rho_l times a rotation by theta_l, so the evolution is best
watched in that frame: blocks of indices are chosen so the accumulated
rotation angle is nearly a multiple of 2*pi, and the block-to-block map
reduces to a scalar amplification t_i plus a small tilt eps_i.

Everything random flows through the trace produced by charpoly.evolve; this
module only re-expresses it.  Matrix products over blocks are evaluated in
log-scale with per-step renormalization, angle sums with compensated
summation, and residues by argument reduction on the running sum.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, charpoly
from .charpoly import CriticalIndices, RecursionTrace
from .ensemble import c_values
from .errors import (DiagnosticUnavailableError, DomainError, RegimeError,
                     ScheduleError, SingularBasisError)

#: psi-zero and dead-state flag bits from the trace (delta-undefined is benign)
_BAD_FLAGS = 0x2 | 0x4


@dataclass
class RotationData:
    """Per-l rotation ingredients, arrays indexed by l (entry 0 is padding)."""

    indices: CriticalIndices
    lmax: int
    rho: np.ndarray
    w: np.ndarray
    theta: np.ndarray


def rotation_data(indices: CriticalIndices, c_rule: str = "gbe",
                  lmax: int | None = None) -> RotationData:
    """rho_l, w_l, theta_l for 1 <= l <= lmax.

    theta is computed as arccos(w/2) rather than through arcsin; near the
    regime edge w is close to 2 and arccos keeps full relative accuracy in
    the small angle.
    """
    n, z, k0 = indices.n, indices.z, indices.k0
    if lmax is None:
        lmax = n - k0
    if not 1 <= lmax <= n - k0:
        raise DomainError(f"lmax must be in 1..{n - k0}, got {lmax}")
    l = np.arange(1, lmax + 1, dtype=np.float64)
    rho = np.sqrt(1.0 - c_values(c_rule, k0 + l))
    w = z * np.sqrt(n / (k0 + l)) / rho
    bad = np.nonzero(np.abs(w) > 2.0)[0]
    if bad.size:
        lb = int(bad[0]) + 1
        raise RegimeError(
            f"|w_l| > 2 at l={lb} (w={w[bad[0]]:.6g}); index k0+l={k0 + lb} "
            "is not in the oscillatory regime under this c-rule")
    pad = np.full(1, np.nan)
    return RotationData(indices, lmax,
                        np.concatenate([pad, rho]),
                        np.concatenate([pad, w]),
                        np.concatenate([pad, np.arccos(w / 2.0)]))


def rotation(indices: CriticalIndices, c_rule: str, l: int):
    """(rho_l, theta_l, w_l) for a single offset l >= 1."""
    data = rotation_data(indices, c_rule, lmax=l)
    return float(data.rho[l]), float(data.theta[l]), float(data.w[l])


def q_basis(w: float) -> tuple[np.ndarray, np.ndarray]:
    """The basis Q_l = [[w/2, -sqrt(4-w^2)/2], [1, 0]] and its inverse."""
    if abs(w) >= 2.0:
        if abs(w) == 2.0:
            raise SingularBasisError(f"q_basis is singular at w = {w}")
        raise RegimeError(f"|w| > 2 (w = {w}) is outside the rotation regime")
    s = math.sqrt(4.0 - w * w)
    q = np.array([[w / 2.0, -s / 2.0], [1.0, 0.0]])
    qinv = np.array([[0.0, 1.0], [-2.0 / s, w / s]])
    return q, qinv


def rotation_matrix(angle: float) -> np.ndarray:
    """U_alpha = [[cos, sin], [-sin, cos]]; note U_alpha rotates the
    atan2-angle of a vector by -alpha."""
    return np.array([[math.cos(angle), math.sin(angle)],
                     [-math.sin(angle), math.cos(angle)]])


def _q_hat(w: float) -> tuple[np.ndarray, np.ndarray]:
    """The block-frame basis: q_basis with its second column negated.

    In this frame the noise-free step at k0+l is exactly rho_l times the
    rotation U_{theta_l} after the diag(1, rho_l) similarity; with the
    unreflected basis the step rotates the other way and the stopping-rule
    algebra below would need every sign flipped.
    """
    if abs(w) >= 2.0:
        if abs(w) == 2.0:
            raise SingularBasisError(f"block frame is singular at w = {w}")
        raise RegimeError(f"|w| > 2 (w = {w}) is outside the rotation regime")
    s = math.sqrt(4.0 - w * w)
    q = np.array([[w / 2.0, s / 2.0], [1.0, 0.0]])
    qinv = np.array([[0.0, 1.0], [2.0 / s, -w / s]])
    return q, qinv


@dataclass
class YVector:
    """A 2-vector stored as a sign-carrying unit direction and log of norm."""

    direction: np.ndarray
    log_norm: float

    def value(self) -> np.ndarray:
        """The literal vector; only safe when log_norm is moderate."""
        return math.exp(self.log_norm) * self.direction

    def t_log_eps(self) -> tuple[float, int, float]:
        """(log|t|, sign(t), eps) for y = t (1, eps); eps=inf if t = 0."""
        d0, d1 = float(self.direction[0]), float(self.direction[1])
        if d0 == 0.0:
            return -math.inf, 0, math.inf
        return self.log_norm + math.log(abs(d0)), (1 if d0 > 0 else -1), d1 / d0


def change_basis(trace: RecursionTrace, l: int, indices: CriticalIndices,
                 c_rule: str = "gbe",
                 rot: RotationData | None = None) -> YVector:
    """Y_l = (r_l / psi_{k0-l0}) Q_l^{-1} X_{k0+l}, all in log-scale.

    r_l is the product of rho_j^{-1} over l0 < j <= l.  The returned
    direction carries the overall sign (including the sign of the
    normalizing psi).
    """
    k0, l0 = indices.k0, indices.l0
    if l < l0:
        raise DomainError(f"change_basis needs l >= l0 = {l0}, got {l}")
    k = k0 + l
    if k > trace.mat.n:
        raise DomainError(f"trace covers k <= {trace.mat.n}, needs {k}")
    anchor = indices.scalar_end
    if trace.flags[anchor] & _BAD_FLAGS or trace.flags[k] & _BAD_FLAGS:
        raise DiagnosticUnavailableError(
            "trace is flagged at the anchor or target index; "
            "change of basis undefined")
    if rot is None:
        rot = rotation_data(indices, c_rule, lmax=l)
    _, qinv = q_basis(float(rot.w[l]))
    vec = qinv @ np.array([trace.u1[k], trace.u2[k]])
    norm = math.hypot(vec[0], vec[1])
    if norm == 0.0:
        raise DiagnosticUnavailableError("basis change produced a zero vector")
    r_log = -math.fsum(np.log(rot.rho[l0 + 1: l + 1]))
    s0 = int(trace.sign[anchor])
    log_norm = trace.s[k] + math.log(norm) + r_log - trace.log_abs_psi(anchor)
    return YVector(s0 * vec / norm, log_norm)


@dataclass
class BlockSchedule:
    """Deterministic block lengths and weights for one (k0, kappa, tau, nu)."""

    k0: int
    kappa: float
    tau: float
    nu: float
    i0: int
    i1: int
    j0: int
    t0: int
    hl: np.ndarray
    jw: np.ndarray

    @property
    def n_kappa(self) -> int:
        return int(self.hl[self.t0])

    def dhl(self, i: int) -> int:
        """Forward difference hl_{i+1} - hl_i, defined for 1 <= i < t0."""
        return int(self.hl[i + 1] - self.hl[i])


def block_schedule(k0: int, kappa: float, tau: float = 1.0 / 3.0,
                   nu: float | None = None) -> BlockSchedule:
    """Two-branch deterministic blocks hl_i and their weights j_i.

    nu defaults to the midpoint 1.5 * kappa, which is what schedule
    previews use before a realized first stopping time exists.
    """
    if nu is None:
        nu = 1.5 * kappa
    problems = []
    if not 0.25 < tau < 0.4:
        problems.append(f"tau in (1/4, 2/5) violated: tau = {tau}")
    if not kappa <= nu <= 2.0 * kappa:
        problems.append(f"nu in [kappa, 2 kappa] violated: nu = {nu}, "
                        f"kappa = {kappa}")
    nu32 = math.ceil(nu ** 1.5)
    i0 = int(math.floor(k0 ** tau)) - nu32
    i1 = int(math.floor(k0 ** ((1.0 - tau) / 3.0)))
    j0 = i1 - math.ceil(math.sqrt(kappa))
    if i0 < 1:
        problems.append(f"i0 >= 1 violated: floor(k0^tau) - ceil(nu^(3/2)) = {i0}")
    if j0 < 1:
        problems.append(f"j0 >= 1 violated: i1 - ceil(sqrt(kappa)) = {j0}")
    if problems:
        raise ScheduleError("; ".join(problems))
    t0 = i0 + j0
    hl = np.zeros(t0 + 1, dtype=np.int64)
    jw = np.full(t0 + 1, np.nan)
    third = k0 ** (1.0 / 3.0)
    for i in range(1, t0 + 1):
        if i <= i0:
            jw[i] = i - 1 + nu ** 1.5
            hl[i] = int(math.floor(third * jw[i] ** (2.0 / 3.0)))
        else:
            jw[i] = i0 + i1 - i
            hl[i] = int(math.floor(k0 / jw[i] ** 2))
    return BlockSchedule(k0, kappa, tau, nu, i0, i1, j0, t0, hl, jw)


@dataclass
class BlockTrace:
    """Realized stopping times and per-block states for one replica."""

    schedule: BlockSchedule
    l: np.ndarray
    t_log: np.ndarray
    t_sign: np.ndarray
    eps: np.ndarray
    delta_res: np.ndarray
    advanced: np.ndarray
    i_star: int
    halt: str
    nu_realized: float
    nu_clamped: bool
    wlog_failed: bool
    truncated: bool
    log_y0_norm: float = math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i,l_i,t_log,eps_i,delta_residue,advanced\n")
        for i in range(1, self.i_star + 1):
            buf.write("%d,%d,%.17g,%.17g,%.17g,%d\n"
                      % (i, self.l[i], self.t_log[i], self.eps[i],
                         self.delta_res[i], self.advanced[i]))
        return buf.getvalue()


def _block_frame_y(trace: RecursionTrace, l: int, indices: CriticalIndices,
                   rot: RotationData) -> YVector:
    """Y_l re-expressed in the block frame (second component negated)."""
    y = change_basis(trace, l, indices, rot=rot)
    return YVector(y.direction * np.array([1.0, -1.0]), y.log_norm)


def _initial_stop(trace: RecursionTrace, indices: CriticalIndices,
                  rot: RotationData, l_cap: int):
    """First l >= l0 whose rotated anchor direction nearly kills e_2.

    Returns (l1, wlog_failed, found).  The test rotates the block-frame
    Y_{l0} by the exact angle sum and asks |<U_alpha y, e_2>| <=
    2 sqrt(l0/k0) ||y||; if that already holds at l = l0 the assumed
    starting condition failed and the stop is immediate (recorded, not
    fatal).
    """
    k0, l0 = indices.k0, indices.l0
    y = _block_frame_y(trace, l0, indices, rot)
    d1, d2 = float(y.direction[0]), float(y.direction[1])
    thresh = 2.0 * math.sqrt(l0 / k0)
    if abs(d2) <= thresh:
        return l0, True, True
    angle = 0.0
    comp = 0.0
    for l in range(l0 + 1, l_cap + 1):
        t = rot.theta[l] - comp
        s = angle + t
        comp = (s - angle) - t
        angle = s
        if abs(-math.sin(angle) * d1 + math.cos(angle) * d2) <= thresh:
            return l, False, True
    return l_cap, False, False


def run_blocks(trace: RecursionTrace, schedule: BlockSchedule,
               indices: CriticalIndices, c_rule: str = "gbe") -> BlockTrace:
    """Realize the stopping times l_i and block states y_i = t_i (1, eps_i).

    The first stop l_1 comes from the rotated-anchor rule; from then on
    l_{i+1} is the first candidate at distance >= hl_{i+1} - hl_i whose
    angle residue delta satisfies |delta + delta^2 eps_i / 2 - eps_i|
    <= 6 sqrt(l_i / k0).  Between stops the state is pushed through the
    actual sampled one-step matrices, wrapped in the block-frame bases at
    both ends and rescaled by the rho product, so y_{i+1} = T_{l_i, l_{i+1}}
    y_i exactly.  (t_i, eps_i) are reported in the block frame, whose
    second axis is the negative of the q_basis one; that is the frame in
    which the residue test above matches the true rotation direction.
    Halts when l_i >= n_kappa or |eps_i| > 1/2; searches past
    min(k0/kappa, n - k0) truncate the trace with a warning.
    """
    idx = indices
    k0, l0, n = idx.k0, idx.l0, idx.n
    hard_cap = min(int(k0 / schedule.kappa), n - k0)
    if hard_cap <= l0:
        raise DomainError(f"oscillatory range is empty: cap {hard_cap} <= l0 {l0}")
    rot = rotation_data(idx, c_rule, lmax=hard_cap)
    _, _, coef1, coef2 = charpoly._recursion_coefficients(
        trace.mat, idx.z, idx.kappa, c_rule)

    nmax = schedule.t0 + 2
    l_arr = np.zeros(nmax, dtype=np.int64)
    t_log = np.full(nmax, np.nan)
    t_sign = np.zeros(nmax, dtype=np.int8)
    eps = np.full(nmax, np.nan)
    delta_res = np.full(nmax, np.nan)
    advanced = np.zeros(nmax, dtype=np.int8)

    init_cap = min(hard_cap, max(l0 + 1, int(4.0 * schedule.kappa * k0 ** (1.0 / 3.0))))
    l1, wlog_failed, found = _initial_stop(trace, idx, rot, init_cap)
    if not found:
        warnings.warn("no initial stopping time found below the search cap; "
                      "using the cap", stacklevel=2)
    nu_realized = l1 / k0 ** (1.0 / 3.0)
    nu_clamped = not schedule.kappa <= nu_realized <= 2.0 * schedule.kappa

    y = _block_frame_y(trace, l1, idx, rot)
    tl, ts, e = y.t_log_eps()
    l_arr[1], t_log[1], t_sign[1], eps[1] = l1, tl, ts, e
    advanced[1] = 1

    i = 1
    halt = "exhausted"
    truncated = False
    while True:
        if l_arr[i] >= schedule.n_kappa:
            halt = "n_kappa"
            break
        if not abs(eps[i]) <= 0.5:
            halt = "eps"
            break
        if i >= schedule.t0:
            halt = "exhausted"
            break
        li = int(l_arr[i])
        l_begin = li + schedule.dhl(i)
        if l_begin > hard_cap:
            truncated = True
            halt = "truncated"
            warnings.warn("block search window exceeds the validity range; "
                          "trace truncated", stacklevel=2)
            break
        q, _ = _q_hat(float(rot.w[li]))
        vec = q @ np.array([1.0, eps[i]])
        vnorm = math.hypot(vec[0], vec[1])
        log_acc = t_log[i] + math.log(vnorm)
        v1, v2 = float(vec[0]) / vnorm * t_sign[i], float(vec[1]) / vnorm * t_sign[i]
        v1, v2, lsc, ok = _kernels.propagate_kernel(
            coef1, coef2, k0 + li, k0 + l_begin, v1, v2)
        if not ok:
            halt = "dead"
            break
        res, comp = _kernels.angle_residue_kernel(rot.theta, li, l_begin, 0.0, 0.0)
        thresh = 6.0 * math.sqrt(li / k0)
        l_stop, v1, v2, lsc2, res, comp, stopped, ok = _kernels.block_scan_kernel(
            coef1, coef2, rot.theta, k0, l_begin, res, comp,
            eps[i], thresh, hard_cap, v1, v2)
        if not ok:
            halt = "dead"
            break
        if not stopped:
            truncated = True
            halt = "truncated"
            warnings.warn("stopping-time search hit the validity range cap; "
                          "trace truncated", stacklevel=2)
            break
        _, qinv = _q_hat(float(rot.w[l_stop]))
        out = qinv @ np.array([v1, v2])
        onorm = math.hypot(out[0], out[1])
        if onorm == 0.0:
            halt = "dead"
            break
        rho_log = -math.fsum(np.log(rot.rho[li + 1: l_stop + 1]))
        log_acc += lsc + lsc2 + rho_log + math.log(onorm)
        d0, d1 = out[0] / onorm, out[1] / onorm
        i += 1
        l_arr[i] = l_stop
        delta_res[i] = res
        advanced[i] = 1
        if d0 == 0.0:
            t_log[i], t_sign[i], eps[i] = -math.inf, 0, math.inf
        else:
            t_log[i] = log_acc + math.log(abs(d0))
            t_sign[i] = 1 if d0 > 0 else -1
            eps[i] = d1 / d0

    return BlockTrace(schedule, l_arr, t_log, t_sign, eps, delta_res,
                      advanced, i, halt, nu_realized, nu_clamped,
                      wlog_failed, truncated, log_y0_norm=y.log_norm)


def blocks(trace: RecursionTrace, indices: CriticalIndices,
           kappa: float | None = None, tau: float = 1.0 / 3.0,
           c_rule: str = "gbe") -> BlockTrace:
    """Driver: realize l_1, clamp nu into [kappa, 2 kappa], run the blocks."""
    idx = indices
    if kappa is None:
        kappa = idx.kappa
    k0, l0 = idx.k0, idx.l0
    hard_cap = min(int(k0 / kappa), idx.n - k0)
    if hard_cap <= l0:
        raise DomainError(f"oscillatory range is empty: cap {hard_cap} <= l0 {l0}")
    rot = rotation_data(idx, c_rule, lmax=hard_cap)
    init_cap = min(hard_cap, max(l0 + 1, int(4.0 * kappa * k0 ** (1.0 / 3.0))))
    l1, _, _ = _initial_stop(trace, idx, rot, init_cap)
    nu = l1 / k0 ** (1.0 / 3.0)
    if not kappa <= nu <= 2.0 * kappa:
        warnings.warn(f"realized nu = {nu:.3f} outside [kappa, 2 kappa]; "
                      "clamped for the schedule", stacklevel=2)
        nu = min(max(nu, kappa), 2.0 * kappa)
    schedule = block_schedule(k0, kappa, tau, nu)
    return run_blocks(trace, schedule, idx, c_rule)


def transition_stat(trace: RecursionTrace, indices: CriticalIndices) -> float:
    """log |psi_{k0+l0} / psi_{k0-l0}|, the transition-window amplification."""
    lo = indices.scalar_end
    hi = indices.k0 + indices.l0
    if hi > trace.mat.n:
        raise DomainError(f"trace covers k <= {trace.mat.n}, needs {hi}")
    if trace.flags[lo] & _BAD_FLAGS or trace.flags[hi] & _BAD_FLAGS:
        raise DiagnosticUnavailableError("transition endpoints are flagged")
    return trace.log_abs_psi(hi) - trace.log_abs_psi(lo)


def angle_sum(indices: CriticalIndices, c_rule: str, l: int, lp: int):
    """(alpha_{l,l'}, residue): compensated total and its mod-2pi residue.

    The total is an fsum over theta_j, j in (l, l']; the residue reduces the
    running sum into (-pi, pi] as it accumulates, never per term.
    """
    if l > lp:
        raise DomainError(f"need l <= l', got {l} > {lp}")
    if l < 0 or lp > indices.n - indices.k0:
        raise RegimeError("angle_sum indices outside the oscillatory regime")
    if l == lp:
        return 0.0, 0.0
    rot = rotation_data(indices, c_rule, lmax=lp)
    total = math.fsum(rot.theta[l + 1: lp + 1])
    res, _ = _kernels.angle_residue_kernel(rot.theta, l, lp, 0.0, 0.0)
    return total, res
