"""Evaluation measures: RMSE/MAE, improvement, trajectory error, paired t.

The paired t-test's two-sided p-value is computed exactly through the
regularized incomplete beta function,

    p = I_x(df/2, 1/2),   x = df / (df + t^2),

with the incomplete beta evaluated by the standard continued-fraction
(modified Lentz) expansion rather than a table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import Trajectory


class ZeroVarianceError(ValueError):
    """Paired differences have no variance; t is undefined."""


def _as_pair(ground, pred):
    g = np.asarray(ground, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if g.size == 0 or p.size == 0:
        raise ValueError("sequences must be non-empty")
    if g.shape != p.shape:
        raise ValueError(f"length mismatch: {g.shape} vs {p.shape}")
    return g, p


def rmse(ground, pred) -> float:
    g, p = _as_pair(ground, pred)
    return float(np.sqrt(np.mean((g - p) ** 2)))


def mae(ground, pred) -> float:
    g, p = _as_pair(ground, pred)
    return float(np.mean(np.abs(g - p)))


def improvement(rmse_case: float, rmse_case1: float) -> float:
    """Absolute relative RMSE difference vs the baseline, in percent."""
    if rmse_case1 <= 0:
        raise ValueError("baseline RMSE must be positive")
    return abs(rmse_case - rmse_case1) / rmse_case1 * 100.0


def trajectory_rmse(ground: Trajectory, test: Trajectory, t_start_ms=None, t_end_ms=None) -> float:
    """RMSE between lateral-offset traces, on the ground timestamps.

    The test trace is linearly interpolated onto the ground grid over the
    overlapping time range (optionally windowed); disjoint ranges are an
    error.
    """
    lo = max(ground.t_ms[0], test.t_ms[0])
    hi = min(ground.t_ms[-1], test.t_ms[-1])
    if t_start_ms is not None:
        lo = max(lo, t_start_ms)
    if t_end_ms is not None:
        hi = min(hi, t_end_ms)
    sel = (ground.t_ms >= lo) & (ground.t_ms <= hi)
    if hi < lo or not sel.any():
        raise ValueError("trajectories share no usable time range")
    t = ground.t_ms[sel]
    test_lat = np.interp(t, test.t_ms, test.lateral_m)
    return rmse(ground.lateral_m[sel], test_lat)


# ---------------------------------------------------------------------------
# paired t-test


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    reject: bool


def paired_t_test(ground, case, alpha: float = 0.05) -> TTestResult:
    g, c = _as_pair(ground, case)
    n = g.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = c - g
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("paired differences are constant; t-test undefined")
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = t_two_sided_p(t, df)
    return TTestResult(t=t, df=df, p=p, reject=p < alpha)


def t_two_sided_p(t: float, df: int) -> float:
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the continued-fraction expansion (Lentz's method)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the expansion converges quickly only for x below the split point
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 3e-16) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError(f"incomplete beta failed to converge for a={a}, b={b}, x={x}")
