"""Ripley K/L-function estimation with Monte Carlo envelopes.

The classical unweighted estimator is the default,
K(t) = (A / (n (n-1))) * sum_{k != l} e_kl 1(d_kl <= t), with edge
weights e_kl = 1; the optional translation correction uses
e_kl = A / ((W - |dx|)(H - |dy|)). Envelope and data curves share the
estimator, so in the envelope comparison any boundary bias cancels.
L(t) = sqrt(K(t) / pi), reported as L(t) - t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .neighbors import ValidationError, _as_rectangle
from .nullmodels import NullSpec, _rep_rng, generate

__all__ = ["LCurve", "l_univariate", "l_bivariate", "l_envelope"]

_ROW_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class LCurve:
    """L(t) - t on a distance grid, optionally with MC envelope bounds."""

    t_grid: np.ndarray
    l_minus_t: np.ndarray
    env_low: np.ndarray | None = None
    env_high: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=np.float64)
        v = np.asarray(self.l_minus_t, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise ValidationError("t_grid and l_minus_t must be aligned vectors")
        for name in ("env_low", "env_high"):
            env = getattr(self, name)
            if env is not None and np.asarray(env).shape != t.shape:
                raise ValidationError(f"{name} must align with t_grid")

    def with_envelope(self, env_low, env_high) -> "LCurve":
        return LCurve(self.t_grid, self.l_minus_t, env_low, env_high)


def _t_grid(t_max: float, n_steps: int) -> np.ndarray:
    t_max = float(t_max)
    n_steps = int(n_steps)
    if not (math.isfinite(t_max) and t_max > 0):
        raise ValidationError("t_max must be positive")
    if n_steps < 1:
        raise ValidationError("need at least one grid step")
    return np.linspace(t_max / n_steps, t_max, n_steps)


def _coords(points, minimum: int, what: str) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"{what} must be an (n, 2) coordinate array")
    if arr.shape[0] < minimum:
        raise ValidationError(f"{what} needs at least {minimum} points")
    return arr


def _cum_weight(a: np.ndarray, b: np.ndarray, grid, region, correction, skip_self: bool):
    """Sum of pair weights with d <= t for each grid t, pairs ordered (a, b)."""
    xmin, ymin, xmax, ymax = region
    w, h = xmax - xmin, ymax - ymin
    area = w * h
    totals = np.zeros(grid.size, dtype=np.float64)
    for lo in range(0, a.shape[0], _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, a.shape[0])
        dx = a[lo:hi, 0, None] - b[None, :, 0]
        dy = a[lo:hi, 1, None] - b[None, :, 1]
        d = np.hypot(dx, dy)
        if correction == "translation":
            weights = area / ((w - np.abs(dx)) * (h - np.abs(dy)))
        else:
            weights = np.ones_like(d)
        if skip_self:
            rows = np.arange(hi - lo)
            d[rows, np.arange(lo, hi)] = np.inf
        flat = d.ravel()
        order = np.argsort(flat, kind="stable")
        sorted_d = flat[order]
        cum = np.cumsum(weights.ravel()[order])
        pos = np.searchsorted(sorted_d, grid, side="right")
        totals += np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)
    return totals


def _check_correction(edge_correction: str) -> str:
    if edge_correction not in ("none", "translation"):
        raise ValidationError("edge_correction must be 'none' or 'translation'")
    return edge_correction


def l_univariate(points, region, t_max: float, n_steps: int, edge_correction: str = "none") -> LCurve:
    """L(t) - t for one class of points."""
    coords = _coords(points, 2, "points")
    region = _as_rectangle(region, require_area=True)
    grid = _t_grid(t_max, n_steps)
    correction = _check_correction(edge_correction)
    n = coords.shape[0]
    area = (region[2] - region[0]) * (region[3] - region[1])
    cum = _cum_weight(coords, coords, grid, region, correction, skip_self=True)
    k = area * cum / (n * (n - 1))
    return LCurve(grid, np.sqrt(k / math.pi) - grid)


def l_bivariate(points1, points2, region, t_max: float, n_steps: int, edge_correction: str = "none") -> LCurve:
    """Cross L_12(t) - t for two classes; symmetric in its class arguments."""
    a = _coords(points1, 1, "class-1 points")
    b = _coords(points2, 1, "class-2 points")
    region = _as_rectangle(region, require_area=True)
    grid = _t_grid(t_max, n_steps)
    correction = _check_correction(edge_correction)
    area = (region[2] - region[0]) * (region[3] - region[1])
    cum = _cum_weight(a, b, grid, region, correction, skip_self=False)
    k = area * cum / (a.shape[0] * b.shape[0])
    return LCurve(grid, np.sqrt(k / math.pi) - grid)


def l_envelope(
    spec: NullSpec,
    statistic: str,
    t_max: float,
    n_steps: int,
    n_sim: int,
    seed=None,
    edge_correction: str = "none",
):
    """Pointwise 95% Monte Carlo bounds for L(t) - t under CSR independence.

    statistic picks the curve recomputed per simulation: "uni-1" or
    "uni-2" for one class alone, "bi" for the cross curve. Bounds are
    the order statistics of 1-indexed ranks ceil(.025 m) and
    ceil(.975 m), so n_sim = 39 gives the min and max.
    """
    if spec.kind != "csr_independence":
        raise ValidationError("envelopes are simulated under the csr null")
    n_sim = int(n_sim)
    if n_sim < 39:
        raise ValidationError("need n_sim >= 39 for a 95% envelope")
    if statistic not in ("uni-1", "uni-2", "bi"):
        raise ValidationError("statistic must be 'uni-1', 'uni-2', or 'bi'")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy)
    region = spec.region or (0.0, 0.0, 1.0, 1.0)
    grid = _t_grid(t_max, n_steps)
    sims = np.empty((n_sim, grid.size), dtype=np.float64)
    for s in range(n_sim):
        pts = generate(spec, _rep_rng(seed, s))
        first = pts.coords[pts.labels == 0]
        second = pts.coords[pts.labels == 1]
        if statistic == "uni-1":
            curve = l_univariate(first, region, t_max, n_steps, edge_correction)
        elif statistic == "uni-2":
            curve = l_univariate(second, region, t_max, n_steps, edge_correction)
        else:
            curve = l_bivariate(first, second, region, t_max, n_steps, edge_correction)
        sims[s] = curve.l_minus_t
    sims.sort(axis=0)
    lo = math.ceil(0.025 * n_sim) - 1
    hi = math.ceil(0.975 * n_sim) - 1
    return sims[lo].copy(), sims[hi].copy()
