"""Nearest-neighbor graphs over labeled planar point sets.

The NN relation here is the w_kl indicator of the contingency-table
machinery: w_kl = 1 exactly when l is the nearest destination-eligible
point to the base point k. Edge corrections change which points act as
bases (buffer zones) or what metric is used (toroidal wrapping); the
shared-NN statistic Q and the reflexivity statistic R are derived from
the same relation.

Distances are correctly-rounded Euclidean norms (numpy.hypot), so
configurations that are exactly tied in real arithmetic stay tied in
float arithmetic whenever the norm is representable; ties break to the
lowest candidate index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ValidationError",
    "PointSet",
    "NNGraph",
    "QRStats",
    "build_nn_graph",
    "compute_qr",
    "apply_toroidal",
    "apply_outer_buffer",
    "apply_inner_buffer",
    "inner_buffer_width",
]

Rectangle = tuple[float, float, float, float]

_BLOCK = 512  # row block size for the O(n^2) distance scan


class ValidationError(ValueError):
    """An input violates a documented precondition."""


def _as_rectangle(region, require_area: bool = False) -> Rectangle:
    try:
        xmin, ymin, xmax, ymax = (float(v) for v in region)
    except (TypeError, ValueError) as exc:
        raise ValidationError(
            f"region must be (xmin, ymin, xmax, ymax), got {region!r}"
        ) from exc
    if not all(math.isfinite(v) for v in (xmin, ymin, xmax, ymax)):
        raise ValidationError("region coordinates must be finite")
    if xmin > xmax or ymin > ymax:
        raise ValidationError(f"empty region {region!r}")
    if require_area and (xmin == xmax or ymin == ymax):
        raise ValidationError(f"region {region!r} has zero width or height")
    return (xmin, ymin, xmax, ymax)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Labeled points inside an axis-aligned rectangular region.

    coords : (n, 2) float array of planar positions
    labels : (n,) int array of class ids 0..q-1
    region : (xmin, ymin, xmax, ymax) containing every point
    class_names : optional display names, one per class id

    Duplicate coordinates are rejected: a zero NN distance makes the NN
    relation (and Q/R) ill-defined.
    """

    coords: np.ndarray
    labels: np.ndarray
    region: Rectangle
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValidationError("coords must be an (n, 2) array")
        n = coords.shape[0]
        if n < 2:
            raise ValidationError("need at least 2 points")
        if labels.shape != (n,):
            raise ValidationError("labels must be a length-n vector")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coordinates must be finite")
        if int(labels.min()) < 0:
            raise ValidationError("labels must be nonnegative class ids")
        region = _as_rectangle(self.region)
        x, y = coords[:, 0], coords[:, 1]
        outside = (x < region[0]) | (x > region[2]) | (y < region[1]) | (y > region[3])
        if outside.any():
            k = int(np.flatnonzero(outside)[0])
            raise ValidationError(
                f"point {k} at ({x[k]!r}, {y[k]!r}) lies outside region {region}"
            )
        order = np.lexsort((y, x))
        dup = (np.diff(x[order]) == 0) & (np.diff(y[order]) == 0)
        if dup.any():
            k = int(order[int(np.flatnonzero(dup)[0]) + 1])
            raise ValidationError(f"duplicate coordinates at point {k}")
        coords.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "region", region)
        if self.class_names is not None:
            names = tuple(str(v) for v in self.class_names)
            if len(names) < int(labels.max()) + 1:
                raise ValidationError("class_names must cover every class id")
            object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def q(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.q)


@dataclass(frozen=True, eq=False)
class NNGraph:
    """The NN digraph of a point set under one correction mode.

    nn_index[k] is the nearest destination-eligible point to k (self
    excluded; under toroidal correction, copy identities are mapped back
    to original indices). distances[k] is the matching distance. Only
    base points enter tables and Q/R, but nn_index/distances are defined
    for every point because R needs the NN of a base's destination.

    nn_offset is the (dx, dy) translation of the winning destination
    copy under toroidal correction, zero rows elsewhere, None for the
    planar modes.
    """

    points: PointSet
    nn_index: np.ndarray
    distances: np.ndarray
    base_mask: np.ndarray
    dest_mask: np.ndarray
    correction: str
    nn_offset: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.nn_index.shape[0]

    @property
    def n_bases(self) -> int:
        return int(np.count_nonzero(self.base_mask))


@dataclass(frozen=True)
class QRStats:
    """Shared-NN and reflexivity statistics of an NN graph.

    Q       2 * sum_k C(k,2) * Q_k, the ordered count of base pairs
            sharing a nearest neighbor
    R       ordered count of reflexive (mutual NN) pairs of base points,
            i.e. twice the number of such pairs
    Qk      Qk[k] = number of destination-eligible points serving as the
            NN of exactly k base points (Qk[0] counts idle destinations);
            None when the stats are the CSR adjustment, not measured
    Q_tilde the same pair sum written as sum_l c_l (c_l - 1); equal to Q
            for measured graphs, None for the CSR adjustment
    """

    Q: float
    R: float
    Qk: tuple[int, ...] | None = None
    Q_tilde: float | None = None


def _nn_planar(coords: np.ndarray, dest_mask: np.ndarray):
    """NN index and distance for every point, destinations restricted."""
    n = coords.shape[0]
    dest_idx = np.flatnonzero(dest_mask)
    x, y = coords[:, 0], coords[:, 1]
    xd, yd = x[dest_idx], y[dest_idx]
    nn = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        d = np.hypot(x[lo:hi, None] - xd[None, :], y[lo:hi, None] - yd[None, :])
        rows = np.arange(lo, hi)
        pos = np.searchsorted(dest_idx, rows)
        pos_c = np.minimum(pos, dest_idx.size - 1)
        has_self = dest_idx[pos_c] == rows
        d[np.flatnonzero(has_self), pos_c[has_self]] = np.inf
        j = np.argmin(d, axis=1)
        nn[lo:hi] = dest_idx[j]
        dist[lo:hi] = d[np.arange(hi - lo), j]
    return nn, dist


def _nn_toroidal(coords: np.ndarray, region: Rectangle):
    """NN under the wrap metric; identities reported as original indices.

    Per axis the candidate offsets are 0, -W, +W (resp. -H, +H); taking
    the per-axis minimum and then hypot equals the minimum over the nine
    explicit copies because a correctly rounded norm is monotone in each
    absolute component. All copies of a point itself are excluded.
    """
    xmin, ymin, xmax, ymax = region
    w, h = xmax - xmin, ymax - ymin
    n = coords.shape[0]
    x, y = coords[:, 0], coords[:, 1]
    xm, xp = x - w, x + w
    ym, yp = y - h, y + h
    nn = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    offset = np.empty((n, 2), dtype=np.float64)
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        xb = x[lo:hi, None]
        yb = y[lo:hi, None]
        ax = np.abs(xb - x[None, :])
        ox = np.zeros_like(ax)
        for cand, off in ((np.abs(xb - xm[None, :]), -w), (np.abs(xb - xp[None, :]), w)):
            better = cand < ax
            ax = np.where(better, cand, ax)
            ox = np.where(better, off, ox)
        ay = np.abs(yb - y[None, :])
        oy = np.zeros_like(ay)
        for cand, off in ((np.abs(yb - ym[None, :]), -h), (np.abs(yb - yp[None, :]), h)):
            better = cand < ay
            ay = np.where(better, cand, ay)
            oy = np.where(better, off, oy)
        d = np.hypot(ax, ay)
        rows = np.arange(hi - lo)
        d[rows, np.arange(lo, hi)] = np.inf
        j = np.argmin(d, axis=1)
        nn[lo:hi] = j
        dist[lo:hi] = d[rows, j]
        offset[lo:hi, 0] = ox[rows, j]
        offset[lo:hi, 1] = oy[rows, j]
    return nn, dist, offset


def _freeze(graph: NNGraph) -> NNGraph:
    for arr in (graph.nn_index, graph.distances, graph.base_mask, graph.dest_mask):
        arr.flags.writeable = False
    if graph.nn_offset is not None:
        graph.nn_offset.flags.writeable = False
    return graph


def build_nn_graph(points: PointSet) -> NNGraph:
    """Uncorrected NN digraph: every point is both base and destination."""
    nn, dist = _nn_planar(points.coords, np.ones(points.n, dtype=bool))
    return _freeze(
        NNGraph(
            points=points,
            nn_index=nn,
            distances=dist,
            base_mask=np.ones(points.n, dtype=bool),
            dest_mask=np.ones(points.n, dtype=bool),
            correction="none",
        )
    )


def apply_toroidal(points: PointSet) -> NNGraph:
    """NN digraph with the region wrapped onto a torus.

    The region is surrounded by eight translated copies that act as
    destinations only; the returned graph reports each NN by its
    original index together with the translation offset that won.
    """
    region = _as_rectangle(points.region, require_area=True)
    nn, dist, offset = _nn_toroidal(points.coords, region)
    return _freeze(
        NNGraph(
            points=points,
            nn_index=nn,
            distances=dist,
            base_mask=np.ones(points.n, dtype=bool),
            dest_mask=np.ones(points.n, dtype=bool),
            correction="toroidal",
            nn_offset=offset,
        )
    )


def apply_outer_buffer(points_extended: PointSet, core_region) -> NNGraph:
    """NN digraph where only points inside core_region act as bases.

    points_extended must live in a superregion of core_region; points in
    the surrounding guard area serve as destinations only.
    """
    core = _as_rectangle(core_region)
    reg = points_extended.region
    if not (reg[0] <= core[0] and reg[1] <= core[1] and core[2] <= reg[2] and core[3] <= reg[3]):
        raise ValidationError(
            f"core_region {core} must lie inside the point region {reg}"
        )
    x, y = points_extended.coords[:, 0], points_extended.coords[:, 1]
    base = (x >= core[0]) & (x <= core[2]) & (y >= core[1]) & (y <= core[3])
    if not base.any():
        raise ValidationError("no points inside core_region")
    nn, dist = _nn_planar(points_extended.coords, np.ones(points_extended.n, dtype=bool))
    return _freeze(
        NNGraph(
            points=points_extended,
            nn_index=nn,
            distances=dist,
            base_mask=base,
            dest_mask=np.ones(points_extended.n, dtype=bool),
            correction="outer_buffer",
        )
    )


def apply_inner_buffer(points: PointSet, width: float) -> NNGraph:
    """NN digraph where points within `width` of the boundary lose base status.

    Base points are those at distance >= width from the region boundary
    (closed comparison, so width 0 reproduces the uncorrected graph);
    every point remains a destination.
    """
    region = points.region
    width = float(width)
    half_min_side = min(region[2] - region[0], region[3] - region[1]) / 2.0
    if not (0.0 <= width < half_min_side):
        raise ValidationError(
            f"width must satisfy 0 <= width < {half_min_side} (half the short side)"
        )
    x, y = points.coords[:, 0], points.coords[:, 1]
    boundary_dist = np.minimum(
        np.minimum(x - region[0], region[2] - x),
        np.minimum(y - region[1], region[3] - y),
    )
    base = boundary_dist >= width
    if not base.any():
        raise ValidationError(f"width {width} leaves no base points")
    nn, dist = _nn_planar(points.coords, np.ones(points.n, dtype=bool))
    return _freeze(
        NNGraph(
            points=points,
            nn_index=nn,
            distances=dist,
            base_mask=base,
            dest_mask=np.ones(points.n, dtype=bool),
            correction="inner_buffer",
        )
    )


def inner_buffer_width(lambda_hat: float, k: int) -> float:
    """Buffer width E[W] + k * sd(W) for the CSR nearest-neighbor distance W.

    Under CSR with intensity lambda, E[W] = 1/(2 sqrt(lambda)) and
    Var[W] = (4 - pi)/(4 pi lambda).
    """
    lam = float(lambda_hat)
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError("intensity must be positive")
    k = int(k)
    if k < 0:
        raise ValidationError("k must be a nonnegative integer")
    return 1.0 / (2.0 * math.sqrt(lam)) + k * math.sqrt((4.0 - math.pi) / (4.0 * math.pi * lam))


def compute_qr(graph: NNGraph) -> QRStats:
    """Q, R and the service histogram Q_k of an NN digraph.

    A destination point "serves" each base point whose NN it is; Q_k is
    the number of destinations serving exactly k bases, Q the ordered
    count of base pairs with a shared NN, and R the ordered count of
    mutual-NN pairs among bases. Every base contributes one service, so
    sum_k k*Q_k equals the number of bases in every correction mode.
    """
    nn = graph.nn_index
    base = graph.base_mask
    n = nn.shape[0]
    served = np.bincount(nn[base], minlength=n)
    counts = served[graph.dest_mask]
    hist = np.bincount(counts)
    ks = np.arange(hist.size)
    q = int(np.sum(ks * (ks - 1) * hist))
    mutual = base & base[nn] & (nn[nn] == np.arange(n))
    r = int(np.count_nonzero(mutual))
    return QRStats(Q=q, R=r, Qk=tuple(int(c) for c in hist), Q_tilde=q)
