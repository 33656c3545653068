"""Nearest-neighbor contingency tables.

An NNCT cross-tabulates (base class, NN class) pairs: cell (i, j) counts
the base points of class i whose nearest neighbor is of class j. Row
sums are the base-point class sizes, column sums the per-class counts of
"times chosen as NN".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neighbors import NNGraph, ValidationError

__all__ = ["NNCT", "build_nnct"]


@dataclass(frozen=True, eq=False)
class NNCT:
    """A q x q table of (base class, NN class) counts."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError("counts must be a square matrix")
        if counts.shape[0] < 1:
            raise ValidationError("need at least one class")
        if (counts < 0).any():
            raise ValidationError("cell counts must be nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def q(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    # sample proportions: pi_hat cellwise, nu_hat rows, kappa_hat columns
    @property
    def pi_hat(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def nu_hat(self) -> np.ndarray:
        return self.row_sums / self.n

    @property
    def kappa_hat(self) -> np.ndarray:
        return self.col_sums / self.n


def build_nnct(graph: NNGraph, labels, q: int | None = None) -> NNCT:
    """Tabulate (base class, NN class) pairs of an NN digraph.

    labels must assign a class id to every point of the graph (buffer
    and destination-only points included; only base rows are counted but
    a base's NN may be any destination). Classes with zero base points
    keep their all-zero row so indexing stays stable.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.n,):
        raise ValidationError("labels must cover every point of the graph")
    if labels.size and int(labels.min()) < 0:
        raise ValidationError("labels must be nonnegative class ids")
    found = int(labels.max()) + 1
    if q is None:
        q = found
    elif q < found:
        raise ValidationError(f"label {found - 1} out of range for q={q}")
    base = graph.base_mask
    pair = labels[base] * q + labels[graph.nn_index[base]]
    counts = np.bincount(pair, minlength=q * q).reshape(q, q)
    return NNCT(counts)
