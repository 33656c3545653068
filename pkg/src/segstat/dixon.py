"""Dixon's cell-wise and overall NNCT tests under random labeling.

Moments of the cell counts N_ij condition on the observed geometry
through Q (shared-NN pairs) and R (reflexive pairs); the label part is
hypergeometric, expressed through falling-factorial probabilities of
drawing same-class pairs/triplets/quartets. The QR adjustment replaces
the measured Q, R by their CSR expectations 0.63n, 0.62n to remove the
conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .neighbors import QRStats, ValidationError
from .nnct import NNCT
from .pielou import TestResult

__all__ = [
    "DixonMoments",
    "dixon_moments",
    "dixon_cell_test",
    "dixon_overall_test",
    "qr_adjust",
    "CSR_MEAN_Q_OVER_N",
    "CSR_MEAN_R_OVER_N",
]

# Empirical CSR means of Q/n and R/n; the standard adjustment rounds
# these to 0.63 and 0.62.
CSR_MEAN_Q_OVER_N = 0.632786
CSR_MEAN_R_OVER_N = 0.621120


@dataclass(frozen=True, eq=False)
class DixonMoments:
    """Expected counts, variances, and the (1,1)-(2,2) covariance.

    probs holds the falling-factorial label probabilities keyed
    "pii", "pij", "piii", "piij", "piijj", "piiii"; the two-index arrays
    are (q, q) with the base class first (piij[i, j] draws class i twice).
    """

    expected: np.ndarray
    var: np.ndarray
    cov_diag: float | None
    probs: dict

    @property
    def q(self) -> int:
        return self.expected.shape[0]


def dixon_moments(row_sums, n: int, qr: QRStats) -> DixonMoments:
    """Mean and variance of every N_ij under random labeling.

    E[N_ij] = n_i(n_i-1)/(n-1) on the diagonal, n_i n_j/(n-1) off it.
    Var[N_ii] = (n+R)p_ii + (2n-2R+Q)p_iii + (n^2-3n-Q+R)p_iiii - (n p_ii)^2
    Var[N_ij] = n p_ij + Q p_iij + (n^2-3n-Q+R)p_iijj - (n p_ij)^2
    Cov[N_11,N_22] = (n^2-3n-Q+R)p_1122 - n^2 p_11 p_22  (two classes)
    """
    ns = np.asarray(row_sums, dtype=np.float64)
    if ns.ndim != 1 or ns.size < 1:
        raise ValidationError("row_sums must be a vector of class sizes")
    if (ns < 0).any():
        raise ValidationError("negative row sums")
    n = int(n)
    if n < 4:
        raise ValidationError("need n >= 4 (quartet probabilities divide by n-3)")
    if int(round(float(ns.sum()))) != n:
        raise ValidationError("row_sums must sum to n")
    nf = float(n)
    Q, R = float(qr.Q), float(qr.R)

    # ratio products keep the falling factorials exact enough for large n
    pii = (ns / nf) * ((ns - 1) / (nf - 1))
    piii = pii * ((ns - 2) / (nf - 2))
    piiii = piii * ((ns - 3) / (nf - 3))
    pij = np.outer(ns / nf, ns / (nf - 1))
    np.fill_diagonal(pij, pii)
    piij = np.outer(pii, ns / (nf - 2))
    np.fill_diagonal(piij, piii)
    piijj = np.outer(pii, (ns / (nf - 2)) * ((ns - 1) / (nf - 3)))
    np.fill_diagonal(piijj, piiii)

    expected = (np.outer(ns, ns) - np.diag(ns)) / (nf - 1)
    quartet = nf * nf - 3 * nf - Q + R
    var = nf * pij + Q * piij + quartet * piijj - (nf * pij) ** 2
    var_diag = (nf + R) * pii + (2 * nf - 2 * R + Q) * piii + quartet * piiii - (nf * pii) ** 2
    var[np.diag_indices_from(var)] = var_diag

    cov_diag = None
    if ns.size == 2:
        cov_diag = float(quartet * piijj[0, 1] - nf * nf * pii[0] * pii[1])

    probs = {
        "pii": pii,
        "pij": pij,
        "piii": piii,
        "piij": piij,
        "piijj": piijj,
        "piiii": piiii,
    }
    for arr in (expected, var, *probs.values()):
        arr.flags.writeable = False
    return DixonMoments(expected=expected, var=var, cov_diag=cov_diag, probs=probs)


def dixon_cell_test(table: NNCT, moments: DixonMoments, i: int, j: int) -> TestResult:
    """Z test for one NNCT cell: (N_ij - E[N_ij]) / sd[N_ij].

    On the diagonal a positive statistic points to segregation of class
    i; off the diagonal it points to association between the classes.
    """
    if table.q != moments.q:
        raise ValidationError("table and moments disagree on the class count")
    if not (0 <= i < table.q and 0 <= j < table.q):
        raise ValidationError(f"cell ({i}, {j}) out of range for q={table.q}")
    variance = float(moments.var[i, j])
    if variance <= 0:
        raise ValidationError(f"cell ({i}, {j}) has zero variance")
    z = (float(table.counts[i, j]) - float(moments.expected[i, j])) / math.sqrt(variance)
    return TestResult.from_normal(
        z, direction_positive="segregation" if i == j else "association"
    )


def dixon_overall_test(table: NNCT, moments: DixonMoments) -> TestResult:
    """Overall two-class test: quadratic form of (N_11-E_11, N_22-E_22).

    The statistic Y' Sigma^-1 Y is compared against chi-square with 2
    degrees of freedom, Sigma built from the cell variances and
    Cov[N_11, N_22].
    """
    if table.q != 2 or moments.q != 2 or moments.cov_diag is None:
        raise ValidationError("the overall test is defined for two classes")
    y1 = float(table.counts[0, 0]) - float(moments.expected[0, 0])
    y2 = float(table.counts[1, 1]) - float(moments.expected[1, 1])
    v11 = float(moments.var[0, 0])
    v22 = float(moments.var[1, 1])
    cov = moments.cov_diag
    det = v11 * v22 - cov * cov
    scale = max(abs(v11), abs(v22), abs(cov))
    if abs(det) < 1e-12 * scale * scale or scale == 0.0:
        raise ValidationError("singular covariance matrix for (N_11, N_22)")
    stat = (v22 * y1 * y1 - 2.0 * cov * y1 * y2 + v11 * y2 * y2) / det
    return TestResult.from_chisq(stat, df=2)


def qr_adjust(n: int) -> QRStats:
    """CSR-adjusted stand-ins for Q and R: 0.63n and 0.62n."""
    n = int(n)
    if n < 4:
        raise ValidationError("need n >= 4")
    return QRStats(Q=0.63 * n, R=0.62 * n, Qk=None, Q_tilde=None)
