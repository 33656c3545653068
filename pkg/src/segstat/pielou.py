"""Pielou's segregation tests for 2x2 NNCTs, plus shared tail kernels.

The chi-square test treats the table as an ordinary contingency table of
independence (optionally with Yates' continuity correction). The Z tests
are the directional versions: positive values indicate segregation (an
excess of conspecific NNs), negative values spatial association, so the
right tail tests segregation and the left tail association.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaincc

from .neighbors import ValidationError
from .nnct import NNCT

__all__ = [
    "TestResult",
    "chisq_sf",
    "normal_sf",
    "pielou_chisq",
    "pielou_z_rowwise",
    "pielou_z_multinomial",
]


@dataclass(frozen=True)
class TestResult:
    """One test statistic with its reference distribution and p-values.

    distribution is "std-normal" or "chi-square" (df set only for the
    latter). For normal statistics p_left + p_right = 1 and p_two_sided
    = 2 * min(tail); for chi-square statistics p_two_sided is the upper
    tail. direction_hint says which alternative a rejection would favor.
    """

    statistic: float
    distribution: str
    df: int | None
    p_two_sided: float
    p_left: float | None
    p_right: float | None
    direction_hint: str

    @staticmethod
    def from_normal(z: float, direction_positive: str = "segregation") -> "TestResult":
        """Build a std-normal result; direction_positive names the z>0 alternative."""
        z = float(z)
        p_right = normal_sf(z)
        p_left = 1.0 - p_right
        direction_negative = (
            "association" if direction_positive == "segregation" else "segregation"
        )
        if z > 0:
            hint = direction_positive
        elif z < 0:
            hint = direction_negative
        else:
            hint = "none"
        return TestResult(
            statistic=z,
            distribution="std-normal",
            df=None,
            p_two_sided=2.0 * min(p_left, p_right),
            p_left=p_left,
            p_right=p_right,
            direction_hint=hint,
        )

    @staticmethod
    def from_chisq(stat: float, df: int) -> "TestResult":
        stat = float(stat)
        p = chisq_sf(stat, df)
        return TestResult(
            statistic=stat,
            distribution="chi-square",
            df=df,
            p_two_sided=p,
            p_left=1.0 - p,
            p_right=p,
            direction_hint="none",
        )


def chisq_sf(x: float, df: int) -> float:
    """Upper tail P(chi2_df >= x) via the regularized incomplete gamma."""
    df = int(df)
    if df < 1:
        raise ValidationError("df must be a positive integer")
    x = float(x)
    if x < 0:
        raise ValidationError("chi-square statistic must be nonnegative")
    return float(gammaincc(df / 2.0, x / 2.0))


def normal_sf(z: float) -> float:
    """Upper tail 1 - Phi(z) of the standard normal."""
    return float(0.5 * erfc(float(z) / math.sqrt(2.0)))


def _require_2x2(table: NNCT) -> None:
    if table.q != 2:
        raise ValidationError(
            f"Pielou's tests are defined for two classes, got q={table.q}"
        )


def pielou_chisq(table: NNCT, yates: bool = False) -> TestResult:
    """Pielou's chi-square test of independence on a 2x2 NNCT, df = 1."""
    _require_2x2(table)
    expected = np.outer(table.row_sums, table.col_sums) / table.n
    if (expected == 0).any():
        raise ValidationError("a zero marginal makes an expected count zero")
    dev = np.abs(table.counts - expected)
    if yates:
        dev = np.maximum(dev - 0.5, 0.0)
    stat = float(np.sum(dev * dev / expected))
    return TestResult.from_chisq(stat, df=1)


def pielou_z_rowwise(table: NNCT) -> TestResult:
    """Z_n, the row-wise binomial version of Pielou's test.

    Z_n = (N11/n1 - N21/n2) * sqrt(n1 n2 n / (C1 C2)).
    """
    _require_2x2(table)
    n11 = int(table.counts[0, 0])
    n21 = int(table.counts[1, 0])
    n1, n2 = (int(v) for v in table.row_sums)
    c1, c2 = (int(v) for v in table.col_sums)
    n = table.n
    if min(n1, n2, c1, c2) <= 0:
        raise ValidationError("all marginals must be positive")
    z = (n11 / n1 - n21 / n2) * math.sqrt(n1 * n2 * n / (c1 * c2))
    return TestResult.from_normal(z)


def pielou_z_multinomial(table: NNCT) -> TestResult:
    """Z~_n, the overall-multinomial version of Pielou's test.

    Z~_n = (N11 - n1 C1 / n) * sqrt(n^3 / (n1 n2 C1 C2)).
    """
    _require_2x2(table)
    n11 = int(table.counts[0, 0])
    n1, n2 = (int(v) for v in table.row_sums)
    c1, c2 = (int(v) for v in table.col_sums)
    n = table.n
    if min(n1, n2, c1, c2) <= 0:
        raise ValidationError("all marginals must be positive")
    z = (n11 - n1 * c1 / n) * math.sqrt(n**3 / (n1 * n2 * c1 * c2))
    return TestResult.from_normal(z)
