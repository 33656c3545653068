"""Null pattern generators and Monte Carlo machinery.

Covers the random labeling cases (fixed, uniform, overlapping squares,
disjoint rectangles), CSR independence (two independent uniform
samples), and the synthetic independent-cell tables (row-wise binomial,
overall multinomial). On top of the generators sit the randomization
test, empirical-size estimation, and the agreement proportion between
two tests.

Replication r of a study always draws from the stream derived as
SeedSequence(master_seed, spawn_key=(0, r)), so results are identical
for any worker count and studies sharing a master seed see the same
replications.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .neighbors import (
    PointSet,
    QRStats,
    ValidationError,
    apply_outer_buffer,
    apply_toroidal,
    build_nn_graph,
    compute_qr,
)
from .nnct import NNCT, build_nnct
from .pielou import TestResult, pielou_chisq, pielou_z_multinomial, pielou_z_rowwise
from .dixon import dixon_cell_test, dixon_moments, dixon_overall_test, qr_adjust

__all__ = [
    "NullSpec",
    "SizeEstimate",
    "generate",
    "random_labeling",
    "mc_randomization_test",
    "empirical_size",
    "agreement_proportion",
    "available_tests",
]

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)

# one-sided band for the conservative/liberal verdict (gives the
# classical .0464/.0536 boundaries at alpha=.05, n_mc=10^4) and the
# two-sided z for the Wald CI on alpha_hat
Z_VERDICT = 1.644854
Z_CI = 1.959964

_RL_KINDS = frozenset(
    {"rl_fixed_locations", "rl_case2_uniform", "rl_case3_overlapping", "rl_case4_disjoint"}
)
_POINT_KINDS = _RL_KINDS | {"csr_independence"}
_TABLE_KINDS = frozenset({"rowwise_binomial", "overall_multinomial"})
_REGION_KINDS = frozenset({"rl_case2_uniform", "csr_independence"})


@dataclass(frozen=True, eq=False)
class NullSpec:
    """One null pattern: which generator, class sizes, optional geometry.

    locations is required (and only allowed) for rl_fixed_locations;
    region may override the unit square for rl_case2_uniform and
    csr_independence. The overlapping/disjoint cases use their fixed
    rectangles.
    """

    kind: str
    n1: int
    n2: int
    locations: np.ndarray | None = None
    region: tuple | None = None

    def __post_init__(self):
        kinds = _POINT_KINDS | _TABLE_KINDS
        if self.kind not in kinds:
            raise ValidationError(f"unknown null kind {self.kind!r}")
        n1, n2 = int(self.n1), int(self.n2)
        if n1 < 1 or n2 < 1:
            raise ValidationError("n1 and n2 must be positive")
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "n2", n2)
        if self.kind == "rl_fixed_locations":
            if self.locations is None:
                raise ValidationError("rl_fixed_locations needs fixed locations")
            loc = np.array(self.locations, dtype=np.float64, copy=True)
            if loc.ndim != 2 or loc.shape[1] != 2:
                raise ValidationError("locations must be an (n, 2) array")
            if loc.shape[0] != n1 + n2:
                raise ValidationError("locations must hold exactly n1+n2 points")
            loc.flags.writeable = False
            object.__setattr__(self, "locations", loc)
        elif self.locations is not None:
            raise ValidationError(f"{self.kind} does not take fixed locations")
        if self.region is not None and self.kind not in _REGION_KINDS:
            raise ValidationError(f"{self.kind} uses its fixed rectangles")


@dataclass(frozen=True)
class SizeEstimate:
    """Empirical size of a test: rejection proportion under its null."""

    alpha_hat: float
    n_mc: int
    ci_low: float
    ci_high: float
    verdict: str


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _rep_rng(master_seed, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0, rep)))


def _uniform(rng: np.random.Generator, m: int, rect) -> np.ndarray:
    return rng.uniform((rect[0], rect[1]), (rect[2], rect[3]), size=(m, 2))


def random_labeling(locations, n1: int, n2: int, seed=None) -> np.ndarray:
    """A uniformly random two-class labeling of fixed locations."""
    m = np.asarray(locations).shape[0]
    n1, n2 = int(n1), int(n2)
    if n1 < 0 or n2 < 0 or n1 + n2 != m:
        raise ValidationError("n1 + n2 must equal the number of locations")
    rng = _rng_from(seed)
    return rng.permutation(np.repeat(np.array([0, 1], dtype=np.int64), (n1, n2)))


def generate(spec: NullSpec, seed=None):
    """Draw one realization of a null pattern.

    Point-based kinds return a PointSet; the synthetic-table kinds
    return the NNCT directly.
    """
    rng = _rng_from(seed)
    n1, n2 = spec.n1, spec.n2
    block = np.repeat(np.array([0, 1], dtype=np.int64), (n1, n2))
    if spec.kind == "rl_fixed_locations":
        labels = random_labeling(spec.locations, n1, n2, rng)
        loc = spec.locations
        region = (
            float(loc[:, 0].min()),
            float(loc[:, 1].min()),
            float(loc[:, 0].max()),
            float(loc[:, 1].max()),
        )
        return PointSet(loc, labels, region)
    if spec.kind == "rl_case2_uniform":
        region = spec.region or UNIT_SQUARE
        pts = _uniform(rng, n1 + n2, region)
        return PointSet(pts, random_labeling(pts, n1, n2, rng), region)
    if spec.kind == "rl_case3_overlapping":
        lo = _uniform(rng, n1, (0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0))
        hi = _uniform(rng, n2, (1.0 / 3.0, 1.0 / 3.0, 1.0, 1.0))
        return PointSet(np.vstack((lo, hi)), block, UNIT_SQUARE)
    if spec.kind == "rl_case4_disjoint":
        left = _uniform(rng, n1, UNIT_SQUARE)
        right = _uniform(rng, n2, (2.0, 0.0, 3.0, 1.0))
        return PointSet(np.vstack((left, right)), block, (0.0, 0.0, 3.0, 1.0))
    if spec.kind == "csr_independence":
        region = spec.region or UNIT_SQUARE
        a = _uniform(rng, n1, region)
        b = _uniform(rng, n2, region)
        return PointSet(np.vstack((a, b)), block, region)
    n = n1 + n2
    if spec.kind == "rowwise_binomial":
        p = n1 / n
        n11 = int(rng.binomial(n1, p))
        n21 = int(rng.binomial(n2, p))
        return NNCT([[n11, n1 - n11], [n21, n2 - n21]])
    # overall_multinomial: pi_11 = pi_21 = n1/(2n), pi_12 = pi_22 = n2/(2n)
    probs = (n1 / (2 * n), n2 / (2 * n), n1 / (2 * n), n2 / (2 * n))
    return NNCT(rng.multinomial(n, probs).reshape(2, 2))


def _csr_outer_pattern(spec: NullSpec, rng: np.random.Generator) -> PointSet:
    """CSR independence with a guard area: draw iid on (-.5,1.5)^2 per
    class until that class has n_i points inside the unit square, keeping
    every draw up to and including the one landing the n_i-th core point."""

    def grow(target: int) -> np.ndarray:
        chunks = []
        need = target
        while need > 0:
            m = max(64, int(4.5 * need))
            pts = rng.uniform((-0.5, -0.5), (1.5, 1.5), size=(m, 2))
            inside = (
                (pts[:, 0] >= 0.0)
                & (pts[:, 0] <= 1.0)
                & (pts[:, 1] >= 0.0)
                & (pts[:, 1] <= 1.0)
            )
            hits = np.cumsum(inside)
            if hits.size and hits[-1] >= need:
                stop = int(np.searchsorted(hits, need))
                chunks.append(pts[: stop + 1])
                need = 0
            else:
                chunks.append(pts)
                need -= int(hits[-1]) if hits.size else 0
        return np.vstack(chunks)

    a = grow(spec.n1)
    b = grow(spec.n2)
    labels = np.repeat(np.array([0, 1], dtype=np.int64), (a.shape[0], b.shape[0]))
    return PointSet(np.vstack((a, b)), labels, (-0.5, -0.5, 1.5, 1.5))


# ---------------------------------------------------------------------------
# test selectors

@dataclass(frozen=True)
class _Selector:
    name: str
    needs_geometry: bool
    qr_adjusted: bool
    evaluate: Callable[[NNCT, object], tuple[TestResult, float]]


def _pielou_entry(name: str, run: Callable[[NNCT], TestResult], pick: Callable[[TestResult], float]):
    def evaluate(table: NNCT, moments) -> tuple[TestResult, float]:
        result = run(table)
        return result, pick(result)

    return _Selector(name, needs_geometry=False, qr_adjusted=False, evaluate=evaluate)


def _dixon_entry(name: str, cell: tuple[int, int] | None, qr_adjusted: bool):
    def evaluate(table: NNCT, moments) -> tuple[TestResult, float]:
        if cell is None:
            result = dixon_overall_test(table, moments)
        else:
            result = dixon_cell_test(table, moments, cell[0], cell[1])
        return result, result.p_two_sided

    return _Selector(name, needs_geometry=True, qr_adjusted=qr_adjusted, evaluate=evaluate)


def _build_registry() -> dict[str, _Selector]:
    reg: dict[str, _Selector] = {}
    for sel in (
        _pielou_entry("pielou-overall", pielou_chisq, lambda r: r.p_two_sided),
        _pielou_entry(
            "pielou-yates", lambda t: pielou_chisq(t, yates=True), lambda r: r.p_two_sided
        ),
        _pielou_entry("pielou-right", pielou_z_rowwise, lambda r: r.p_right),
        _pielou_entry("pielou-left", pielou_z_rowwise, lambda r: r.p_left),
        _pielou_entry("pielou-mult-right", pielou_z_multinomial, lambda r: r.p_right),
        _pielou_entry("pielou-mult-left", pielou_z_multinomial, lambda r: r.p_left),
    ):
        reg[sel.name] = sel
    for adj in (False, True):
        suffix = "-qr" if adj else ""
        sel = _dixon_entry(f"dixon-overall{suffix}", None, adj)
        reg[sel.name] = sel
        for i in (1, 2):
            for j in (1, 2):
                sel = _dixon_entry(f"dixon-cell-{i}-{j}{suffix}", (i - 1, j - 1), adj)
                reg[sel.name] = sel
    return reg


TEST_SELECTORS = _build_registry()


def available_tests() -> tuple[str, ...]:
    """Names accepted wherever a test selector is expected."""
    return tuple(sorted(TEST_SELECTORS))


def _resolve(selector) -> _Selector:
    if isinstance(selector, _Selector):
        return selector
    try:
        return TEST_SELECTORS[selector]
    except KeyError:
        raise ValidationError(
            f"unknown test {selector!r}; choose from {', '.join(available_tests())}"
        ) from None


def _extreme_value(result: TestResult) -> float:
    """Large values of this orientation are evidence against the null."""
    if result.distribution == "std-normal":
        return abs(result.statistic)
    return result.statistic


# ---------------------------------------------------------------------------
# study loop

def _normalize_edge(edge: str) -> str:
    edge = (edge or "none").replace("-", "_")
    if edge not in {"none", "toroidal", "outer_buffer"}:
        raise ValidationError(f"unknown edge correction {edge!r} for studies")
    return edge


def _graph_for(points: PointSet, edge: str):
    if edge == "toroidal":
        return apply_toroidal(points)
    if edge == "outer_buffer":
        return apply_outer_buffer(points, UNIT_SQUARE)
    return build_nn_graph(points)


def _evaluate_rejections(
    selectors: list[_Selector],
    table: NNCT,
    measured,
    adjusted,
    alpha: float,
) -> np.ndarray:
    out = np.zeros(len(selectors), dtype=bool)
    for idx, sel in enumerate(selectors):
        moments = None
        if sel.needs_geometry:
            moments = adjusted() if sel.qr_adjusted else measured()
        try:
            _, p = sel.evaluate(table, moments)
        except ValidationError:
            continue  # degenerate replication counts as a non-rejection
        out[idx] = p <= alpha
    return out


def _study_rejections(
    spec: NullSpec,
    selectors: list[_Selector],
    n_mc: int,
    alpha: float,
    master_seed,
    edge: str,
    threads: int | None,
) -> np.ndarray:
    edge = _normalize_edge(edge)
    if master_seed is None:
        master_seed = int(np.random.SeedSequence().entropy)
    needs_geometry = any(s.needs_geometry for s in selectors)
    if spec.kind in _TABLE_KINDS:
        if needs_geometry:
            raise ValidationError(
                "Dixon selectors need point geometry; synthetic tables have none"
            )
        if edge != "none":
            raise ValidationError("synthetic tables take no edge correction")
    if edge == "outer_buffer" and spec.kind != "csr_independence":
        raise ValidationError("outer-buffer studies are defined for the csr null")

    rejections = np.zeros((n_mc, len(selectors)), dtype=bool)

    def cached(fn):
        box = []

        def get():
            if not box:
                box.append(fn())
            return box[0]

        return get

    if spec.kind in _RL_KINDS:
        # geometry is fixed once per study; only labels are resampled
        setup_rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(1, 0)))
        base_points = generate(spec, setup_rng)
        graph = _graph_for(base_points, edge)
        qr = compute_qr(graph)
        n = base_points.n
        measured_moments = dixon_moments((spec.n1, spec.n2), n, qr) if needs_geometry else None
        adjusted_moments = (
            dixon_moments((spec.n1, spec.n2), n, qr_adjust(n)) if needs_geometry else None
        )

        def run(rep: int) -> np.ndarray:
            rng = _rep_rng(master_seed, rep)
            labels = random_labeling(base_points.coords, spec.n1, spec.n2, rng)
            table = build_nnct(graph, labels, q=2)
            return _evaluate_rejections(
                selectors, table, lambda: measured_moments, lambda: adjusted_moments, alpha
            )

    elif spec.kind == "csr_independence":

        def run(rep: int) -> np.ndarray:
            rng = _rep_rng(master_seed, rep)
            if edge == "outer_buffer":
                points = _csr_outer_pattern(spec, rng)
            else:
                points = generate(spec, rng)
            graph = _graph_for(points, edge)
            table = build_nnct(graph, points.labels, q=2)
            measured = cached(lambda: dixon_moments(table.row_sums, table.n, compute_qr(graph)))
            adjusted = cached(lambda: dixon_moments(table.row_sums, table.n, qr_adjust(table.n)))
            return _evaluate_rejections(selectors, table, measured, adjusted, alpha)

    else:  # synthetic tables

        def run(rep: int) -> np.ndarray:
            rng = _rep_rng(master_seed, rep)
            table = generate(spec, rng)
            return _evaluate_rejections(selectors, table, lambda: None, lambda: None, alpha)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rep, row in enumerate(pool.map(run, range(n_mc))):
                rejections[rep] = row
    else:
        for rep in range(n_mc):
            rejections[rep] = run(rep)
    return rejections


def empirical_size(
    spec: NullSpec,
    test,
    n_mc: int,
    alpha: float = 0.05,
    master_seed=None,
    edge: str = "none",
    threads: int | None = None,
) -> SizeEstimate:
    """Monte Carlo rejection rate of a test under a null pattern.

    Random-labeling kinds fix the locations once (drawn from the study
    stream) and relabel per replication; the other kinds redraw the
    pattern each time. A replication rejects when the selector's
    p-value is <= alpha.
    """
    n_mc = int(n_mc)
    if n_mc < 100:
        raise ValidationError("empirical_size needs n_mc >= 100")
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValidationError("alpha must lie in (0, 1]")
    sel = _resolve(test)
    rej = _study_rejections(spec, [sel], n_mc, alpha, master_seed, edge, threads)[:, 0]
    return _size_from_rejections(rej, n_mc, alpha)


def _size_from_rejections(column: np.ndarray, n_mc: int, alpha: float) -> SizeEstimate:
    alpha_hat = float(column.mean())
    se_hat = math.sqrt(alpha_hat * (1.0 - alpha_hat) / n_mc)
    band = Z_VERDICT * math.sqrt(alpha * (1.0 - alpha) / n_mc)
    if alpha_hat < alpha - band:
        verdict = "conservative"
    elif alpha_hat > alpha + band:
        verdict = "liberal"
    else:
        verdict = "nominal"
    return SizeEstimate(
        alpha_hat=alpha_hat,
        n_mc=n_mc,
        ci_low=max(0.0, alpha_hat - Z_CI * se_hat),
        ci_high=min(1.0, alpha_hat + Z_CI * se_hat),
        verdict=verdict,
    )


def agreement_proportion(
    spec: NullSpec,
    test_a,
    test_b,
    n_mc: int,
    alpha: float = 0.05,
    seed=None,
    edge: str = "none",
    threads: int | None = None,
) -> float:
    """Proportion of replications where both tests reject.

    Both tests see the same replication stream, so the proportion can
    never exceed either test's own empirical size at the same seed.
    """
    n_mc = int(n_mc)
    if n_mc < 100:
        raise ValidationError("agreement_proportion needs n_mc >= 100")
    sels = [_resolve(test_a), _resolve(test_b)]
    rej = _study_rejections(spec, sels, n_mc, float(alpha), seed, edge, threads)
    return float(np.mean(rej[:, 0] & rej[:, 1]))


def mc_randomization_test(
    points: PointSet,
    statistic,
    n_mc: int,
    seed=None,
    graph=None,
    qr: QRStats | None = None,
) -> float:
    """Random-labeling randomization p-value for one observed pattern.

    Locations and class sizes are held fixed; labels are permuted n_mc
    times and the test statistic (|Z| for normal tests, the statistic
    itself for chi-square tests) is compared with the observed value.
    Returns (1 + #{permuted >= observed}) / (n_mc + 1). A degenerate
    relabeling (zero marginal) counts as extreme, which is conservative.
    """
    n_mc = int(n_mc)
    if n_mc < 99:
        raise ValidationError("mc_randomization_test needs n_mc >= 99")
    sel = _resolve(statistic)
    if graph is None:
        graph = build_nn_graph(points)
    labels = points.labels
    q = points.q
    if qr is None:
        qr = compute_qr(graph)

    relabel_invariant_marginals = bool(graph.base_mask.all())

    def moments_for(table: NNCT):
        if not sel.needs_geometry:
            return None
        stats = qr_adjust(table.n) if sel.qr_adjusted else qr
        return dixon_moments(table.row_sums, table.n, stats)

    observed_table = build_nnct(graph, labels, q=q)
    fixed_moments = moments_for(observed_table)
    result, _ = sel.evaluate(observed_table, fixed_moments)
    observed = _extreme_value(result)

    rng = _rng_from(seed)
    hits = 0
    lo = hi = observed
    for _ in range(n_mc):
        perm = rng.permutation(labels)
        table = build_nnct(graph, perm, q=q)
        try:
            moments = fixed_moments if relabel_invariant_marginals else moments_for(table)
            res, _ = sel.evaluate(table, moments)
            value = _extreme_value(res)
        except ValidationError:
            hits += 1
            continue
        lo, hi = min(lo, value), max(hi, value)
        if value >= observed:
            hits += 1
    if lo == hi:
        raise ValidationError("statistic is constant over relabelings")
    return (1 + hits) / (n_mc + 1)
