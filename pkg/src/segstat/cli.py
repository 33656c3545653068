"""Command line surface: `segstat nnct|simulate|ripley`.

Exit codes: 0 success, 1 unexpected runtime failure, 2 validation
failure (bad flags, malformed input, violated preconditions).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .neighbors import (
    PointSet,
    ValidationError,
    apply_inner_buffer,
    apply_outer_buffer,
    apply_toroidal,
    build_nn_graph,
    compute_qr,
    inner_buffer_width,
)
from .nnct import build_nnct
from .pielou import pielou_chisq, pielou_z_multinomial, pielou_z_rowwise
from .dixon import dixon_cell_test, dixon_moments, dixon_overall_test, qr_adjust
from .nullmodels import (
    TEST_SELECTORS,
    NullSpec,
    _dixon_entry,
    _size_from_rejections,
    _study_rejections,
    available_tests,
    mc_randomization_test,
)
from .ripley import LCurve, l_bivariate, l_envelope, l_univariate

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# ingestion

def parse_points_csv(stream, region=None) -> PointSet:
    """Read `x,y,class` rows into a PointSet.

    Class tokens are arbitrary strings mapped to ids in first-appearance
    order; the region defaults to the bounding box of the data.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise ValidationError("empty file")
    if [h.strip().lower() for h in header] != ["x", "y", "class"]:
        raise ValidationError("header must be exactly: x,y,class")
    xs: list[float] = []
    ys: list[float] = []
    ids: list[int] = []
    tokens: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            x = float(row[0])
            y = float(row[1])
        except ValueError:
            raise ValidationError(f"line {lineno}: bad coordinate {row[0]!r},{row[1]!r}") from None
        token = row[2].strip()
        if not token:
            raise ValidationError(f"line {lineno}: empty class token")
        xs.append(x)
        ys.append(y)
        ids.append(tokens.setdefault(token, len(tokens)))
    if len(xs) < 2:
        raise ValidationError("need at least 2 points")
    coords = np.column_stack((xs, ys))
    if region is None:
        region = (coords[:, 0].min(), coords[:, 1].min(), coords[:, 0].max(), coords[:, 1].max())
    return PointSet(coords, ids, region, class_names=tuple(tokens))


def _fmt_p(p: float) -> str:
    return "<.0001" if p < 0.0001 else f"{p:.4f}"


def _result_dict(result) -> dict:
    return {
        "statistic": result.statistic,
        "distribution": result.distribution,
        "df": result.df,
        "p_two_sided": result.p_two_sided,
        "p_left": result.p_left,
        "p_right": result.p_right,
        "direction_hint": result.direction_hint,
    }


# ---------------------------------------------------------------------------
# nnct subcommand

@dataclass
class AnalysisReport:
    """Everything the `nnct` subcommand computed for one data set."""

    counts: np.ndarray
    class_names: tuple[str, ...]
    qr: object
    correction: str
    qr_adjusted: bool
    n_bases: int
    tests: list = field(default_factory=list)      # (name, TestResult, mc_p | None)
    skipped: list = field(default_factory=list)    # (name, reason)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        counts = self.counts
        n = int(counts.sum())
        row_sums = counts.sum(axis=1)
        col_sums = counts.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            cell_pct = np.where(row_sums[:, None] > 0, 100.0 * counts / row_sums[:, None], 0.0)
        tests = []
        for name, result, mc_p in self.tests:
            entry = {"name": name, **_result_dict(result)}
            if mc_p is not None:
                entry["mc_p"] = mc_p
            tests.append(entry)
        return {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "correction": self.correction,
            "qr_adjusted": self.qr_adjusted,
            "class_names": list(self.class_names),
            "n": n,
            "n_bases": self.n_bases,
            "q": counts.shape[0],
            "counts": counts.tolist(),
            "row_sums": row_sums.tolist(),
            "col_sums": col_sums.tolist(),
            "cell_percent": np.round(cell_pct, 4).tolist(),
            "row_percent": np.round(100.0 * row_sums / n, 4).tolist(),
            "col_percent": np.round(100.0 * col_sums / n, 4).tolist(),
            "Q": self.qr.Q,
            "R": self.qr.R,
            "Qk": list(self.qr.Qk) if self.qr.Qk is not None else None,
            "tests": tests,
            "skipped": [{"name": n_, "reason": r} for n_, r in self.skipped],
            "metadata": self.metadata,
        }

    def to_text(self) -> str:
        d = self.to_dict()
        names = d["class_names"]
        out = []
        out.append(f"NNCT analysis (correction: {d['correction']}"
                   + (", QR-adjusted moments" if d["qr_adjusted"] else "") + ")")
        meta = d["metadata"]
        out.append(f"points: {meta['n_points']}   bases: {d['n_bases']}   classes: {d['q']}")
        out.append(f"Q = {d['Q']:g}   R = {d['R']:g}")
        out.append("")
        head = ["base \\ NN"] + [f"{c}" for c in names] + ["total"]
        rows = [head]
        for i, cname in enumerate(names):
            cells = [
                f"{d['counts'][i][j]} ({d['cell_percent'][i][j]:.0f}%)"
                for j in range(d["q"])
            ]
            rows.append([cname] + cells + [f"{d['row_sums'][i]} ({d['row_percent'][i]:.0f}%)"])
        rows.append(
            ["total"]
            + [f"{d['col_sums'][j]} ({d['col_percent'][j]:.0f}%)" for j in range(d["q"])]
            + [f"{d['n']}"]
        )
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        for r in rows:
            out.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        out.append("")
        has_mc = any(mc_p is not None for _, _, mc_p in self.tests)
        header = f"{'test':24} {'statistic':>10} {'p(two)':>8} {'p(left)':>8} {'p(right)':>8}  {'direction':11}"
        if has_mc:
            header += f" {'mc_p':>8}"
        out.append(header)
        for name, result, mc_p in self.tests:
            left = _fmt_p(result.p_left) if result.p_left is not None else "-"
            right = _fmt_p(result.p_right) if result.p_right is not None else "-"
            line = (
                f"{name:24} {result.statistic:>10.4f} {_fmt_p(result.p_two_sided):>8} "
                f"{left:>8} {right:>8}  {result.direction_hint:11}"
            )
            if has_mc:
                line += f" {(_fmt_p(mc_p) if mc_p is not None else '-'):>8}"
            out.append(line.rstrip())
        for name, reason in self.skipped:
            out.append(f"{name:24} skipped: {reason}")
        return "\n".join(out)


def _graph_for_analysis(points: PointSet, args):
    if args.correction == "none":
        return build_nn_graph(points), {}
    if args.correction == "toroidal":
        return apply_toroidal(points), {}
    if args.correction == "inner-buffer":
        xmin, ymin, xmax, ymax = points.region
        area = (xmax - xmin) * (ymax - ymin)
        if area <= 0:
            raise ValidationError("inner buffer needs a region with positive area")
        lam = points.n / area
        width = inner_buffer_width(lam, args.buffer_k)
        return apply_inner_buffer(points, width), {"buffer_width": width, "buffer_k": args.buffer_k}
    if args.core_region is None:
        raise ValidationError("--correction outer-buffer needs --core-region")
    return apply_outer_buffer(points, args.core_region), {"core_region": list(args.core_region)}


def run_analysis(args) -> AnalysisReport:
    with _open_input(args.points) as stream:
        points = parse_points_csv(stream, region=args.region)
    graph, correction_meta = _graph_for_analysis(points, args)
    q = points.q
    table = build_nnct(graph, points.labels, q=q)
    qr = compute_qr(graph)
    moment_qr = qr_adjust(table.n) if args.qr_adjust else qr
    report = AnalysisReport(
        counts=table.counts,
        class_names=points.class_names or tuple(str(i) for i in range(q)),
        qr=qr,
        correction=args.correction,
        qr_adjusted=bool(args.qr_adjust),
        n_bases=graph.n_bases,
    )
    report.metadata = {
        "seed": args.seed,
        "n_points": points.n,
        "region": list(points.region),
        "mc": args.mc,
        **correction_meta,
    }

    rows: list[tuple[str, object, object]] = []

    def add(name, build, mc_selector):
        try:
            result = build()
        except ValidationError as exc:
            report.skipped.append((name, str(exc)))
            return
        mc_p = None
        if args.mc:
            try:
                mc_p = mc_randomization_test(
                    points, mc_selector, n_mc=args.mc, seed=args.seed, graph=graph, qr=moment_qr
                )
            except ValidationError:
                mc_p = None
        rows.append((name, result, mc_p))

    add("pielou-chisq", lambda: pielou_chisq(table), TEST_SELECTORS["pielou-overall"])
    add("pielou-chisq-yates", lambda: pielou_chisq(table, yates=True), TEST_SELECTORS["pielou-yates"])
    add("pielou-z-rowwise", lambda: pielou_z_rowwise(table), TEST_SELECTORS["pielou-right"])
    add("pielou-z-multinomial", lambda: pielou_z_multinomial(table), TEST_SELECTORS["pielou-mult-right"])

    try:
        moments = dixon_moments(table.row_sums, table.n, moment_qr)
    except ValidationError as exc:
        report.skipped.append(("dixon-moments", str(exc)))
        moments = None
    if moments is not None:
        for i in range(q):
            for j in range(q):
                add(
                    f"dixon-cell-{i + 1}-{j + 1}",
                    lambda i=i, j=j: dixon_cell_test(table, moments, i, j),
                    _dixon_entry(f"dixon-cell-{i + 1}-{j + 1}", (i, j), args.qr_adjust),
                )
        add(
            "dixon-overall",
            lambda: dixon_overall_test(table, moments),
            _dixon_entry("dixon-overall", None, args.qr_adjust),
        )
    report.tests = rows
    return report


def _cmd_nnct(args) -> int:
    report = run_analysis(args)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.to_text())
    return 0


# ---------------------------------------------------------------------------
# simulate subcommand

_NULL_BY_FLAG = {
    "rl-case2": "rl_case2_uniform",
    "rl-case3": "rl_case3_overlapping",
    "rl-case4": "rl_case4_disjoint",
    "rl-file": "rl_fixed_locations",
    "csr": "csr_independence",
    "rowwise-binomial": "rowwise_binomial",
    "overall-multinomial": "overall_multinomial",
}


def _build_null_spec(args) -> NullSpec:
    kind = _NULL_BY_FLAG[args.null]
    if args.null == "rl-file":
        if not args.file:
            raise ValidationError("--null rl-file needs --file with fixed locations")
        with _open_input(args.file) as stream:
            points = parse_points_csv(stream)
        if points.q != 2:
            raise ValidationError("rl-file input must have exactly two classes")
        sizes = points.class_sizes
        return NullSpec(kind, int(sizes[0]), int(sizes[1]), locations=points.coords)
    if args.n1 is None or args.n2 is None:
        raise ValidationError(f"--null {args.null} needs --n1 and --n2")
    return NullSpec(kind, args.n1, args.n2)


def run_study(args):
    if args.nmc < 100:
        raise ValidationError("--nmc must be at least 100")
    if not (0.0 < args.alpha <= 1.0):
        raise ValidationError("--alpha must lie in (0, 1]")
    spec = _build_null_spec(args)
    test_names = [t.strip() for t in args.tests.split(",") if t.strip()]
    if not test_names:
        raise ValidationError("--tests must name at least one test")
    agreement_pair = None
    if args.agreement:
        parts = [t.strip() for t in args.agreement.split(",")]
        if len(parts) != 2:
            raise ValidationError("--agreement takes exactly two test names: A,B")
        agreement_pair = tuple(parts)
    wanted = list(dict.fromkeys(test_names + (list(agreement_pair) if agreement_pair else [])))
    unknown = [t for t in wanted if t not in TEST_SELECTORS]
    if unknown:
        raise ValidationError(
            f"unknown test {unknown[0]!r}; choose from {', '.join(available_tests())}"
        )
    selectors = [TEST_SELECTORS[t] for t in wanted]
    rejections = _study_rejections(
        spec, selectors, args.nmc, args.alpha, args.seed, args.edge, args.threads
    )
    by_name = {name: rejections[:, idx] for idx, name in enumerate(wanted)}
    sizes = {name: _size_from_rejections(by_name[name], args.nmc, args.alpha) for name in test_names}
    agreement = None
    if agreement_pair:
        a, b = agreement_pair
        agreement = float(np.mean(by_name[a] & by_name[b]))
    return spec, sizes, agreement


def _cmd_simulate(args) -> int:
    spec, sizes, agreement = run_study(args)
    print(
        f"null: {args.null} (n1={spec.n1}, n2={spec.n2})   edge: {args.edge}   "
        f"n_mc: {args.nmc}   alpha: {args.alpha:g}   seed: {args.seed}"
    )
    print(f"{'test':24} {'alpha_hat':>9} {'95% CI':>18}  verdict")
    for name, est in sizes.items():
        ci = f"[{est.ci_low:.4f}, {est.ci_high:.4f}]"
        print(f"{name:24} {est.alpha_hat:>9.4f} {ci:>18}  {est.verdict}")
    if agreement is not None:
        a, b = args.agreement.split(",")
        print(f"agreement({a.strip()}, {b.strip()}) = {agreement:.4f}")
    return 0


# ---------------------------------------------------------------------------
# ripley subcommand

def _safe_token(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", token) or "class"


def run_ripley(args) -> list[str]:
    with _open_input(args.points) as stream:
        points = parse_points_csv(stream, region=args.region)
    region = points.region
    if (region[2] - region[0]) <= 0 or (region[3] - region[1]) <= 0:
        raise ValidationError("Ripley curves need a region with positive area")
    t_max = args.tmax if args.tmax is not None else min(region[2] - region[0], region[3] - region[1]) / 4.0
    names = points.class_names or tuple(str(i) for i in range(points.q))
    sizes = points.class_sizes

    # compute every curve before writing anything, so a failure on a later
    # class cannot leave partial output behind
    curves: list[tuple[str, LCurve]] = []
    for i in range(points.q):
        coords = points.coords[points.labels == i]
        if coords.shape[0] < 2:
            raise ValidationError(f"class {names[i]!r} has fewer than 2 points")
        curve = l_univariate(coords, region, t_max, args.steps)
        spec = NullSpec("csr_independence", int(sizes[i]), 1, region=region)
        low, high = l_envelope(
            spec, "uni-1", t_max, args.steps, args.envelope_sims, seed=args.seed
        )
        curves.append(
            (f"{args.out_prefix}uni-{_safe_token(names[i])}.csv", curve.with_envelope(low, high))
        )

    for i in range(points.q):
        for j in range(i + 1, points.q):
            a = points.coords[points.labels == i]
            b = points.coords[points.labels == j]
            curve = l_bivariate(a, b, region, t_max, args.steps)
            spec = NullSpec("csr_independence", int(sizes[i]), int(sizes[j]), region=region)
            low, high = l_envelope(
                spec, "bi", t_max, args.steps, args.envelope_sims, seed=args.seed
            )
            curves.append(
                (
                    f"{args.out_prefix}bi-{_safe_token(names[i])}-{_safe_token(names[j])}.csv",
                    curve.with_envelope(low, high),
                )
            )

    written = []
    for path, curve in curves:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "l_minus_t", "env_low", "env_high"])
            for row in zip(curve.t_grid, curve.l_minus_t, curve.env_low, curve.env_high):
                writer.writerow([f"{v:.10g}" for v in row])
        written.append(path)
    return written


def _cmd_ripley(args) -> int:
    for path in run_ripley(args):
        print(path)
    return 0


# ---------------------------------------------------------------------------
# parser plumbing

def _open_input(path: str):
    if path == "-":
        return sys.stdin
    try:
        return open(path, "r", newline="")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def _rectangle_arg(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected xmin,ymin,xmax,ymax")
    try:
        rect = tuple(float(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("rectangle coordinates must be numbers") from None
    if rect[0] > rect[2] or rect[1] > rect[3]:
        raise argparse.ArgumentTypeError("rectangle must have xmin<=xmax and ymin<=ymax")
    return rect


def _default_threads() -> int:
    env = os.environ.get("SEGSTAT_THREADS", "").strip()
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
    return os.cpu_count() or 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segstat",
        description="Nearest-neighbor contingency table tests for spatial segregation",
    )
    parser.add_argument("--version", action="version", version=f"segstat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    nnct = sub.add_parser("nnct", help="NNCT, Q/R, and all segregation tests for one data set")
    nnct.add_argument("points", help="CSV file with header x,y,class ('-' for stdin)")
    nnct.add_argument("--region", type=_rectangle_arg, default=None,
                      help="study rectangle xmin,ymin,xmax,ymax (default: bounding box)")
    nnct.add_argument("--correction", choices=["none", "toroidal", "inner-buffer", "outer-buffer"],
                      default="none")
    nnct.add_argument("--buffer-k", type=int, default=1,
                      help="inner buffer width = E[W] + k*sd(W) under CSR (default 1)")
    nnct.add_argument("--core-region", type=_rectangle_arg, default=None,
                      help="core rectangle for --correction outer-buffer")
    nnct.add_argument("--qr-adjust", action="store_true",
                      help="use the CSR adjustment Q=0.63n, R=0.62n in Dixon moments")
    nnct.add_argument("--mc", type=int, default=0,
                      help="add randomization p-values from this many relabelings")
    nnct.add_argument("--seed", type=int, default=0)
    nnct.add_argument("--format", choices=["text", "json"], default="text")
    nnct.set_defaults(func=_cmd_nnct)

    sim = sub.add_parser("simulate", help="empirical size/agreement studies under a null pattern")
    sim.add_argument("--null", required=True, choices=sorted(_NULL_BY_FLAG))
    sim.add_argument("--file", default=None, help="fixed locations CSV for --null rl-file")
    sim.add_argument("--n1", type=int, default=None)
    sim.add_argument("--n2", type=int, default=None)
    sim.add_argument("--nmc", type=int, default=10000)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--tests", default="pielou-overall,pielou-yates,pielou-right,pielou-left,dixon-overall",
                     help=f"comma-separated tests from: {', '.join(available_tests())}")
    sim.add_argument("--edge", choices=["none", "toroidal", "outer-buffer"], default="none")
    sim.add_argument("--agreement", default=None, metavar="A,B",
                     help="also report how often both named tests reject")
    sim.add_argument("--threads", type=int, default=_default_threads())
    sim.set_defaults(func=_cmd_simulate)

    rip = sub.add_parser("ripley", help="univariate and bivariate L-function curves with envelopes")
    rip.add_argument("points", help="CSV file with header x,y,class ('-' for stdin)")
    rip.add_argument("--region", type=_rectangle_arg, default=None)
    rip.add_argument("--tmax", type=float, default=None,
                     help="largest distance on the grid (default: short side / 4)")
    rip.add_argument("--steps", type=int, default=100)
    rip.add_argument("--envelope-sims", type=int, default=99)
    rip.add_argument("--seed", type=int, default=0)
    rip.add_argument("--out-prefix", default="ripley-")
    rip.set_defaults(func=_cmd_ripley)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    if getattr(args, "mc", 0) and args.mc < 99:
        print("error: --mc needs at least 99 relabelings", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
