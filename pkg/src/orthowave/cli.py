"""Batch driver: basis verification, pricing runs, the results table and condition studies.

Subcommands::

    orthowave basis  --level 3
    orthowave price  --dim 2 --level 4 --option put
    orthowave table1 --dim 2 --level 0-5
    orthowave cond   --dim 2 --level 2-5

Exit codes: 0 success, 2 parse, 3 basis, 4 assembly, 5 solve, 6 evaluate.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import basis1d, model, operator, solve, sparsegrid

log = logging.getLogger("orthowave")

EXIT = {"parse": 2, "basis": 3, "assembly": 4, "solve": 5, "evaluate": 6}
DEFAULT_CEILING = 200_000


class StageError(RuntimeError):
    def __init__(self, stage: str, msg: str):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


# ---------------------------------------------------------------------------
# experiment plumbing
# ---------------------------------------------------------------------------
@dataclass
class ExperimentSpec:
    """One pricing run.

    ``level`` is read in the ``convention`` given: ``table`` (row 0 is the
    scaling-only grid, row k the sparse set of level k-1) or ``sum``.
    ``M`` defaults to ``4**level``.
    """

    d: int
    level: int
    option: str = "put"
    convention: str = "table"
    M: int | None = None
    params: Path | None = None
    points: np.ndarray | None = None
    cache: Path | None = None
    threads: int = 1
    tol: float = 1e-10
    literal_startup: bool = False
    ceiling: int = DEFAULT_CEILING
    force: bool = False

    def steps(self) -> int:
        return 4**self.level if self.M is None else self.M

    def problem(self) -> model.PricingProblem:
        path = model.benchmark_file() if self.params is None else self.params
        return model.load_problem(path, d=self.d, option=self.option)

    def index_set(self) -> sparsegrid.SparseIndexSet:
        if self.convention == "table":
            return sparsegrid.from_table_level(self.d, self.level)
        if self.convention == "sum":
            return sparsegrid.enumerate_sparse(self.d, self.level)
        raise ValueError(f"unknown level convention {self.convention!r}")

    def eval_points(self, K: float) -> np.ndarray:
        if self.points is not None:
            return np.atleast_2d(self.points)
        return np.array([[f * K] * self.d for f in (0.5, 1.0, 1.5)])


@dataclass
class ResultRow:
    d: int
    k: int
    N: int
    M: int
    it_max: int
    it_mean: float
    errors: list[float]
    values: list[float] = field(default_factory=list)
    exact: list[float] = field(default_factory=list)
    wall: float = 0.0


def get_generators(cache: Path | None) -> basis1d.GeneratorSet:
    """Generator set from the cache, rebuilding it if missing or corrupt."""
    if cache is not None:
        path = Path(cache) / "generators.txt"
        if path.exists():
            try:
                g = basis1d.load_generators(path)
                log.info("generators loaded from %s", path)
                return g
            except (basis1d.BasisError, ValueError, KeyError) as exc:
                log.warning("discarding generator cache %s (%s)", path, exc)
    g = basis1d.default_generators()
    if cache is not None:
        basis1d.save_generators(g, Path(cache) / "generators.txt")
    return g


def get_matrices(b: basis1d.Basis1D, widths, cache: Path | None) -> operator.OneDimMatrices:
    key = operator.blocks_key(b.generators.fingerprint(), widths)
    path = None if cache is None else Path(cache) / f"blocks_{key}.npz"
    if path is not None and path.exists():
        mats = operator.load_blocks(path, key)
        if mats is not None:
            return mats
        log.warning("discarding block cache %s", path)
    mats = operator.one_dim_matrices(b, widths)
    if path is not None:
        operator.save_blocks(path, mats, key)
    return mats


def run_price(spec: ExperimentSpec, log_: solve.StepLog | None = None) -> ResultRow:
    """Full pipeline for one experiment; raises :class:`StageError` on failure."""
    t0 = time.perf_counter()
    try:
        problem = spec.problem()
        s = spec.index_set()
        M = spec.steps()
        pts = spec.eval_points(problem.params.K)
        z = model.prices_to_cube(problem, pts, problem.params.T)
    except (ValueError, OSError, KeyError) as exc:
        raise StageError("parse", str(exc)) from exc
    if np.any(z <= 0) or np.any(z >= 1):
        raise StageError("parse", "evaluation point outside the computational domain")
    if s.total_count > spec.ceiling and not spec.force:
        raise StageError("parse", f"N={s.total_count} exceeds the ceiling {spec.ceiling}; pass --force")
    try:
        g = get_generators(spec.cache)
        b = basis1d.build_basis(g, s.k)
    except (basis1d.BasisError, ValueError) as exc:
        raise StageError("basis", str(exc)) from exc
    try:
        mats = get_matrices(b, s.widths, spec.cache)
        A = operator.BlockOperator(s, mats, problem.diffusion(), 1.0, 1.0, threads=spec.threads)
        c0 = operator.project_payoff(model.payoff_on_cube(problem), s, b)
    except ValueError as exc:
        raise StageError("assembly", str(exc)) from exc
    log_ = solve.StepLog() if log_ is None else log_
    cfg = solve.MarchConfig(problem.params.T, M, tol=spec.tol, literal_startup=spec.literal_startup)
    try:
        c = solve.march(A, c0, cfg, problem.params.r, log_)
    except (solve.CgFailure, ValueError) as exc:
        raise StageError("solve", str(exc)) from exc
    try:
        vals = operator.evaluate_expansion(c, s, b, z)
        exact = model.analytic_price(problem.kind, problem.params, pts, problem.params.T)
    except ValueError as exc:
        raise StageError("evaluate", str(exc)) from exc
    its = log_.iterations
    return ResultRow(
        d=spec.d,
        k=spec.level,
        N=s.total_count,
        M=M,
        it_max=max(its),
        it_mean=float(np.mean(its)),
        errors=[float(e) for e in np.abs(vals - exact)],
        values=[float(v) for v in vals],
        exact=[float(v) for v in np.atleast_1d(exact)],
        wall=time.perf_counter() - t0,
    )


def _fmt(e: float) -> str:
    return f"{e:.5e}"


def write_results(path: Path, rows: list[ResultRow]) -> None:
    npts = max(len(r.errors) for r in rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["d", "k", "N", "M", "it_max", "it_mean"]
            + [f"e_P{i + 1}" for i in range(npts)]
            + [f"V_P{i + 1}" for i in range(npts)]
        )
        for r in rows:
            w.writerow(
                [r.d, r.k, r.N, r.M, r.it_max, f"{r.it_mean:.2f}"]
                + [_fmt(e) for e in r.errors]
                + [f"{v:.10f}" for v in r.values]
            )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def cmd_basis(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        g = get_generators(Path(args.cache))
        b = basis1d.build_basis(g, _level_range(args.level)[-1])
        report = basis1d.verify_basis(b)
    except (basis1d.BasisError, ValueError) as exc:
        print(f"basis construction failed: {exc}", file=sys.stderr)
        return EXIT["basis"]
    (out / "verify_report.csv").write_text(report.to_csv())
    (out / "verify_report.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    if not report.passed:
        print(f"verification failed: {report.first_failure()}", file=sys.stderr)
        return EXIT["basis"]
    return 0


def _spec_from_args(args, d: int, level: int, option: str) -> ExperimentSpec:
    return ExperimentSpec(
        d=d,
        level=level,
        option=option,
        convention=args.level_convention,
        M=args.steps,
        params=None if args.params is None else Path(args.params),
        cache=Path(args.cache),
        threads=args.threads,
        tol=args.tol,
        literal_startup=args.literal_startup,
        force=args.force,
    )


def cmd_price(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = _single(args.dim)
    level = _level_range(args.level)[-1]
    spec = _spec_from_args(args, d, level, args.option)
    steplog = solve.StepLog()
    try:
        row = run_price(spec, steplog)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT[exc.stage]
    write_results(out / "results.csv", [row])
    steplog.write_csv(out / "solver_log.csv")
    print(
        f"d={row.d} k={row.k} N={row.N} M={row.M} it={row.it_max} "
        + " ".join(f"e(P{i + 1})={e:.3e}" for i, e in enumerate(row.errors))
        + f"  [{row.wall:.1f}s]"
    )
    return 0


TABLE_HEADER = [
    "d", "k", "N", "M",
    "put_it", "put_e_P1", "put_e_P2",
    "call_it", "call_e_P2", "call_e_P3",
    "put_ratio_P1", "put_ratio_P2", "call_ratio_P2", "call_ratio_P3",
]


def cmd_table1(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    timings = []
    failed = False
    for d in _int_list(args.dim):
        rows = []
        for level in _level_range(args.level):
            pair = {}
            for option in ("put", "call"):
                spec = _spec_from_args(args, d, level, option)
                try:
                    pair[option] = run_price(spec)
                    timings.append((d, level, option, pair[option].wall))
                except StageError as exc:
                    failed = True
                    print(f"d={d} k={level} {option}: {exc}", file=sys.stderr)
            rows.append((level, pair))
            if pair:
                r = next(iter(pair.values()))
                print(f"d={d} k={level} N={r.N} done", flush=True)
        for idx, (level, pair) in enumerate(rows):
            put, call = pair.get("put"), pair.get("call")
            ref = put or call
            if ref is None:
                lines.append([d, level, "", "", "failed"] + [""] * 9)
                continue
            nxt = rows[idx + 1][1] if idx + 1 < len(rows) else {}

            def ratio(opt, i):
                a, b = pair.get(opt), nxt.get(opt)
                if a is None or b is None or b.errors[i] == 0:
                    return ""
                return f"{a.errors[i] / b.errors[i]:.3f}"

            lines.append(
                [d, level, ref.N, ref.M]
                + ([put.it_max, _fmt(put.errors[0]), _fmt(put.errors[1])] if put else ["", "", ""])
                + ([call.it_max, _fmt(call.errors[1]), _fmt(call.errors[2])] if call else ["", "", ""])
                + [ratio("put", 0), ratio("put", 1), ratio("call", 1), ratio("call", 2)]
            )
    with open(out / "table1.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        w.writerows(lines)
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "k", "option", "seconds"])
        w.writerows([(d, k, o, f"{t:.2f}") for d, k, o, t in timings])
    print((out / "table1.csv").read_text(), end="")
    return EXIT["solve"] if failed else 0


def condition_study(d: int, levels, problem: model.PricingProblem, cache: Path | None = None, steps: int = 60):
    """Condition estimates of the Crank-Nicolson matrix with ``tau = T 4**-k`` (level-sum levels).

    Returns rows ``(k, N, tau, cond, lam_min, lam_max, gamma, bound, gamma_riesz)``.

    ``gamma = tau * lambda_max(G)`` is the step-size ratio implied by the
    sharpest continuity constant ``A`` with ``a(u, u) <= A 4**k ||u||**2`` on
    the discrete space, and ``bound = (1 + gamma) / (1 - gamma)`` (infinite
    when ``gamma >= 1``).  ``gamma_riesz`` is the same ratio with ``A``
    replaced by the a-priori estimate ``2 C2**2 sum(P)``, ``C2**2`` measured
    as ``max(||M||, ||B||**2) / 4**k`` on the 1D basis; it is much more
    pessimistic and usually exceeds one.
    """
    g = get_generators(cache)
    rows = []
    for k in levels:
        s = sparsegrid.enumerate_sparse(d, k)
        b = basis1d.build_basis(g, k)
        mats = get_matrices(b, s.widths, cache)
        tau = problem.params.T * 4.0**-k
        A = operator.BlockOperator(s, mats, problem.diffusion(), 1.0 / tau + 0.5 * problem.params.r, 0.5)
        cond, lo, hi = solve.estimate_condition(A.apply, s.total_count, steps=steps, return_extremes=True)
        _, _, g_hi = solve.estimate_condition(A.apply_G, s.total_count, steps=steps, return_extremes=True)
        gamma = tau * g_hi
        bound = (1 + gamma) / (1 - gamma) if gamma < 1 else float("inf")
        c2sq = max(np.linalg.norm(mats.M, 2), np.linalg.norm(mats.B, 2) ** 2) / 4.0**k
        gamma_riesz = tau * 2.0 * c2sq * problem.diffusion().sum() * 4.0**k
        rows.append((k, s.total_count, tau, cond, lo, hi, gamma, bound, gamma_riesz))
    return rows


def cmd_cond(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for d in _int_list(args.dim):
        spec = _spec_from_args(args, d, 0, args.option)
        try:
            problem = spec.problem()
        except (ValueError, OSError) as exc:
            print(str(exc), file=sys.stderr)
            return EXIT["parse"]
        for row in condition_study(d, _level_range(args.level), problem, Path(args.cache)):
            lines.append((d,) + row)
            k, N, tau, cond, lo, hi, gamma, bound, gamma_riesz = row
            print(f"d={d} k={k} N={N} tau={tau:.3e} cond={cond:.4f} bound={bound:.4f}", flush=True)
    with open(out / "cond.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "k", "N", "tau", "cond", "lambda_min", "lambda_max", "gamma", "bound", "gamma_riesz"])
        for d, k, N, tau, cond, lo, hi, gamma, bound, gr in lines:
            w.writerow(
                [d, k, N, f"{tau:.6e}", f"{cond:.6f}", f"{lo:.6e}", f"{hi:.6e}", f"{gamma:.4f}", f"{bound:.4f}", f"{gr:.4f}"]
            )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _single(text: str) -> int:
    vals = _int_list(text)
    if len(vals) != 1:
        raise argparse.ArgumentTypeError("expected a single dimension")
    return vals[0]


def _level_range(text: str) -> list[int]:
    text = str(text)
    if "-" in text:
        a, b = text.split("-", 1)
        return list(range(int(a), int(b) + 1))
    return [int(text)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orthowave", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, level_default):
        sp.add_argument("--level", default=level_default, help="level k, or a range a-b")
        sp.add_argument("--out", default="out")
        sp.add_argument("--cache", default=".orthowave-cache")

    sp = sub.add_parser("basis", help="build and verify the 1D basis")
    common(sp, "3")
    sp.set_defaults(func=cmd_basis)

    for name, func, hlp, level_default in (
        ("price", cmd_price, "price one option", "4"),
        ("table1", cmd_table1, "sweep levels for puts and calls", "0-4"),
        ("cond", cmd_cond, "condition numbers of the system matrix", "2-5"),
    ):
        sp = sub.add_parser(name, help=hlp)
        common(sp, level_default)
        sp.add_argument("--dim", default="2", help="dimension (table1/cond accept a comma list)")
        if name != "cond":  # the condition study always uses level-sum levels
            sp.add_argument("--level-convention", choices=("table", "sum"), default="table")
        else:
            sp.set_defaults(level_convention="sum")
        sp.add_argument("--steps", type=int, default=None, help="time steps M (default 4**k)")
        sp.add_argument("--option", choices=("put", "call"), default="put")
        sp.add_argument("--params", default=None, help="JSON parameter file")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--tol", type=float, default=1e-10, help="CG relative residual tolerance")
        sp.add_argument("--literal-startup", action="store_true",
                        help="always take four half-size Euler steps, even when M=1")
        sp.add_argument("--force", action="store_true", help="allow more than 2e5 unknowns")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT["parse"] if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT["parse"]


if __name__ == "__main__":
    sys.exit(main())
