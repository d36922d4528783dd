"""Command-line front end: ``eivreg --config FILE --mode {estimate,study,check}``.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import shutil
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import RunConfig, build_run_config, load_config
from .errors import ConfigError, EIVError, NotIntegrable
from .estimators import check_bandwidth_condition, minimize_criterion
from .rates import tail_bound_check
from .simulation import StudySpec, compare_rate_to_theory, parseval_oracle, replicate_seed, run_study
from .spectral import deconv_kernel_mass

log = logging.getLogger("eivreg")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

AGGREGATE_COLUMNS = ["n", "mse", "bias2", "var", "coverage", "slope_cum"]


def record_columns(d: int) -> list[str]:
    """Column names of the per-replicate records file."""
    return ["scenario_id", "n", "replicate", *[f"theta_hat_{j + 1}" for j in range(d)], "criterion", "Cn", "failed"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _record_row(sid, n, rep, theta, value, Cn, failed):
    return [sid, n, rep, *theta, value, Cn, failed]


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------


def run_estimate(rc: RunConfig, out: Path) -> int:
    sc = rc.scenario
    n = rc.estimate_n
    sample = sc.simulate(n, replicate_seed(rc.seed_base, n, 0))
    res = minimize_criterion(rc.estimator, sample, sc)
    Cn = math.nan if res.Cn is None else res.Cn
    _write_csv(out / "estimate.csv", record_columns(sc.d),
               [_record_row(sc.name, n, 0, res.theta, res.value, Cn, res.trace.stalled)])
    lines = [
        f"scenario  {sc.name}  ({sc.family.name}, {sc.kind.value}, noise {sc.noise!r})",
        f"n         {n}",
        f"theta0    {np.array2string(sc.theta0, precision=6)}",
        f"theta_hat {np.array2string(res.theta, precision=6)}",
        f"criterion {res.value:.10g}",
        f"Cn        {Cn:.6g}",
        f"gradient  {res.trace.grad_norm:.3g} after {res.trace.iterations} local iterations",
        f"boundary  {res.boundary}",
    ]
    _summary(out, lines)
    return EXIT_OK


def run_study_mode(rc: RunConfig, out: Path, threads: int) -> int:
    sc = rc.scenario
    spec = StudySpec(sc, rc.n_grid, rc.M, rc.seed_base, rc.estimator, rc.coverage, threads)
    res = run_study(spec)
    _write_csv(out / "records.csv", record_columns(sc.d),
               [_record_row(sc.name, r.n, r.replicate, r.theta, r.value, r.Cn, r.failed) for r in res.records])
    _write_csv(out / "aggregates.csv", AGGREGATE_COLUMNS,
               [[a.n, a.mse, a.bias2, a.var, a.coverage, a.slope_cum] for a in res.aggregates])
    lines = [f"scenario {sc.name}: {len(res.records)} replicates, {res.failures} failed, valid={res.valid}"]
    for a in res.aggregates:
        lines.append(f"  n={a.n:>7}  mse={a.mse:.4g}  bias2={a.bias2:.3g}  var={a.var:.4g}  "
                     f"coverage={a.coverage:.3f}  slope_cum={a.slope_cum:.3f}")
    if len(rc.n_grid) >= 3:
        rate = sc.rate_spec if sc.kind.uses_kernel else None
        v = compare_rate_to_theory(res, rate)
        lines.append(f"rate: {v.status} ({v.message})")
    elif len(rc.n_grid) == 2:
        lines.append(f"slope {res.slope:.3f}")
    _summary(out, lines)
    return EXIT_OK if res.valid else EXIT_RUNTIME


def run_checks(rc: RunConfig) -> list[tuple]:
    """``(check, detail, value, threshold, status)`` rows; status is pass, FAIL or skipped."""
    sc = rc.scenario
    rows = []
    try:
        Cn = sc.bandwidth(rc.check_n).Cn
    except (NotIntegrable, EIVError) as exc:
        Cn = None
        rows.append(("bandwidth", str(exc), math.nan, math.nan, "skipped"))
    for c in sorted({*rc.check_cutoffs, *(() if Cn is None else (Cn,))}):
        err = abs(deconv_kernel_mass(sc.kernel, sc.noise, c) - 1.0)
        rows.append(("kernelMass", f"Cn={c:.4g}", err, 1e-8, "pass" if err <= 1e-8 else "FAIL"))
    try:
        targets = sc.triple.targets
    except NotIntegrable as exc:
        rows.append(("targets", f"not integrable: {exc}", math.nan, math.nan, "skipped"))
        return rows
    for t in targets:
        bound = t.bind(t.theta_ref)
        for c in rc.check_cutoffs:
            if t.source != "analytic":
                rows.append(("tailBound", f"p={t.p} Cn={c:g} numeric transform", math.nan, math.nan, "skipped"))
                continue
            rep = tail_bound_check(bound, c)
            status = "skipped" if rep.skipped else ("pass" if rep.passed else "FAIL")
            rows.append(("tailBound", f"p={t.p} Cn={c:g}", rep.lhs, rep.rhs * 1.05, status))
    if Cn is not None:
        rep = parseval_oracle(sc, Cn, rc.check_n, replicate_seed(rc.seed_base, rc.check_n, 0))
        rows.append(("parsevalOracle", f"n={rc.check_n} Cn={Cn:.4g} max |diff|/se", rep.max_z, rep.threshold,
                     "pass" if rep.passed else "FAIL"))
        ok, table = check_bandwidth_condition(sc)
        worst = max(row[-1] for row in table)
        rows.append(("biasVarianceDecrease", "n=100,1000,10000", worst, math.nan, "pass" if ok else "FAIL"))
    return rows


def run_check_mode(rc: RunConfig, out: Path) -> int:
    rows = run_checks(rc)
    _write_csv(out / "checks.csv", ["check", "detail", "value", "threshold", "status"], rows)
    lines = [f"{status:>7}  {name:<22} {detail}  value={_fmt(v)}" for name, detail, v, _, status in rows]
    failed = [r for r in rows if r[4] == "FAIL"]
    lines.append(f"{len(failed)} of {len(rows)} checks failed")
    _summary(out, lines)
    return EXIT_CHECK if failed else EXIT_OK


def _summary(out: Path, lines):
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eivreg", description="Errors-in-variables regression estimators.")
    p.add_argument("--config", required=True, help="flat dotted key = value configuration file")
    p.add_argument("--mode", choices=("estimate", "study", "check"), help="overrides run.mode")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="overrides study.seedBase")
    p.add_argument("--threads", type=int, default=1, help="worker threads for replicates and grid search")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        rc = build_run_config(cfg, args.mode, args.seed, args.out, args.threads)
        out = Path(rc.out)
        out.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(args.config, out / "config.cfg")
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        sys.stderr.write(f"configuration error{key}: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"configuration error [--out]: {exc}\n")
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            if rc.mode == "estimate":
                return run_estimate(rc, out)
            if rc.mode == "study":
                return run_study_mode(rc, out, args.threads)
            return run_check_mode(rc, out)
    except EIVError as exc:
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
