"""Command-line experiment runner.

``riseval run`` evaluates a one-dimensional sweep with the analytic engine,
the Monte Carlo engine or both, and writes one CSV row per
(point, series, engine, metric).  ``riseval compare`` checks the two engines
against each other at a single parameter point.

Exit status: 0 on success, 1 on a usage or config error, 2 when an
evaluation or output step fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import montecarlo as mc
from .association import assoc_prob_los
from .config import ConfigError, SystemParams, load_params, parse_params
from .coverage import RateMode, rate_coverage, sinr_coverage, sinr_coverage_asymptotic

log = logging.getLogger("riseval")

HEADER = ["sweep_var", "value", "scheme", "engine", "metric", "estimate", "stderr", "n_or_tol"]
SWEEP_VARS = ("lambda_b", "lambda_r", "snr_db", "ris_half_length", "tau_db", "rho")
METRICS = ("assoc", "sinr_cov", "rate_cov")
ENGINES = ("analytic", "montecarlo")
SCHEMES = {s.value: s for s in mc.Scheme}
SNR_GRID = tuple(range(-10, 31, 5))
ANALYTIC_REL_TOL = 1e-6


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Series:
    """One curve of a sweep: a label plus parameter overrides."""

    label: str = ""
    overrides: tuple = ()


@dataclass(frozen=True)
class SweepSpec:
    sweep_variable: str
    values: tuple
    metric: str
    engines: tuple = ("analytic",)
    schemes: tuple = ("noma_ris",)
    series: tuple = (Series(),)
    base_overrides: tuple = field(default=())

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARS:
            raise UsageError(f"unknown sweep variable {self.sweep_variable!r}")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        diffs = [b - a for a, b in zip(self.values, self.values[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise UsageError("sweep values must be strictly monotone")
        if self.metric not in METRICS:
            raise UsageError(f"unknown metric {self.metric!r}")
        if not self.engines or any(e not in ENGINES for e in self.engines):
            raise UsageError(f"engines must be a nonempty subset of {ENGINES}")
        if any(s not in SCHEMES for s in self.schemes):
            raise UsageError(f"schemes must come from {tuple(SCHEMES)}")


PRESETS = {
    "fig2": SweepSpec("lambda_b", (1, 2, 5, 10, 15, 20, 30, 40, 50), "assoc", ("analytic", "montecarlo"),
                      series=tuple(Series(f"lambda_r={r}", (("lambda_r", r * 1e-6),)) for r in (50, 200, 400))),
    "fig3": SweepSpec("snr_db", SNR_GRID, "sinr_cov", ("analytic", "montecarlo"),
                      series=(Series("lambda_b=10,lambda_r=50", (("lambda_b", 10e-6), ("lambda_r", 50e-6))),
                              Series("lambda_b=20,lambda_r=200", (("lambda_b", 20e-6), ("lambda_r", 200e-6))))),
    "fig4": SweepSpec("snr_db", SNR_GRID, "sinr_cov", ("analytic", "montecarlo"),
                      schemes=("noma_ris", "oma_ris", "noma_macro")),
    "fig5": SweepSpec("ris_half_length", (1e-3, 1e-2, 0.1, 1, 10, 100, 1e3, 3e3, 1e4, 3e4, 1e5, 1e6),
                      "sinr_cov", ("analytic",), base_overrides=(("p_b", 1.0),)),
    "fig6": SweepSpec("lambda_r", (10, 50, 100, 200, 400, 800), "sinr_cov", ("analytic",),
                      series=tuple(Series(f"lambda_b={b}", (("lambda_b", b * 1e-6),)) for b in (5, 10, 20)),
                      base_overrides=(("p_b", 1.0), ("tau_t", 10 ** -0.5), ("tau_c", 10 ** -0.5))),
    "fig7": SweepSpec("snr_db", SNR_GRID, "rate_cov", ("analytic", "montecarlo"),
                      schemes=("noma_ris", "oma_ris", "noma_macro"),
                      series=tuple(Series(f"lambda_u={u}", (("lambda_u", u * 1e-6),)) for u in (20, 100))),
}


def parse_sweep(text: str) -> SweepSpec:
    """Parse ``var=v1,v2;metric=m;engines=a,b;schemes=s1,s2``."""
    parts = {}
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        if "=" not in chunk:
            raise UsageError(f"bad sweep component {chunk!r}")
        k, v = (s.strip() for s in chunk.split("=", 1))
        parts[k] = v
    var = next((k for k in parts if k in SWEEP_VARS), None)
    if var is None:
        raise UsageError(f"sweep needs one of {SWEEP_VARS}")
    try:
        values = tuple(float(v) for v in parts[var].split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"non-numeric sweep value in {parts[var]!r}") from exc
    split = lambda key, default: tuple(s.strip() for s in parts.get(key, default).split(",") if s.strip())
    return SweepSpec(var, values, parts.get("metric", "sinr_cov"), split("engines", "analytic"),
                     split("schemes", "noma_ris"))


def _apply(params: SystemParams, var: str, value: float) -> SystemParams:
    if var in ("lambda_b", "lambda_r"):
        return params.replace(**{var: value * 1e-6})
    if var == "snr_db":
        return params.with_snr_db(value)
    if var == "ris_half_length":
        return params.replace(ris_half_length_l=value)
    if var == "tau_db":
        tau = 10.0 ** (value / 10.0)
        return params.replace(tau_t=tau, tau_c=tau)
    return params.replace(rho_t=value, rho_c=value)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return f"{x:.9g}"


@dataclass(frozen=True)
class _Task:
    index: int
    spec: SweepSpec
    series: Series
    params: SystemParams
    seed: int
    realizations: int


def _scheme_label(scheme: str, series: Series) -> str:
    return f"{scheme}[{series.label}]" if series.label else scheme


def _analytic_rows(spec: SweepSpec, value, label: str, p: SystemParams):
    var = spec.sweep_variable
    rows = []
    if spec.metric == "assoc":
        rep = assoc_prob_los(p)
        for name, est, err in (("assoc_L", rep.a_l, rep.est_error), ("assoc_R", rep.a_r, rep.est_error),
                               ("P_L", rep.upper_bound_pl, 0.0), ("P_N", rep.lower_bound_pn, 0.0)):
            rows.append([var, value, label, "analytic", name, est, err, 1e-10])
    elif spec.metric == "sinr_cov":
        cov = sinr_coverage(params=p, method="reduced")
        rows.append([var, value, label, "analytic", "sinr_cov", cov.total, cov.est_error, ANALYTIC_REL_TOL])
        rows.append([var, value, label, "analytic", "sinr_cov_los", cov.los, 0.0, ANALYTIC_REL_TOL])
        rows.append([var, value, label, "analytic", "sinr_cov_ris", cov.ris, 0.0, ANALYTIC_REL_TOL])
        if var == "ris_half_length":
            rows.append([var, value, label, "analytic", "sinr_cov_asymptote", sinr_coverage_asymptotic(params=p), 0.0, 0.0])
    else:
        exact = rate_coverage(params=p, mode=RateMode.EXACT_SUM)
        meanl = rate_coverage(params=p, mode=RateMode.MEAN_LOAD)
        rows.append([var, value, label, "analytic", "rate_cov", exact, 0.0, ANALYTIC_REL_TOL])
        rows.append([var, value, label, "analytic", "rate_cov_meanload", meanl, 0.0, ANALYTIC_REL_TOL])
    return rows


def _geometry_key(var: str) -> bool:
    # sweeps that leave the random geometry unchanged can share one simulation
    return var in ("snr_db", "tau_db", "rho")


def _run_series(task: _Task):
    """All rows for one series of a sweep, in sweep order."""
    spec, series = task.spec, task.series
    base = task.params
    for k, v in spec.base_overrides + series.overrides:
        base = base.replace(**{k: v})
    rows = []
    cache = {}
    for value in spec.values:
        p = _apply(base, spec.sweep_variable, value)
        log.info("%s=%g %s", spec.sweep_variable, value, series.label)
        try:
            for scheme in spec.schemes:
                label = _scheme_label(scheme, series)
                if "analytic" in spec.engines and scheme == "noma_ris":
                    rows.extend(_analytic_rows(spec, value, label, p))
                if "montecarlo" not in spec.engines:
                    continue
                cfg = mc.MCConfig(n_realizations=task.realizations, seed=task.seed, scheme=SCHEMES[scheme])
                if spec.metric == "assoc":
                    if scheme != "noma_ris":
                        continue
                    res = mc.estimate(cfg, p, mc.AssocProb())
                    name = "assoc_L"
                else:
                    key = (scheme, value) if not _geometry_key(spec.sweep_variable) else scheme
                    if key not in cache:
                        cache = {key: mc.simulate(cfg, p)}
                    samples = cache[key]
                    if spec.metric == "sinr_cov":
                        res = mc.sinr_coverage_from(samples, p)
                    else:
                        res = mc.rate_coverage_from(samples, p)
                    name = spec.metric
                rows.append([spec.sweep_variable, value, label, "montecarlo", name, res.estimate, res.stderr,
                             res.n_or_tol])
        except Exception as exc:
            raise RuntimeError(f"evaluation failed at {spec.sweep_variable}={value} ({series.label or 'base'}): "
                               f"{exc}") from exc
    return rows


def _sort_key(spec: SweepSpec):
    order = {v: i for i, v in enumerate(spec.values)}
    return lambda pair: (order[pair[1][1]], pair[0])


def run(params: SystemParams, spec: SweepSpec, out, *, jobs: int = 1, seed: int = 0,
        realizations: int = 20_000) -> None:
    """Evaluate ``spec`` and write the CSV to the text stream ``out``."""
    tasks = [_Task(i, spec, s, params, seed, realizations) for i, s in enumerate(spec.series)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_series, tasks))
    else:
        results = [_run_series(t) for t in tasks]
    tagged = [(t.index, row) for t, rows in zip(tasks, results) for row in rows]
    # rows in sweep order, series order within a point; stable inside a series
    tagged.sort(key=_sort_key(spec))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(HEADER)
    for _, row in tagged:
        w.writerow([_fmt(x) for x in row])


def _tolerance(metric: str, stderr: float) -> float:
    if metric == "assoc":
        return max(0.005, 3.0 * stderr)
    return 0.02 if metric == "sinr_cov" else 0.03


def compare(params: SystemParams, metric: str, *, seed: int = 0, realizations: int = 100_000,
            out=None) -> bool:
    """Print analytic vs Monte Carlo at one point; return True on agreement.

    A disagreement is reported, not treated as an error.
    """
    out = out or sys.stdout
    cfg = mc.MCConfig(n_realizations=realizations, seed=seed)
    if metric == "assoc":
        analytic = {"assoc_L": assoc_prob_los(params).a_l}
        sim = mc.estimate(cfg, params, mc.AssocProb())
    elif metric == "sinr_cov":
        analytic = {"sinr_cov": sinr_coverage(params=params, method="reduced").total}
        sim = mc.estimate(cfg, params, mc.SinrCoverage())
    elif metric == "rate_cov":
        analytic = {"rate_cov_exact": rate_coverage(params=params, mode=RateMode.EXACT_SUM),
                    "rate_cov_meanload": rate_coverage(params=params, mode=RateMode.MEAN_LOAD)}
        sim = mc.estimate(cfg, params, mc.RateCoverage())
    else:
        raise UsageError(f"unknown metric {metric!r}")
    ref = next(iter(analytic.values()))
    gap = abs(ref - sim.estimate)
    tol = _tolerance(metric, sim.stderr)
    ok = gap < tol or (ref == 0.0 and sim.estimate == 0.0)
    for name, value in analytic.items():
        print(f"analytic {name}: {value:.9g}", file=out)
    print(f"montecarlo: {sim.estimate:.9g} +/- {sim.stderr:.3g} (n={realizations})", file=out)
    print(f"gap: {gap:.3g}  tolerance: {tol:.3g}  {'PASS' if ok else 'FAIL'}", file=out)
    return ok


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _set_pairs(pairs, params: SystemParams) -> SystemParams:
    return parse_params("\n".join(pairs), base=params) if pairs else params


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riseval", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evaluate a sweep and write CSV")
    r.add_argument("--config", help="flat key = value parameter file")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--sweep", help="e.g. 'snr_db=-10,0,10;metric=sinr_cov;engines=analytic,montecarlo'")
    r.add_argument("--out", required=True, help="CSV path, or - for stdout")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--realizations", type=int, default=20_000)

    c = sub.add_parser("compare", help="analytic vs Monte Carlo at one point")
    c.add_argument("--config")
    c.add_argument("--metric", choices=METRICS, required=True)
    c.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="parameter override, same syntax as the config file")
    c.add_argument("--snr-db", type=float)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--realizations", type=int, default=100_000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "run" else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        params = load_params(args.config)
        if args.command == "run":
            spec = PRESETS[args.preset] if args.preset else parse_sweep(args.sweep)
            if args.realizations < 1 or args.jobs < 1:
                raise UsageError("--realizations and --jobs must be >= 1")
        else:
            params = _set_pairs(args.set, params)
            if args.snr_db is not None:
                params = params.with_snr_db(args.snr_db)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"riseval: error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run":
            buf = io.StringIO()
            run(params, spec, buf, jobs=args.jobs, seed=args.seed, realizations=args.realizations)
            if args.out == "-":
                sys.stdout.write(buf.getvalue())
            else:
                with open(args.out, "w", newline="") as fh:
                    fh.write(buf.getvalue())
            log.info("wrote %s", args.out)
            return 0
        compare(params, args.metric, seed=args.seed, realizations=args.realizations)
        return 0
    except Exception as exc:  # evaluation or output failure
        print(f"riseval: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
