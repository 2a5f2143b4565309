"""Benchmark harness: single runs, the maturity sweeps and the sync/async comparison.

Run ``python -m aparareal --help`` for the flags. Results are written as CSV.
Exit status is 0 on success, 2 on a usage error and 3 when a run did not
converge.
"""

import argparse
import csv
import io
import logging
import os
import statistics
import sys
import time
from dataclasses import dataclass, field, replace

from .asynchronous import DetectionParams, async_solve
from .pricing import MarketOption, exact_price
from .schedule import load as load_schedule
from .schedule import random_schedule, simulate_schedule
from .sync import DEFAULT_TOL, integer_ratio, make_config, parareal_solve, sequential_reference

__all__ = [
    "UsageError",
    "ExperimentSpec",
    "PriceRow",
    "ComparisonRow",
    "RunReport",
    "parse_spec",
    "run_single",
    "run_table1",
    "run_table3",
    "emit_csv",
    "read_csv",
    "main",
]

log = logging.getLogger("aparareal")

MODES = ("exact", "sequential", "sync", "async", "simulate")
TABLE1_DT = tuple(round(0.1 * i, 1) for i in range(1, 11))
TABLE3_SLICES = (16, 32, 64)

PRICE_COLUMNS = ("dT", "Va", "Ve", "eps_a", "eps_r", "time_s")
COMPARISON_COLUMNS = ("N", "sync_iter", "sync_time_s", "async_iter_min",
                      "async_iter_max", "async_iter_mean", "async_time_s")

# experiment presets; flags and config files override them
TABLE_PRESETS = {
    1: dict(spot=15.0, strike=20.0, slices=16, m=250),
    2: dict(spot=25.0, strike=30.0, slices=16, m=250),
    3: dict(spot=25.0, strike=30.0, dT=0.1, m=150),
}

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    mode: str | None = None
    table: int | None = None
    sigma: float = 0.2
    rate: float = 0.05
    spot: float | None = None
    strike: float | None = None
    maturity: float | None = None
    dT: float | None = None
    dt: float = 0.001
    slices: int | None = None
    m: int | None = None
    tol: float = DEFAULT_TOL
    max_iter: int | None = None
    reps: int | None = None
    seed: int = 0
    workers: int | None = None
    schedule: str | None = None
    max_delay: int = 3
    out: str | None = None

    @property
    def repetitions(self) -> int:
        if self.reps is not None:
            return self.reps
        return 5 if self.mode in ("async", "simulate") or self.table == 3 else 1

    def option(self) -> MarketOption:
        return MarketOption(self.sigma, self.rate, self.spot, self.strike, self.maturity_years())

    def maturity_years(self) -> float:
        if self.maturity is not None:
            return self.maturity
        return self.slices * self.dT

    def config(self, **overrides):
        spec = replace(self, **overrides)
        return make_config(spot=spec.spot, strike=spec.strike, delta_T=spec.dT,
                           n_slices=spec.slices, m=spec.m, dt=spec.dt, sigma=spec.sigma,
                           rate=spec.rate, tol=spec.tol, max_iter=spec.max_iter)


@dataclass
class PriceRow:
    dT: float
    Va: float
    Ve: float
    eps_a: float
    eps_r: float
    time_s: float
    iterations: list = field(default_factory=list)
    converged: bool = True

    @classmethod
    def build(cls, dT, Va, Ve, time_s, iterations=(), converged=True):
        eps_a = abs(Va - Ve)
        return cls(dT, Va, Ve, eps_a, eps_a / Ve, time_s, list(iterations), converged)


@dataclass
class ComparisonRow:
    N: int
    sync_iter: float
    sync_time_s: float
    async_iter_min: float
    async_iter_max: float
    async_iter_mean: float
    async_time_s: float
    sync_iter_runs: list = field(default_factory=list)
    converged: bool = True


@dataclass
class RunReport:
    kind: str
    rows: list = field(default_factory=list)
    spec: ExperimentSpec | None = None

    @property
    def columns(self):
        return PRICE_COLUMNS if self.kind == "price" else COMPARISON_COLUMNS

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows)


# -- argument handling -----------------------------------------------------

_FLOAT_KEYS = {"sigma", "rate", "spot", "strike", "maturity", "dT", "dt", "tol"}
_INT_KEYS = {"table", "slices", "m", "max_iter", "reps", "seed", "workers", "max_delay"}
_STR_KEYS = {"mode", "schedule", "out"}
_KEY_ALIASES = {"max-iter": "max_iter", "max-delay": "max_delay"}


def _coerce(key, value):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
    except ValueError:
        raise UsageError(f"{key}: cannot parse {value!r}") from None
    return value


def read_config(path) -> dict:
    """Flat ``key=value`` file using the long flag names; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-")
        key = _KEY_ALIASES.get(key, key)
        if not sep or key not in _FLOAT_KEYS | _INT_KEYS | _STR_KEYS:
            raise UsageError(f"{path}:{lineno}: unrecognised entry {raw!r}")
        out[key] = _coerce(key, value.strip())
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="aparareal-bench",
                description="Parareal option-pricing experiments, results as CSV.")
    S = argparse.SUPPRESS
    p.add_argument("--mode", choices=MODES, default=S)
    p.add_argument("--table", type=int, choices=(1, 2, 3), default=S,
                   help="run a preset sweep: 1 and 2 sweep dT, 3 compares sync and async")
    p.add_argument("--config", default=S, help="key=value file; flags override it")
    for name in ("sigma", "rate", "spot", "strike", "maturity", "tol"):
        p.add_argument(f"--{name}", type=float, default=S)
    p.add_argument("--dT", type=float, default=S, help="slice length, financial years")
    p.add_argument("--dt", type=float, default=S, help="fine step, financial years")
    p.add_argument("--slices", type=int, default=S)
    p.add_argument("--m", type=int, default=S, help="spatial sub-intervals")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--reps", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--schedule", default=S, help="schedule file for simulate mode")
    p.add_argument("--max-delay", dest="max_delay", type=int, default=S,
                   help="read lag bound of generated schedules (simulate mode)")
    p.add_argument("--out", default=S, help="CSV destination, default stdout")
    return p


def parse_spec(argv=None, config: str | None = None) -> ExperimentSpec:
    """Merge defaults, table preset, config file and flags (later wins) and validate."""
    flags = vars(_build_parser().parse_args(argv))
    config = flags.pop("config", config)
    from_file = read_config(config) if config else {}
    table = flags.get("table", from_file.get("table"))
    values = dict(TABLE_PRESETS.get(table, {}))
    values.update(from_file)
    values.update(flags)
    if table in (1, 2):
        values.setdefault("mode", "async")
    spec = ExperimentSpec(**values)
    validate(spec)
    return spec


def validate(spec: ExperimentSpec) -> None:
    if spec.mode is None and spec.table is None:
        raise UsageError("--mode is required (or --table)")
    if spec.mode is not None and spec.mode not in MODES:
        raise UsageError(f"unknown mode {spec.mode!r}")
    if spec.reps is not None and spec.reps < 1:
        raise UsageError("--reps must be at least 1")
    for name in ("sigma", "spot", "strike", "dt"):
        value = getattr(spec, name)
        if value is None:
            raise UsageError(f"--{name} is required")
        if not value > 0:
            raise UsageError(f"--{name} must be positive")
    if spec.rate < 0:
        raise UsageError("--rate must be non-negative")
    if not spec.tol > 0:
        raise UsageError("--tol must be positive")
    if spec.table in (1, 2):
        return
    if spec.dT is not None:
        try:
            integer_ratio(spec.dT, spec.dt)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if spec.mode == "exact" and spec.table is None:
        if spec.maturity is None and (spec.dT is None or spec.slices is None):
            raise UsageError("exact mode needs --maturity or both --dT and --slices")
        return
    if spec.dT is None:
        raise UsageError("--dT is required")
    if spec.maturity is not None:
        try:
            n = integer_ratio(spec.maturity, spec.dT, "maturity/dT")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if spec.slices is not None and spec.slices != n:
            raise UsageError(f"--maturity {spec.maturity} is not slices*dT = "
                             f"{spec.slices * spec.dT}")
        spec.slices = n
    if spec.table == 3:
        return
    if spec.slices is None or spec.slices < 1:
        raise UsageError("--slices must be a positive integer")
    if spec.m is None or spec.m < 2:
        raise UsageError("--m must be at least 2")
    if spec.mode == "async" and spec.workers not in (None, spec.slices):
        raise UsageError("async mode runs one worker per slice; --workers must equal --slices")


# -- experiments -----------------------------------------------------------

def _price_run(spec: ExperimentSpec, rep: int):
    """One run of ``spec.mode``; returns (price, iterations, converged)."""
    if spec.mode == "exact":
        return exact_price(spec.option()), 0, True
    cfg = spec.config()
    if spec.mode == "sequential":
        return sequential_reference(cfg)[1], 0, True
    if spec.mode == "sync":
        res = parareal_solve(cfg, workers=spec.workers or 1)
        return res.price, res.iterations, res.converged
    if spec.mode == "async":
        detection = DetectionParams(tol=spec.tol, max_updates=(
            spec.max_iter * spec.slices if spec.max_iter else None))
        res, stats = async_solve(cfg, detection=detection)
        return res.price, stats.mean, res.converged
    if spec.mode == "simulate":
        if spec.schedule:
            sched = load_schedule(spec.schedule, cfg.n_slices)
        else:
            sched = random_schedule(cfg.n_slices, 10 * cfg.n_slices, spec.max_delay,
                                    seed=spec.seed + rep, window=spec.max_delay + 1)
        res = simulate_schedule(cfg, sched)
        return res.price, res.iterations, res.converged
    raise UsageError(f"unknown mode {spec.mode!r}")


def run_single(spec: ExperimentSpec) -> PriceRow:
    """Run ``spec`` ``repetitions`` times; prices and times are averaged."""
    prices, times, iters, ok = [], [], [], True
    for rep in range(spec.repetitions):
        t0 = time.perf_counter()
        price, it, conv = _price_run(spec, rep)
        times.append(time.perf_counter() - t0)
        prices.append(price)
        iters.append(it)
        ok = ok and conv
    # simulated runs are replayed, not timed, so their files stay reproducible
    wall = 0.0 if spec.mode == "simulate" else statistics.fmean(times)
    ve = exact_price(spec.option())
    dT = spec.dT if spec.dT is not None else spec.maturity_years()
    row = PriceRow.build(dT, statistics.fmean(prices), ve, wall, iters, ok)
    log.info("%s dT=%g: Va=%.6f Ve=%.6f eps_a=%.2e", spec.mode, dT, row.Va, ve, row.eps_a)
    return row


def run_table1(spec: ExperimentSpec, sweep=TABLE1_DT) -> RunReport:
    """Price sweep over slice lengths ``dT`` with ``N`` fixed, so ``T = N dT``."""
    report = RunReport("price", spec=spec)
    for dT in sweep:
        report.rows.append(run_single(replace(spec, dT=dT, maturity=None, table=None)))
    return report


def run_table3(spec: ExperimentSpec, slices=TABLE3_SLICES) -> RunReport:
    """Synchronous against asynchronous parareal for each slice count."""
    report = RunReport("comparison", spec=spec)
    for N in slices:
        sync_it, sync_t, a_min, a_max, a_mean, a_t = [], [], [], [], [], []
        ok = True
        for _ in range(spec.repetitions):
            cfg = spec.config(slices=N, maturity=None)
            t0 = time.perf_counter()
            res = parareal_solve(cfg)
            sync_t.append(time.perf_counter() - t0)
            sync_it.append(res.iterations)
            ares, stats = async_solve(cfg, detection=DetectionParams(tol=spec.tol))
            a_min.append(stats.min)
            a_max.append(stats.max)
            a_mean.append(stats.mean)
            a_t.append(stats.wall_time)
            ok = ok and res.converged and ares.converged
        f = statistics.fmean
        row = ComparisonRow(N, f(sync_it), f(sync_t), f(a_min), f(a_max), f(a_mean), f(a_t),
                            sync_it, ok)
        log.info("N=%d sync %s async min/max/mean %.1f/%.1f/%.1f", N, sync_it,
                 row.async_iter_min, row.async_iter_max, row.async_iter_mean)
        report.rows.append(row)
    return report


# -- CSV -------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    # shortest round-tripping repr: full precision, exact re-parse
    return repr(float(value))


def emit_csv(report: RunReport, destination=None) -> None:
    """Write ``report`` as CSV to a path, an open text file, or stdout (None / "-")."""
    if destination is None or destination == "-":
        _write_csv(report, sys.stdout)
    elif hasattr(destination, "write"):
        _write_csv(report, destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write_csv(report, fh)


def _write_csv(report, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, c)) for c in report.columns])


def read_csv(source) -> RunReport:
    """Parse a file written by ``emit_csv`` back into a report."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header == PRICE_COLUMNS:
        report = RunReport("price")
        for rec in reader:
            report.rows.append(PriceRow(*map(float, rec)))
    elif header == COMPARISON_COLUMNS:
        report = RunReport("comparison")
        for rec in reader:
            report.rows.append(ComparisonRow(int(rec[0]), *map(float, rec[1:])))
    else:
        raise ValueError(f"unrecognised CSV header {header}")
    return report


# -- entry point -----------------------------------------------------------

def configure_logging(level_name: str | None = None) -> None:
    logging.addLevelName(5, "TRACE")
    level_name = (level_name or os.environ.get("PARAREAL_LOG", "off")).lower()
    levels = {"off": logging.WARNING, "info": logging.INFO, "trace": 5}
    if level_name not in levels:
        raise UsageError(f"PARAREAL_LOG must be off, info or trace, not {level_name!r}")
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("aparareal").setLevel(levels[level_name])


def run(spec: ExperimentSpec) -> RunReport:
    if spec.table in (1, 2):
        return run_table1(spec)
    if spec.table == 3:
        return run_table3(spec)
    return RunReport("price", [run_single(spec)], spec)


def main(argv=None) -> int:
    try:
        configure_logging()
        spec = parse_spec(argv)
        report = run(spec)
    except UsageError as exc:
        print(f"aparareal-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        emit_csv(report, spec.out)
    except OSError as exc:
        print(f"aparareal-bench: cannot write {spec.out}: {exc}", file=sys.stderr)
        return 1
    if not report.converged:
        print("aparareal-bench: some runs did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
