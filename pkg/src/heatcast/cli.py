"""Command-line entry point.

Subcommands: gen (synthetic dataset), clean (validity mask + rejects),
fit (train one model), forecast (one 72-hour window from a saved model),
bench (full rolling-origin benchmark), pareto (query a report's
nondominated set).  Progress goes to stderr; machine-readable results go
to files.  Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from datetime import datetime

import numpy as np

from . import bench as bench_mod
from . import ingest
from .core import HORIZON, WEEK_HOURS
from .registry import ALGORITHM_NAMES, build_forecaster
from .serialize import load_model, save_model

ENV_TZ = "HEATCAST_TZ"
ENV_LATITUDE = "HEATCAST_LATITUDE"


class _CliError(Exception):
    """Flag/input validation problem; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_when(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise _CliError(f"bad timestamp {text!r}; expected ISO-8601") from None


def _parse_interval(text: str) -> tuple[datetime, datetime]:
    parts = text.split("/")
    if len(parts) != 2:
        raise _CliError(f"bad interval {text!r}; expected START/END")
    return _parse_when(parts[0]), _parse_when(parts[1])


def _default_latitude(args) -> float:
    if getattr(args, "latitude", None) is not None:
        return args.latitude
    return float(os.environ.get(ENV_LATITUDE, ingest.DEFAULT_LATITUDE))


def _load_clean(args) -> ingest.CleanDataset:
    tz = os.environ.get(ENV_TZ)
    _info(f"loading {args.data}")
    raw = ingest.load_csv(args.data, tz=tz, latitude=_default_latitude(args))
    if raw.rejects:
        _info(f"{len(raw.rejects)} rejected rows")
    return ingest.clean(raw)


def cmd_gen(args) -> int:
    if args.config:
        spec = ingest.parse_generator_config(args.config)
    else:
        spec = ingest.GeneratorConfig(
            counters=args.counters, hours=args.hours, sigma=args.sigma,
            latitude=_default_latitude(args),
            start=_parse_when(args.start),
        )
    _info(f"generating {spec.hours} hours x {spec.counters} counters (seed {args.seed})")
    ds = ingest.generate_synthetic(spec, args.seed)
    ingest.write_csv(ds, args.out)
    _info(f"wrote {args.out}")
    return 0


def cmd_clean(args) -> int:
    tz = os.environ.get(ENV_TZ)
    raw = ingest.load_csv(args.data, tz=tz, latitude=_default_latitude(args))
    ds = ingest.clean(raw)
    if args.rejects:
        ingest.write_rejects(raw.rejects, args.rejects)
        _info(f"wrote {len(raw.rejects)} rejects to {args.rejects}")
    ingest.write_csv(ingest.clean_to_raw(ds), args.out)
    total = ds.valid.size
    _info(f"valid cells: {int(ds.valid.sum())}/{total}; wrote {args.out}")
    return 0


def cmd_fit(args) -> int:
    if args.algo not in ALGORITHM_NAMES:
        raise _CliError(f"unknown algorithm {args.algo!r}")
    ds = _load_clean(args)
    t0, t1 = _parse_interval(args.train)
    view = ds.window(t0, t1)
    forecaster = build_forecaster(args.algo, seed=args.seed, max_epochs=args.max_epochs)
    _info(f"fitting {args.algo} on counter {args.counter}")
    trained, seconds = bench_mod.time_fit(lambda: forecaster.fit(view, args.counter))
    save_model(trained, args.out)
    _info(f"fitted in {seconds:.3f}s; wrote {args.out}")
    if args.curve and hasattr(trained, "curve"):
        from .neural import write_training_curve

        write_training_curve(trained.curve, args.curve)
        _info(f"wrote training curve to {args.curve}")
    return 0


def cmd_forecast(args) -> int:
    model = load_model(args.model)
    ds = _load_clean(args)
    origin = _parse_when(args.origin)
    oi = ds.index_of(origin)
    if oi < 0 or oi + HORIZON > ds.block_hours - 1:
        raise _CliError(
            f"origin {args.origin} leaves no {HORIZON}-hour horizon in the data"
        )
    history = ds.series(model.counter_id, upto=oi)
    frame = ds.weather.slice(oi + 1, oi + HORIZON)
    window = model.predict(history, frame, weather_now=ds.weather.record(oi))
    with open(args.out, "w", newline="") as fh:
        csv.writer(fh).writerow([repr(v) for v in window.values])
    _info(f"wrote 72-hour forecast from {args.origin} to {args.out}")
    return 0


def cmd_bench(args) -> int:
    names = [n.strip() for n in args.algos.split(",") if n.strip()]
    unknown = [n for n in names if n not in ALGORITHM_NAMES]
    if unknown:
        raise _CliError(f"unknown algorithms: {', '.join(unknown)}")
    if not names:
        raise _CliError("no algorithms given")
    algorithms = {n: build_forecaster(n, seed=args.seed, max_epochs=args.max_epochs) for n in names}
    ds = _load_clean(args)
    report = bench_mod.evaluate(
        algorithms, ds, _parse_interval(args.train), _parse_interval(args.test), jobs=args.jobs
    )
    with open(args.report, "w") as fh:
        fh.write(bench_mod.report_to_json(report))
    _info(f"{report.grid_origins} origins; wrote {args.report}")
    if args.plot_data:
        for path in bench_mod.write_plot_data(report, args.plot_data):
            _info(f"wrote {path}")
    failures = [c for c in report.scorecards if not c.ok]
    for c in failures:
        _info(f"note: {c.algorithm}/{c.counter}: {c.error}")
    return 0


def cmd_pareto(args) -> int:
    with open(args.report) as fh:
        report = bench_mod.report_from_json(fh.read())
    key = f"{args.time}_{args.quality}"
    names = report.nondominated_sets.get(key)
    if names is None:
        raise _CliError(f"report holds no nondominated set for axes {key}")
    text = "\n".join(names) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _info(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="heatcast", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--hours", type=int, default=20000)
    g.add_argument("--counters", type=int, default=3)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--latitude", type=float, default=None)
    g.add_argument("--start", default="2016-01-01T00:00:00")
    g.add_argument("--config", default=None, help="key=value generator config file")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    c = sub.add_parser("clean", help="apply the validity rules; write cleaned CSV")
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--rejects", default=None)
    c.add_argument("--latitude", type=float, default=None)
    c.set_defaults(fn=cmd_clean)

    f = sub.add_parser("fit", help="train one model on one counter")
    f.add_argument("--algo", required=True)
    f.add_argument("--counter", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--train", required=True, help="ISO interval START/END")
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--max-epochs", type=int, default=None)
    f.add_argument("--curve", default=None, help="training-curve CSV (networks only)")
    f.add_argument("--latitude", type=float, default=None)
    f.set_defaults(fn=cmd_fit)

    fc = sub.add_parser("forecast", help="72-hour forecast from a saved model")
    fc.add_argument("--model", required=True)
    fc.add_argument("--data", required=True)
    fc.add_argument("--origin", required=True)
    fc.add_argument("--out", required=True)
    fc.add_argument("--latitude", type=float, default=None)
    fc.set_defaults(fn=cmd_forecast)

    b = sub.add_parser("bench", help="rolling-origin benchmark")
    b.add_argument("--algos", required=True, help="comma-separated algorithm names")
    b.add_argument("--data", required=True)
    b.add_argument("--train", required=True)
    b.add_argument("--test", required=True)
    b.add_argument("--report", required=True)
    b.add_argument("--plot-data", default=None, help="prefix for quartile CSVs")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-epochs", type=int, default=None)
    b.add_argument("--latitude", type=float, default=None)
    b.set_defaults(fn=cmd_bench)

    pa = sub.add_parser("pareto", help="nondominated algorithms from a report")
    pa.add_argument("--report", required=True)
    pa.add_argument("--time", choices=bench_mod.TIME_AXES, required=True)
    pa.add_argument("--quality", choices=bench_mod.QUALITY_AXES, required=True)
    pa.add_argument("--out", default=None)
    pa.set_defaults(fn=cmd_pareto)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _CliError as exc:
        _info(f"error: {exc}")
        return 1
    try:
        return args.fn(args)
    except _CliError as exc:
        _info(f"error: {exc}")
        return 1
    except FileNotFoundError as exc:
        _info(f"error: {exc}")
        return 2
    except Exception as exc:
        _info(f"error: {type(exc).__name__}: {exc}")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
