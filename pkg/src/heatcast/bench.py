"""Rolling-origin benchmark harness with timing and Pareto reporting.

Every algorithm is fitted once per counter on the training interval and
then issues a 72-hour forecast from every admissible origin hour of the
test interval.  Cells are scored only where the actual reading is valid
and positive, with one shared cell mask per counter so algorithm
comparisons stay fair.  Wall-clock timings (single-shot for training,
per-call for prediction) feed interquartile summaries and the
nondominated time-quality sets.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime

import numpy as np

from .core import HORIZON, WEEK_HOURS, HourlySeries
from .ingest import CleanDataset, DatasetError, split

GRID_WARMUP = WEEK_HOURS  # trailing hours every family can warm up from
REPORT_SCHEMA_VERSION = 1

TIME_AXES = ("train", "predict")
QUALITY_AXES = ("mape", "mse")


class MetricError(ValueError):
    """No scorable cells for a metric."""


def mape(pred: np.ndarray, actual: np.ndarray) -> tuple[float, int]:
    """Mean absolute percentage error over cells with positive actuals.

    Returns (percent, excluded_cell_count); raises MetricError when no
    cell is scorable.
    """
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise ValueError("pred and actual must have equal length")
    ok = actual > 0.0
    excluded = int((~ok).sum())
    if not np.any(ok):
        raise MetricError("no cells with positive actual readings")
    value = float(np.mean(np.abs(actual[ok] - pred[ok]) / actual[ok]) * 100.0)
    return value, excluded


def mse(pred: np.ndarray, actual: np.ndarray) -> tuple[float, int]:
    """Mean squared error over the same cell mask as mape."""
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise ValueError("pred and actual must have equal length")
    ok = actual > 0.0
    excluded = int((~ok).sum())
    if not np.any(ok):
        raise MetricError("no cells with positive actual readings")
    value = float(np.mean((actual[ok] - pred[ok]) ** 2))
    return value, excluded


def quartiles(values) -> tuple[float, float, float]:
    """(Q1, median, Q3) with the linear-interpolation quantile definition."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("quartiles of an empty vector")
    q = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def nondominated(points: dict[str, tuple[float, float]]) -> set[str]:
    """Names whose (time, quality) point no other point dominates.

    B dominates A when both coordinates are <= with at least one strict;
    exact ties on both axes keep both points.
    """
    if not points:
        return set()
    names = list(points)
    order = sorted(names, key=lambda n: (points[n][0], points[n][1]))
    out: set[str] = set()
    best_quality = np.inf  # min quality among strictly earlier times
    i = 0
    while i < len(order):
        j = i
        t0 = points[order[i]][0]
        while j < len(order) and points[order[j]][0] == t0:
            j += 1
        group = order[i:j]
        qmin = min(points[n][1] for n in group)
        if qmin < best_quality:
            out.update(n for n in group if points[n][1] == qmin)
            best_quality = qmin
        i = j
    return out


def time_fit(fn):
    """Run fn once, returning (result, wall-clock seconds)."""
    t0 = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - t0


def timed_samples(fn, repeats: int = 100, warmup: int = 1) -> np.ndarray:
    """Wall-clock duration of each of ``repeats`` calls, after warm-up."""
    for _ in range(warmup):
        fn()
    out = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        out[i] = time.perf_counter() - t0
    return out


def time_predict(fn, repeats: int = 100) -> float:
    """Median wall-clock seconds over at least ``repeats`` invocations."""
    return float(np.median(timed_samples(fn, repeats=repeats)))


@dataclass
class EvalGrid:
    """Forecast origins of a test view, block indices into the view."""

    origins: np.ndarray
    horizon: int = HORIZON

    def __len__(self) -> int:
        return len(self.origins)


def build_grid(view: CleanDataset, warmup: int = GRID_WARMUP) -> EvalGrid:
    """Origins in the view's interval with warm-up history and a scorable horizon."""
    idx = np.arange(view.lo, view.hi + 1)
    ok = (idx - (warmup - 1) >= 0) & (idx + HORIZON <= view.block_hours - 1)
    return EvalGrid(origins=idx[ok])


@dataclass
class ScoreCard:
    algorithm: str
    counter: str
    mape: float | None = None
    mse: float | None = None
    train_time_s: float | None = None
    predict_time_us: float | None = None
    scored_cells: int = 0
    excluded_cells: int = 0
    skipped_origins: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class AlgorithmSummary:
    algorithm: str
    counters_ok: int
    fit_failures: int
    mape_quartiles: tuple[float, float, float] | None
    mse_quartiles: tuple[float, float, float] | None
    train_time_quartiles: tuple[float, float, float] | None
    predict_time_quartiles: tuple[float, float, float] | None
    predict_time_us_pooled_median: float | None


@dataclass
class BenchReport:
    schema_version: int
    machine: dict
    train_interval: tuple[str, str]
    test_interval: tuple[str, str]
    grid_origins: int
    scorecards: list[ScoreCard]
    summaries: list[AlgorithmSummary]
    nondominated_sets: dict[str, list[str]]

    def summary(self, algorithm: str) -> AlgorithmSummary:
        for s in self.summaries:
            if s.algorithm == algorithm:
                return s
        raise KeyError(algorithm)


def machine_descriptor() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _evaluate_counter(
    algorithms: dict,
    counter: str,
    train_view: CleanDataset,
    test_view: CleanDataset,
    grid: EvalGrid,
) -> list[ScoreCard]:
    ci = test_view.counter_index(counter)
    values = test_view.values[ci]
    valid = test_view.valid[ci]

    # per-counter origin admissibility: the trailing warm-up must be valid
    cval = np.concatenate([[0], np.cumsum(valid.astype(int))])
    o = grid.origins
    usable = (cval[o + 1] - cval[o + 1 - GRID_WARMUP]) == GRID_WARMUP
    origins = o[usable]
    skipped = int((~usable).sum())

    # shared scoring mask: actual valid and > 0 at each (origin, lead)
    if len(origins):
        tgt = origins[:, None] + 1 + np.arange(HORIZON)[None, :]
        actual = values[tgt]
        cell_ok = valid[tgt] & (actual > 0.0)
    else:
        actual = np.empty((0, HORIZON))
        cell_ok = np.empty((0, HORIZON), dtype=bool)

    cards = []
    for name, forecaster in algorithms.items():
        card = ScoreCard(algorithm=name, counter=counter, skipped_origins=skipped)
        try:
            trained, card.train_time_s = time_fit(lambda: forecaster.fit(train_view, counter))
        except Exception as exc:  # fit failures are recorded, not fatal
            card.error = f"fit failed: {exc}"
            cards.append(card)
            continue
        if not len(origins):
            card.error = "no usable forecast origins"
            cards.append(card)
            continue
        preds = np.empty((len(origins), HORIZON))
        times = np.empty(len(origins))
        try:
            for k, oi in enumerate(origins):
                history = HourlySeries(
                    start=test_view.start, values=values[: oi + 1],
                    counter_id=counter, validate=False,
                )
                frame = test_view.weather.slice(oi + 1, oi + HORIZON)
                now = test_view.weather.record(int(oi))
                t0 = time.perf_counter()
                window = trained.predict(history, frame, weather_now=now)
                times[k] = time.perf_counter() - t0
                preds[k] = window.values
        except Exception as exc:
            card.error = f"predict failed: {exc}"
            cards.append(card)
            continue
        try:
            card.mape, _ = mape(preds[cell_ok], actual[cell_ok])
            card.mse, _ = mse(preds[cell_ok], actual[cell_ok])
        except MetricError as exc:
            card.error = str(exc)
            cards.append(card)
            continue
        card.scored_cells = int(cell_ok.sum())
        card.excluded_cells = int((~cell_ok).sum())
        card.predict_time_us = float(np.median(times) * 1e6)
        card._predict_times_us = times * 1e6  # kept for pooled medians
        cards.append(card)
    return cards


def evaluate(
    algorithms: dict,
    dataset: CleanDataset,
    train_interval: tuple[datetime, datetime],
    test_interval: tuple[datetime, datetime],
    counters: list[str] | None = None,
    jobs: int = 1,
) -> BenchReport:
    """Benchmark every (algorithm, counter) pair on a cleaned dataset.

    ``algorithms`` maps a display name to a forecaster factory with a
    ``fit(train_view, counter_id)`` method.  Fit or predict failures
    produce scorecards carrying an error instead of aborting the run.
    """
    s0, s1 = test_interval
    test_hours = (s1 - s0).days * 24 + (s1 - s0).seconds // 3600 + 1
    if test_hours < HORIZON:
        raise DatasetError(
            f"test interval spans {test_hours} hours; need at least {HORIZON}"
        )
    train_view, test_view = split(dataset, train_interval, test_interval)
    grid = build_grid(test_view)
    counters = counters if counters is not None else dataset.counters

    cards: list[ScoreCard] = []
    if jobs > 1 and len(counters) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_evaluate_counter, algorithms, c, train_view, test_view, grid)
                for c in counters
            ]
            for fut in futures:
                cards.extend(fut.result())
    else:
        for c in counters:
            cards.extend(_evaluate_counter(algorithms, c, train_view, test_view, grid))

    summaries = [_summarize(name, cards) for name in algorithms]
    points = _median_points(summaries)
    nsets = {
        f"{t}_{q}": sorted(nondominated(points[(t, q)]))
        for t in TIME_AXES
        for q in QUALITY_AXES
    }
    return BenchReport(
        schema_version=REPORT_SCHEMA_VERSION,
        machine=machine_descriptor(),
        train_interval=(train_interval[0].isoformat(), train_interval[1].isoformat()),
        test_interval=(test_interval[0].isoformat(), test_interval[1].isoformat()),
        grid_origins=len(grid),
        scorecards=cards,
        summaries=summaries,
        nondominated_sets=nsets,
    )


def _summarize(name: str, cards: list[ScoreCard]) -> AlgorithmSummary:
    mine = [c for c in cards if c.algorithm == name]
    good = [c for c in mine if c.ok]
    pooled = np.concatenate(
        [getattr(c, "_predict_times_us") for c in good if hasattr(c, "_predict_times_us")]
    ) if good else np.array([])
    return AlgorithmSummary(
        algorithm=name,
        counters_ok=len(good),
        fit_failures=len(mine) - len(good),
        mape_quartiles=quartiles([c.mape for c in good]) if good else None,
        mse_quartiles=quartiles([c.mse for c in good]) if good else None,
        train_time_quartiles=quartiles([c.train_time_s for c in good]) if good else None,
        predict_time_quartiles=quartiles([c.predict_time_us for c in good]) if good else None,
        predict_time_us_pooled_median=float(np.median(pooled)) if pooled.size else None,
    )


def _median_points(summaries: list[AlgorithmSummary]) -> dict:
    points: dict = {(t, q): {} for t in TIME_AXES for q in QUALITY_AXES}
    for s in summaries:
        if not s.counters_ok:
            continue
        t_med = {"train": s.train_time_quartiles[1], "predict": s.predict_time_quartiles[1]}
        q_med = {"mape": s.mape_quartiles[1], "mse": s.mse_quartiles[1]}
        for t in TIME_AXES:
            for q in QUALITY_AXES:
                points[(t, q)][s.algorithm] = (t_med[t], q_med[q])
    return points


def report_points(report: BenchReport, time_axis: str, quality_axis: str) -> dict[str, tuple[float, float]]:
    """Per-algorithm (median time, median quality) from a finished report."""
    if time_axis not in TIME_AXES or quality_axis not in QUALITY_AXES:
        raise ValueError(f"axes must be {TIME_AXES} x {QUALITY_AXES}")
    return _median_points(report.summaries)[(time_axis, quality_axis)]


def report_to_json(report: BenchReport) -> str:
    return json.dumps(asdict(report), indent=2)


def report_from_json(text: str) -> BenchReport:
    doc = json.loads(text)
    cards = [ScoreCard(**c) for c in doc["scorecards"]]
    summaries = []
    for s in doc["summaries"]:
        for key in ("mape_quartiles", "mse_quartiles", "train_time_quartiles", "predict_time_quartiles"):
            if s[key] is not None:
                s[key] = tuple(s[key])
        summaries.append(AlgorithmSummary(**s))
    return BenchReport(
        schema_version=doc["schema_version"],
        machine=doc["machine"],
        train_interval=tuple(doc["train_interval"]),
        test_interval=tuple(doc["test_interval"]),
        grid_origins=doc["grid_origins"],
        scorecards=cards,
        summaries=summaries,
        nondominated_sets=doc["nondominated_sets"],
    )


def write_plot_data(report: BenchReport, prefix: str) -> list[str]:
    """One CSV per (time, quality) axis pair with per-algorithm quartiles."""
    import csv

    paths = []
    for t in TIME_AXES:
        for q in QUALITY_AXES:
            path = f"{prefix}_{t}_{q}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(
                    ["algorithm", "time_q1", "time_median", "time_q3",
                     "quality_q1", "quality_median", "quality_q3"]
                )
                for s in report.summaries:
                    if not s.counters_ok:
                        continue
                    tq = s.train_time_quartiles if t == "train" else s.predict_time_quartiles
                    qq = s.mape_quartiles if q == "mape" else s.mse_quartiles
                    w.writerow([s.algorithm, *map(repr, tq), *map(repr, qq)])
            paths.append(path)
    return paths
