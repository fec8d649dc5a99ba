"""Dataset loading, cleaning, splitting, and synthetic generation.

The CSV schema has one row per (timestamp, counter) with the weather
columns repeated per hour.  Cleaning applies three validity rules: hours
need non-zero humidity, hours need at least one non-zero counter reading
network-wide, and a zero reading is only valid when its neighbours in the
counter's surviving sequence are both non-zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .core import (
    HOUR,
    WEEK_HOURS,
    AlignmentError,
    DayType,
    HourlySeries,
    Season,
    WeatherFrame,
    WeatherRecord,
    check_hour_aligned,
    day_length_hours,
    hour_of_week,
)

DEFAULT_LATITUDE = 53.0  # dataset site, north-west Poland

# canonical header names; load_csv accepts a mapping overriding these
DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "counter_id": "counter_id",
    "energy_kwh": "energy_kwh",
    "temperature_c": "temperature_c",
    "wind_speed_ms": "wind_speed_ms",
    "humidity_pct": "humidity_pct",
    "overcast_oktas": "overcast_oktas",
    "day_type": "day_type",
    "season": "season",
    "day_length_h": "day_length_h",  # optional column
}

_DAY_TYPE_NAMES = {"monthu": DayType.MON_THU, "fri": DayType.FRI, "sat": DayType.SAT, "sun": DayType.SUN}
_SEASON_NAMES = {"spring": Season.SPRING, "summer": Season.SUMMER, "autumn": Season.AUTUMN, "winter": Season.WINTER}


class DatasetError(ValueError):
    """Structural problem in the input data (header, ordering, intervals)."""


@dataclass
class GeneratorTruth:
    """Ground-truth pieces embedded in a synthetic dataset.

    The energy model is scale * (f(T) + g(hour_of_week)) + noise per
    counter, with f a non-increasing continuous piecewise-linear curve
    shared by all counters and g a mean-zero weekly pattern.
    """

    f_breakpoints: np.ndarray
    f_intercept: float
    f_base_slope: float
    f_hinge_slopes: np.ndarray
    g_weekly: np.ndarray
    scales: dict[str, float]
    noiseless: dict[str, np.ndarray]

    def f_value(self, temps: np.ndarray) -> np.ndarray:
        t = np.asarray(temps, dtype=float)
        out = self.f_intercept + self.f_base_slope * t
        for b, s in zip(self.f_breakpoints, self.f_hinge_slopes):
            out = out + s * np.maximum(0.0, t - b)
        return out

    def base_demand(self, temps: np.ndarray, hows: np.ndarray) -> np.ndarray:
        return self.f_value(temps) + self.g_weekly[np.asarray(hows, dtype=int) % WEEK_HOURS]


@dataclass
class RawDataset:
    """Parsed but uncleaned rows, organised per counter plus shared weather."""

    entries: dict[str, list[tuple[datetime, float]]]
    weather: dict[datetime, WeatherRecord]
    rejects: list[tuple[int, str]] = field(default_factory=list)
    truth: GeneratorTruth | None = None

    @property
    def counters(self) -> list[str]:
        return list(self.entries.keys())

    def check_ordering(self):
        for cid, rows in self.entries.items():
            for (a, _), (b, _) in zip(rows, rows[1:]):
                if b <= a:
                    raise DatasetError(
                        f"counter {cid}: timestamps not strictly increasing at {b.isoformat()}"
                    )


@dataclass
class CleanDataset:
    """Hour-gridded readings with a per-(counter, hour) validity mask.

    Arrays cover a contiguous block of hours starting at ``start``.  The
    nominal interval of the view is ``[lo, hi]`` (inclusive block
    indices); hours outside it are carried history or trailing horizon
    context, never fitted or used as forecast origins directly.
    """

    start: datetime
    counters: list[str]
    values: np.ndarray   # (C, H) float
    valid: np.ndarray    # (C, H) bool
    present: np.ndarray  # (C, H) bool
    weather: WeatherFrame
    lo: int = 0
    hi: int | None = None

    def __post_init__(self):
        if self.hi is None:
            self.hi = self.values.shape[1] - 1

    def __len__(self) -> int:
        """Length of the nominal interval, not of the carried block."""
        return self.hi - self.lo + 1

    @property
    def block_hours(self) -> int:
        return self.values.shape[1]

    @property
    def interval_start(self) -> datetime:
        return self.time_at(self.lo)

    @property
    def interval_end(self) -> datetime:
        return self.time_at(self.hi)

    def time_at(self, index: int) -> datetime:
        return self.start + index * HOUR

    def index_of(self, ts: datetime) -> int:
        check_hour_aligned(ts)
        delta = ts - self.start
        return delta.days * 24 + delta.seconds // 3600

    def counter_index(self, counter_id: str) -> int:
        try:
            return self.counters.index(counter_id)
        except ValueError:
            raise DatasetError(f"unknown counter {counter_id!r}") from None

    def series(self, counter_id: str, upto: int | None = None) -> HourlySeries:
        ci = self.counter_index(counter_id)
        end = self.block_hours - 1 if upto is None else upto
        return HourlySeries(
            start=self.start, values=self.values[ci, : end + 1], counter_id=counter_id, validate=False
        )

    def hour_of_week_index(self) -> np.ndarray:
        """Block-aligned hour-of-week index per hour."""
        base = hour_of_week(self.start)
        return (base + np.arange(self.block_hours)) % WEEK_HOURS

    def hour_of_year_index(self) -> np.ndarray:
        """Block-aligned leap-reference hour-of-year index per hour."""
        from .core import hour_of_year

        out = np.empty(self.block_hours, dtype=int)
        ts = self.start
        for i in range(self.block_hours):
            out[i] = hour_of_year(ts)
            ts += HOUR
        return out

    def window(self, t0: datetime, t1: datetime, history: int = 0, followup: int = 0) -> "CleanDataset":
        """View over [t0, t1] carrying up to ``history``/``followup`` context hours."""
        i0, i1 = self.index_of(t0), self.index_of(t1)
        if i1 < i0:
            raise DatasetError("interval end precedes start")
        if i0 < self.lo or i1 > self.hi:
            raise DatasetError(
                f"interval [{t0.isoformat()}, {t1.isoformat()}] outside available data"
            )
        b0 = max(0, i0 - history)
        b1 = min(self.block_hours - 1, i1 + followup)
        return CleanDataset(
            start=self.time_at(b0),
            counters=self.counters,
            values=self.values[:, b0 : b1 + 1],
            valid=self.valid[:, b0 : b1 + 1],
            present=self.present[:, b0 : b1 + 1],
            weather=self.weather.slice(b0, b1),
            lo=i0 - b0,
            hi=i1 - b0,
        )


def _parse_timestamp(text: str, tz: str | None = None) -> datetime:
    ts = datetime.fromisoformat(text.strip())
    if ts.tzinfo is not None:
        if tz:
            from zoneinfo import ZoneInfo

            ts = ts.astimezone(ZoneInfo(tz))
        ts = ts.replace(tzinfo=None)
    return check_hour_aligned(ts)


def _parse_day_type(text: str) -> DayType:
    t = text.strip().lower().replace("-", "").replace("_", "")
    if t in _DAY_TYPE_NAMES:
        return _DAY_TYPE_NAMES[t]
    return DayType(int(t))


def _parse_season(text: str) -> Season:
    t = text.strip().lower()
    if t in _SEASON_NAMES:
        return _SEASON_NAMES[t]
    return Season(int(t))


def load_csv(
    path,
    schema: dict[str, str] | None = None,
    tz: str | None = None,
    latitude: float = DEFAULT_LATITUDE,
) -> RawDataset:
    """Parse a counter/weather CSV into a RawDataset.

    Malformed rows land in the dataset's rejects list as (line_number,
    reason) instead of failing the load; header problems, unparsable
    timestamps, and out-of-order timestamps raise DatasetError.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)

    entries: dict[str, list[tuple[datetime, float]]] = {}
    weather: dict[datetime, WeatherRecord] = {}
    rejects: list[tuple[int, str]] = []

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: empty file, no header row")
        have = set(reader.fieldnames)
        required = [k for k in mapping if k != "day_length_h"]
        missing = [mapping[k] for k in required if mapping[k] not in have]
        if missing:
            raise DatasetError(f"{path}: header is missing columns {missing}")
        has_dl = mapping["day_length_h"] in have

        for lineno, row in enumerate(reader, start=2):
            try:
                ts = _parse_timestamp(row[mapping["timestamp"]], tz)
            except (ValueError, AlignmentError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad timestamp: {exc}") from None
            cid = row[mapping["counter_id"]].strip()
            try:
                energy = float(row[mapping["energy_kwh"]])
                if not math.isfinite(energy) or energy < 0:
                    raise ValueError(f"energy {energy} out of range")
                if has_dl and row[mapping["day_length_h"]].strip():
                    dl = float(row[mapping["day_length_h"]])
                else:
                    dl = day_length_hours(ts.timetuple().tm_yday, latitude)
                rec = WeatherRecord(
                    temperature=float(row[mapping["temperature_c"]]),
                    wind_speed=float(row[mapping["wind_speed_ms"]]),
                    humidity=float(row[mapping["humidity_pct"]]),
                    overcast=int(row[mapping["overcast_oktas"]]),
                    day_type=_parse_day_type(row[mapping["day_type"]]),
                    season=_parse_season(row[mapping["season"]]),
                    day_length=dl,
                )
            except (ValueError, KeyError) as exc:
                rejects.append((lineno, str(exc)))
                continue
            entries.setdefault(cid, []).append((ts, energy))
            weather.setdefault(ts, rec)

    ds = RawDataset(entries=entries, weather=weather, rejects=rejects)
    ds.check_ordering()
    return ds


def write_rejects(rejects: list[tuple[int, str]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line_number", "reason"])
        w.writerows(rejects)


def clean(raw: RawDataset) -> CleanDataset:
    """Grid the raw rows hourly and compute the validity mask.

    Humidity and network-nonzero rules are applied first; the
    zero-sandwich rule then runs over each counter's surviving sequence,
    so a zero's neighbours are the adjacent hours that passed the first
    two rules.  Boundary zeros are invalid.
    """
    raw.check_ordering()
    all_ts = [ts for rows in raw.entries.values() for ts, _ in rows]
    if not all_ts:
        raise DatasetError("dataset has no rows")
    start, last = min(all_ts), max(all_ts)
    H = (last - start).days * 24 + (last - start).seconds // 3600 + 1
    counters = raw.counters
    C = len(counters)

    values = np.zeros((C, H))
    present = np.zeros((C, H), dtype=bool)
    for ci, cid in enumerate(counters):
        for ts, energy in raw.entries[cid]:
            k = (ts - start).days * 24 + (ts - start).seconds // 3600
            values[ci, k] = energy
            present[ci, k] = True

    wf = _grid_weather(raw.weather, start, H)

    humidity_ok = wf.humidity > 0.0
    network_ok = np.any(present & (values > 0.0), axis=0)
    base = present & humidity_ok[None, :] & network_ok[None, :]

    valid = base.copy()
    for ci in range(C):
        seq = np.nonzero(base[ci])[0]
        if seq.size == 0:
            continue
        v = values[ci, seq]
        zero = v == 0.0
        if not np.any(zero):
            continue
        ok = np.zeros(seq.size, dtype=bool)
        ok[1:-1] = (v[:-2] != 0.0) & (v[2:] != 0.0)
        valid[ci, seq[zero & ~ok]] = False

    return CleanDataset(
        start=start, counters=counters, values=values, valid=valid, present=present, weather=wf
    )


def _grid_weather(weather: dict[datetime, WeatherRecord], start: datetime, H: int) -> WeatherFrame:
    temp = np.zeros(H)
    wind = np.zeros(H)
    hum = np.zeros(H)  # absent weather keeps humidity 0, invalidating the hour
    oc = np.zeros(H, dtype=int)
    dt = np.ones(H, dtype=int)
    se = np.ones(H, dtype=int)
    dl = np.full(H, 12.0)
    ts = start
    for i in range(H):
        rec = weather.get(ts)
        if rec is not None:
            temp[i] = rec.temperature
            wind[i] = rec.wind_speed
            hum[i] = rec.humidity
            oc[i] = rec.overcast
            dt[i] = int(rec.day_type)
            se[i] = int(rec.season)
            dl[i] = rec.day_length
        else:
            dt[i] = int(DayType.from_date(ts))
            se[i] = int(Season.from_date(ts))
        ts += HOUR
    return WeatherFrame(
        start=start, temperature=temp, wind_speed=wind, humidity=hum,
        overcast=oc, day_type=dt, season=se, day_length=dl, validate=False,
    )


def clean_to_raw(ds: CleanDataset) -> RawDataset:
    """Re-express the valid cells of a cleaned dataset as raw rows."""
    entries: dict[str, list[tuple[datetime, float]]] = {}
    for ci, cid in enumerate(ds.counters):
        rows = []
        for k in np.nonzero(ds.valid[ci])[0]:
            rows.append((ds.time_at(int(k)), float(ds.values[ci, k])))
        entries[cid] = rows
    weather = {}
    hours_used = np.nonzero(np.any(ds.valid, axis=0))[0]
    for k in hours_used:
        weather[ds.time_at(int(k))] = ds.weather.record(int(k))
    return RawDataset(entries=entries, weather=weather)


def split(
    ds: CleanDataset,
    train: tuple[datetime, datetime],
    test: tuple[datetime, datetime],
    history: int = WEEK_HOURS,
    horizon: int = 72,
) -> tuple[CleanDataset, CleanDataset]:
    """Train/test views over inclusive hour intervals.

    The test view additionally carries up to ``history`` pre-interval
    hours for moving-average warm-up and up to ``horizon`` post-interval
    hours so forecasts issued near the interval end can be scored.
    Values are shared views of the parent arrays, never resampled.
    """
    t0, t1 = map(check_hour_aligned, train)
    s0, s1 = map(check_hour_aligned, test)
    if t1 < t0 or s1 < s0:
        raise DatasetError("interval end precedes start")
    if not t1 < s0:
        raise DatasetError("training interval must precede the test interval")
    train_view = ds.window(t0, t1)
    test_view = ds.window(s0, s1, history=history, followup=horizon)
    return train_view, test_view


@dataclass
class GeneratorConfig:
    """Knobs for the synthetic dataset generator."""

    counters: int = 3
    hours: int = 20000
    sigma: float = 0.0
    latitude: float = DEFAULT_LATITUDE
    start: datetime = datetime(2016, 1, 1, 0, 0)

    def __post_init__(self):
        if self.counters < 1:
            raise ValueError("counters must be >= 1")
        if self.hours < 1:
            raise ValueError("hours must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not -90.0 < self.latitude < 90.0:
            raise ValueError("latitude must be in (-90, 90)")
        check_hour_aligned(self.start)


# shape of the synthetic demand curve: gently convex, non-increasing
_F_SEGMENT_SLOPES = np.array([-2.6, -2.2, -1.8, -1.4, -1.0])
_F_LEVEL_AT_FIRST_BREAK = 150.0


def generate_synthetic(spec: GeneratorConfig, seed: int) -> RawDataset:
    """Deterministic synthetic dataset with embedded ground truth.

    Temperature follows a yearly plus daily sinusoid with noise; energy is
    scale_c * (f(T) + g(hour_of_week)) + scale_c * N(0, sigma) clipped at
    zero, with f non-increasing piecewise linear (kinks at the equicardinal
    temperature quantiles) and g a mean-zero weekly pattern whose range is
    about one tenth of f's.  A "sum" counter holds the per-hour total of
    the others.
    """
    rng = np.random.default_rng(seed)
    n = spec.hours
    ts0 = spec.start

    idx = np.arange(n)
    doy = np.empty(n)
    hod = np.empty(n, dtype=int)
    dts = np.empty(n, dtype=int)
    ses = np.empty(n, dtype=int)
    ts = ts0
    for i in range(n):
        doy[i] = ts.timetuple().tm_yday
        hod[i] = ts.hour
        dts[i] = int(DayType.from_date(ts))
        ses[i] = int(Season.from_date(ts))
        ts += HOUR

    temp = (
        8.0
        - 14.0 * np.cos(2.0 * np.pi * (doy - 15.0) / 365.25)
        - 4.0 * np.cos(2.0 * np.pi * (hod - 15.0) / 24.0)
        + rng.normal(0.0, 1.5, n)
    )

    # f kinks at the equicardinal temperature quantiles of the whole span
    bps = np.quantile(temp, [0.2, 0.4, 0.6, 0.8], method="linear")
    base_slope = _F_SEGMENT_SLOPES[0]
    hinge = np.diff(_F_SEGMENT_SLOPES)
    intercept = _F_LEVEL_AT_FIRST_BREAK - base_slope * bps[0]

    how0 = hour_of_week(ts0)
    hows = (how0 + idx) % WEEK_HOURS
    g_hod = np.arange(WEEK_HOURS) % 24
    g_dow = np.arange(WEEK_HOURS) // 24
    g = 3.5 * np.sin(2.0 * np.pi * (g_hod - 7.0) / 24.0) + np.where(g_dow >= 5, -2.0, 0.8)
    g = g - g.mean()

    truth = GeneratorTruth(
        f_breakpoints=bps,
        f_intercept=float(intercept),
        f_base_slope=float(base_slope),
        f_hinge_slopes=hinge,
        g_weekly=g,
        scales={},
        noiseless={},
    )
    base = truth.base_demand(temp, hows)

    wind = np.abs(rng.normal(3.5, 2.2, n))
    humidity = np.clip(
        58.0 + 22.0 * np.sin(2.0 * np.pi * (doy - 120.0) / 365.25) + rng.normal(0.0, 8.0, n),
        20.0,
        100.0,
    )
    overcast = rng.integers(0, 9, n)
    dl = np.array([day_length_hours(int(d), spec.latitude) for d in doy])

    scale = rng.uniform(0.6, 1.6, spec.counters)
    entries: dict[str, list[tuple[datetime, float]]] = {}
    times = [ts0 + int(i) * HOUR for i in idx]
    total = np.zeros(n)
    for c in range(spec.counters):
        cid = f"c{c + 1:02d}"
        noise = rng.normal(0.0, spec.sigma, n) if spec.sigma > 0 else np.zeros(n)
        y = np.maximum(0.0, scale[c] * (base + noise))
        total += y
        truth.scales[cid] = float(scale[c])
        truth.noiseless[cid] = scale[c] * base
        entries[cid] = list(zip(times, y.tolist()))
    entries["sum"] = list(zip(times, total.tolist()))
    truth.scales["sum"] = float(scale.sum())
    truth.noiseless["sum"] = scale.sum() * base

    weather = {}
    for i in range(n):
        weather[times[i]] = WeatherRecord(
            temperature=float(temp[i]),
            wind_speed=float(wind[i]),
            humidity=float(humidity[i]),
            overcast=int(overcast[i]),
            day_type=DayType(int(dts[i])),
            season=Season(int(ses[i])),
            day_length=float(dl[i]),
        )
    return RawDataset(entries=entries, weather=weather, truth=truth)


def write_csv(ds: RawDataset, path) -> None:
    """Write a RawDataset in the canonical CSV schema, ordered by hour."""
    all_ts = sorted({ts for rows in ds.entries.values() for ts, _ in rows})
    by_counter = {cid: dict(rows) for cid, rows in ds.entries.items()}
    season_names = {s: s.name.lower() for s in Season}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(DEFAULT_SCHEMA.values()))
        for ts in all_ts:
            rec = ds.weather.get(ts)
            if rec is None:
                continue
            base = [
                ts.isoformat(),
                None,
                None,
                repr(rec.temperature),
                repr(rec.wind_speed),
                repr(rec.humidity),
                rec.overcast,
                int(rec.day_type),
                season_names[rec.season],
                repr(rec.day_length),
            ]
            for cid in ds.entries:
                if ts in by_counter[cid]:
                    row = list(base)
                    row[1] = cid
                    row[2] = repr(by_counter[cid][ts])
                    w.writerow(row)


def parse_generator_config(path) -> GeneratorConfig:
    """Read a key=value generator config file."""
    kwargs = {}
    with open(path) as fh:
        for raw_line in fh:
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DatasetError(f"bad config line: {raw_line.rstrip()}")
            key, val = (p.strip() for p in line.split("=", 1))
            if key in ("counters", "hours"):
                kwargs[key] = int(val)
            elif key in ("sigma", "latitude"):
                kwargs[key] = float(val)
            elif key == "start":
                kwargs[key] = datetime.fromisoformat(val)
            else:
                raise DatasetError(f"unknown generator config key {key!r}")
    return GeneratorConfig(**kwargs)
