"""Shared domain types and calendar/feature primitives.

Everything in this module is immutable after construction and free of
side effects, so objects can be shared between threads.  Timestamps are
naive ``datetime`` objects interpreted as the dataset's local wall-clock
time, aligned to whole hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum, IntEnum

import numpy as np

HOUR = timedelta(hours=1)
WEEK_HOURS = 168
YEAR_HOURS = 8784  # reference calendar includes Feb 29
HORIZON = 72

# cumulative days before each month in a leap-reference calendar
_LEAP_CUMDAYS = (0, 31, 60, 91, 121, 152, 182, 213, 244, 274, 305, 335)


class AlignmentError(ValueError):
    """Timestamp is not aligned to a whole hour."""


class WarmupError(ValueError):
    """Not enough trailing history to satisfy a model's warm-up."""


class InsufficientDataError(ValueError):
    """Too little valid data to fit a model."""


def check_hour_aligned(ts: datetime) -> datetime:
    if ts.minute or ts.second or ts.microsecond:
        raise AlignmentError(f"timestamp {ts.isoformat()} is not hour-aligned")
    return ts


def hour_of_week(ts: datetime) -> int:
    """Hour index within the week: Monday 00:00 -> 0 ... Sunday 23:00 -> 167."""
    check_hour_aligned(ts)
    return ts.weekday() * 24 + ts.hour


def hour_of_year(ts: datetime) -> int:
    """Hour index within a leap-reference year, in [0, 8783].

    The index is computed from (month, day, hour) against a calendar that
    always contains Feb 29, so a given calendar date maps to the same slot
    every year and the Feb-29 slots are simply never produced by non-leap
    years.
    """
    check_hour_aligned(ts)
    doy = _LEAP_CUMDAYS[ts.month - 1] + ts.day - 1
    return 24 * doy + ts.hour


class DayType(IntEnum):
    """Day classification used by the weather records (Mon-Thu pooled)."""

    MON_THU = 1
    FRI = 2
    SAT = 3
    SUN = 4

    @classmethod
    def from_date(cls, ts: datetime) -> "DayType":
        wd = ts.weekday()
        if wd <= 3:
            return cls.MON_THU
        return cls(wd - 2)


class Season(IntEnum):
    SPRING = 1
    SUMMER = 2
    AUTUMN = 3
    WINTER = 4

    @classmethod
    def from_date(cls, ts: datetime) -> "Season":
        # meteorological seasons
        m = ts.month
        if 3 <= m <= 5:
            return cls.SPRING
        if 6 <= m <= 8:
            return cls.SUMMER
        if 9 <= m <= 11:
            return cls.AUTUMN
        return cls.WINTER


def day_length_hours(day_of_year: int, latitude_deg: float) -> float:
    """Daylight duration from the standard solar-declination formula.

    Clamped to the open interval (0, 24) so polar edge cases still satisfy
    the record invariants.
    """
    decl = math.radians(23.45) * math.sin(2.0 * math.pi * (284 + day_of_year) / 365.0)
    x = -math.tan(math.radians(latitude_deg)) * math.tan(decl)
    x = min(1.0, max(-1.0, x))
    dl = 2.0 * math.degrees(math.acos(x)) / 15.0
    return min(24.0 - 1e-6, max(1e-6, dl))


@dataclass(frozen=True)
class WeatherRecord:
    """One hour of exogenous conditions."""

    temperature: float
    wind_speed: float
    humidity: float
    overcast: int
    day_type: DayType
    season: Season
    day_length: float

    def __post_init__(self):
        if self.wind_speed < 0:
            raise ValueError(f"wind_speed {self.wind_speed} < 0")
        if not 0.0 <= self.humidity <= 100.0:
            raise ValueError(f"humidity {self.humidity} outside [0, 100]")
        if self.overcast not in range(9):
            raise ValueError(f"overcast {self.overcast} outside 0..8")
        if not 0.0 < self.day_length < 24.0:
            raise ValueError(f"day_length {self.day_length} outside (0, 24)")


class FeatureSet(Enum):
    """Named weather-feature subsets, in a fixed column order.

    The full column order is T, DL, DT, V, sqrt(V), T*V, T*sqrt(V), pY,
    Oc, H; each set selects a subset of those columns.  FS4 selects
    nothing and FSM equals FS3.
    """

    FS0 = "FS0"
    FS1 = "FS1"
    FS2 = "FS2"
    FS3 = "FS3"
    FS4 = "FS4"
    FSM = "FSM"

    @property
    def columns(self) -> tuple[str, ...]:
        return _FEATURE_COLUMNS[self]

    def __len__(self) -> int:
        return len(self.columns)


_ALL_COLUMNS = ("T", "DL", "DT", "V", "sqrtV", "TV", "TsqrtV", "pY", "Oc", "H")
_FEATURE_COLUMNS = {
    FeatureSet.FS0: ("T", "DL"),
    FeatureSet.FS1: ("T", "DL", "sqrtV", "TsqrtV"),
    FeatureSet.FS2: ("T", "DL", "V", "sqrtV", "TV", "TsqrtV", "pY"),
    FeatureSet.FS3: _ALL_COLUMNS,
    FeatureSet.FS4: (),
    FeatureSet.FSM: _ALL_COLUMNS,
}


def weather_features(rec: WeatherRecord, fs: FeatureSet) -> np.ndarray:
    """Feature vector for one record, in the documented column order.

    DT and pY are passed as their integer codes (1..4), not one-hot.
    """
    sqrt_v = math.sqrt(rec.wind_speed)
    full = {
        "T": rec.temperature,
        "DL": rec.day_length,
        "DT": float(rec.day_type),
        "V": rec.wind_speed,
        "sqrtV": sqrt_v,
        "TV": rec.temperature * rec.wind_speed,
        "TsqrtV": rec.temperature * sqrt_v,
        "pY": float(rec.season),
        "Oc": float(rec.overcast),
        "H": rec.humidity,
    }
    return np.array([full[c] for c in fs.columns], dtype=float)


@dataclass(frozen=True)
class HourlySeries:
    """Contiguous hourly energy readings of one counter.

    ``values[k]`` is the reading for ``start + k hours``; readings are
    non-negative kWh per hour.
    """

    start: datetime
    values: np.ndarray
    counter_id: str = ""
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.validate:
            check_hour_aligned(self.start)
            if self.values.ndim != 1:
                raise ValueError("values must be one-dimensional")
            if np.any(self.values < 0):
                raise ValueError("energy readings must be non-negative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """Timestamp of the last sample."""
        return self.start + (len(self.values) - 1) * HOUR

    def time_at(self, index: int) -> datetime:
        return self.start + index * HOUR


def moving_average(series: HourlySeries, at: int, window: int) -> float:
    """Mean of ``values[at-window+1 .. at]`` inclusive.

    Raises WarmupError when fewer than ``window`` samples precede and
    include ``at``.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if at >= len(series.values):
        raise IndexError(f"index {at} beyond series of length {len(series.values)}")
    if at < window - 1:
        raise WarmupError(
            f"moving average needs {window} samples, only {at + 1} available"
        )
    return float(np.mean(series.values[at - window + 1 : at + 1]))


@dataclass(frozen=True)
class WeatherFrame:
    """Column-oriented hourly weather, aligned like an HourlySeries.

    Arrays share one start timestamp and equal length; ``day_type`` and
    ``season`` hold the integer codes.
    """

    start: datetime
    temperature: np.ndarray
    wind_speed: np.ndarray
    humidity: np.ndarray
    overcast: np.ndarray
    day_type: np.ndarray
    season: np.ndarray
    day_length: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        for name in ("temperature", "wind_speed", "humidity", "day_length"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("overcast", "day_type", "season"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        if self.validate:
            check_hour_aligned(self.start)
            n = len(self.temperature)
            for name in ("wind_speed", "humidity", "overcast", "day_type", "season", "day_length"):
                if len(getattr(self, name)) != n:
                    raise ValueError(f"weather column {name} has mismatched length")

    def __len__(self) -> int:
        return len(self.temperature)

    def time_at(self, index: int) -> datetime:
        return self.start + index * HOUR

    def record(self, index: int) -> WeatherRecord:
        return WeatherRecord(
            temperature=float(self.temperature[index]),
            wind_speed=float(self.wind_speed[index]),
            humidity=float(self.humidity[index]),
            overcast=int(self.overcast[index]),
            day_type=DayType(int(self.day_type[index])),
            season=Season(int(self.season[index])),
            day_length=float(self.day_length[index]),
        )

    def slice(self, lo: int, hi: int) -> "WeatherFrame":
        """View of hours ``lo .. hi`` inclusive."""
        return WeatherFrame(
            start=self.time_at(lo),
            temperature=self.temperature[lo : hi + 1],
            wind_speed=self.wind_speed[lo : hi + 1],
            humidity=self.humidity[lo : hi + 1],
            overcast=self.overcast[lo : hi + 1],
            day_type=self.day_type[lo : hi + 1],
            season=self.season[lo : hi + 1],
            day_length=self.day_length[lo : hi + 1],
            validate=False,
        )

    def features(self, fs: FeatureSet) -> np.ndarray:
        """(n, len(fs)) feature matrix; vectorised twin of weather_features."""
        n = len(self)
        if not len(fs):
            return np.empty((n, 0), dtype=float)
        sqrt_v = np.sqrt(self.wind_speed)
        full = {
            "T": self.temperature,
            "DL": self.day_length,
            "DT": self.day_type.astype(float),
            "V": self.wind_speed,
            "sqrtV": sqrt_v,
            "TV": self.temperature * self.wind_speed,
            "TsqrtV": self.temperature * sqrt_v,
            "pY": self.season.astype(float),
            "Oc": self.overcast.astype(float),
            "H": self.humidity,
        }
        return np.column_stack([full[c] for c in fs.columns])


@dataclass(frozen=True)
class ForecastWindow:
    """72 predicted hourly readings for hours origin+1 .. origin+72."""

    origin: datetime
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.values) != HORIZON:
            raise ValueError(f"forecast window must hold {HORIZON} values, got {len(self.values)}")

    def __len__(self) -> int:
        return HORIZON

    def time_at(self, lead: int) -> datetime:
        """Timestamp of the lead-th predicted hour, lead in 1..72."""
        return self.origin + lead * HOUR
