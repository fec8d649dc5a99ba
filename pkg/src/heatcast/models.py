"""Classical forecaster families behind one fit/predict interface.

Three families live here: the temperature-plus-social decomposition
models (linear, piecewise-linear, spline, isotonic, or multivariate
temperature part combined with weekly or yearly hour-indexed
corrections), the hour-of-week moving-average regressors in the
no-history and with-history variants, and the 100-hour moving-average
baseline.  Trained models are immutable; every prediction returns
exactly 72 values clamped at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .core import (
    HORIZON,
    WEEK_HOURS,
    YEAR_HOURS,
    FeatureSet,
    ForecastWindow,
    HourlySeries,
    InsufficientDataError,
    WarmupError,
    WeatherFrame,
    WeatherRecord,
    hour_of_week,
    hour_of_year,
    moving_average,
)
from .ingest import CleanDataset
from .regress import (
    CubicSpline,
    IsotonicFit,
    LinearModel,
    PiecewiseLinear,
    isotonic_fit,
    ols_fit,
    piecewise_fit,
    quantile_breakpoints,
    spline_fit,
)

MA_WINDOW = WEEK_HOURS     # W-regressor moving-average span
BASELINE_WINDOW = 100      # C-100 span
TEMPERATURE_PARTS = 5      # equicardinal segments for breakpoints/knots
MIN_DECOMPOSITION_HOURS = 2 * WEEK_HOURS

TEMP_VARIANTS = ("linear", "piecewise", "spline", "isotonic", "multivariate")
SOCIAL_MODES = ("weekly", "yearly")


@dataclass(frozen=True)
class SocialComponent:
    """Calendar-indexed mean-residual corrections.

    ``corrections`` has 168 slots in weekly mode and 8784 in yearly mode;
    slots never visited during training hold NaN and fall back to the
    nearest earlier populated slot (wrapping) at prediction time.
    """

    mode: str
    corrections: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "corrections", np.asarray(self.corrections, dtype=float))
        expected = WEEK_HOURS if self.mode == "weekly" else YEAR_HOURS
        if self.mode not in SOCIAL_MODES:
            raise ValueError(f"unknown social mode {self.mode!r}")
        if len(self.corrections) != expected:
            raise ValueError(f"{self.mode} corrections need {expected} slots")

    def slot_of(self, ts: datetime) -> int:
        return hour_of_week(ts) if self.mode == "weekly" else hour_of_year(ts)

    def filled(self) -> np.ndarray:
        """Corrections with NaN slots replaced by the previous populated one."""
        g = self.corrections
        if not np.any(np.isnan(g)):
            return g
        pop = np.nonzero(~np.isnan(g))[0]
        if pop.size == 0:
            raise InsufficientDataError("social component has no populated slots")
        out = g.copy()
        for i in np.nonzero(np.isnan(g))[0]:
            j = pop[np.searchsorted(pop, i) - 1]  # wraps to the last populated slot
            out[i] = g[j]
        return out


@dataclass(frozen=True)
class TemperatureComponent:
    """Temperature-driven part of the decomposition, any of five shapes."""

    variant: str
    model: object  # LinearModel | PiecewiseLinear | CubicSpline | IsotonicFit

    def value(self, weather: WeatherFrame) -> np.ndarray:
        t = weather.temperature
        if self.variant == "linear":
            return self.model.predict(t.reshape(-1, 1))
        if self.variant == "multivariate":
            return self.model.predict(weather.features(FeatureSet.FSM))
        return self.model.value(t)

    def value_from_training(self, temps: np.ndarray, features: np.ndarray) -> np.ndarray:
        if self.variant == "linear":
            return self.model.predict(temps.reshape(-1, 1))
        if self.variant == "multivariate":
            return self.model.predict(features)
        return self.model.value(temps)


def _fit_temperature(variant: str, temps: np.ndarray, features: np.ndarray, y: np.ndarray):
    if variant == "linear":
        return ols_fit(temps.reshape(-1, 1), y)
    if variant == "piecewise":
        return piecewise_fit(temps, y, quantile_breakpoints(temps, TEMPERATURE_PARTS))
    if variant == "spline":
        return spline_fit(temps, y, quantile_breakpoints(temps, TEMPERATURE_PARTS))
    if variant == "isotonic":
        return isotonic_fit(temps, y)
    if variant == "multivariate":
        return ols_fit(features, y)
    raise ValueError(f"unknown temperature variant {variant!r}")


@dataclass(frozen=True)
class TrainedDotzauer:
    """Fitted decomposition model: prediction = f(weather) + g(calendar slot)."""

    counter_id: str
    temperature: TemperatureComponent
    social: SocialComponent

    def predict(
        self,
        history: HourlySeries,
        weather_forecast: WeatherFrame,
        weather_now: WeatherRecord | None = None,
    ) -> ForecastWindow:
        origin = history.end
        _check_forecast_frame(weather_forecast, origin)
        f_part = self.temperature.value(weather_forecast)
        g = self.social.filled()
        if self.social.mode == "weekly":
            base = hour_of_week(origin)
            slots = (base + 1 + np.arange(HORIZON)) % WEEK_HOURS
        else:
            slots = np.array(
                [hour_of_year(weather_forecast.time_at(p)) for p in range(HORIZON)]
            )
        values = np.maximum(0.0, f_part + g[slots])
        return ForecastWindow(origin=origin, values=values)


def dotzauer_fit(
    train: CleanDataset, counter_id: str, temp_variant: str, social_mode: str
) -> TrainedDotzauer:
    """Two-stage fit: temperature curve first, then per-slot mean residuals."""
    if temp_variant not in TEMP_VARIANTS:
        raise ValueError(f"unknown temperature variant {temp_variant!r}")
    if social_mode not in SOCIAL_MODES:
        raise ValueError(f"unknown social mode {social_mode!r}")
    ci = train.counter_index(counter_id)
    sel = train.valid[ci, train.lo : train.hi + 1]
    if int(sel.sum()) < MIN_DECOMPOSITION_HOURS:
        raise InsufficientDataError(
            f"counter {counter_id}: {int(sel.sum())} valid hours, "
            f"need at least {MIN_DECOMPOSITION_HOURS}"
        )
    y = train.values[ci, train.lo : train.hi + 1][sel]
    weather = train.weather.slice(train.lo, train.hi)
    temps = weather.temperature[sel]
    feats = weather.features(FeatureSet.FSM)[sel] if temp_variant == "multivariate" else np.empty((len(y), 0))

    model = _fit_temperature(temp_variant, temps, feats, y)
    component = TemperatureComponent(variant=temp_variant, model=model)
    residuals = y - component.value_from_training(temps, feats)

    if social_mode == "weekly":
        slots_all = train.hour_of_week_index()[train.lo : train.hi + 1][sel]
        size = WEEK_HOURS
    else:
        slots_all = train.hour_of_year_index()[train.lo : train.hi + 1][sel]
        size = YEAR_HOURS
    sums = np.bincount(slots_all, weights=residuals, minlength=size)
    counts = np.bincount(slots_all, minlength=size)
    g = np.full(size, np.nan)
    visited = counts > 0
    g[visited] = sums[visited] / counts[visited]

    return TrainedDotzauer(
        counter_id=counter_id,
        temperature=component,
        social=SocialComponent(mode=social_mode, corrections=g),
    )


def dotzauer_predict(
    model: TrainedDotzauer, history: HourlySeries, weather_forecast: WeatherFrame
) -> ForecastWindow:
    return model.predict(history, weather_forecast)


def _check_forecast_frame(frame: WeatherFrame, origin: datetime):
    if len(frame) < HORIZON:
        raise ValueError(f"weather forecast covers {len(frame)} hours, need {HORIZON}")
    from .core import HOUR

    if frame.start != origin + HOUR:
        raise ValueError(
            f"weather forecast must start one hour after the origin "
            f"({(origin + HOUR).isoformat()}), got {frame.start.isoformat()}"
        )


@dataclass(frozen=True)
class WRegressor:
    """Hour-of-week moving-average regressor.

    ``models`` is a flat tuple of LinearModels: 168 entries in no-history
    mode, indexed by the week-hour of the target hour, or 168*72 entries
    in with-history mode, indexed by week-hour of the origin times 72 plus
    (lead - 1).
    """

    counter_id: str
    history_mode: str  # "NH" | "WH"
    feature_set: FeatureSet
    models: tuple[LinearModel, ...]
    ma_window: int = MA_WINDOW

    def __post_init__(self):
        expected = WEEK_HOURS if self.history_mode == "NH" else WEEK_HOURS * HORIZON
        if len(self.models) != expected:
            raise ValueError(
                f"{self.history_mode} regressor needs {expected} models, got {len(self.models)}"
            )

    def model_count(self) -> int:
        return len(self.models)

    def predict(
        self,
        history: HourlySeries,
        weather_forecast: WeatherFrame,
        weather_now: WeatherRecord | None = None,
    ) -> ForecastWindow:
        origin = history.end
        _check_forecast_frame(weather_forecast, origin)
        if len(history) < self.ma_window:
            raise WarmupError(
                f"need {self.ma_window} trailing hours for the moving average, "
                f"have {len(history)}"
            )
        a_t = float(np.mean(history.values[-self.ma_window :]))
        feats = weather_forecast.features(self.feature_set)[:HORIZON]
        how_origin = hour_of_week(origin)
        out = np.empty(HORIZON)
        for p in range(1, HORIZON + 1):
            if self.history_mode == "NH":
                m = self.models[(how_origin + p) % WEEK_HOURS]
            else:
                m = self.models[how_origin * HORIZON + (p - 1)]
            x = np.concatenate([[a_t], feats[p - 1]])
            out[p - 1] = float(x @ m.coefficients + m.intercept)
        return ForecastWindow(origin=origin, values=np.maximum(0.0, out))


def _window_moving_average(values: np.ndarray, valid: np.ndarray, window: int):
    """Per-hour trailing mean plus a mask of fully-valid windows."""
    H = len(values)
    ma = np.full(H, np.nan)
    ok = np.zeros(H, dtype=bool)
    if H < window:
        return ma, ok
    csum = np.concatenate([[0.0], np.cumsum(values)])
    cval = np.concatenate([[0], np.cumsum(valid.astype(int))])
    idx = np.arange(window - 1, H)
    ok[idx] = (cval[idx + 1] - cval[idx + 1 - window]) == window
    ma[idx] = (csum[idx + 1] - csum[idx + 1 - window]) / window
    ma[~ok] = np.nan
    return ma, ok


def wr_fit(
    train: CleanDataset, counter_id: str, history_mode: str, feature_set: FeatureSet
) -> WRegressor:
    """Fit the per-week-hour linear models from valid training tuples.

    A tuple is usable when its full moving-average window is valid and the
    target reading is valid.  Buckets with fewer than two tuples fall back
    to an intercept-only model at the bucket mean (or the counter's global
    mean when the bucket is empty).
    """
    if history_mode not in ("NH", "WH"):
        raise ValueError(f"history_mode must be NH or WH, got {history_mode!r}")
    ci = train.counter_index(counter_id)
    lo, hi = train.lo, train.hi
    values = train.values[ci]
    valid = train.valid[ci]
    ma, wok = _window_moving_average(values, valid, MA_WINDOW)
    feats = train.weather.features(feature_set)
    hows = train.hour_of_week_index()
    d = len(feature_set)

    in_interval = np.zeros(train.block_hours, dtype=bool)
    in_interval[lo : hi + 1] = True
    usable_origin = wok & in_interval

    tv = values[lo : hi + 1][valid[lo : hi + 1]]
    if tv.size == 0:
        raise InsufficientDataError(f"counter {counter_id}: no valid training hours")
    global_mean = float(tv.mean())

    def bucket_fit(js: np.ndarray, targets: np.ndarray) -> LinearModel:
        if len(js) >= 2:
            X = np.column_stack([ma[js], feats[js]]) if d else ma[js].reshape(-1, 1)
            return ols_fit(X, targets)
        mean = float(targets.mean()) if len(js) else global_mean
        return LinearModel(coefficients=np.zeros(1 + d), intercept=mean)

    models: list[LinearModel] = []
    if history_mode == "NH":
        for i in range(WEEK_HOURS):
            js = np.nonzero(usable_origin & (hows == i) & valid)[0]
            models.append(bucket_fit(js, values[js]))
    else:
        base_buckets = [np.nonzero(usable_origin & (hows == i))[0] for i in range(WEEK_HOURS)]
        for i in range(WEEK_HOURS):
            js_all = base_buckets[i]
            for p in range(1, HORIZON + 1):
                js = js_all[js_all + p <= hi]
                js = js[valid[js + p]]
                targets = values[js + p]
                if len(js) >= 2:
                    X = np.column_stack([ma[js], feats[js + p]]) if d else ma[js].reshape(-1, 1)
                    models.append(ols_fit(X, targets))
                else:
                    mean = float(targets.mean()) if len(js) else global_mean
                    models.append(LinearModel(coefficients=np.zeros(1 + d), intercept=mean))

    return WRegressor(
        counter_id=counter_id,
        history_mode=history_mode,
        feature_set=feature_set,
        models=tuple(models),
    )


def wr_predict(
    model: WRegressor, history: HourlySeries, weather_forecast: WeatherFrame
) -> ForecastWindow:
    return model.predict(history, weather_forecast)


@dataclass(frozen=True)
class TrainedBaseline:
    """Trailing moving-average baseline; no fitted state."""

    counter_id: str
    window: int = BASELINE_WINDOW

    def predict(
        self,
        history: HourlySeries,
        weather_forecast: WeatherFrame | None = None,
        weather_now: WeatherRecord | None = None,
    ) -> ForecastWindow:
        value = c100_predict(history, self.window)
        return ForecastWindow(origin=history.end, values=np.full(HORIZON, value))


def c100_predict(history: HourlySeries, window: int = BASELINE_WINDOW) -> float:
    if len(history) < window:
        raise WarmupError(f"need {window} trailing hours, have {len(history)}")
    return max(0.0, moving_average(history, len(history) - 1, window))


class DotzauerForecaster:
    """Factory for one decomposition variant, e.g. piecewise + weekly."""

    def __init__(self, temp_variant: str, social_mode: str):
        self.temp_variant = temp_variant
        self.social_mode = social_mode

    def fit(self, train: CleanDataset, counter_id: str) -> TrainedDotzauer:
        return dotzauer_fit(train, counter_id, self.temp_variant, self.social_mode)


class WRegressorForecaster:
    def __init__(self, history_mode: str, feature_set: FeatureSet):
        self.history_mode = history_mode
        self.feature_set = feature_set

    def fit(self, train: CleanDataset, counter_id: str) -> WRegressor:
        return wr_fit(train, counter_id, self.history_mode, self.feature_set)


class BaselineForecaster:
    def fit(self, train: CleanDataset, counter_id: str) -> TrainedBaseline:
        return TrainedBaseline(counter_id=counter_id)
