"""District-heating demand forecasting and time-quality benchmarking."""

from .core import (
    FeatureSet,
    ForecastWindow,
    HourlySeries,
    WeatherFrame,
    WeatherRecord,
    hour_of_week,
    hour_of_year,
    moving_average,
    weather_features,
)
from .ingest import CleanDataset, GeneratorConfig, clean, generate_synthetic, load_csv, split
from .registry import ALGORITHM_NAMES, build_forecaster

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_NAMES",
    "CleanDataset",
    "FeatureSet",
    "ForecastWindow",
    "GeneratorConfig",
    "HourlySeries",
    "WeatherFrame",
    "WeatherRecord",
    "build_forecaster",
    "clean",
    "generate_synthetic",
    "hour_of_week",
    "hour_of_year",
    "load_csv",
    "moving_average",
    "split",
    "weather_features",
    "__version__",
]
