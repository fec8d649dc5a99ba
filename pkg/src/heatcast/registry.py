"""Algorithm-name registry mapping report/CLI names to forecasters."""

from __future__ import annotations

from .core import FeatureSet
from .models import BaselineForecaster, DotzauerForecaster, WRegressorForecaster
from .neural import NetworkForecaster, TrainConfig

_DOTZAUER = {
    "DLW": ("linear", "weekly"), "DLY": ("linear", "yearly"),
    "DPLW": ("piecewise", "weekly"), "DPLY": ("piecewise", "yearly"),
    "DSW": ("spline", "weekly"), "DSY": ("spline", "yearly"),
    "DIW": ("isotonic", "weekly"), "DIY": ("isotonic", "yearly"),
    "DMW": ("multivariate", "weekly"), "DMY": ("multivariate", "yearly"),
}

_FEATURE_SETS = {
    "0": FeatureSet.FS0, "1": FeatureSet.FS1, "2": FeatureSet.FS2,
    "3": FeatureSet.FS3, "4": FeatureSet.FS4,
}

CLASSICAL_NAMES = (
    tuple(_DOTZAUER)
    + tuple(f"WRNH{i}" for i in range(5))
    + tuple(f"WRWH{i}" for i in range(5))
    + ("C100",)
)
NETWORK_NAMES = ("FFNN", "RBFNN")
ALGORITHM_NAMES = CLASSICAL_NAMES + NETWORK_NAMES


def build_forecaster(name: str, seed: int = 0, max_epochs: int | None = None):
    """Forecaster instance for a registry name; raises KeyError if unknown."""
    if name in _DOTZAUER:
        temp, social = _DOTZAUER[name]
        return DotzauerForecaster(temp, social)
    if name.startswith(("WRNH", "WRWH")) and name[4:] in _FEATURE_SETS:
        return WRegressorForecaster(name[2:4], _FEATURE_SETS[name[4:]])
    if name == "C100":
        return BaselineForecaster()
    if name in NETWORK_NAMES:
        cfg = TrainConfig(seed=seed)
        if max_epochs is not None:
            cfg.max_epochs = max_epochs
        return NetworkForecaster(name.lower(), cfg=cfg)
    raise KeyError(f"unknown algorithm {name!r}; known: {', '.join(ALGORITHM_NAMES)}")
