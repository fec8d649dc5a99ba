"""Versioned on-disk model format, shared by every forecaster family.

Models are stored as a single JSON document with a format tag and
version.  Floats survive the text round trip exactly (shortest-repr
serialization); NaN correction slots are encoded as nulls so the files
stay strict JSON.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .core import FeatureSet
from .models import (
    SocialComponent,
    TemperatureComponent,
    TrainedBaseline,
    TrainedDotzauer,
    WRegressor,
)
from .neural import (
    RBF,
    BatchNorm,
    Dense,
    Dropout,
    InputSpec,
    LeakyReLU,
    Network,
    TrainedNetwork,
)
from .regress import CubicSpline, IsotonicFit, LinearModel, PiecewiseLinear

FORMAT_TAG = "heatcast-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _floats(arr) -> list:
    return np.asarray(arr, dtype=float).ravel().tolist()


def _nan_to_null(arr) -> list:
    return [None if math.isnan(v) else v for v in np.asarray(arr, dtype=float).tolist()]


def _null_to_nan(values) -> np.ndarray:
    return np.array([math.nan if v is None else v for v in values], dtype=float)


def _linear_to_doc(m: LinearModel) -> dict:
    return {"kind": "linear", "coefficients": _floats(m.coefficients),
            "intercept": m.intercept, "regularized": m.regularized}


def _linear_from_doc(doc: dict) -> LinearModel:
    return LinearModel(coefficients=np.array(doc["coefficients"]),
                       intercept=doc["intercept"], regularized=doc["regularized"])


def _temperature_to_doc(c: TemperatureComponent) -> dict:
    m = c.model
    if c.variant in ("linear", "multivariate"):
        body = _linear_to_doc(m)
    elif c.variant == "piecewise":
        body = {
            "breakpoints": _floats(m.breakpoints), "intercept": m.intercept,
            "base_slope": m.base_slope, "hinge_slopes": _floats(m.hinge_slopes),
            "regularized": m.regularized,
        }
    elif c.variant == "spline":
        body = {
            "knots": _floats(m.knots), "poly": _floats(m.poly),
            "hinge_cubes": _floats(m.hinge_cubes), "t_lo": m.t_lo, "t_hi": m.t_hi,
            "regularized": m.regularized,
        }
    elif c.variant == "isotonic":
        body = {
            "temps": _floats(m.temps), "fitted": _floats(m.fitted),
            "block_starts": [int(i) for i in m.block_starts],
            "block_means": _floats(m.block_means),
        }
    else:
        raise ModelFormatError(f"unknown temperature variant {c.variant!r}")
    return {"variant": c.variant, **body}


def _temperature_from_doc(doc: dict) -> TemperatureComponent:
    variant = doc["variant"]
    if variant in ("linear", "multivariate"):
        model = _linear_from_doc(doc)
    elif variant == "piecewise":
        model = PiecewiseLinear(
            breakpoints=np.array(doc["breakpoints"]), intercept=doc["intercept"],
            base_slope=doc["base_slope"], hinge_slopes=np.array(doc["hinge_slopes"]),
            regularized=doc["regularized"],
        )
    elif variant == "spline":
        model = CubicSpline(
            knots=np.array(doc["knots"]), poly=np.array(doc["poly"]),
            hinge_cubes=np.array(doc["hinge_cubes"]), t_lo=doc["t_lo"], t_hi=doc["t_hi"],
            regularized=doc["regularized"],
        )
    elif variant == "isotonic":
        model = IsotonicFit(
            temps=np.array(doc["temps"]), fitted=np.array(doc["fitted"]),
            block_starts=np.array(doc["block_starts"]), block_means=np.array(doc["block_means"]),
        )
    else:
        raise ModelFormatError(f"unknown temperature variant {variant!r}")
    return TemperatureComponent(variant=variant, model=model)


def _layer_to_doc(layer) -> dict:
    if isinstance(layer, Dense):
        return {"kind": "dense", "W": [_floats(r) for r in layer.W], "b": _floats(layer.b)}
    if isinstance(layer, BatchNorm):
        return {
            "kind": "batchnorm", "gamma": _floats(layer.gamma), "beta": _floats(layer.beta),
            "running_mean": _floats(layer.running_mean), "running_var": _floats(layer.running_var),
            "momentum": layer.momentum, "eps": layer.eps,
        }
    if isinstance(layer, LeakyReLU):
        return {"kind": "leaky_relu", "slope": layer.slope}
    if isinstance(layer, Dropout):
        return {"kind": "dropout", "p": layer.p}
    if isinstance(layer, RBF):
        return {"kind": "rbf", "centers": [_floats(r) for r in layer.centers],
                "widths": _floats(layer.widths), "trainable": layer.trainable}
    raise ModelFormatError(f"unknown layer type {type(layer).__name__}")


def _layer_from_doc(doc: dict):
    kind = doc["kind"]
    if kind == "dense":
        layer = Dense.__new__(Dense)
        layer.W = np.array(doc["W"], dtype=float)
        layer.b = np.array(doc["b"], dtype=float)
        layer._x = None
        return layer
    if kind == "batchnorm":
        layer = BatchNorm(len(doc["gamma"]), momentum=doc["momentum"], eps=doc["eps"])
        layer.gamma = np.array(doc["gamma"])
        layer.beta = np.array(doc["beta"])
        layer.running_mean = np.array(doc["running_mean"])
        layer.running_var = np.array(doc["running_var"])
        return layer
    if kind == "leaky_relu":
        return LeakyReLU(slope=doc["slope"])
    if kind == "dropout":
        return Dropout(p=doc["p"])
    if kind == "rbf":
        return RBF(np.array(doc["centers"]), np.array(doc["widths"]), trainable=doc["trainable"])
    raise ModelFormatError(f"unknown layer kind {kind!r}")


def model_to_doc(model) -> dict:
    doc = {"format": FORMAT_TAG, "version": FORMAT_VERSION}
    if isinstance(model, TrainedDotzauer):
        doc.update({
            "family": "dotzauer",
            "counter_id": model.counter_id,
            "temperature": _temperature_to_doc(model.temperature),
            "social": {"mode": model.social.mode,
                       "corrections": _nan_to_null(model.social.corrections)},
        })
    elif isinstance(model, WRegressor):
        doc.update({
            "family": "wregressor",
            "counter_id": model.counter_id,
            "history_mode": model.history_mode,
            "feature_set": model.feature_set.value,
            "ma_window": model.ma_window,
            "models": [
                {"coefficients": _floats(m.coefficients), "intercept": m.intercept,
                 "regularized": m.regularized}
                for m in model.models
            ],
        })
    elif isinstance(model, TrainedBaseline):
        doc.update({"family": "baseline", "counter_id": model.counter_id, "window": model.window})
    elif isinstance(model, TrainedNetwork):
        doc.update({
            "family": "network",
            "counter_id": model.counter_id,
            "arch": model.arch,
            "input_spec": {"past_indices": list(model.spec.past_indices),
                           "use_weather": model.spec.use_weather},
            "layers": [_layer_to_doc(l) for l in model.net.layers],
        })
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_doc(doc: dict):
    if doc.get("format") != FORMAT_TAG:
        raise ModelFormatError("not a heatcast model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')}")
    family = doc["family"]
    if family == "dotzauer":
        return TrainedDotzauer(
            counter_id=doc["counter_id"],
            temperature=_temperature_from_doc(doc["temperature"]),
            social=SocialComponent(mode=doc["social"]["mode"],
                                   corrections=_null_to_nan(doc["social"]["corrections"])),
        )
    if family == "wregressor":
        return WRegressor(
            counter_id=doc["counter_id"],
            history_mode=doc["history_mode"],
            feature_set=FeatureSet(doc["feature_set"]),
            ma_window=doc["ma_window"],
            models=tuple(
                LinearModel(coefficients=np.array(m["coefficients"]),
                            intercept=m["intercept"], regularized=m["regularized"])
                for m in doc["models"]
            ),
        )
    if family == "baseline":
        return TrainedBaseline(counter_id=doc["counter_id"], window=doc["window"])
    if family == "network":
        spec = InputSpec(past_indices=tuple(doc["input_spec"]["past_indices"]),
                         use_weather=doc["input_spec"]["use_weather"])
        net = Network([_layer_from_doc(l) for l in doc["layers"]])
        return TrainedNetwork(counter_id=doc["counter_id"], arch=doc["arch"], spec=spec, net=net)
    raise ModelFormatError(f"unknown model family {family!r}")


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_doc(model), fh)


def load_model(path):
    with open(path) as fh:
        return model_from_doc(json.load(fh))
