"""Least-squares fitting primitives shared by the forecaster families.

Ordinary least squares with a ridge fallback for ill-conditioned systems,
continuous piecewise-linear fits on a hinge basis, cubic-spline fits on a
truncated-power basis, and non-increasing isotonic regression via the
pool-adjacent-violators algorithm.  All fitters are deterministic pure
functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# normal-equation condition number above which the ridge fallback kicks in
CONDITION_LIMIT = 1e10
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class LinearModel:
    """y ~ coefficients . x + intercept."""

    coefficients: np.ndarray
    intercept: float
    regularized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return X @ self.coefficients + self.intercept


def ols_fit(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Least-squares fit of y on X plus an intercept.

    Solves the normal equations directly.  When the normal matrix is
    singular or its condition number exceeds CONDITION_LIMIT, a ridge term
    of RIDGE_SCALE times the mean diagonal is added and the result is
    flagged as regularized.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    if n == 0 or len(y) == 0:
        raise ValueError("cannot fit on empty input")
    if len(y) != n:
        raise ValueError(f"X has {n} rows but y has {len(y)}")

    A = np.column_stack([X, np.ones(n)])
    G = A.T @ A
    b = A.T @ y
    regularized = False
    cond = np.linalg.cond(G) if np.all(np.isfinite(G)) else np.inf
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        regularized = True
        lam = RIDGE_SCALE * np.trace(G) / G.shape[0]
        if lam <= 0.0:
            lam = RIDGE_SCALE
        G = G + lam * np.eye(G.shape[0])
    beta = np.linalg.solve(G, b)
    return LinearModel(coefficients=beta[:-1], intercept=float(beta[-1]), regularized=regularized)


def residual_sse(model: LinearModel, X: np.ndarray, y: np.ndarray) -> float:
    r = np.asarray(y, dtype=float) - model.predict(X)
    return float(r @ r)


def quantile_breakpoints(samples: np.ndarray, parts: int) -> np.ndarray:
    """Breakpoints splitting ``samples`` into ``parts`` equicardinal subsets.

    Uses the linear-interpolation quantile definition.  Duplicate
    quantile values are collapsed and values that coincide with the sample
    extremes are dropped, so degenerate data yields fewer segments.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be non-empty")
    if parts < 2:
        raise ValueError(f"parts must be >= 2, got {parts}")
    qs = np.arange(1, parts) / parts
    bp = np.unique(np.quantile(samples, qs, method="linear"))
    lo, hi = samples.min(), samples.max()
    return bp[(bp > lo) & (bp < hi)]


def hinge_design(t: np.ndarray, breakpoints: np.ndarray) -> np.ndarray:
    """Columns [t, (t-b1)+, ..., (t-bk)+]; the intercept is added by ols_fit."""
    t = np.asarray(t, dtype=float)
    cols = [t]
    for b in breakpoints:
        cols.append(np.maximum(0.0, t - b))
    return np.column_stack(cols)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function in hinge parameterization.

    value(t) = intercept + base_slope * t + sum_k hinge_slopes[k] * (t - breakpoints[k])+
    """

    breakpoints: np.ndarray
    intercept: float
    base_slope: float
    hinge_slopes: np.ndarray
    regularized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", np.asarray(self.breakpoints, dtype=float))
        object.__setattr__(self, "hinge_slopes", np.asarray(self.hinge_slopes, dtype=float))

    def value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = self.intercept + self.base_slope * t
        for b, s in zip(self.breakpoints, self.hinge_slopes):
            out = out + s * np.maximum(0.0, t - b)
        return out


def piecewise_fit(t: np.ndarray, y: np.ndarray, breakpoints: np.ndarray) -> PiecewiseLinear:
    """Least-squares continuous piecewise-linear fit on the hinge basis."""
    breakpoints = np.asarray(breakpoints, dtype=float)
    if breakpoints.size and np.any(np.diff(breakpoints) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    lm = ols_fit(hinge_design(t, breakpoints), y)
    return PiecewiseLinear(
        breakpoints=breakpoints,
        intercept=lm.intercept,
        base_slope=float(lm.coefficients[0]),
        hinge_slopes=lm.coefficients[1:],
        regularized=lm.regularized,
    )


def _cubic_design(t: np.ndarray, knots: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    cols = [t, t**2, t**3]
    for k in knots:
        cols.append(np.maximum(0.0, t - k) ** 3)
    return np.column_stack(cols)


@dataclass(frozen=True)
class CubicSpline:
    """Truncated-power-basis cubic spline, C2-continuous at the knots.

    value(t) = c0 + c1 t + c2 t^2 + c3 t^3 + sum_k a_k (t - knot_k)+^3 inside
    the fitted sample range [t_lo, t_hi]; outside, the boundary tangent is
    extended linearly to avoid cubic blow-up on out-of-range temperatures.
    """

    knots: np.ndarray
    poly: np.ndarray           # (c0, c1, c2, c3)
    hinge_cubes: np.ndarray    # one coefficient per knot
    t_lo: float
    t_hi: float
    regularized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "poly", np.asarray(self.poly, dtype=float))
        object.__setattr__(self, "hinge_cubes", np.asarray(self.hinge_cubes, dtype=float))

    def _raw_value(self, t):
        c0, c1, c2, c3 = self.poly
        out = c0 + t * (c1 + t * (c2 + t * c3))
        for k, a in zip(self.knots, self.hinge_cubes):
            out = out + a * np.maximum(0.0, t - k) ** 3
        return out

    def _raw_slope(self, t):
        _, c1, c2, c3 = self.poly
        out = c1 + t * (2.0 * c2 + t * 3.0 * c3)
        for k, a in zip(self.knots, self.hinge_cubes):
            out = out + 3.0 * a * np.maximum(0.0, t - k) ** 2
        return out

    def value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inner = np.clip(t, self.t_lo, self.t_hi)
        out = np.asarray(self._raw_value(inner), dtype=float)
        below = t < self.t_lo
        above = t > self.t_hi
        if np.any(below):
            out = np.where(below, self._raw_value(self.t_lo) + self._raw_slope(self.t_lo) * (t - self.t_lo), out)
        if np.any(above):
            out = np.where(above, self._raw_value(self.t_hi) + self._raw_slope(self.t_hi) * (t - self.t_hi), out)
        return out

    def segment_polynomials(self) -> list[np.ndarray]:
        """Monomial coefficients (c0..c3) of each segment between knots.

        Segment s covers the interval ending at knot s (the last segment
        extends beyond the final knot); expanding the hinge cubes into
        monomials lets callers compare one-sided limits exactly.
        """
        segs = [self.poly.copy()]
        for k, a in zip(self.knots, self.hinge_cubes):
            prev = segs[-1].copy()
            # a*(t-k)^3 = a*(t^3 - 3k t^2 + 3k^2 t - k^3)
            prev += a * np.array([-(k**3), 3.0 * k**2, -3.0 * k, 1.0])
            segs.append(prev)
        return segs


def spline_fit(t: np.ndarray, y: np.ndarray, knots: np.ndarray) -> CubicSpline:
    """Least-squares cubic-spline fit with the given internal knots."""
    knots = np.asarray(knots, dtype=float)
    if knots.size and np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")
    t = np.asarray(t, dtype=float)
    lm = ols_fit(_cubic_design(t, knots), y)
    c = lm.coefficients
    return CubicSpline(
        knots=knots,
        poly=np.concatenate([[lm.intercept], c[:3]]),
        hinge_cubes=c[3:],
        t_lo=float(t.min()),
        t_hi=float(t.max()),
        regularized=lm.regularized,
    )


@dataclass(frozen=True)
class IsotonicFit:
    """Non-increasing step fit over temperature.

    ``temps`` are the unique sample temperatures in increasing order and
    ``fitted`` the block-pooled values at those temperatures (ties in
    temperature are pre-pooled, so the fit is a function of temperature).
    Prediction is stepwise constant with steps at midpoints between
    consecutive unique temperatures and constant beyond the range.
    """

    temps: np.ndarray
    fitted: np.ndarray
    block_starts: np.ndarray
    block_means: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "temps", np.asarray(self.temps, dtype=float))
        object.__setattr__(self, "fitted", np.asarray(self.fitted, dtype=float))
        object.__setattr__(self, "block_starts", np.asarray(self.block_starts, dtype=int))
        object.__setattr__(self, "block_means", np.asarray(self.block_means, dtype=float))

    def value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if len(self.temps) == 1:
            return np.full(t.shape, self.fitted[0])
        mid = 0.5 * (self.temps[:-1] + self.temps[1:])
        idx = np.searchsorted(mid, t, side="left")
        return self.fitted[idx]


def _pava_non_increasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted PAVA for a non-increasing target, returns pooled values."""
    n = len(y)
    vals = np.empty(n)
    wts = np.empty(n)
    size = np.empty(n, dtype=int)
    m = 0  # number of blocks on the stack
    for i in range(n):
        vals[m] = y[i]
        wts[m] = w[i]
        size[m] = 1
        m += 1
        # merge while the ordering is violated (previous block below current)
        while m > 1 and vals[m - 2] < vals[m - 1]:
            tot = wts[m - 2] + wts[m - 1]
            vals[m - 2] = (vals[m - 2] * wts[m - 2] + vals[m - 1] * wts[m - 1]) / tot
            wts[m - 2] = tot
            size[m - 2] += size[m - 1]
            m -= 1
    return np.repeat(vals[:m], size[:m])


def isotonic_fit(t: np.ndarray, y: np.ndarray) -> IsotonicFit:
    """Least-squares fit of y constrained to be non-increasing in t."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size == 0:
        raise ValueError("cannot fit on empty input")
    if t.shape != y.shape:
        raise ValueError("t and y must have equal length")

    order = np.argsort(t, kind="stable")
    ts, ys = t[order], y[order]
    # pre-pool ties so the fit is a function of temperature
    uniq, start = np.unique(ts, return_index=True)
    counts = np.diff(np.append(start, len(ts)))
    sums = np.add.reduceat(ys, start)
    pooled = sums / counts

    fitted = _pava_non_increasing(pooled, counts.astype(float))
    # block boundaries: positions where the fitted level changes
    changes = np.nonzero(np.diff(fitted))[0] + 1
    block_starts = np.concatenate([[0], changes])
    block_means = fitted[block_starts]
    return IsotonicFit(temps=uniq, fitted=fitted, block_starts=block_starts, block_means=block_means)
