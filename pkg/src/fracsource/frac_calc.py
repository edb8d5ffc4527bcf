"""Discrete fractional calculus on uniform time grids.

Implements the L1 scheme for the Caputo derivative of order a in (0,1) and
product-trapezoid rules for the weakly singular Riemann-Liouville integral.
Both are exact for piecewise-linear inputs; the L1 scheme doubles as the
independent time-differentiation route in the cross-validation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "caputo_l1",
    "rl_integral",
    "rl_integral_by_parts",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_K = T."""

    T: float
    K: int

    def __post_init__(self):
        if not (self.T > 0):
            raise ValueError(f"horizon must be positive, got {self.T}")
        if self.K < 1:
            raise ValueError(f"need at least one step, got K={self.K}")

    @property
    def tau(self) -> float:
        return self.T / self.K

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.K + 1)


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.K + 1,):
            raise ValueError(f"expected {self.grid.K + 1} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series has non-finite entries")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, fun, grid: TimeGrid) -> "TimeSeries":
        t = grid.nodes
        vals = fun(t)
        if np.isscalar(vals):
            vals = np.full_like(t, float(vals))
        return cls(grid, np.asarray(vals, dtype=float))


def _l1_weights(K: int, alpha: float) -> np.ndarray:
    """b_j = (j+1)^(1-a) - j^(1-a), j = 0..K-1."""
    j = np.arange(K + 1, dtype=float)
    pw = j ** (1.0 - alpha)
    return pw[1:] - pw[:-1]


def caputo_l1(series: TimeSeries, alpha: float) -> TimeSeries:
    """L1 discretization of the Caputo derivative of order a in (0, 1).

    (D^a v)(t_k) ~ tau^(-a)/Gamma(2-a) * sum_j b_j (v_{k-j} - v_{k-j-1});
    the value at t_0 is fixed to 0 (empty history sum). Exact for constants
    and for piecewise-linear inputs up to round-off.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"Caputo order must lie in (0, 1), got {alpha}")
    grid = series.grid
    K = grid.K
    b = _l1_weights(K, alpha)
    d = np.diff(series.values)
    out = np.zeros(K + 1)
    out[1:] = np.convolve(d, b)[:K] / (grid.tau ** alpha * math.gamma(2.0 - alpha))
    return TimeSeries(grid, out)


def _product_trapezoid(values: np.ndarray, tau: float, order: float) -> np.ndarray:
    """Fractional integral of given order (0 < order <= 2) of the piecewise-
    linear interpolant of ``values``; exact up to round-off.

    I^a v(t_k) = tau^a/Gamma(a+2) * [ c_k0 v_0 + sum_{0<j<k} c_{k-j} v_j + v_k ].
    """
    K = len(values) - 1
    a1 = order + 1.0
    m = np.arange(K + 1, dtype=float)
    pw = m ** a1
    # interior convolution weights c_m = (m+1)^(a+1) - 2 m^(a+1) + (m-1)^(a+1)
    if K >= 2:
        c = np.empty(K - 1)
        c[:] = pw[2:] - 2.0 * pw[1:-1] + pw[:-2]
    else:
        c = np.empty(0)
    k = np.arange(1, K + 1, dtype=float)
    c0 = (k - 1.0) ** a1 - pw[1:] + a1 * k ** order
    out = np.zeros(K + 1)
    out[1:] = c0 * values[0] + values[1:]
    if K >= 2:
        out[2:] += np.convolve(values[1:-1], c)[: K - 1]
    out *= tau ** order / math.gamma(order + 2.0)
    return out


def rl_integral(series: TimeSeries, alpha: float) -> TimeSeries:
    """Riemann-Liouville integral of order a in (0, 1] by product trapezoid.

    Integrates the kernel (t-s)^(a-1)/Gamma(a) exactly against the
    piecewise-linear interpolant; reduces to the running trapezoid rule at
    a = 1 and is exact for constant inputs.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"integral order must lie in (0, 1], got {alpha}")
    return TimeSeries(series.grid,
                      _product_trapezoid(series.values, series.grid.tau, alpha))


def rl_integral_by_parts(f, f_prime, grid: TimeGrid, alpha: float) -> TimeSeries:
    """Order-(1-a) fractional integral of an absolutely continuous f, computed
    from its value at zero and its derivative:

        (I^(1-a) f)(t) = [ f(0) t^(1-a) + int_0^t f'(s) (t-s)^(1-a) ds ] / Gamma(2-a).

    Applying the Caputo derivative of order a to any antiderivative of f gives
    the same function, which is the discrete consistency check used in tests.
    ``f`` and ``f_prime`` are callables (expressions or plain functions).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"order must lie in (0, 1), got {alpha}")
    t = grid.nodes
    fp = f_prime(t)
    if np.isscalar(fp):
        fp = np.full_like(t, float(fp))
    f0 = float(f(0.0))
    g2a = math.gamma(2.0 - alpha)
    # int f'(s)(t-s)^(1-a) ds = Gamma(2-a) * I^(2-a) f'
    conv = _product_trapezoid(np.asarray(fp, dtype=float), grid.tau, 2.0 - alpha)
    out = f0 * t ** (1.0 - alpha) / g2a + conv
    return TimeSeries(grid, out)
