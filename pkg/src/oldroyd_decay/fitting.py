"""Decay-exponent fits in log(1 + t) and lower-envelope checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linear import lower_bound_constant

MIN_SAMPLES = 8


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr_slope: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int

    def relative_error(self, expected: float) -> float:
        return abs(self.slope - expected) / abs(expected)


def _as_arrays(series):
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    return arr[:, 0], arr[:, 1]


def fit_exponent(series, window: tuple[float, float] | None = None) -> FitResult:
    """Least-squares slope of log(value) against log(1 + t) inside ``window``."""
    t, v = _as_arrays(series)
    if window is not None:
        lo, hi = window
        keep = (t >= lo) & (t <= hi)
        t, v = t[keep], v[keep]
    if len(t) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples in the window, got {len(t)}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be finite and strictly positive")
    x = np.log1p(t)
    y = np.log(v)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("window contains a single distinct time")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 or ss_res <= 1e-30 * max(ss_tot, 1e-300) else max(0.0, 1.0 - ss_res / ss_tot)
    stderr = np.sqrt(ss_res / (len(x) - 2) / sxx)
    return FitResult(float(slope), float(intercept), float(stderr), float(min(r2, 1.0)),
                     (float(t.min()), float(t.max())), int(len(t)))


@dataclass
class EnvelopeReport:
    constant: float
    exponent: float
    min_margin: float
    min_ratio: float
    worst_time: float | None
    n_samples: int
    n_violations: int
    degenerate: bool

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def __str__(self) -> str:
        flag = " (degenerate: zero envelope)" if self.degenerate else ""
        return (f"envelope {self.constant:.4g}/2 (1+t)^{self.exponent:+.4g}: {self.n_violations} violations "
                f"of {self.n_samples}, min margin {self.min_margin:.3e}, min ratio {self.min_ratio:.4g}{flag}")


def fractional_constant(reference_series, s: float, beta: float,
                        window: tuple[float, float] | None = None) -> float:
    """C_beta = inf over the window of value(t) (1 + t)^{(s + 1) / (2 beta)} on a reference run."""
    t, v = _as_arrays(reference_series)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    return float(np.min(v * (1 + t) ** ((s + 1) / (2 * beta))))


def check_lower_envelope(series, c0: float, eta: float, s1: float, beta: float = 1.0,
                         constant: float | None = None, reference_series=None,
                         window: tuple[float, float] | None = None) -> EnvelopeReport:
    """Verify value(t) >= (C/2) (1 + t)^{-(s1 + 1) / (2 beta)} at every sample.

    For beta = 1, C is ``lower_bound_constant(c0, eta, s1)``.  For beta < 1 the
    constant is taken from ``constant`` or computed from ``reference_series``
    with :func:`fractional_constant`.
    """
    t, v = _as_arrays(series)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if constant is None:
        if beta == 1.0:
            constant = lower_bound_constant(c0, eta, s1) if c0 > 0 else 0.0
        elif reference_series is not None:
            constant = fractional_constant(reference_series, s1, beta, window)
        else:
            raise ValueError("beta < 1 needs an explicit constant or a reference series")
    exponent = -(s1 + 1) / (2 * beta)
    envelope = 0.5 * constant * (1 + t) ** exponent
    margin = v - envelope
    bad = margin < 0
    i = int(np.argmin(margin))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(envelope > 0, v / envelope, np.inf)
    return EnvelopeReport(
        constant=float(constant), exponent=float(exponent),
        min_margin=float(margin[i]), min_ratio=float(np.min(ratio)),
        worst_time=float(t[i]), n_samples=len(t), n_violations=int(bad.sum()),
        degenerate=constant == 0,
    )
