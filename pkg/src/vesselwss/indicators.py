"""Temporal indicators over the analysis window: OSI variants, TAWSS, means.

All integrals are trapezoidal on the sampled (possibly non-uniform) times,
which is exact for the piecewise-linear reconstruction of the series, and
accumulate in ascending time order for bit-stable results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, WindowOutOfRangeError
from .wss import WallFieldSeries

ZERO_INTEGRAL = 1e-14

INDICATOR_NAMES = ("OSI", "OSI_L", "TAWSS", "MEAN_WSS_L")


@dataclass
class IndicatorField:
    """Per-vertex scalar indicator with its window and validity mask."""

    values: np.ndarray
    indicator: str
    window: tuple[float, float]
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.indicator not in INDICATOR_NAMES:
            raise ParseError(f"unknown indicator {self.indicator!r}")
        if self.values.shape != self.mask.shape:
            raise ParseError("values and mask must have matching shapes")


def _clip_to_window(series: WallFieldSeries, window):
    """Times and samples restricted to the window.

    Window endpoints falling between samples are linearly interpolated;
    endpoints coinciding with samples are reused bit-exactly, so integrals
    on the full range are untouched by the clipping.
    """
    times = series.times
    if window is None:
        window = series.window
    ta, tb = float(window[0]), float(window[1])
    if not (times[0] <= ta < tb <= times[-1]):
        raise WindowOutOfRangeError(
            f"window [{ta}, {tb}] not inside sampled range "
            f"[{times[0]}, {times[-1]}]"
        )

    def sample_at(t):
        i = np.searchsorted(times, t)
        if i < len(times) and times[i] == t:
            return times[i], series.samples[i]
        frac = (t - times[i - 1]) / (times[i] - times[i - 1])
        v = series.samples[i - 1] + frac * (series.samples[i] - series.samples[i - 1])
        return t, v

    inside = (times > ta) & (times < tb)
    va = sample_at(ta)[1]
    vb = sample_at(tb)[1]
    t_clip = np.concatenate([np.atleast_1d(ta), times[inside], np.atleast_1d(tb)])
    v_clip = np.concatenate([va[None], series.samples[inside], vb[None]], axis=0)
    if len(t_clip) < 2:
        raise WindowOutOfRangeError("fewer than 2 samples inside window")
    return t_clip, v_clip, (ta, tb)


def _integrate(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.trapezoid(values, x=times, axis=0)


def _base_mask(series: WallFieldSeries) -> np.ndarray:
    if series.mask is not None:
        return series.mask.copy()
    return np.zeros(series.n_vertices, dtype=bool)


def osi_vector(tau: WallFieldSeries, window=None,
               zero_tol: float = ZERO_INTEGRAL) -> IndicatorField:
    """Oscillatory shear index of the WSS vector, in [0, 0.5].

    0.5 (1 - ||int tau dt|| / int ||tau|| dt); vertices whose shear never
    exceeds the zero-integral guard carry 0 and are flagged.
    """
    if tau.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {tau.kind!r}")
    times, values, win = _clip_to_window(tau, window)
    mean_vec = _integrate(values, times)
    denom = _integrate(np.linalg.norm(values, axis=2), times)
    flagged = denom < zero_tol
    safe = np.where(flagged, 1.0, denom)
    osi = 0.5 * (1.0 - np.linalg.norm(mean_vec, axis=1) / safe)
    osi = np.clip(osi, 0.0, 0.5)
    osi[flagged] = 0.0
    return IndicatorField(osi, "OSI", win, _base_mask(tau) | flagged)


def osi_longitudinal(tau_l: WallFieldSeries, window=None,
                     zero_tol: float = ZERO_INTEGRAL) -> IndicatorField:
    """Oscillatory shear index of the signed longitudinal WSS, in [0, 1].

    0.5 (1 - int s dt / int |s| dt); values above 0.5 mark predominantly
    reversed flow. Zero-shear vertices carry 0 and are flagged.
    """
    if tau_l.kind != "scalar":
        raise ParseError(f"expected scalar series, got {tau_l.kind!r}")
    times, values, win = _clip_to_window(tau_l, window)
    signed = _integrate(values, times)
    denom = _integrate(np.abs(values), times)
    flagged = denom < zero_tol
    safe = np.where(flagged, 1.0, denom)
    osi = 0.5 * (1.0 - signed / safe)
    osi = np.clip(osi, 0.0, 1.0)
    osi[flagged] = 0.0
    return IndicatorField(osi, "OSI_L", win, _base_mask(tau_l) | flagged)


def tawss(tau: WallFieldSeries, window=None,
          zero_tol: float = ZERO_INTEGRAL) -> IndicatorField:
    """Time-averaged WSS magnitude over the window."""
    if tau.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {tau.kind!r}")
    times, values, win = _clip_to_window(tau, window)
    denom = _integrate(np.linalg.norm(values, axis=2), times)
    flagged = denom < zero_tol
    avg = denom / (win[1] - win[0])
    avg[flagged] = 0.0
    return IndicatorField(avg, "TAWSS", win, _base_mask(tau) | flagged)


def temporal_mean(series: WallFieldSeries, window=None) -> IndicatorField:
    """Windowed temporal mean of a scalar series."""
    if series.kind != "scalar":
        raise ParseError(f"expected scalar series, got {series.kind!r}")
    times, values, win = _clip_to_window(series, window)
    mean = _integrate(values, times) / (win[1] - win[0])
    return IndicatorField(mean, "MEAN_WSS_L", win, _base_mask(series))
