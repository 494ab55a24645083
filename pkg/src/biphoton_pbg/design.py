"""Uniform-scale structure design: centre two neighbouring transmission peaks on the degenerate point.

At every thickness scale ``a`` the linear spectrum is computed, the two peaks
closest to normalized frequency 1 are selected and the objective

    J(a) = (midpoint - 1)^2 + weight * (height_1 - height_2)^2

is evaluated. The scale range is scanned exhaustively and the best grid cell
is refined with a golden-section search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, NoPeakPair
from .stack import Multilayer, Peak, Polarization, SpectralCurve, find_transmission_peaks, transmission_spectrum

SpectrumAtScale = Callable[[float], SpectralCurve]

_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class PeakPairObjective:
    value: float
    pair: tuple[Peak, Peak] | None


@dataclass(frozen=True)
class DesignScanResult:
    scales: np.ndarray
    objective: np.ndarray
    best_scale: float
    best_objective: float
    pair: tuple[Peak, Peak]


def select_peak_pair(peaks: list[Peak], centre: float = 1.0) -> tuple[Peak, Peak] | None:
    """The nearest peak on each side of ``centre``; the two nearest overall if one side is empty."""
    if len(peaks) < 2:
        return None
    below = [p for p in peaks if p.position <= centre]
    above = [p for p in peaks if p.position > centre]
    if below and above:
        return below[-1], above[0]
    nearest = sorted(peaks, key=lambda p: abs(p.position - centre))[:2]
    lo, hi = sorted(nearest, key=lambda p: p.position)
    return lo, hi


def peak_pair_objective(
    curve: SpectralCurve, height_weight: float = 1.0, min_prominence: float = 0.05
) -> PeakPairObjective:
    pair = select_peak_pair(find_transmission_peaks(curve, min_prominence))
    if pair is None:
        return PeakPairObjective(math.inf, None)
    lo, hi = pair
    midpoint = 0.5 * (lo.position + hi.position)
    value = (midpoint - 1.0) ** 2 + height_weight * (lo.height - hi.height) ** 2
    return PeakPairObjective(float(value), pair)


def stack_spectrum(
    stack: Multilayer, omega_p: float, theta_ext: float, polarization: Polarization, x_grid
) -> SpectrumAtScale:
    """Spectrum of ``stack`` scaled by ``a`` on a fixed normalized-frequency grid."""
    x_grid = np.asarray(x_grid, dtype=float)
    omega = x_grid * omega_p / 2

    def spectrum(scale: float) -> SpectralCurve:
        return transmission_spectrum(stack.scaled(scale), omega, theta_ext, polarization, omega_p)

    return spectrum


def _golden_section(fun: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = fun(d)
    return 0.5 * (lo + hi)


def design_scan(
    spectrum: SpectrumAtScale,
    scale_lo: float,
    scale_hi: float,
    count: int,
    height_weight: float = 1.0,
    min_prominence: float = 0.05,
    tol: float = 1e-6,
) -> DesignScanResult:
    """Grid scan of the peak-pair objective over thickness scales plus golden-section refinement.

    Raises
    ------
    NoPeakPair
        No scale in the range shows two transmission peaks.
    """
    if not 0 < scale_lo < scale_hi:
        raise ConfigurationError("scale range must satisfy 0 < lo < hi")
    if count < 2:
        raise ConfigurationError("scale count must be >= 2")
    cache: dict[float, PeakPairObjective] = {}

    def evaluate(a: float) -> PeakPairObjective:
        if a not in cache:
            cache[a] = peak_pair_objective(spectrum(a), height_weight, min_prominence)
        return cache[a]

    scales = np.linspace(scale_lo, scale_hi, int(count))
    values = np.array([evaluate(float(a)).value for a in scales])
    if not np.any(np.isfinite(values)):
        raise NoPeakPair("no scale in the range yields two transmission peaks")
    k = int(np.argmin(values))
    best = float(scales[k])
    lo = float(scales[max(k - 1, 0)])
    hi = float(scales[min(k + 1, scales.size - 1)])
    refined = _golden_section(lambda a: evaluate(a).value, lo, hi, tol)
    if evaluate(refined).value < evaluate(best).value:
        best = refined
    result = evaluate(best)
    return DesignScanResult(scales, values, best, result.value, result.pair)
