"""Two-photon state analysis: exchange-odd decomposition, HOM traces and temporal amplitudes.

Frequencies are angular (rad/s) and times in seconds. For cw slices the
detuning ``delta`` is measured from the central signal frequency, so the
signal sits at ``omega_s0 + delta`` and its twin at ``omega_i0 - delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    AsymmetricGrid,
    ConfigurationError,
    NonUniformGrid,
    NyquistViolation,
    VanishingState,
    ZeroRow,
)
from .spdc import JointSpectralAmplitude

DEFAULT_EPS_G = 1e-12


@dataclass(frozen=True)
class AntisymProfile:
    """Spectral function ``f`` whose odd combination ``f(d) - f(-d)`` carries the state.

    When built from a slice, ``f`` is half the slice, so the combination is
    exactly the slice's exchange-odd part. ``scale`` is the peak of the
    source's squared modulus, used for the vanishing-state threshold.
    """

    detuning: np.ndarray
    f: np.ndarray
    omega_s0: float
    omega_i0: float
    antisymmetry_fraction: float
    scale: float

    @property
    def combination(self) -> np.ndarray:
        return self.f - self.f[::-1]

    @classmethod
    def from_function(cls, detuning, f, omega_s0: float, omega_i0: float) -> AntisymProfile:
        """Profile of the ideal state ``f(d) - f(-d)`` (antisymmetry fraction 1)."""
        detuning = _symmetric_grid(detuning)
        f = np.asarray(f, dtype=complex)
        return cls(detuning, f, omega_s0, omega_i0, 1.0, float(np.max(np.abs(f)) ** 2))


def _symmetric_grid(detuning) -> np.ndarray:
    d = np.asarray(detuning, dtype=float)
    if d.ndim != 1 or d.size < 3:
        raise ConfigurationError("detuning grid must be 1D with at least 3 points")
    step = np.max(np.abs(np.diff(d)))
    if np.max(np.abs(d + d[::-1])) > 1e-6 * step:
        raise AsymmetricGrid("grid is not symmetric about the degenerate point")
    return d


def _odd_even(phi):
    rev = phi[::-1]
    return 0.5 * (phi - rev), 0.5 * (phi + rev)


def antisym_decompose(jsa: JointSpectralAmplitude) -> AntisymProfile:
    """Split a cw slice into exchange-odd and exchange-even parts."""
    if jsa.mode != "cw_slice":
        raise ConfigurationError("antisym_decompose needs a cw slice")
    s0 = jsa.scheme.omega_s0
    detuning = _symmetric_grid(jsa.omega_s - s0)
    phi = np.asarray(jsa.amplitude, dtype=complex)
    odd, even = _odd_even(phi)
    n_odd = trapezoid(np.abs(odd) ** 2, detuning)
    n_even = trapezoid(np.abs(even) ** 2, detuning)
    total = n_odd + n_even
    fraction = float(n_odd / total) if total > 0 else 0.0
    return AntisymProfile(detuning, 0.5 * phi, s0, jsa.scheme.omega_i0, fraction, float(np.max(np.abs(phi)) ** 2))


@dataclass(frozen=True)
class GFunction:
    tau: np.ndarray
    g: np.ndarray
    g0: float


def _check_nyquist(detuning, tau):
    step = np.max(np.abs(np.diff(detuning)))
    tau_max = np.max(np.abs(tau)) if np.size(tau) else 0.0
    if 2 * tau_max * step >= math.pi:
        raise NyquistViolation(
            f"delay {tau_max:.3e} s is not resolved by the detuning step {step:.3e} rad/s"
        )


def _spectral_integral(weight, detuning, tau):
    """trapezoid over detuning of weight(d) exp(-2 i d tau) for every tau."""
    tau = np.asarray(tau, dtype=float)
    kernel = np.exp(-2j * np.multiply.outer(tau, detuning))
    return trapezoid(kernel * weight, detuning, axis=-1)


def g_function(profile: AntisymProfile, tau) -> GFunction:
    """g(tau) = int |f(w) - f(-w)|^2 exp(-2 i w tau) dw on the stored detuning grid."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_nyquist(profile.detuning, tau)
    weight = np.abs(profile.combination) ** 2
    g0 = float(trapezoid(weight, profile.detuning))
    return GFunction(tau, _spectral_integral(weight, profile.detuning, tau), g0)


@dataclass(frozen=True)
class HOMTrace:
    tau: np.ndarray
    rate: np.ndarray


def hom_rate(profile: AntisymProfile, tau, eps_g: float = DEFAULT_EPS_G) -> HOMTrace:
    """Normalized coincidence rate 1 + Re[exp(-i (ws0 - wi0) tau) g(tau)] / g(0)."""
    gf = g_function(profile, tau)
    span = profile.detuning[-1] - profile.detuning[0]
    if gf.g0 <= eps_g * profile.scale * span:
        raise VanishingState("state has no exchange-odd component to interfere")
    carrier = np.exp(-1j * (profile.omega_s0 - profile.omega_i0) * gf.tau)
    rate = 1.0 + np.real(carrier * gf.g) / gf.g0
    return HOMTrace(gf.tau, rate)


def hom_rate_general(jsa: JointSpectralAmplitude, tau, eps_g: float = DEFAULT_EPS_G) -> HOMTrace:
    """Coincidence rate from the direct two-photon interference integral over a cw slice.

    R(tau) = 1 - Re[exp(-i (ws0 - wi0) tau) int phi(d) phi*(-d) exp(-2 i d tau) dd] / int |phi|^2 dd.
    """
    if jsa.mode != "cw_slice":
        raise ConfigurationError("hom_rate_general needs a cw slice")
    detuning = _symmetric_grid(jsa.omega_s - jsa.scheme.omega_s0)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_nyquist(detuning, tau)
    phi = np.asarray(jsa.amplitude, dtype=complex)
    norm = float(trapezoid(np.abs(phi) ** 2, detuning))
    span = detuning[-1] - detuning[0]
    if norm <= eps_g * float(np.max(np.abs(phi)) ** 2) * span or norm == 0:
        raise VanishingState("slice carries no pair amplitude")
    cross = _spectral_integral(phi * np.conj(phi[::-1]), detuning, tau)
    carrier = np.exp(-1j * (jsa.scheme.omega_s0 - jsa.scheme.omega_i0) * tau)
    return HOMTrace(tau, 1.0 - np.real(carrier * cross) / norm)


# --- time domain ---------------------------------------------------------------


def _uniform_step(grid, name: str) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise NonUniformGrid(f"{name} grid needs at least two points")
    steps = np.diff(grid)
    step = (grid[-1] - grid[0]) / (grid.size - 1)
    if np.max(np.abs(steps - step)) > 1e-6 * abs(step):
        raise NonUniformGrid(f"{name} grid is not uniform")
    return float(step)


def _time_grid(n: int, dw: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * (2 * math.pi / (n * dw))


@dataclass(frozen=True)
class TemporalAmplitude:
    """Two-photon amplitude A(tau_s, tau_i) without the optical carriers.

    ``cw_slice``: ``envelope[k]`` is the amplitude at relative delay
    ``tau[k] = tau_s - tau_i``; ``tau_s`` and ``tau_i`` both equal ``tau``.
    ``pulsed_grid``: ``envelope[j, k]`` at (``tau_s[j]``, ``tau_i[k]``).
    The source spectrum is kept so the amplitude can be evaluated exactly
    off the grid.
    """

    mode: str
    tau_s: np.ndarray
    tau_i: np.ndarray
    envelope: np.ndarray
    omega_s0: float
    omega_i0: float
    spectral_norm: float
    detuning_s: np.ndarray
    detuning_i: np.ndarray
    spectrum: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return self.tau_s

    def squared_norm(self) -> float:
        dts = self.tau_s[1] - self.tau_s[0]
        if self.mode == "cw_slice":
            return float(np.sum(np.abs(self.envelope) ** 2) * dts)
        return float(np.sum(np.abs(self.envelope) ** 2) * dts * (self.tau_i[1] - self.tau_i[0]))

    def evaluate(self, tau_s, tau_i) -> np.ndarray:
        """Carrier-free amplitude at arbitrary (broadcast) detection times."""
        tau_s, tau_i = np.broadcast_arrays(np.asarray(tau_s, dtype=float), np.asarray(tau_i, dtype=float))
        dws = _uniform_step(self.detuning_s, "signal")
        if self.mode == "cw_slice":
            kern = np.exp(-1j * np.multiply.outer(tau_s - tau_i, self.detuning_s))
            return kern @ self.spectrum * dws / math.sqrt(2 * math.pi)
        dwi = _uniform_step(self.detuning_i, "idler")
        ks = np.exp(-1j * np.multiply.outer(tau_s, self.detuning_s))
        ki = np.exp(-1j * np.multiply.outer(tau_i, self.detuning_i))
        return np.einsum("...j,jk,...k->...", ks, self.spectrum, ki) * dws * dwi / (2 * math.pi)

    def with_carrier(self, tau_s, tau_i) -> np.ndarray:
        """Amplitude including exp(-i ws0 tau_s) exp(-i wi0 tau_i)."""
        tau_s, tau_i = np.broadcast_arrays(np.asarray(tau_s, dtype=float), np.asarray(tau_i, dtype=float))
        return np.exp(-1j * (self.omega_s0 * tau_s + self.omega_i0 * tau_i)) * self.evaluate(tau_s, tau_i)

    def on_grid(self) -> np.ndarray:
        """2D carrier-free amplitude over (tau_s, tau_i); cw delays off the grid are zero."""
        if self.mode != "cw_slice":
            return self.envelope
        n = self.tau.size
        j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        idx = j - k + n // 2
        inside = (idx >= 0) & (idx < n)
        out = np.zeros((n, n), dtype=complex)
        out[inside] = self.envelope[idx[inside]]
        return out


def temporal_amplitude(jsa: JointSpectralAmplitude) -> TemporalAmplitude:
    """Discrete Fourier transform of a JSA with the optical carriers factored out.

    The time grid has ``N`` points spaced ``2 pi / (N d_omega)``, which makes
    the transform unitary: the squared norm is preserved exactly.
    """
    s0, i0 = jsa.scheme.omega_s0, jsa.scheme.omega_i0
    ds = np.asarray(jsa.omega_s, dtype=float) - s0
    dws = _uniform_step(ds, "signal frequency")
    tau_s = _time_grid(ds.size, dws)
    spec = np.asarray(jsa.amplitude, dtype=complex)
    if jsa.mode == "cw_slice":
        env = np.exp(-1j * np.multiply.outer(tau_s, ds)) @ spec * dws / math.sqrt(2 * math.pi)
        return TemporalAmplitude("cw_slice", tau_s, tau_s, env, s0, i0, jsa.squared_norm(), ds, -ds, spec)
    di = np.asarray(jsa.omega_i, dtype=float) - i0
    dwi = _uniform_step(di, "idler frequency")
    tau_i = _time_grid(di.size, dwi)
    ks = np.exp(-1j * np.multiply.outer(tau_s, ds))
    ki = np.exp(-1j * np.multiply.outer(tau_i, di))
    env = ks @ spec @ ki.T * dws * dwi / (2 * math.pi)
    return TemporalAmplitude("pulsed_grid", tau_s, tau_i, env, s0, i0, jsa.squared_norm(), ds, di, spec)


@dataclass(frozen=True)
class ConditionalProbability:
    tau_s: float
    tau_i: np.ndarray
    density: np.ndarray


def conditional_detection(amp: TemporalAmplitude, tau_s: float, tau_i=None) -> ConditionalProbability:
    """Idler detection-time density given a signal detection at ``tau_s``.

    ``tau_i`` defaults to the amplitude's idler time grid. The density is
    normalized to unit trapezoid integral.
    """
    if not amp.tau_s[0] <= tau_s <= amp.tau_s[-1]:
        raise ConfigurationError("tau_s lies outside the time grid")
    tau_i = amp.tau_i if tau_i is None else np.asarray(tau_i, dtype=float)
    row = np.abs(amp.evaluate(np.full_like(tau_i, tau_s), tau_i)) ** 2
    total = trapezoid(row, tau_i)
    if not total > 0:
        raise ZeroRow(f"amplitude vanishes for tau_s = {tau_s}")
    return ConditionalProbability(float(tau_s), tau_i, row / total)


def support_width(tau, density, mass: float = 0.9) -> float:
    """Length of the central interval holding ``mass`` of a density (equal tails)."""
    tau = np.asarray(tau, dtype=float)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(tau))])
    cdf /= cdf[-1]
    lo = np.interp((1 - mass) / 2, cdf, tau)
    hi = np.interp((1 + mass) / 2, cdf, tau)
    return float(hi - lo)
