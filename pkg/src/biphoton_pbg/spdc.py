"""Joint spectral amplitudes of photon pairs generated in a nonlinear multilayer.

The amplitude for a pair leaving through facets (m, n) is the overlap

    sum over layers  int_layer  chi2 : E_p(z) (x) conj(E_s(z)) (x) conj(E_i(z)) dz

where ``E_p`` is the pump solution for a unit incident wave and ``E_s``,
``E_i`` are detection modes: linear solutions whose only outgoing wave has
unit amplitude at the chosen exit facet. Each field is split into forward
and backward plane waves, so every layer contributes eight analytic terms.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import constants as sc

from .errors import ConfigurationError, EvanescentIdler, GridTooNarrow
from .materials import VACUUM, Material, contract, refractive_index
from .stack import Multilayer, PlaneWaveContext, internal_fields, wavelength_um

Direction = Literal["FF", "FB", "BF", "BB"]
DIRECTIONS: tuple[Direction, ...] = ("FF", "FB", "BF", "BB")
Transverse = Literal["fixed_momentum", "fixed_angle"]
PUMP_CUTOFF_SIGMA = 12.0

# analysis bases: list of (linear polarization, weight)
_BASIS = {
    "s": (("s", 1.0),),
    "p": (("p", 1.0),),
    "d45": (("s", math.sqrt(0.5)), ("p", math.sqrt(0.5))),
}

SCHEME_POLARIZATIONS = {
    "scheme1_all_p": ("p", "p", "p"),
    "scheme2_sp": ("s", "p", "s"),
    "scheme1_45deg": ("s", "d45", "d45"),
}


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    eps0: float = sc.epsilon_0
    c: float = sc.c
    beam_area: float = 1e-10  # m^2

    def __post_init__(self):
        if min(self.hbar, self.eps0, self.c, self.beam_area) <= 0:
            raise ConfigurationError("physical constants must be positive")

    def prefactor(self, omega_s0: float, omega_i0: float) -> float:
        """hbar sqrt(ws0 wi0) / (2 (2 pi)^(3/2) eps0 c B)."""
        return self.hbar * math.sqrt(omega_s0 * omega_i0) / (
            2 * (2 * math.pi) ** 1.5 * self.eps0 * self.c * self.beam_area
        )


@dataclass(frozen=True)
class PumpConfig:
    omega_p: float
    polarization: Literal["s", "p"] = "p"
    incidence_angle: float = 0.0
    envelope: Literal["cw", "gaussian"] = "cw"
    duration_fs: float | None = None

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ConfigurationError("pump frequency must be positive")
        if self.polarization not in ("s", "p"):
            raise ConfigurationError(f"pump polarization must be 's' or 'p', got {self.polarization!r}")
        if self.envelope == "gaussian" and not (self.duration_fs and self.duration_fs > 0):
            raise ConfigurationError("gaussian pump needs a positive duration_fs")

    @classmethod
    def from_wavelength(cls, wavelength_nm: float, **kw) -> PumpConfig:
        return cls(2 * math.pi * sc.c / (wavelength_nm * 1e-9), **kw)

    @property
    def tau_g(self) -> float:
        """Gaussian time constant (s): intensity FWHM / sqrt(2 ln 2)."""
        return self.duration_fs * 1e-15 / math.sqrt(2 * math.log(2))

    @property
    def spectral_sigma(self) -> float:
        """Standard deviation (rad/s) of the pump spectral intensity."""
        return 1.0 / self.tau_g

    def spectral_amplitude(self, omega):
        """Unnormalized gaussian amplitude exp(-(w - wp)^2 tau_g^2 / 4); 1 for cw."""
        if self.envelope == "cw":
            return np.ones_like(np.asarray(omega, dtype=float))
        return np.exp(-((np.asarray(omega) - self.omega_p) ** 2) * self.tau_g**2 / 4)


@dataclass(frozen=True)
class SchemeConfig:
    """One physical configuration: polarizations, geometry and exit facets.

    ``theta_s`` is the signal emission angle (radians, external). With
    ``transverse="fixed_momentum"`` it fixes the signal transverse wavenumber
    at the central signal frequency and the idler takes the complementary
    wavenumber at every frequency; with ``"fixed_angle"`` the signal angle is
    held fixed and the idler angle follows from :func:`idler_geometry`.
    """

    pump: PumpConfig
    signal_polarization: str = "p"
    idler_polarization: str = "p"
    theta_s: float = 0.0
    direction: Direction = "FF"
    scheme: str = "custom"
    omega_s0: float | None = None
    transverse: Transverse = "fixed_momentum"

    def __post_init__(self):
        for pol in (self.signal_polarization, self.idler_polarization):
            if pol not in _BASIS:
                raise ConfigurationError(f"unknown analysis polarization {pol!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(f"unknown direction pair {self.direction!r}")
        if self.transverse not in ("fixed_momentum", "fixed_angle"):
            raise ConfigurationError(f"unknown transverse mode {self.transverse!r}")
        if self.omega_s0 is None:
            object.__setattr__(self, "omega_s0", self.pump.omega_p / 2)
        if not 0 < self.omega_s0 < self.pump.omega_p:
            raise ConfigurationError("central signal frequency must lie in (0, omega_p)")
        if abs(self.theta_s) >= math.pi / 2:
            raise ConfigurationError("|theta_s| must be below 90 degrees")
        if self.scheme in SCHEME_POLARIZATIONS:
            expected = SCHEME_POLARIZATIONS[self.scheme]
            got = (self.pump.polarization, self.signal_polarization, self.idler_polarization)
            if got != expected:
                raise ConfigurationError(f"{self.scheme} requires polarizations {expected}, got {got}")

    @property
    def omega_i0(self) -> float:
        return self.pump.omega_p - self.omega_s0

    @classmethod
    def preset(cls, scheme: str, pump: PumpConfig, theta_s: float, **kw) -> SchemeConfig:
        try:
            pol_p, pol_s, pol_i = SCHEME_POLARIZATIONS[scheme]
        except KeyError:
            raise ConfigurationError(f"unknown scheme preset {scheme!r}") from None
        return cls(replace(pump, polarization=pol_p), pol_s, pol_i, theta_s, scheme=scheme, **kw)

    def with_direction(self, direction: Direction) -> SchemeConfig:
        return replace(self, direction=direction)


@dataclass(frozen=True)
class EmissionGeometry:
    """Signal/idler frequencies, angles and transverse wavenumbers (arrays broadcast)."""

    omega_s: np.ndarray
    omega_i: np.ndarray
    theta_s: np.ndarray
    theta_i: np.ndarray
    ky_s: np.ndarray
    ky_i: np.ndarray
    ky_p: np.ndarray
    allowed: np.ndarray
    kz_s: np.ndarray
    kz_i: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        """Relative transverse phase-matching residual."""
        scale = np.abs(self.ky_s) + np.abs(self.ky_i) + np.abs(self.ky_p) + 1e-300
        return np.abs(self.ky_s + self.ky_i - self.ky_p) / scale

    @property
    def k_s(self) -> np.ndarray:
        """Signal wave vector (ky, kz) in the ambient, shape (..., 2)."""
        return np.stack([self.ky_s, self.kz_s], -1)

    @property
    def k_i(self) -> np.ndarray:
        return np.stack([self.ky_i, self.kz_i], -1)


def _ambient_n(material: Material, omega):
    return np.asarray(refractive_index(material, wavelength_um(omega)), dtype=float)


def _geometry(
    omega_s, omega_p, theta_s: float, pump: PumpConfig, transverse: Transverse, omega_s0: float,
    ambient: Material = VACUUM,
) -> EmissionGeometry:
    omega_s, omega_p = np.broadcast_arrays(np.asarray(omega_s, dtype=float), np.asarray(omega_p, dtype=float))
    omega_i = omega_p - omega_s
    n_s, n_i, n_p = (_ambient_n(ambient, w) for w in (omega_s, omega_i, omega_p))
    ky_p = n_p * omega_p / sc.c * math.sin(pump.incidence_angle)
    if transverse == "fixed_angle":
        ky_s = n_s * omega_s / sc.c * math.sin(theta_s)
    else:
        ky_s = np.full_like(omega_s, float(_ambient_n(ambient, omega_s0)) * omega_s0 / sc.c * math.sin(theta_s))
    ky_i = ky_p - ky_s
    sin_s = ky_s * sc.c / (n_s * omega_s)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_i = ky_i * sc.c / (n_i * omega_i)
    allowed = (omega_i > 0) & (np.abs(sin_s) <= 1) & (np.abs(sin_i) <= 1)
    th_s = np.arcsin(np.clip(sin_s, -1, 1))
    th_i = np.where(allowed, np.arcsin(np.clip(np.nan_to_num(sin_i), -1, 1)), np.nan)
    kz_s = n_s * omega_s / sc.c * np.cos(th_s)
    kz_i = n_i * omega_i / sc.c * np.cos(th_i)
    return EmissionGeometry(omega_s, omega_i, th_s, th_i, ky_s, ky_i, ky_p, allowed, kz_s, kz_i)


def idler_geometry(omega_s, theta_s: float, pump: PumpConfig, ambient: Material = VACUUM) -> EmissionGeometry:
    """Idler frequency and angle for a signal at fixed external angle ``theta_s``.

    Raises :class:`EvanescentIdler` when transverse momentum conservation
    requires ``|sin theta_i| > 1`` anywhere.
    """
    omega_s = np.asarray(omega_s, dtype=float)
    if np.any(omega_s <= 0) or np.any(omega_s >= pump.omega_p):
        raise ConfigurationError("signal frequency must lie in (0, omega_p)")
    if abs(theta_s) >= math.pi / 2:
        raise ConfigurationError("|theta_s| must be below 90 degrees")
    geo = _geometry(omega_s, pump.omega_p, theta_s, pump, "fixed_angle", pump.omega_p / 2, ambient)
    if not np.all(geo.allowed):
        raise EvanescentIdler("idler emission direction is kinematically forbidden (|sin theta_i| > 1)")
    return geo


def emission_geometry(omega_s, scheme: SchemeConfig, ambient: Material = VACUUM, omega_p=None) -> EmissionGeometry:
    """Geometry for a scheme; forbidden points are flagged in ``allowed`` instead of raising."""
    omega_p = scheme.pump.omega_p if omega_p is None else omega_p
    return _geometry(omega_s, omega_p, scheme.theta_s, scheme.pump, scheme.transverse, scheme.omega_s0, ambient)


def layer_overlap_integral(dk, length):
    """Exact value of int_0^L exp(i dk z) dz = L exp(i dk L / 2) sinc(dk L / 2)."""
    dk = np.asarray(dk)
    x = dk * length / 2
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    sinc = np.where(small, 1 - x**2 / 6, np.sin(safe) / safe)
    out = length * np.exp(1j * x) * sinc
    return out.item() if out.ndim == 0 else out


# --- amplitude engine ----------------------------------------------------------


@dataclass
class _ModeInLayers:
    """Full-field vectors of one mode in each layer: fwd/bwd (n_layers, G, 3) and kz (n_layers, G)."""

    fwd: np.ndarray
    bwd: np.ndarray
    kz: np.ndarray


def _polarization_vectors(pol: str, ky, kz):
    """Unit-tangential-amplitude field vectors for forward and backward waves."""
    shape = np.shape(kz)
    fwd = np.zeros(shape + (3,), dtype=complex)
    bwd = np.zeros(shape + (3,), dtype=complex)
    if pol == "s":
        fwd[..., 0] = 1.0
        bwd[..., 0] = 1.0
    else:
        t = ky / kz
        fwd[..., 1] = 1.0
        fwd[..., 2] = -t
        bwd[..., 1] = 1.0
        bwd[..., 2] = t
    return fwd, bwd


def _full_field_scale(pol: str, dist, side: str):
    """Factor turning a unit tangential amplitude at a facet into a unit full-field amplitude."""
    if pol == "s":
        return 1.0
    j = 0 if side == "left" else -1
    w = dist.waves
    return w.kz[j] / np.sqrt(w.kz[j] ** 2 + w.ky**2)


def _mode(stack: Multilayer, omega, ky, basis: str, role: str, exit_facet: str | None) -> _ModeInLayers:
    fwd = bwd = 0
    kz = None
    for pol, weight in _BASIS[basis]:
        ctx = PlaneWaveContext(omega, ky, pol)
        if role == "pump":
            dist = internal_fields(stack, ctx, "from_left", "unit_incident")
            scale = _full_field_scale(pol, dist, "left")
        else:
            incidence = "from_left" if exit_facet == "right" else "from_right"
            dist = internal_fields(stack, ctx, incidence, "unit_outgoing")
            scale = _full_field_scale(pol, dist, exit_facet)
        layer_kz = dist.waves.kz[1:-1]
        u_f, u_b = _polarization_vectors(pol, ky, layer_kz)
        fwd = fwd + (weight * scale * dist.forward)[..., None] * u_f
        bwd = bwd + (weight * scale * dist.backward)[..., None] * u_b
        kz = layer_kz
    return _ModeInLayers(fwd, bwd, kz)


def _pair_amplitude(
    stack: Multilayer, scheme: SchemeConfig, omega_s, omega_i, ky_s, ky_i, ky_p, constants: PhysicalConstants
):
    """Raw amplitude on flat arrays of allowed points."""
    omega_p = omega_s + omega_i
    nonlinear = [j for j, layer in enumerate(stack.layers) if layer.material.is_nonlinear]
    out = np.zeros(np.shape(omega_s), dtype=complex)
    if not nonlinear or np.size(omega_s) == 0:
        return out
    exit_s = "right" if scheme.direction[0] == "F" else "left"
    exit_i = "right" if scheme.direction[1] == "F" else "left"
    pump = _mode(stack, omega_p, ky_p, scheme.pump.polarization, "pump", None)
    sig = _mode(stack, omega_s, ky_s, scheme.signal_polarization, "signal", exit_s)
    idl = _mode(stack, omega_i, ky_i, scheme.idler_polarization, "idler", exit_i)
    for j in nonlinear:
        layer = stack.layers[j]
        tensor = layer.material.chi2
        L = layer.thickness_m
        for a, ep in ((1, pump.fwd[j]), (-1, pump.bwd[j])):
            for b, es in ((1, sig.fwd[j]), (-1, sig.bwd[j])):
                for cdir, ei in ((1, idl.fwd[j]), (-1, idl.bwd[j])):
                    coupling = contract(tensor, ep, np.conj(es), np.conj(ei))
                    dk = a * pump.kz[j] - b * np.conj(sig.kz[j]) - cdir * np.conj(idl.kz[j])
                    out = out + coupling * layer_overlap_integral(dk, L)
    # pm/V -> m/V
    return constants.prefactor(scheme.omega_s0, scheme.omega_i0) * 1e-12 * out


def _amplitude_on_grid(stack, scheme, omega_s, omega_p, constants):
    """Evaluate the kernel at broadcast (omega_s, omega_p); returns (amplitude, geometry)."""
    geo = emission_geometry(omega_s, scheme, stack.ambient_left, omega_p=omega_p)
    amp = np.zeros(geo.omega_s.shape, dtype=complex)
    ok = geo.allowed
    if np.any(ok):
        amp[ok] = _pair_amplitude(
            stack, scheme, geo.omega_s[ok], geo.omega_i[ok], geo.ky_s[ok], geo.ky_i[ok], geo.ky_p[ok], constants
        )
    return amp, geo


@dataclass
class JointSpectralAmplitude:
    """Pair amplitude on a frequency grid.

    ``cw_slice``: ``amplitude[k]`` at (``omega_s[k]``, ``omega_p - omega_s[k]``).
    ``pulsed_grid``: ``amplitude[j, k]`` at (``omega_s[j]``, ``omega_i[k]``).
    """

    mode: Literal["cw_slice", "pulsed_grid"]
    omega_s: np.ndarray
    omega_i: np.ndarray
    amplitude: np.ndarray
    scheme: SchemeConfig
    forbidden: np.ndarray = field(default=None)

    def __post_init__(self):
        if not np.all(np.isfinite(self.amplitude)):
            raise ConfigurationError("joint spectral amplitude has non-finite entries")
        if self.forbidden is None:
            self.forbidden = np.zeros(self.amplitude.shape, dtype=bool)

    @property
    def omega_p(self) -> float:
        return self.scheme.pump.omega_p

    @property
    def theta_s(self) -> float:
        return self.scheme.theta_s

    def normalized_frequency(self, omega):
        return 2 * np.asarray(omega) / self.omega_p

    def squared_norm(self) -> float:
        """Riemann-sum squared norm (matches the discrete Fourier transform's Parseval sum)."""
        dws = _spacing(self.omega_s)
        if self.mode == "cw_slice":
            return float(np.sum(np.abs(self.amplitude) ** 2) * dws)
        return float(np.sum(np.abs(self.amplitude) ** 2) * dws * _spacing(self.omega_i))

    def normalized(self) -> JointSpectralAmplitude:
        norm = self.squared_norm()
        amp = self.amplitude / math.sqrt(norm) if norm > 0 else self.amplitude
        return replace(self, amplitude=amp)


def _spacing(grid) -> float:
    grid = np.asarray(grid)
    return float((grid[-1] - grid[0]) / (grid.size - 1)) if grid.size > 1 else 1.0


def _check_grid(omega, name: str):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size == 0:
        raise ConfigurationError(f"{name} grid must be a nonempty 1D array")
    if np.any(np.diff(omega) <= 0):
        raise ConfigurationError(f"{name} grid must be strictly increasing")
    return omega


def jsa_cw(
    stack: Multilayer, scheme: SchemeConfig, omega_s, constants: PhysicalConstants | None = None
) -> JointSpectralAmplitude:
    """Pair amplitude along omega_i = omega_p - omega_s for cw pumping.

    Kinematically forbidden points get amplitude 0 and are flagged in
    ``forbidden``.
    """
    constants = constants or PhysicalConstants()
    omega_s = _check_grid(omega_s, "signal frequency")
    amp, geo = _amplitude_on_grid(stack, scheme, omega_s, scheme.pump.omega_p, constants)
    return JointSpectralAmplitude("cw_slice", omega_s, scheme.pump.omega_p - omega_s, amp, scheme, ~geo.allowed)


def jsa_pulsed(
    stack: Multilayer, scheme: SchemeConfig, omega_s, omega_i, constants: PhysicalConstants | None = None
) -> JointSpectralAmplitude:
    """Pair amplitude E_p(ws + wi) K(ws, wi) on a 2D grid, normalized to unit squared norm.

    The kernel ``K`` is the cw amplitude with the pump fields recomputed at
    the total frequency ``ws + wi``.
    """
    constants = constants or PhysicalConstants()
    if scheme.pump.envelope != "gaussian":
        raise ConfigurationError("jsa_pulsed needs a gaussian pump envelope")
    omega_s = _check_grid(omega_s, "signal frequency")
    omega_i = _check_grid(omega_i, "idler frequency")
    sigma = scheme.pump.spectral_sigma
    for grid, centre, name in ((omega_s, scheme.omega_s0, "signal"), (omega_i, scheme.omega_i0, "idler")):
        if grid[0] > centre - 4 * sigma or grid[-1] < centre + 4 * sigma:
            raise GridTooNarrow(f"{name} grid does not cover +-4 pump spectral sigma around its centre")
    ws, wi = np.meshgrid(omega_s, omega_i, indexing="ij")
    # beyond PUMP_CUTOFF_SIGMA the pump amplitude is below 1e-15 and the kernel is skipped
    band = np.abs(ws + wi - scheme.pump.omega_p) <= PUMP_CUTOFF_SIGMA * sigma
    amp = np.zeros(ws.shape, dtype=complex)
    forbidden = np.zeros(ws.shape, dtype=bool)
    if np.any(band):
        kernel, geo = _amplitude_on_grid(stack, scheme, ws[band], ws[band] + wi[band], constants)
        amp[band] = scheme.pump.spectral_amplitude(ws[band] + wi[band]) * kernel
        forbidden[band] = ~geo.allowed
    jsa = JointSpectralAmplitude("pulsed_grid", omega_s, omega_i, amp, scheme, forbidden)
    if jsa.squared_norm() == 0:
        return jsa
    jsa = jsa.normalized()
    weight = np.abs(jsa.amplitude) ** 2
    inside = np.abs(ws + wi - scheme.pump.omega_p) <= 4 * sigma
    if weight[inside].sum() < 0.99 * weight.sum():
        raise GridTooNarrow("less than 99 % of the pair weight lies within the pump bandwidth")
    return jsa


def direction_pair_amplitudes(
    stack: Multilayer, scheme: SchemeConfig, omega_s, constants: PhysicalConstants | None = None
) -> dict[str, JointSpectralAmplitude]:
    """cw slices for all four exit-facet combinations."""
    return {d: jsa_cw(stack, scheme.with_direction(d), omega_s, constants) for d in DIRECTIONS}


@dataclass(frozen=True)
class RateMap:
    """eta(theta_s, omega_s); ``values[row, col]`` for ``theta[row]``, ``x[col]``."""

    x: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    raw: bool = False

    def __post_init__(self):
        if self.values.shape != (self.theta.size, self.x.size):
            raise ConfigurationError("rate map shape does not match its grids")


def generation_rate_map(
    stack: Multilayer,
    scheme: SchemeConfig,
    omega_s,
    theta,
    constants: PhysicalConstants | None = None,
    raw: bool = False,
    threads: int = 1,
) -> RateMap:
    """|phi(omega_s; theta_s)|^2 over a grid of signal frequencies and angles.

    Rows are independent and can be evaluated on ``threads`` workers; the
    result does not depend on scheduling.
    """
    omega_s = _check_grid(omega_s, "signal frequency")
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise ConfigurationError("angle grid must be a nonempty 1D array")

    def row(th):
        return np.abs(jsa_cw(stack, replace(scheme, theta_s=float(th)), omega_s, constants).amplitude) ** 2

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, theta))
    else:
        rows = [row(th) for th in theta]
    values = np.array(rows)
    if not raw:
        peak = values.max()
        if peak > 0:
            values = values / peak
    return RateMap(2 * omega_s / scheme.pump.omega_p, theta, values, raw)


def symmetric_signal_grid(omega_p: float, half_width: float, count: int, omega_s0: float | None = None):
    """Signal grid ``omega_s0 (1 + delta)`` with ``delta`` exactly symmetric about 0.

    ``half_width`` is in units of normalized frequency 2 omega / omega_p;
    ``count`` is forced odd so the degenerate point is on the grid.
    """
    omega_s0 = omega_p / 2 if omega_s0 is None else omega_s0
    half = max(int(count) // 2, 1)
    delta = half_width * np.arange(-half, half + 1) / half
    return omega_s0 + delta * omega_p / 2
