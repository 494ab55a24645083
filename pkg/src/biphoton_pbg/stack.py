"""Linear optics of planar multilayers.

Fields are plane waves ``exp(i (k_y y + k_z z - omega t))``. In every medium
the tangential electric field (E_x for s, E_y for p) is written as a forward
amplitude ``A`` and a backward amplitude ``B`` referenced to the medium's left
boundary (the facet itself for the two ambients). Transfer matrices map
``(A, B)`` in the left ambient to ``(A, B)`` in the right ambient.

All solvers broadcast over arrays of frequency and transverse wavenumber.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.signal import find_peaks, peak_widths

from .errors import EmptyStack, NonPositiveThickness, SingularScattering, ConfigurationError
from .materials import VACUUM, Material, MaterialLibrary, refractive_index

Polarization = Literal["s", "p"]


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness_nm: float

    @property
    def thickness_m(self) -> float:
        return self.thickness_nm * 1e-9


@dataclass(frozen=True)
class Multilayer:
    """Ordered layers between two semi-infinite ambient media.

    An empty layer tuple is accepted here only so the degenerate single
    interface can be represented; :func:`build_stack` rejects it.
    """

    layers: tuple[Layer, ...]
    ambient_left: Material = VACUUM
    ambient_right: Material = VACUUM

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if not layer.thickness_nm > 0:
                raise NonPositiveThickness(f"layer thickness must be > 0, got {layer.thickness_nm} nm")

    @property
    def total_length_nm(self) -> float:
        return float(sum(layer.thickness_nm for layer in self.layers))

    def __len__(self) -> int:
        return len(self.layers)

    def media(self) -> list[Material]:
        return [self.ambient_left, *(layer.material for layer in self.layers), self.ambient_right]

    def scaled(self, factor: float) -> Multilayer:
        """Every thickness multiplied by ``factor``."""
        return Multilayer(
            tuple(Layer(l.material, l.thickness_nm * factor) for l in self.layers),
            self.ambient_left,
            self.ambient_right,
        )

    def reversed(self) -> Multilayer:
        return Multilayer(tuple(reversed(self.layers)), self.ambient_right, self.ambient_left)


def build_stack(spec: dict, library: MaterialLibrary) -> Multilayer:
    """Instantiate a :class:`Multilayer` from a structure description.

    ``spec["layers"]`` is either a list of ``{"material", "thickness_nm"}``
    records or the periodic shorthand
    ``{"period": [[name, nm], ...], "repeats": N, "cap": [name, nm]}``
    (``cap`` optional), which expands to ``period * repeats + cap``.
    """
    unknown = set(spec) - {"ambient_left", "ambient_right", "layers"}
    if unknown:
        raise ConfigurationError(f"unknown structure keys: {sorted(unknown)}")
    raw = spec.get("layers")
    if raw is None:
        raise EmptyStack("structure has no 'layers'")
    entries: list[tuple[str, float]] = []
    if isinstance(raw, dict):
        extra = set(raw) - {"period", "repeats", "cap"}
        if extra:
            raise ConfigurationError(f"unknown periodic-structure keys: {sorted(extra)}")
        period = [(str(m), float(d)) for m, d in raw.get("period", [])]
        repeats = int(raw.get("repeats", 1))
        if repeats < 0:
            raise ConfigurationError("repeats must be >= 0")
        entries = period * repeats
        if raw.get("cap") is not None:
            m, d = raw["cap"]
            entries.append((str(m), float(d)))
    else:
        for item in raw:
            extra = set(item) - {"material", "thickness_nm"}
            if extra:
                raise ConfigurationError(f"unknown layer keys: {sorted(extra)}")
            entries.append((str(item["material"]), float(item["thickness_nm"])))
    if not entries:
        raise EmptyStack("structure contains no layers")
    layers = []
    for name, d in entries:
        if not d > 0:
            raise NonPositiveThickness(f"layer {name!r}: thickness must be > 0, got {d} nm")
        layers.append(Layer(library.get_material(name), d))
    return Multilayer(
        tuple(layers),
        library.get_material(spec.get("ambient_left", "vacuum")),
        library.get_material(spec.get("ambient_right", "vacuum")),
    )


def wavelength_um(omega):
    return 2e6 * np.pi * C_LIGHT / np.asarray(omega, dtype=float)


@dataclass(frozen=True)
class PlaneWaveContext:
    """Frequency, conserved transverse wavenumber and polarization of a plane wave.

    ``omega`` (rad/s) and ``ky`` (1/m) may be arrays; they are broadcast.
    """

    omega: np.ndarray
    ky: np.ndarray
    polarization: Polarization

    def __post_init__(self):
        if self.polarization not in ("s", "p"):
            raise ConfigurationError(f"polarization must be 's' or 'p', got {self.polarization!r}")
        omega, ky = np.broadcast_arrays(np.asarray(self.omega, dtype=float), np.asarray(self.ky, dtype=float))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "ky", ky)

    @classmethod
    def at_angle(cls, stack: Multilayer, omega, theta_ext, polarization: Polarization, side: str = "left"):
        """Context for external angle ``theta_ext`` (radians) in the ``side`` ambient."""
        omega = np.asarray(omega, dtype=float)
        ambient = stack.ambient_left if side == "left" else stack.ambient_right
        n = refractive_index(ambient, wavelength_um(omega))
        return cls(omega, n * omega / C_LIGHT * np.sin(theta_ext), polarization)

    @property
    def k0(self) -> np.ndarray:
        return self.omega / C_LIGHT


@dataclass
class MediumWaves:
    """Per-medium wave data for one context: index ``n``, ``kz`` and admittance ``q``.

    Arrays have a leading axis over [left ambient, layers..., right ambient].
    """

    n: np.ndarray
    kz: np.ndarray
    q: np.ndarray
    thickness_m: np.ndarray  # ambients carry 0
    ky: np.ndarray

    @property
    def evanescent(self) -> np.ndarray:
        return np.abs(self.kz.imag) > 1e-12 * np.abs(self.kz)

    @property
    def internal_angle(self) -> np.ndarray:
        """Complex propagation angle in each medium (real for propagating waves)."""
        return np.arcsin(self.ky / np.sqrt(self.kz**2 + self.ky**2 + 0j))


def medium_waves(stack: Multilayer, ctx: PlaneWaveContext) -> MediumWaves:
    lam = wavelength_um(ctx.omega)
    cache: dict[int, np.ndarray] = {}
    ns = []
    for m in stack.media():
        if id(m) not in cache:
            cache[id(m)] = np.asarray(refractive_index(m, lam), dtype=float)
        ns.append(np.broadcast_to(cache[id(m)], ctx.omega.shape))
    n = np.stack(ns)
    k0 = ctx.k0
    kz = np.sqrt((n * k0) ** 2 - ctx.ky**2 + 0j)
    # principal sqrt already gives Im >= 0; make the branch explicit for -0.0 imaginary parts
    kz = np.where(kz.imag < 0, -kz, kz)
    if ctx.polarization == "s":
        q = kz / k0
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            q = n**2 * k0 / kz
    d = np.array([0.0, *(l.thickness_m for l in stack.layers), 0.0])
    return MediumWaves(n, kz, q, d, ctx.ky)


def _layer_matrix(q, delta):
    """Characteristic matrix mapping (E, H) tangential fields across one layer."""
    cos, sin = np.cos(delta), np.sin(delta)
    out = np.empty(np.shape(delta) + (2, 2), dtype=complex)
    out[..., 0, 0] = cos
    out[..., 0, 1] = 1j * sin / q
    out[..., 1, 0] = 1j * q * sin
    out[..., 1, 1] = cos
    return out


def _to_fields(q):
    out = np.empty(np.shape(q) + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = 1.0
    out[..., 1, 0] = q
    out[..., 1, 1] = -q
    return out


def _to_amplitudes(q):
    out = np.empty(np.shape(q) + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5
    out[..., 0, 1] = 0.5 / q
    out[..., 1, 0] = 0.5
    out[..., 1, 1] = -0.5 / q
    return out


def _transfer(waves: MediumWaves) -> np.ndarray:
    fields = _to_fields(waves.q[0])
    for j in range(1, waves.q.shape[0] - 1):
        fields = _layer_matrix(waves.q[j], waves.kz[j] * waves.thickness_m[j]) @ fields
    return _to_amplitudes(waves.q[-1]) @ fields


def transfer_matrix(stack: Multilayer, ctx: PlaneWaveContext) -> np.ndarray:
    """2x2 matrix (shape ``ctx.omega.shape + (2, 2)``) mapping left-facet to right-facet amplitudes."""
    return _transfer(medium_waves(stack, ctx))


@dataclass(frozen=True)
class Transmission:
    t: np.ndarray
    r: np.ndarray
    T: np.ndarray
    R: np.ndarray
    evanescent: np.ndarray


def _flux_ratio(waves: MediumWaves) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.real(waves.q[-1]) / np.real(waves.q[0])


def transmittance(stack: Multilayer, ctx: PlaneWaveContext) -> Transmission:
    """Amplitude and power coefficients for a unit wave incident from the left."""
    waves = medium_waves(stack, ctx)
    m = _transfer(waves)
    m11 = m[..., 1, 1]
    r = -m[..., 1, 0] / m11
    t = np.linalg.det(m) / m11
    T = np.abs(t) ** 2 * _flux_ratio(waves)
    return Transmission(t, r, T, np.abs(r) ** 2, np.any(waves.evanescent, axis=0))


@dataclass
class FieldDistribution:
    """Forward/backward tangential amplitudes in every layer.

    ``forward`` and ``backward`` have shape ``(n_layers, *grid)`` and are
    referenced to each layer's left boundary. ``left`` / ``right`` hold the
    ``(A, B)`` amplitudes in the ambients at the respective facet.
    """

    forward: np.ndarray
    backward: np.ndarray
    left: tuple[np.ndarray, np.ndarray]
    right: tuple[np.ndarray, np.ndarray]
    waves: MediumWaves = field(repr=False)


def _solve_left(m, incidence: str, boundary: str):
    m00, m01, m10, m11 = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    one = np.ones_like(m00)
    if boundary == "unit_incident":
        if incidence == "from_left":  # A_L = 1, B_R = 0
            pivot = m11
            return one, -m10 / _nonsingular(pivot)
        # B_R = 1, A_L = 0
        return 0 * one, 1.0 / _nonsingular(m11)
    if boundary == "unit_outgoing":
        if incidence == "from_left":  # A_R = 1, B_L = 0
            return 1.0 / _nonsingular(m00), 0 * one
        # B_L = 1, A_R = 0
        return -m01 / _nonsingular(m00), one
    raise ConfigurationError(f"unknown boundary condition {boundary!r}")


def _nonsingular(x):
    if np.any(np.abs(x) < 1e-300) or not np.all(np.isfinite(x)):
        raise SingularScattering("scattering problem is singular (vanishing matrix element)")
    return x


def internal_fields(
    stack: Multilayer,
    ctx: PlaneWaveContext,
    incidence: Literal["from_left", "from_right"] = "from_left",
    boundary: Literal["unit_incident", "unit_outgoing"] = "unit_incident",
) -> FieldDistribution:
    """Solve for the per-layer amplitudes.

    ``unit_incident``: a unit wave enters from the ``incidence`` side and no
    wave enters from the other side.

    ``unit_outgoing``: the wave travelling away from the ``incidence`` side
    leaves through the opposite facet with unit amplitude and nothing leaves
    through the ``incidence`` facet. This is the detection mode of a photon
    emitted towards that opposite facet.
    """
    if incidence not in ("from_left", "from_right"):
        raise ConfigurationError(f"unknown incidence {incidence!r}")
    waves = medium_waves(stack, ctx)
    m = _transfer(waves)
    a_l, b_l = _solve_left(m, incidence, boundary)
    vec = np.stack([a_l, b_l], axis=-1)[..., None]
    fields = _to_fields(waves.q[0]) @ vec
    fwd, bwd = [], []
    for j in range(1, waves.q.shape[0] - 1):
        amps = _to_amplitudes(waves.q[j]) @ fields
        fwd.append(amps[..., 0, 0])
        bwd.append(amps[..., 1, 0])
        fields = _layer_matrix(waves.q[j], waves.kz[j] * waves.thickness_m[j]) @ fields
    right = _to_amplitudes(waves.q[-1]) @ fields
    shape = ctx.omega.shape
    empty = np.empty((0, *shape), dtype=complex)
    return FieldDistribution(
        np.stack(fwd) if fwd else empty,
        np.stack(bwd) if bwd else empty,
        (a_l, b_l),
        (right[..., 0, 0], right[..., 1, 0]),
        waves,
    )


@dataclass(frozen=True)
class SpectralCurve:
    """Sampled curve over normalized frequency ``2 omega / omega_p``."""

    x: np.ndarray
    y: np.ndarray
    reflectance: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ConfigurationError("spectral grid must be a nonempty 1D array")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("spectral grid must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


def transmission_spectrum(
    stack: Multilayer, omega, theta_ext, polarization: Polarization, omega_p: float
) -> SpectralCurve:
    """T(omega) at external angle ``theta_ext`` (scalar, or an array matching ``omega``)."""
    omega = np.asarray(omega, dtype=float)
    ctx = PlaneWaveContext.at_angle(stack, omega, theta_ext, polarization)
    res = transmittance(stack, ctx)
    return SpectralCurve(2 * omega / omega_p, res.T, res.R)


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    width: float


def find_transmission_peaks(curve: SpectralCurve, min_prominence: float = 0.05) -> list[Peak]:
    """Local maxima with prominence above ``min_prominence``, sorted by position.

    Positions and heights are refined with a parabola through the three
    samples around each maximum; widths are full widths at half prominence.
    """
    if not 0 < min_prominence <= 1:
        raise ConfigurationError("min_prominence must lie in (0, 1]")
    y, x = curve.y, curve.x
    idx, props = find_peaks(y, prominence=min_prominence)
    if idx.size == 0:
        return []
    widths, _, left_ips, right_ips = peak_widths(y, idx, rel_height=0.5)
    sample = np.arange(x.size)
    peaks = []
    for k, i in enumerate(idx):
        pos, height = x[i], y[i]
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            pos = float(np.interp(i + shift, sample, x))
            height = y1 - 0.25 * (y0 - y2) * shift
        width = float(np.interp(right_ips[k], sample, x) - np.interp(left_ips[k], sample, x))
        peaks.append(Peak(float(pos), float(height), width))
    return sorted(peaks, key=lambda p: p.position)
