"""Dispersion models, second-order susceptibility tensors and material libraries.

Wavelengths are vacuum wavelengths in micrometers throughout this module.
Tensor elements are in pm/V; index roles are (pump, signal, idler).
The linear index is a scalar per material: uniaxial crystals are described
by their ordinary index only.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import (
    ComputationError,
    ConfigurationError,
    NegativeIndexSquared,
    NonUnitVector,
    UnknownMaterial,
    WavelengthOutOfRange,
)

AXES = "xyz"

# wurtzite (6mm) nonzero elements grouped by the independent value they share
WURTZITE_GROUPS: dict[str, tuple[str, ...]] = {
    "zzz": ("zzz",),
    "zxx": ("zxx", "zyy"),
    "xxz": ("xxz", "yyz"),
    "xzx": ("xzx", "yzy"),
}
_WURTZITE_ALIAS = {k: rep for rep, keys in WURTZITE_GROUPS.items() for k in keys}


@dataclass(frozen=True)
class DispersionModel:
    """Refractive index model.

    ``kind="constant"`` returns ``constant_index``; ``kind="sellmeier"``
    evaluates ``n^2 = A + sum(B * lam^2 / (lam^2 - C))`` with ``lam`` in
    micrometers and ``C`` in square micrometers.
    """

    kind: Literal["constant", "sellmeier"]
    constant_index: float = 1.0
    A: float = 1.0
    terms: tuple[tuple[float, float], ...] = ()

    @classmethod
    def constant(cls, n: float) -> DispersionModel:
        return cls(kind="constant", constant_index=float(n))

    @classmethod
    def sellmeier(cls, A: float, terms) -> DispersionModel:
        return cls(kind="sellmeier", A=float(A), terms=tuple((float(b), float(c)) for b, c in terms))

    def index_squared(self, wavelength_um):
        lam2 = np.asarray(wavelength_um, dtype=float) ** 2
        if self.kind == "constant":
            return np.full_like(lam2, self.constant_index**2)
        n2 = np.full_like(lam2, self.A)
        for b, c in self.terms:
            n2 = n2 + b * lam2 / (lam2 - c)
        return n2


@dataclass(frozen=True)
class Chi2Tensor:
    """Sparse second-order susceptibility tensor (pm/V).

    ``entries`` maps index strings such as ``"yyz"`` to values. The first
    index contracts with the pump polarization, the second with the signal
    and the third with the idler.
    """

    entries: dict[str, float] = field(default_factory=dict)
    symmetry_class: Literal["wurtzite_6mm", "custom"] = "custom"

    def __post_init__(self):
        for key in self.entries:
            if len(key) != 3 or any(ch not in AXES for ch in key):
                raise ConfigurationError(f"invalid chi2 index triple {key!r}")

    @classmethod
    def wurtzite(cls, zzz: float = 0.0, zxx: float = 0.0, xxz: float = 0.0, xzx: float | None = None) -> Chi2Tensor:
        """Class-6mm tensor; ``xzx`` defaults to ``xxz`` (three independent values)."""
        values = {"zzz": zzz, "zxx": zxx, "xxz": xxz, "xzx": xxz if xzx is None else xzx}
        entries = {k: float(values[rep]) for rep, keys in WURTZITE_GROUPS.items() for k in keys}
        return cls(entries=entries, symmetry_class="wurtzite_6mm")

    @property
    def is_zero(self) -> bool:
        return not any(v != 0.0 for v in self.entries.values())

    def dense(self) -> np.ndarray:
        t = np.zeros((3, 3, 3))
        for key, value in self.entries.items():
            t[tuple(AXES.index(ch) for ch in key)] = value
        return t

    def scaled(self, factor: float) -> Chi2Tensor:
        return Chi2Tensor({k: factor * v for k, v in self.entries.items()}, self.symmetry_class)


@dataclass(frozen=True)
class Material:
    name: str
    dispersion: DispersionModel
    chi2: Chi2Tensor = field(default_factory=Chi2Tensor)
    validity_um: tuple[float, float] = (0.0, np.inf)
    reference: str = ""

    @property
    def is_nonlinear(self) -> bool:
        return not self.chi2.is_zero


VACUUM = Material("vacuum", DispersionModel.constant(1.0), Chi2Tensor(), (0.0, np.inf))


def refractive_index(material: Material, wavelength_um):
    """Refractive index of ``material`` at vacuum wavelength(s) ``wavelength_um``.

    Raises
    ------
    WavelengthOutOfRange
        Any wavelength lies outside the material's validity window.
    NegativeIndexSquared
        The Sellmeier expression is negative (pole region).
    """
    lam = np.asarray(wavelength_um, dtype=float)
    lo, hi = material.validity_um
    if np.any(lam < lo) or np.any(lam > hi) or np.any(~np.isfinite(lam)):
        raise WavelengthOutOfRange(
            f"{material.name}: wavelength outside validity window [{lo}, {hi}] um"
        )
    n2 = material.dispersion.index_squared(lam)
    if np.any(n2 < 0.0):
        raise NegativeIndexSquared(f"{material.name}: n^2 < 0 at some requested wavelength")
    if np.any(n2 < 1.0):
        raise ComputationError(f"{material.name}: index below 1 inside the validity window")
    n = np.sqrt(n2)
    return float(n) if n.ndim == 0 else n


def _check_unit(v, name: str) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[-1] != 3:
        raise NonUnitVector(f"{name} must be a 3-vector")
    norm = np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise NonUnitVector(f"{name} is not normalized (|v| = {norm})")
    return v


def contract(tensor: Chi2Tensor, e_p, e_s, e_i):
    """Unchecked contraction sum chi_jkl p_j s_k i_l, broadcasting over leading axes."""
    return np.einsum("jkl,...j,...k,...l->...", tensor.dense(), np.asarray(e_p), np.asarray(e_s), np.asarray(e_i))


def chi2_coupling(tensor: Chi2Tensor, e_p, e_s, e_i):
    """Full tensor contraction with unit polarization vectors (pm/V)."""
    e_p = _check_unit(e_p, "e_p")
    e_s = _check_unit(e_s, "e_s")
    e_i = _check_unit(e_i, "e_i")
    out = contract(tensor, e_p, e_s, e_i)
    return out.item() if np.ndim(out) == 0 else out


# --- library files -----------------------------------------------------------


class _Dispersion(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["constant", "sellmeier"]
    n: float | None = None
    A: float | None = None
    terms: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        if self.kind == "constant" and (self.n is None or self.A is not None or self.terms is not None):
            raise ValueError("constant dispersion takes exactly the key 'n'")
        if self.kind == "sellmeier" and (self.A is None or self.terms is None or self.n is not None):
            raise ValueError("sellmeier dispersion takes exactly the keys 'A' and 'terms'")
        return self


class _Chi2(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)
    symmetry_class: Literal["wurtzite_6mm", "custom"] = Field(alias="class")
    elements: dict[str, float] = {}


class _Material(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    dispersion: _Dispersion
    validity_um: tuple[float, float]
    chi2: _Chi2 | None = None
    reference: str = ""


class _Library(BaseModel):
    model_config = ConfigDict(extra="forbid")
    materials: list[_Material]


def _tensor_from_model(m: _Chi2 | None, name: str) -> Chi2Tensor:
    if m is None:
        return Chi2Tensor()
    if m.symmetry_class == "custom":
        return Chi2Tensor(dict(m.elements), "custom")
    values: dict[str, float] = {}
    for key, value in m.elements.items():
        rep = _WURTZITE_ALIAS.get(key)
        if rep is None:
            raise ConfigurationError(f"{name}: element {key!r} is not allowed for wurtzite_6mm")
        if rep in values and values[rep] != value:
            raise ConfigurationError(f"{name}: inconsistent values for {rep} group")
        values[rep] = float(value)
    return Chi2Tensor.wurtzite(**values)


class MaterialLibrary(dict):
    """Name -> :class:`Material` mapping; ``vacuum`` is always present."""

    def __init__(self, materials=()):
        super().__init__()
        self["vacuum"] = VACUUM
        for m in materials:
            if m.name in self and m.name != "vacuum":
                raise ConfigurationError(f"duplicate material name {m.name!r}")
            self[m.name] = m

    def get_material(self, name: str) -> Material:
        try:
            return self[name]
        except KeyError:
            raise UnknownMaterial(f"unknown material {name!r}") from None

    @classmethod
    def from_dict(cls, data: dict) -> MaterialLibrary:
        try:
            lib = _Library.model_validate(data)
        except ValidationError as exc:
            raise ConfigurationError(f"invalid material library: {exc}") from exc
        materials = []
        for m in lib.materials:
            lo, hi = m.validity_um
            if not 0 <= lo < hi:
                raise ConfigurationError(f"{m.name}: invalid validity window {m.validity_um}")
            d = m.dispersion
            model = DispersionModel.constant(d.n) if d.kind == "constant" else DispersionModel.sellmeier(d.A, d.terms)
            materials.append(Material(m.name, model, _tensor_from_model(m.chi2, m.name), (lo, hi), m.reference))
        return cls(materials)

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> MaterialLibrary:
        """Read a JSON library; ``None`` uses $BIPHOTON_PBG_MATERIALS or the shipped GaN/AlN data."""
        if path is None:
            path = os.environ.get("BIPHOTON_PBG_MATERIALS")
        if path is None:
            text = resources.files("biphoton_pbg.data").joinpath("gan_aln.json").read_text()
        else:
            text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"material library is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

