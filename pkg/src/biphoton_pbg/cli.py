"""Command-line scenario runner.

A scenario is a JSON file naming the material library, the structure, the
generation scheme, the grids and one task. Outputs are CSV files plus a
``manifest.json`` with SHA-256 digests. Relative file references are
resolved against the directory of the scenario file; ``builtin:NAME``
refers to data shipped with the package.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import io
from .biphoton import (
    antisym_decompose,
    conditional_detection,
    hom_rate,
    hom_rate_general,
    support_width,
    temporal_amplitude,
)
from .design import design_scan, stack_spectrum
from .errors import BiphotonError, ComputationError, ConfigInvalid, ConfigurationError
from .materials import MaterialLibrary
from .spdc import (
    SCHEME_POLARIZATIONS,
    PumpConfig,
    SchemeConfig,
    generation_rate_map,
    jsa_cw,
    jsa_pulsed,
    symmetric_signal_grid,
)
from .stack import Multilayer, build_stack, find_transmission_peaks, transmission_spectrum

TASKS = ("transmission", "jsa", "ratemap", "hom", "temporal", "conditional", "design_scan")
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 2, 3, 4
FS = 1e-15

EPILOG = """\
exit codes:
  0  success, manifest written
  2  configuration error (invalid scenario, missing file, unknown material)
  3  computation error (wavelength outside data range, singular solve, ...)
  4  I/O error while writing outputs

environment:
  BIPHOTON_PBG_MATERIALS  default material library when the scenario names none
"""


# --- scenario schema -------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LinearRange(_Strict):
    start: float
    stop: float
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.count > 1 and not self.stop > self.start:
            raise ValueError("stop must exceed start")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


class SymmetricRange(_Strict):
    """Normalized detuning window ``2 omega / omega_p - centre`` in [-half_width, half_width]."""

    half_width: float = Field(gt=0)
    count: int = Field(ge=3)


class SchemeBlock(_Strict):
    preset: Literal["scheme1_all_p", "scheme2_sp", "scheme1_45deg", "custom"] = "scheme1_all_p"
    pump_wavelength_nm: float = Field(395.0, gt=0)
    pump_polarization: Literal["s", "p"] | None = None
    signal_polarization: Literal["s", "p", "d45"] | None = None
    idler_polarization: Literal["s", "p", "d45"] | None = None
    pump_incidence_deg: float = 0.0
    envelope: Literal["cw", "gaussian"] = "cw"
    duration_fs: float | None = Field(None, gt=0)
    theta_s_deg: float = Field(30.0, gt=-90, lt=90)
    direction: Literal["FF", "FB", "BF", "BB"] = "FF"
    transverse: Literal["fixed_momentum", "fixed_angle"] = "fixed_momentum"
    signal_centre_norm: float = Field(1.0, gt=0, lt=2)

    @model_validator(mode="after")
    def _polarizations(self):
        given = (self.pump_polarization, self.signal_polarization, self.idler_polarization)
        if self.preset == "custom":
            if None in given:
                raise ValueError("custom scheme needs pump, signal and idler polarizations")
        else:
            expected = SCHEME_POLARIZATIONS[self.preset]
            for name, g, e in zip(("pump", "signal", "idler"), given, expected):
                if g is not None and g != e:
                    raise ValueError(f"{self.preset} fixes the {name} polarization to {e!r}")
        if self.envelope == "gaussian" and self.duration_fs is None:
            raise ValueError("gaussian envelope needs duration_fs")
        return self

    def build(self) -> SchemeConfig:
        pol_p, pol_s, pol_i = (
            SCHEME_POLARIZATIONS[self.preset]
            if self.preset != "custom"
            else (self.pump_polarization, self.signal_polarization, self.idler_polarization)
        )
        pump = PumpConfig.from_wavelength(
            self.pump_wavelength_nm,
            polarization=pol_p,
            incidence_angle=math.radians(self.pump_incidence_deg),
            envelope=self.envelope,
            duration_fs=self.duration_fs,
        )
        return SchemeConfig(
            pump,
            pol_s,
            pol_i,
            math.radians(self.theta_s_deg),
            direction=self.direction,
            scheme=self.preset,
            omega_s0=self.signal_centre_norm * pump.omega_p / 2,
            transverse=self.transverse,
        )


class DesignBlock(_Strict):
    scale_lo: float = Field(gt=0)
    scale_hi: float = Field(gt=0)
    count: int = Field(ge=2)
    height_weight: float = Field(1.0, ge=0)
    min_prominence: float = Field(0.05, gt=0, le=1)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.scale_hi > self.scale_lo:
            raise ValueError("scale_hi must exceed scale_lo")
        return self


class ScenarioConfig(_Strict):
    task: Literal[TASKS]  # type: ignore[valid-type]
    description: str = ""
    materials: str | None = None
    structure: str
    scheme: SchemeBlock = SchemeBlock()
    frequency: SymmetricRange | None = None
    idler_frequency: SymmetricRange | None = None
    spectrum: LinearRange | None = None
    angles_deg: LinearRange | None = None
    tau_fs: LinearRange | None = None
    pulsed: bool = False
    tau_s_fs: float = 0.0
    hom_method: Literal["antisymmetric", "general"] = "antisymmetric"
    temporal_window_fs: float | None = Field(None, gt=0)
    transmission_polarization: Literal["s", "p"] | None = None
    min_prominence: float = Field(0.05, gt=0, le=1)
    raw: bool = False
    design: DesignBlock | None = None
    output_dir: str = "."

    @model_validator(mode="after")
    def _blocks_for_task(self):
        needs = {
            "transmission": ["spectrum"],
            "jsa": ["frequency"],
            "ratemap": ["frequency", "angles_deg"],
            "hom": ["frequency", "tau_fs"],
            "temporal": ["frequency"],
            "conditional": ["frequency"],
            "design_scan": ["spectrum", "design"],
        }[self.task]
        for name in needs:
            if getattr(self, name) is None:
                raise ValueError(f"task {self.task!r} requires the {name!r} block")
        if self.pulsed and self.scheme.envelope != "gaussian":
            raise ValueError("pulsed runs need scheme.envelope = 'gaussian'")
        return self


def _loc(loc) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a scenario mapping; errors name the offending field path."""
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-after"))]
        raise ConfigInvalid(_loc(loc), err["msg"]) from None


# --- file resolution ------------------------------------------------------------


def _builtin(package: str, name: str) -> str:
    target = resources.files(package).joinpath(name)
    if not target.is_file():
        raise FileNotFoundError(name)
    return target.read_text()


def _read_reference(ref: str, base: Path, field: str) -> str:
    try:
        if ref.startswith("builtin:"):
            return _builtin("biphoton_pbg.data", ref.split(":", 1)[1])
        path = Path(ref)
        if not path.is_absolute():
            path = base / path
        return path.read_text()
    except (FileNotFoundError, IsADirectoryError):
        raise ConfigInvalid(field, f"referenced file {ref!r} does not exist") from None


def _load_json(text: str, field: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(field, f"not valid JSON: {exc}") from None


def _check_structure_materials(spec: dict, library: MaterialLibrary):
    refs: list[tuple[str, object]] = []
    for key in ("ambient_left", "ambient_right"):
        if key in spec:
            refs.append((f"structure.{key}", spec[key]))
    layers = spec.get("layers")
    if isinstance(layers, dict):
        for j, item in enumerate(layers.get("period", [])):
            refs.append((f"structure.layers.period[{j}][0]", item[0] if item else None))
        if layers.get("cap"):
            refs.append(("structure.layers.cap[0]", layers["cap"][0]))
    elif isinstance(layers, list):
        for j, item in enumerate(layers):
            refs.append((f"structure.layers[{j}].material", item.get("material") if isinstance(item, dict) else None))
    for path, name in refs:
        if name not in library:
            raise ConfigInvalid(path, f"unknown material {name!r}")


def load_inputs(cfg: ScenarioConfig, base: Path) -> tuple[MaterialLibrary, Multilayer]:
    if cfg.materials is None:
        library = MaterialLibrary.load()
    else:
        text = _read_reference(cfg.materials, base, "materials")
        try:
            library = MaterialLibrary.from_dict(_load_json(text, "materials"))
        except ConfigInvalid:
            raise
        except ConfigurationError as exc:
            raise ConfigInvalid("materials", str(exc)) from None
    spec = _load_json(_read_reference(cfg.structure, base, "structure"), "structure")
    if not isinstance(spec, dict):
        raise ConfigInvalid("structure", "structure file must hold a JSON object")
    _check_structure_materials(spec, library)
    try:
        stack = build_stack(spec, library)
    except ConfigurationError as exc:
        raise ConfigInvalid("structure", str(exc)) from None
    return library, stack


# --- tasks -----------------------------------------------------------------------


def _signal_grid(cfg: ScenarioConfig, scheme: SchemeConfig) -> np.ndarray:
    f = cfg.frequency
    return symmetric_signal_grid(scheme.pump.omega_p, f.half_width, f.count, scheme.omega_s0)


def _idler_grid(cfg: ScenarioConfig, scheme: SchemeConfig) -> np.ndarray:
    f = cfg.idler_frequency or cfg.frequency
    return symmetric_signal_grid(scheme.pump.omega_p, f.half_width, f.count, scheme.omega_i0)


def _jsa(cfg, stack, scheme, threads):
    omega_s = _signal_grid(cfg, scheme)
    if cfg.pulsed:
        return jsa_pulsed(stack, scheme, omega_s, _idler_grid(cfg, scheme))
    return jsa_cw(stack, scheme, omega_s)


def _transmission_pol(cfg: ScenarioConfig, scheme: SchemeConfig) -> str:
    pol = cfg.transmission_polarization or scheme.signal_polarization
    if pol not in ("s", "p"):
        raise ConfigInvalid("transmission_polarization", "needed when the signal is analysed at 45 degrees")
    return pol


def run_task(cfg: ScenarioConfig, stack: Multilayer, out_dir: Path, threads: int = 1) -> tuple[list[Path], dict]:
    scheme = cfg.scheme.build()
    wp = scheme.pump.omega_p
    files: list[Path] = []
    summary: dict = {}
    task = cfg.task
    if task == "transmission":
        x = cfg.spectrum.values()
        curve = transmission_spectrum(stack, x * wp / 2, scheme.theta_s, _transmission_pol(cfg, scheme), wp)
        files.append(io.write_spectrum(out_dir / "transmission.csv", curve))
        peaks = find_transmission_peaks(curve, cfg.min_prominence)
        summary["peaks"] = [[io.fmt(p.position), io.fmt(p.height), io.fmt(p.width)] for p in peaks]
    elif task == "jsa":
        jsa = _jsa(cfg, stack, scheme, threads)
        files.append(io.write_jsa(out_dir / "jsa.csv", jsa))
        if jsa.mode == "cw_slice":
            summary["antisymmetry_fraction"] = io.fmt(antisym_decompose(jsa).antisymmetry_fraction)
        else:
            ws, wi = np.meshgrid(jsa.omega_s - scheme.omega_s0, jsa.omega_i - scheme.omega_i0, indexing="ij")
            weight = np.abs(jsa.amplitude) ** 2
            total = weight.sum()
            summary["lobe_weights"] = [io.fmt(weight[ws > wi].sum() / total), io.fmt(weight[ws < wi].sum() / total)]
    elif task == "ratemap":
        rate = generation_rate_map(
            stack, scheme, _signal_grid(cfg, scheme), np.radians(cfg.angles_deg.values()), raw=cfg.raw, threads=threads
        )
        files.append(io.write_ratemap(out_dir / "ratemap.csv", rate))
    elif task == "hom":
        jsa = jsa_cw(stack, scheme, _signal_grid(cfg, scheme))
        tau = cfg.tau_fs.values() * FS
        if cfg.hom_method == "general":
            trace = hom_rate_general(jsa, tau)
        else:
            trace = hom_rate(antisym_decompose(jsa), tau)
        files.append(io.write_hom(out_dir / "hom.csv", trace))
        summary["antisymmetry_fraction"] = io.fmt(antisym_decompose(jsa).antisymmetry_fraction)
    elif task == "temporal":
        amp = temporal_amplitude(_jsa(cfg, stack, scheme, threads))
        if cfg.temporal_window_fs is not None:
            amp = _cropped(amp, cfg.temporal_window_fs * FS)
        files.append(io.write_temporal(out_dir / "temporal.csv", amp))
    elif task == "conditional":
        amp = temporal_amplitude(_jsa(cfg, stack, scheme, threads))
        tau_i = None if cfg.tau_fs is None else cfg.tau_fs.values() * FS
        prob = conditional_detection(amp, cfg.tau_s_fs * FS, tau_i)
        files.append(io.write_conditional(out_dir / "conditional.csv", prob))
        summary["support_width_fs"] = io.fmt(support_width(prob.tau_i, prob.density, 0.99) / FS)
    elif task == "design_scan":
        d = cfg.design
        spectrum = stack_spectrum(stack, wp, scheme.theta_s, _transmission_pol(cfg, scheme), cfg.spectrum.values())
        res = design_scan(spectrum, d.scale_lo, d.scale_hi, d.count, d.height_weight, d.min_prominence)
        files.append(io.write_table(out_dir / "design_scan.csv", ["scale", "objective"], [res.scales, res.objective]))
        summary["best_scale"] = io.fmt(res.best_scale)
        summary["best_objective"] = io.fmt(res.best_objective)
        summary["peak_pair"] = [[io.fmt(p.position), io.fmt(p.height)] for p in res.pair]
    return files, summary


def _cropped(amp, window: float):
    from dataclasses import replace

    ks = np.abs(amp.tau_s) <= window
    ki = np.abs(amp.tau_i) <= window
    if amp.mode == "cw_slice":
        full = amp.on_grid()[np.ix_(ks, ki)]
        return replace(amp, mode="pulsed_grid", tau_s=amp.tau_s[ks], tau_i=amp.tau_i[ki], envelope=full)
    return replace(amp, tau_s=amp.tau_s[ks], tau_i=amp.tau_i[ki], envelope=amp.envelope[np.ix_(ks, ki)])


# --- entry point -----------------------------------------------------------------


def list_presets() -> dict[str, str]:
    out = {}
    for entry in sorted(resources.files("biphoton_pbg.presets").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = json.loads(entry.read_text()).get("description", "")
    return out


def load_scenario(config: str | None, preset: str | None) -> tuple[dict, Path]:
    if preset is not None:
        try:
            text = _builtin("biphoton_pbg.presets", f"{preset}.json")
        except FileNotFoundError:
            raise ConfigInvalid("preset", f"unknown preset {preset!r}") from None
        return _load_json(text, "preset"), Path.cwd()
    path = Path(config)
    try:
        text = path.read_text()
    except (FileNotFoundError, IsADirectoryError):
        raise ConfigInvalid("config", f"scenario file {config!r} does not exist") from None
    data = _load_json(text, "config")
    if not isinstance(data, dict):
        raise ConfigInvalid("config", "scenario must be a JSON object")
    return data, path.resolve().parent


def run_scenario(data: dict, base: Path, out_dir: Path | None = None, threads: int = 1) -> Path:
    """Validate, compute and write outputs; returns the manifest path."""
    cfg = parse_config(data)
    _, stack = load_inputs(cfg, base)
    out = Path(out_dir) if out_dir is not None else base / cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files, summary = run_task(cfg, stack, out, threads)
    return io.write_manifest(out, cfg.task, files, summary)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biphoton-pbg",
        description="Photon-pair generation in nonlinear photonic-band-gap multilayers.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("task", nargs="?", choices=(*TASKS, "run"), help="task to run ('run' uses the scenario's task)")
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--config", help="scenario JSON file")
    src.add_argument("--preset", help="shipped scenario name (see --list-presets)")
    parser.add_argument("--out", help="output directory (default: scenario output_dir)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for grid sweeps")
    parser.add_argument("--list-presets", action="store_true", help="list shipped scenarios and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name, desc in list_presets().items():
            print(f"{name:8s} {desc}")
        return EXIT_OK
    if args.task is None or (args.config is None and args.preset is None):
        parser.print_usage(sys.stderr)
        print("biphoton-pbg: error: a task and --config or --preset are required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data, base = load_scenario(args.config, args.preset)
        if args.task != "run":
            if "task" in data and data["task"] != args.task:
                raise ConfigInvalid("task", f"scenario task {data['task']!r} does not match {args.task!r}")
            data = {**data, "task": args.task}
        if args.threads < 1:
            raise ConfigInvalid("threads", "must be >= 1")
        out = Path(args.out) if args.out else (Path.cwd() if args.preset else None)
        manifest = run_scenario(data, base, out, args.threads)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputationError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except BiphotonError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
