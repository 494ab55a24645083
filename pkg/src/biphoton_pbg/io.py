"""CSV export/import of computed curves and maps, and the run manifest.

Every float is written with 12 significant digits, so reading a file back
reproduces the data to that precision.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .biphoton import ConditionalProbability, HOMTrace, TemporalAmplitude
from .spdc import JointSpectralAmplitude, RateMap
from .stack import SpectralCurve

FS = 1e-15


def fmt(value: float) -> str:
    return format(float(value), ".12g")


def write_table(path, header: list[str], columns) -> Path:
    path = Path(path)
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_spectrum(path, curve: SpectralCurve) -> Path:
    refl = curve.reflectance if curve.reflectance is not None else 1.0 - curve.y
    return write_table(path, ["normalized_frequency", "T", "R"], [curve.x, curve.y, refl])


def write_jsa(path, jsa: JointSpectralAmplitude) -> Path:
    amp = np.asarray(jsa.amplitude)
    if jsa.mode == "cw_slice":
        return write_table(
            path, ["omega_s_norm", "re", "im"], [jsa.normalized_frequency(jsa.omega_s), amp.real, amp.imag]
        )
    ws, wi = np.meshgrid(jsa.omega_s, jsa.omega_i, indexing="ij")
    return write_table(
        path,
        ["omega_s_norm", "omega_i_norm", "re", "im"],
        [jsa.normalized_frequency(ws), jsa.normalized_frequency(wi), amp.real, amp.imag],
    )


def write_ratemap(path, rate: RateMap) -> Path:
    """Matrix layout: first row holds the frequency axis, first column the angle axis (degrees)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta_deg\\omega_s_norm", *(fmt(x) for x in rate.x)])
        for th, row in zip(np.degrees(rate.theta), rate.values):
            writer.writerow([fmt(th), *(fmt(v) for v in row)])
    return path


def read_ratemap(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (x, theta_deg, values)."""
    with Path(path).open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    x = np.array([float(v) for v in rows[0][1:]])
    theta = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(theta.size, x.size)
    return x, theta, values


def write_hom(path, trace: HOMTrace) -> Path:
    return write_table(path, ["tau_l_fs", "R_n"], [trace.tau / FS, trace.rate])


def write_temporal(path, amp: TemporalAmplitude) -> Path:
    ts, ti = np.meshgrid(amp.tau_s, amp.tau_i, indexing="ij")
    return write_table(path, ["tau_s_fs", "tau_i_fs", "abs2"], [ts / FS, ti / FS, np.abs(amp.on_grid()) ** 2])


def write_conditional(path, prob: ConditionalProbability) -> Path:
    # density per second -> per femtosecond
    return write_table(path, ["tau_i_fs", "p_i_per_fs"], [prob.tau_i / FS, prob.density * FS])


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, task: str, files: list[Path], extra: dict | None = None) -> Path:
    """JSON manifest listing every written file with its SHA-256 digest."""
    out_dir = Path(out_dir)
    entries = [{"file": Path(f).name, "sha256": sha256(f)} for f in sorted(files, key=lambda p: Path(p).name)]
    body = {"task": task, "files": entries}
    if extra:
        body["summary"] = extra
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path
