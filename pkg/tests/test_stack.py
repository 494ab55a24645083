import json
import math
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import c as C

from biphoton_pbg.errors import ConfigurationError, EmptyStack, NonPositiveThickness, UnknownMaterial
from biphoton_pbg.stack import (
    Layer,
    Multilayer,
    PlaneWaveContext,
    SpectralCurve,
    build_stack,
    find_transmission_peaks,
    internal_fields,
    medium_waves,
    transfer_matrix,
    transmission_spectrum,
    transmittance,
)

from conftest import constant_material
from oracles import brute_force_incident_left, brute_force_transfer

GOLDEN = Path(__file__).parent / "golden"
LAM0 = 0.79e-6
W0 = 2 * math.pi * C / LAM0


def slab_stack(indices, thicknesses_nm, left=1.0, right=1.0):
    layers = tuple(Layer(constant_material(f"m{j}", n), d) for j, (n, d) in enumerate(zip(indices, thicknesses_nm)))
    return Multilayer(layers, constant_material("L", left), constant_material("R", right))


def random_case(rng):
    n_layers = int(rng.integers(1, 7))
    indices = rng.uniform(1.0, 3.5, n_layers)
    thick = rng.uniform(10, 400, n_layers)
    left, right = rng.uniform(1.0, 2.0, 2)
    stack = slab_stack(indices, thick, left, right)
    omega = 2 * math.pi * C / (rng.uniform(0.4, 2.0) * 1e-6)
    # keep both ambients propagating so that R + T = 1 applies
    theta = rng.uniform(-1.3, 1.3) * min(1.0, math.asin(min(left, right) / left) / 1.3)
    pol = "s" if rng.random() < 0.5 else "p"
    ctx = PlaneWaveContext.at_angle(stack, omega, theta, pol)
    all_n = [left, *indices, right]
    return stack, ctx, all_n, thick * 1e-9


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b))


# --- build ---------------------------------------------------------------------------


def test_period_shorthand(bragg_stack):
    assert len(bragg_stack) == 49
    assert bragg_stack.total_length_nm == 25 * 110 + 24 * 60 == 4190
    names = [l.material.name for l in bragg_stack.layers]
    assert names[0] == names[-1] == "GaN" and names[1] == "AlN"
    assert bragg_stack.ambient_left.name == bragg_stack.ambient_right.name == "vacuum"


def test_single_layer(library):
    stack = build_stack({"layers": [{"material": "vacuum", "thickness_nm": 100}]}, library)
    assert len(stack) == 1 and stack.total_length_nm == 100


def test_build_errors(library):
    with pytest.raises(NonPositiveThickness):
        build_stack({"layers": [{"material": "GaN", "thickness_nm": -5}]}, library)
    with pytest.raises(EmptyStack):
        build_stack({"layers": []}, library)
    with pytest.raises(EmptyStack):
        build_stack({"layers": {"period": [["GaN", 10]], "repeats": 0}}, library)
    with pytest.raises(UnknownMaterial):
        build_stack({"layers": [{"material": "InN", "thickness_nm": 5}]}, library)
    with pytest.raises(ConfigurationError):
        build_stack({"layers": [{"material": "GaN", "thickness_nm": 5, "colour": 1}]}, library)
    with pytest.raises(NonPositiveThickness):
        Multilayer((Layer(constant_material("a", 2.0), 0.0),))


# --- transfer matrix ------------------------------------------------------------------


def test_zero_layers_identity():
    stack = Multilayer((), constant_material("a", 1.5), constant_material("a", 1.5))
    m = transfer_matrix(stack, PlaneWaveContext.at_angle(stack, W0, 0.3, "p"))
    np.testing.assert_allclose(m, np.eye(2), atol=1e-15)


def test_free_propagation_matrix():
    n, d = 2.0, 300.0
    stack = slab_stack([n], [d], n, n)
    m = transfer_matrix(stack, PlaneWaveContext(W0, 0.0, "s"))
    phase = n * W0 * d * 1e-9 / C
    np.testing.assert_allclose(m, np.diag([np.exp(1j * phase), np.exp(-1j * phase)]), atol=1e-13)


def test_three_layers_match_oracle():
    stack = slab_stack([2.3, 1.4, 3.1], [120, 80, 200])
    theta = math.radians(30)
    ctx = PlaneWaveContext.at_angle(stack, W0, theta, "p")
    k0 = W0 / C
    ky = k0 * math.sin(theta)
    expected = brute_force_transfer([1.0, 2.3, 1.4, 3.1, 1.0], [120e-9, 80e-9, 200e-9], k0, ky, "p")
    assert rel(transfer_matrix(stack, ctx), expected) < 1e-9
    fields = internal_fields(stack, ctx)
    sol = brute_force_incident_left([1.0, 2.3, 1.4, 3.1, 1.0], [120e-9, 80e-9, 200e-9], k0, ky, "p")
    assert rel(fields.forward, sol[1:-1, 0]) < 1e-9
    assert rel(fields.backward, sol[1:-1, 1]) < 1e-9


def test_random_stacks_match_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        stack, ctx, n, d = random_case(rng)
        k0 = float(ctx.k0)
        ky = float(ctx.ky)
        assert rel(transfer_matrix(stack, ctx), brute_force_transfer(n, d, k0, ky, ctx.polarization)) < 1e-9
        sol = brute_force_incident_left(n, d, k0, ky, ctx.polarization)
        f = internal_fields(stack, ctx)
        assert rel(np.concatenate([f.forward, f.backward]), np.concatenate([sol[1:-1, 0], sol[1:-1, 1]])) < 1e-9
        res = transmittance(stack, ctx)
        assert abs(res.R + res.T - 1) < 1e-10


# --- transmittance ---------------------------------------------------------------------


def test_vacuum_stack_transmits(library):
    stack = build_stack({"layers": [{"material": "vacuum", "thickness_nm": 500}]}, library)
    res = transmittance(stack, PlaneWaveContext.at_angle(stack, W0, 0.5, "p"))
    assert res.T == pytest.approx(1.0, abs=1e-15) and res.R == pytest.approx(0.0, abs=1e-15)


def test_fresnel_single_interface():
    stack = Multilayer((), constant_material("a", 1.0), constant_material("b", 2.0))
    for pol in "sp":
        res = transmittance(stack, PlaneWaveContext(W0, 0.0, pol))
        assert res.R == pytest.approx(1 / 9, abs=1e-14)
        assert res.T == pytest.approx(8 / 9, abs=1e-14)


def test_brewster_angle():
    stack = Multilayer((), constant_material("a", 1.0), constant_material("b", 2.0))
    res = transmittance(stack, PlaneWaveContext.at_angle(stack, W0, math.atan(2.0), "p"))
    assert res.R < 1e-10
    assert transmittance(stack, PlaneWaveContext.at_angle(stack, W0, math.atan(2.0), "s")).R > 0.1


def test_evanescent_layer_flagged_and_lossless():
    stack = slab_stack([1.2, 2.0], [100, 100], 1.5, 1.5)
    ctx = PlaneWaveContext.at_angle(stack, W0, math.radians(60), "s")
    res = transmittance(stack, ctx)
    assert bool(res.evanescent)
    assert abs(res.R + res.T - 1) < 1e-10
    assert medium_waves(stack, ctx).kz[1].imag > 0


# --- internal fields -------------------------------------------------------------------


def test_vacuum_internal_fields(library):
    stack = build_stack({"layers": [{"material": "vacuum", "thickness_nm": 100}] * 3}, library)
    f = internal_fields(stack, PlaneWaveContext.at_angle(stack, W0, 0.4, "p"))
    np.testing.assert_allclose(np.abs(f.forward), 1.0, atol=1e-14)
    np.testing.assert_allclose(f.backward, 0.0, atol=1e-14)


def _tangential(f, pol):
    """Tangential E and H on both sides of every interface."""
    w = f.waves
    A = np.concatenate([[f.left[0]], f.forward, [f.right[0]]])
    B = np.concatenate([[f.left[1]], f.backward, [f.right[1]]])
    e_left = A * np.exp(1j * w.kz * w.thickness_m) + B * np.exp(-1j * w.kz * w.thickness_m)
    h_left = w.q * (A * np.exp(1j * w.kz * w.thickness_m) - B * np.exp(-1j * w.kz * w.thickness_m))
    return (e_left[:-1], A[1:] + B[1:]), (h_left[:-1], w.q[1:] * (A[1:] - B[1:]))


@pytest.mark.parametrize("pol", ["s", "p"])
@pytest.mark.parametrize("incidence", ["from_left", "from_right"])
@pytest.mark.parametrize("boundary", ["unit_incident", "unit_outgoing"])
def test_bragg_stack_continuity_and_flux(bragg_stack, pol, incidence, boundary, cw_pump):
    # band-edge frequency near the first gap
    omega = 0.9658 * cw_pump.omega_p / 2
    ctx = PlaneWaveContext.at_angle(bragg_stack, omega, math.radians(30), pol)
    f = internal_fields(bragg_stack, ctx, incidence, boundary)
    (e1, e2), (h1, h2) = _tangential(f, pol)
    assert np.max(np.abs(e1 - e2)) < 1e-10 * np.max(np.abs(e2))
    assert np.max(np.abs(h1 - h2)) < 1e-10 * np.max(np.abs(h2))
    w = f.waves
    A = np.concatenate([[f.left[0]], f.forward, [f.right[0]]])
    B = np.concatenate([[f.left[1]], f.backward, [f.right[1]]])
    flux = np.real(w.q) * (np.abs(A) ** 2 - np.abs(B) ** 2)
    assert np.max(np.abs(flux - flux[0])) < 1e-10 * np.max(np.real(w.q) * (np.abs(A) ** 2 + np.abs(B) ** 2))


def test_boundary_modes():
    stack = slab_stack([2.3, 1.4, 3.1], [120, 80, 200], 1.0, 1.5)
    ctx = PlaneWaveContext.at_angle(stack, W0, 0.3, "p")
    f = internal_fields(stack, ctx, "from_left", "unit_outgoing")
    assert f.right[0] == pytest.approx(1.0) and abs(f.left[1]) < 1e-15
    f = internal_fields(stack, ctx, "from_right", "unit_outgoing")
    assert f.left[1] == pytest.approx(1.0) and abs(f.right[0]) < 1e-15
    f = internal_fields(stack, ctx, "from_right", "unit_incident")
    assert f.right[1] == pytest.approx(1.0) and abs(f.left[0]) < 1e-15
    with pytest.raises(ConfigurationError):
        internal_fields(stack, ctx, "from_top")


# --- properties ------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_energy_conservation(seed):
    stack, ctx, _, _ = random_case(np.random.default_rng(seed))
    res = transmittance(stack, ctx)
    assert abs(res.R + res.T - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_composition(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = rng.uniform(1, 3.5, 3), rng.uniform(1, 3.5, 2)
    d1, d2 = rng.uniform(10, 300, 3), rng.uniform(10, 300, 2)
    junction = rng.uniform(1.0, 2.0)
    s1 = slab_stack(n1, d1, 1.0, junction)
    s2 = slab_stack(n2, d2, junction, 1.3)
    whole = Multilayer(s1.layers + s2.layers, s1.ambient_left, s2.ambient_right)
    pol = "s" if seed % 2 else "p"
    ky = W0 / C * rng.uniform(-0.9, 0.9)
    ctx = PlaneWaveContext(W0, ky, pol)
    assert rel(transfer_matrix(whole, ctx), transfer_matrix(s2, ctx) @ transfer_matrix(s1, ctx)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 3.5), st.floats(5, 300), st.floats(5, 300), st.floats(-1.2, 1.2), st.sampled_from("sp"))
def test_split_layer(n, d1, d2, theta, pol):
    m = constant_material("x", n)
    one = Multilayer((Layer(m, d1 + d2),))
    two = Multilayer((Layer(m, d1), Layer(m, d2)))
    ctx = PlaneWaveContext.at_angle(one, W0, theta, pol)
    assert rel(transfer_matrix(two, ctx), transfer_matrix(one, ctx)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reciprocity(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 7))
    stack = slab_stack(rng.uniform(1, 3.5, k), rng.uniform(10, 300, k), 1.2, 1.2)
    ctx = PlaneWaveContext(W0, W0 / C * rng.uniform(-1.1, 1.1), "s" if seed % 2 else "p")
    assert abs(transmittance(stack, ctx).T - transmittance(stack.reversed(), ctx).T) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0, 1.2), st.sampled_from("sp"))
def test_scaling_law(a, theta, pol):
    stack = slab_stack([2.5, 1.6, 2.5, 1.6], [110, 60, 110, 60])
    x = np.linspace(0.6, 1.4, 41)
    wp = 2 * W0
    t1 = transmission_spectrum(stack, a * x * wp / 2, theta, pol, wp).y
    ta = transmission_spectrum(stack.scaled(a), x * wp / 2, theta, pol, wp).y
    np.testing.assert_allclose(ta, t1, rtol=0, atol=1e-12)


# --- spectra and peaks -----------------------------------------------------------------


def test_vacuum_spectrum(library):
    stack = build_stack({"layers": [{"material": "vacuum", "thickness_nm": 500}]}, library)
    curve = transmission_spectrum(stack, np.linspace(1, 3, 50) * 1e15, 0.3, "s", 4e15)
    np.testing.assert_allclose(curve.y, 1.0, atol=1e-14)


def test_fabry_perot_period():
    n, d, theta = 2.0, 2000.0, math.radians(25)
    stack = slab_stack([n], [d])
    omega = np.linspace(1.0e15, 3.0e15, 20001)
    curve = transmission_spectrum(stack, omega, theta, "s", 4e15)
    peaks = find_transmission_peaks(curve, 0.05)
    cos_int = math.sqrt(1 - (math.sin(theta) / n) ** 2)
    period = math.pi * C / (n * d * 1e-9 * cos_int)
    spacing = np.diff([p.position for p in peaks]) * 2e15
    np.testing.assert_allclose(spacing, period, rtol=1e-4)


def test_spectral_curve_must_increase():
    with pytest.raises(ConfigurationError):
        SpectralCurve(np.array([1.0, 0.5]), np.array([0.0, 0.0]))


def test_flat_curve_has_no_peaks():
    assert find_transmission_peaks(SpectralCurve(np.linspace(0, 1, 50), np.ones(50))) == []


def test_two_gaussian_bumps():
    x = np.linspace(0.5, 1.5, 1001)
    y = np.exp(-((x - 0.9) / 0.02) ** 2) + np.exp(-((x - 1.1) / 0.02) ** 2)
    peaks = find_transmission_peaks(SpectralCurve(x, y))
    assert len(peaks) == 2
    assert peaks[0].position == pytest.approx(0.9, abs=1e-3) and peaks[1].position == pytest.approx(1.1, abs=1e-3)
    assert peaks[0].height == pytest.approx(1.0, abs=1e-3)
    assert peaks[0].width == pytest.approx(2 * 0.02 * math.sqrt(math.log(2)), rel=1e-2)


def test_prominence_threshold():
    x = np.linspace(0, 1, 501)
    y = 0.5 + 0.01 * np.sin(40 * x) + np.exp(-((x - 0.5) / 0.02) ** 2)
    assert len(find_transmission_peaks(SpectralCurve(x, y), 0.05)) == 1
    with pytest.raises(ConfigurationError):
        find_transmission_peaks(SpectralCurve(x, y), 0.0)


def test_bragg_stack_peaks_golden(bragg_stack, cw_pump):
    golden = json.loads((GOLDEN / "bragg_stack_peaks.json").read_text())
    x = np.linspace(golden["x_start"], golden["x_stop"], golden["count"])
    curve = transmission_spectrum(
        bragg_stack, x * cw_pump.omega_p / 2, math.radians(golden["theta_deg"]), golden["polarization"], cw_pump.omega_p
    )
    peaks = find_transmission_peaks(curve)
    positions = [p.position for p in peaks]
    assert any(p < 1 for p in positions) and any(p > 1 for p in positions)
    np.testing.assert_allclose(positions, golden["positions"], atol=1e-9)
    np.testing.assert_allclose([p.height for p in peaks], golden["heights"], atol=1e-9)
    # a band gap surrounds the degenerate point
    below = max(p for p in positions if p < 1)
    above = min(p for p in positions if p > 1)
    gap = curve.y[(x > below + 0.01) & (x < above - 0.01)]
    assert gap.size and gap.min() < 0.2
