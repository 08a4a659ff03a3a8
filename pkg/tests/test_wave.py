import cmath
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from geopath.exceptions import RejectedInputError, StabilityError, UnwrapError
from geopath.wave import (SNAPSHOT_COLUMNS, MadelungTransformer, WaveField, WavePropagator,
                          build_geometric_wavefunction, check_stability, continuity_residual,
                          evolve, evolve_schrodinger, free_packet_width, gaussian_packet,
                          gradient, hamilton_jacobi_residual, madelung_decompose,
                          packet_width, plane_wave_energy, quantum_potential, second_derivative,
                          time_derivatives, write_snapshot_csv)


def periodic_grid(n, length=2 * math.pi):
    dx = length / n
    return dx * np.arange(n), dx


def test_constant_field_example():
    S0 = 0.5
    fields = madelung_decompose(np.full(8, 2j), S0)
    np.testing.assert_array_equal(fields.amplitude_a, 2.0)
    np.testing.assert_allclose(fields.action_S, math.pi * S0, rtol=1e-15)


def test_build_examples():
    wave = build_geometric_wavefunction(np.ones(8), np.full(8, math.pi), 0.5)
    np.testing.assert_allclose(wave.amplitudes, -1.0, atol=1e-15)
    with pytest.raises(RejectedInputError):
        build_geometric_wavefunction(-np.ones(8), np.zeros(8), 0.5)
    with pytest.raises(RejectedInputError):
        build_geometric_wavefunction(np.ones(8), np.zeros(9), 0.5)
    with pytest.raises(RejectedInputError):
        build_geometric_wavefunction(np.ones(8), np.zeros(8), 0.0)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 3.0))
@settings(max_examples=60)
def test_round_trip_for_smooth_fields(seed, S0):
    x, dx = periodic_grid(256)
    gen = np.random.default_rng(seed)
    c = gen.normal(size=(4, 3))
    a = 1.5 + 0.4 * np.tanh(c[0, 0] * np.sin(x + c[0, 1]))
    S = 2 * S0 * (c[1, 0] * x + 3 * c[1, 1] * np.cos(x + c[1, 2]) + c[2, 0])
    fields = madelung_decompose(build_geometric_wavefunction(a, S, S0, dx=dx))
    np.testing.assert_allclose(fields.amplitude_a, a, rtol=1e-12)
    # the action is recovered up to one global multiple of 2 pi (2 S0)
    offset = fields.action_S - S
    turns = offset[0] / (4 * math.pi * S0)
    assert abs(turns - round(turns)) < 1e-10
    assert np.max(np.abs(offset - offset[0])) < 1e-10 * max(1.0, np.max(np.abs(S)))


def test_plane_wave_has_linear_action():
    x, dx = periodic_grid(128)
    k, S0 = 7.0, 0.25
    fields = madelung_decompose(np.exp(1j * k * x), S0)
    np.testing.assert_allclose(fields.action_S, 2 * S0 * k * x, atol=1e-12)
    np.testing.assert_allclose(gradient(fields.action_S, dx), 2 * S0 * k, rtol=1e-12)


def test_node_raises_unwrap_error():
    x, _ = periodic_grid(64)
    with pytest.raises(UnwrapError) as info:
        madelung_decompose(np.sin(x) + 0j, 0.5)
    assert info.value.index == 0
    psi = np.exp(1j * x)
    psi[20] = 1e-9
    with pytest.raises(UnwrapError) as info:
        madelung_decompose(psi, 0.5)
    assert info.value.index == 20


def test_derivative_stencils_are_exact_on_quadratics():
    x = np.linspace(-1, 2, 31)
    dx = x[1] - x[0]
    f = 3 * x ** 2 - x + 1
    np.testing.assert_allclose(gradient(f, dx), 6 * x - 1, atol=1e-11)
    np.testing.assert_allclose(second_derivative(f, dx), 6.0, atol=1e-9)


def test_hj_free_solution():
    m, p, t = 2.0, 1.3, 0.7
    x = np.linspace(-3, 3, 61)
    S = p * x - p ** 2 * t / (2 * m)
    residual = hamilton_jacobi_residual(S, np.zeros_like(x), m, np.full_like(x, -p ** 2 / (2 * m)),
                                        dx=x[1] - x[0])
    assert np.max(np.abs(residual)) < 1e-13


def test_hj_quadratic_action():
    # S = m x^2 / (2 (t + t0)) solves the free equation with dS/dt = -m x^2 / (2 (t + t0)^2)
    m, tt = 1.5, 0.8
    x = np.linspace(-2, 2, 41)
    S = m * x ** 2 / (2 * tt)
    residual = hamilton_jacobi_residual(S, np.zeros_like(x), m, -m * x ** 2 / (2 * tt ** 2),
                                        dx=x[1] - x[0])
    assert np.max(np.abs(residual)) < 1e-12


def test_continuity_manufactured_solution_is_second_order():
    m = 1.0
    errs = []
    for n in (50, 100, 200, 400):
        x = np.linspace(0, 2, n + 1)
        a2 = 1 + 0.5 * np.sin(x)
        S = x ** 3
        flux_div = (0.5 * np.cos(x) * 3 * x ** 2 + a2 * 6 * x) / m
        errs.append(np.max(np.abs(continuity_residual(a2, S, m, -flux_div, dx=x[1] - x[0]))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(abs(o - 2) < 0.2 for o in orders), orders


def test_quantum_potential_of_cosine_amplitude():
    x, dx = periodic_grid(400)
    a = 2 + np.cos(x)
    m, S0 = 1.0, 0.5
    Q = quantum_potential(a, m, S0, dx=dx)
    exact = -((2 * S0) ** 2 / (2 * m)) * (-np.cos(x)) / a
    assert np.max(np.abs(Q - exact)) < 1e-3


def test_discrete_hj_residual_equals_minus_quantum_potential():
    x, dx = periodic_grid(512)
    S0, m = 0.5, 1.0
    wave = build_geometric_wavefunction(1 + 0.3 * np.cos(x), 2 * S0 * 3 * x, S0, dx=dx)
    fields = madelung_decompose(wave)
    _, dS_dt = time_derivatives(wave)
    hj = hamilton_jacobi_residual(fields.action_S, wave.potential_U, m, dS_dt, dx=dx)
    Q = quantum_potential(fields.amplitude_a, m, S0, dx=dx)
    assert np.max(np.abs(hj + Q)) < 1e-3 * np.max(np.abs(Q)) + 1e-3


def test_norm_conserved_on_periodic_grid():
    x, dx = periodic_grid(256, 20.0)
    wave = WaveField(gaussian_packet(x, 10.0, 1.0, 3.0), dx)
    norms = [wave.norm()]
    evolve(wave, 5e-4, 500, callback=lambda s, w: norms.append(w.norm()))
    assert norms[0] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(np.diff(norms))) < 1e-12


@pytest.mark.parametrize("S0", [0.5, 0.2])
def test_plane_wave_dispersion(S0):
    n, m = 128, 1.3
    x, dx = periodic_grid(n)
    k = 4.0
    dt, steps = 2e-4, 200
    final = evolve(WaveField(np.exp(1j * k * x), dx, m, S0), dt, steps)
    ratio = final.amplitudes / np.exp(1j * k * x)
    hbar = 2 * S0
    # the Cayley step rotates an eigenvector of the discrete Hamiltonian by a known angle
    E_grid = hbar ** 2 / (2 * m) * (4 / dx ** 2) * math.sin(k * dx / 2) ** 2
    angle = -2 * math.atan(E_grid * dt / (2 * hbar)) * steps
    np.testing.assert_allclose(ratio, cmath.exp(1j * angle), atol=1e-11)
    # and the continuum dispersion to within the grid error
    E = plane_wave_energy(k, m, S0)
    assert abs(-cmath.phase(ratio[0]) * hbar / (dt * steps) - E) / E < (k * dx) ** 2 / 10


def test_packet_spreading_matches_closed_form():
    n, length, m, S0, sigma0 = 800, 80.0, 1.0, 0.5, 1.0
    dx = length / n
    x = -length / 2 + dx * np.arange(n)
    wave = WaveField(gaussian_packet(x, 0.0, sigma0), dx, m, S0, x0=-length / 2)
    assert packet_width(wave) == pytest.approx(sigma0, rel=1e-6)
    final = evolve(wave, 8e-4, 1250)
    expected = free_packet_width(sigma0, final.time, m, S0)
    assert abs(packet_width(final) - expected) / expected < 1e-2


def test_reference_reduction_is_bitwise():
    x, dx = periodic_grid(128, 16.0)
    psi = gaussian_packet(x, 8.0, 1.0, 1.0)
    U = 0.1 * (x - 8.0) ** 2
    hbar = 0.8
    a = evolve(WaveField(psi, dx, 1.0, hbar / 2, U), 1e-3, 50).amplitudes
    b = evolve_schrodinger(psi, dx, 1.0, hbar, 1e-3, 50, U)
    assert np.array_equal(a, b)


def test_stability_error():
    x, dx = periodic_grid(256)
    wave = WaveField(np.exp(1j * x), dx)
    with pytest.raises(StabilityError) as info:
        evolve(wave, 1.0, 1)
    assert info.value.key_path == "dt"
    with pytest.raises(StabilityError):
        check_stability(WaveField(np.exp(1j * x), dx, potential_U=np.full(256, 1e6)), 1e-5)
    check_stability(wave, 5e-5)


def test_absorbing_boundary_removes_outgoing_packet():
    n, length = 400, 40.0
    dx = length / n
    x = dx * np.arange(n)
    wave = WaveField(gaussian_packet(x, 30.0, 1.0, 4.0), dx, boundary="absorbing")
    final = evolve(wave, 8e-4, 3500, absorb_strength=5.0, absorb_width=0.15)
    assert final.norm() < 0.05 * wave.norm()
    periodic = evolve(WaveField(wave.amplitudes, dx), 8e-4, 3500)
    assert periodic.norm() == pytest.approx(wave.norm(), rel=1e-9)


def test_snapshot_csv():
    x, dx = periodic_grid(16)
    wave = WaveField(np.exp(2j * x), dx)
    buf = io.StringIO()
    write_snapshot_csv(wave, buf, stride=4)
    lines = buf.getvalue().strip().split("\r\n")
    assert lines[0] == ",".join(SNAPSHOT_COLUMNS)
    assert len(lines) == 5
    row = [float(v) for v in lines[2].split(",")]
    assert row[0] == pytest.approx(x[4])
    assert row[3] == pytest.approx(1.0)
    buf = io.StringIO()
    write_snapshot_csv(WaveField(np.sin(x) + 0j, dx), buf)
    assert buf.getvalue().strip().split("\r\n")[1].endswith("nan")


def test_madelung_transformer():
    x, _ = periodic_grid(64)
    psi = (1 + 0.2 * np.cos(x)) * np.exp(3j * x)
    est = MadelungTransformer(action_scale_S0=0.25)
    out = est.fit_transform(psi)
    assert out.shape == (64, 2)
    np.testing.assert_allclose(est.inverse_transform(out), psi, atol=1e-14)
    assert clone(est).get_params()["action_scale_S0"] == 0.25
    with pytest.raises(RejectedInputError):
        MadelungTransformer(action_scale_S0=0).fit(psi)


def test_wave_propagator():
    x, dx = periodic_grid(128, 20.0)
    psi = gaussian_packet(x, 10.0, 1.0)
    est = WavePropagator(dx=dx, dt=1e-3, steps=20)
    np.testing.assert_array_equal(est.fit_transform(psi),
                                  evolve(WaveField(psi, dx), 1e-3, 20).amplitudes)
    assert clone(est).set_params(steps=0).transform(psi) == pytest.approx(psi)
