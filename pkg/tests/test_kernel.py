import cmath
import io
import math

import numpy as np
import pytest
from scipy.integrate import quad
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from geopath.checks import nyquist_points
from geopath.ensemble import Delta, EnsembleConfig, HalfNormal
from geopath.exceptions import GridResolutionError, RejectedInputError
from geopath.kernel import (SWEEP_COLUMNS, EnsembleKernelEstimator, PhaseFactor,
                            analytic_free_kernel, ensemble_kernel, harmonic_kernel, kernel_sum,
                            lattice_path_integral, phase_factor, sum_values,
                            write_kernel_sweep_csv)


def test_phase_factor_examples():
    assert phase_factor(0.0, 1.0).value == 1 + 0j
    assert phase_factor(math.pi * 2.5, 2.5).value == pytest.approx(-1.0, abs=1e-15)
    for n in range(-5, 6):
        assert abs(phase_factor(2 * math.pi * 0.7 * n, 0.7).value - 1) < 1e-12
    with pytest.raises(RejectedInputError):
        phase_factor(1.0, 0.0)
    with pytest.raises(RejectedInputError):
        phase_factor(1.0, 1.0, C=-1.0)


def test_phase_factor_modulus_equals_amplitude():
    gen = np.random.default_rng(2)
    for S, C in zip(gen.normal(0, 100, 200), gen.uniform(0, 5, 200)):
        assert abs(abs(phase_factor(S, 1.3, C).value) - C) < 1e-12


def test_kernel_sum_examples():
    est = kernel_sum([phase_factor(0.0, 1.0)] * 5, "mean")
    assert est.value == 1.0 and est.std_error == 0.0 and est.ensemble_J == 5
    est = kernel_sum([phase_factor(0.0, 1.0), phase_factor(math.pi, 1.0)], "raw_sum")
    assert abs(est.value) < 1e-15
    with pytest.raises(RejectedInputError):
        kernel_sum([])
    with pytest.raises(RejectedInputError):
        kernel_sum([phase_factor(0.0, 1.0)], "median")


def test_uniform_phases_random_walk_bound():
    J = 100_000
    phases = np.random.default_rng(5).uniform(0, 2 * math.pi, J)
    est = sum_values(np.exp(1j * phases), "mean")
    assert abs(est.value) < 5 / math.sqrt(J)
    # unit-modulus values have sample std close to 1
    assert est.std_error == pytest.approx(1 / math.sqrt(J), rel=0.01)


def test_linearity_of_raw_sums():
    gen = np.random.default_rng(9)
    factors = [PhaseFactor(j, c, p) for j, (c, p) in
               enumerate(zip(gen.uniform(0, 2, 300), gen.uniform(-10, 10, 300)))]
    whole = kernel_sum(factors, "raw_sum").value
    parts = kernel_sum(factors[:120], "raw_sum").value + kernel_sum(factors[120:], "raw_sum").value
    assert abs(whole - parts) < 1e-12
    mean = kernel_sum(factors, "mean").value
    assert abs(mean) <= max(f.amplitude_C for f in factors)


def test_free_kernel_modulus():
    assert abs(analytic_free_kernel(1, 1, 0.3, 0.3, 1)) == pytest.approx(0.3989422804014327,
                                                                         rel=1e-15)
    mods = [abs(analytic_free_kernel(2.0, 0.7, 0.0, d, 0.5)) for d in (0, 0.1, 3, 50)]
    assert max(mods) - min(mods) < 1e-15
    k = analytic_free_kernel(1, 1, 0, 0, 1)
    assert cmath.phase(k) == pytest.approx(-math.pi / 4)
    for bad in [dict(m=0), dict(T=-1), dict(hbar=0)]:
        args = dict(m=1, T=1, xa=0, xb=0, hbar=1)
        args.update(bad)
        with pytest.raises(RejectedInputError):
            analytic_free_kernel(**args)


def rotated_composition(kernel_b, kernel_a, center, a2):
    """Integrate ``kernel_b(c) kernel_a(c)`` over the real line.

    The integrand is entire and Gaussian in ``c`` with phase ``exp(i a2 c^2)``
    (``a2 > 0``), so the contour ``c = center + exp(i pi/4) s`` turns it into a
    decaying Gaussian without changing the integral.
    """
    rot = cmath.exp(0.25j * math.pi)

    def f(s):
        return kernel_b(center + rot * s) * kernel_a(center + rot * s) * rot

    re = quad(lambda s: f(s).real, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    im = quad(lambda s: f(s).imag, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    return complex(re, im)


def _free_complex(m, T, x_from, x_to, hbar=1.0):
    # analytic continuation of the free kernel in its position argument
    return math.sqrt(m / (2 * math.pi * hbar * T)) * cmath.exp(-0.25j * math.pi) \
        * cmath.exp(1j * m * (x_to - x_from) ** 2 / (2 * hbar * T))


@pytest.mark.parametrize("T1, T2, xa, xb", [(0.4, 0.6, 0.0, 0.5), (1.0, 2.5, -1.0, 2.0)])
def test_free_kernel_semigroup_by_quadrature(T1, T2, xa, xb):
    m, hbar = 1.3, 0.8
    composed = rotated_composition(lambda c: _free_complex(m, T2, c, xb, hbar),
                                   lambda c: _free_complex(m, T1, xa, c, hbar),
                                   (T2 * xa + T1 * xb) / (T1 + T2), m / (2 * hbar) * (1 / T1 + 1 / T2))
    direct = analytic_free_kernel(m, T1 + T2, xa, xb, hbar)
    assert abs(composed - direct) < 1e-6
    # sanity check that the continuation agrees with the library on the real axis
    assert _free_complex(m, T1, xa, xb, hbar) == pytest.approx(analytic_free_kernel(m, T1, xa, xb, hbar))


def test_harmonic_kernel_solves_schrodinger():
    m, w, hbar, xa = 1.0, 1.3, 1.0, 0.4
    T, xb = 0.9, 0.7
    h = 1e-4
    K = lambda t, x: harmonic_kernel(m, w, t, xa, x, hbar)  # noqa: E731
    dK_dt = (K(T + h, xb) - K(T - h, xb)) / (2 * h)
    d2K_dx2 = (K(T, xb + h) - 2 * K(T, xb) + K(T, xb - h)) / h ** 2
    lhs = 1j * hbar * dK_dt
    rhs = -hbar ** 2 / (2 * m) * d2K_dx2 + 0.5 * m * w ** 2 * xb ** 2 * K(T, xb)
    assert abs(lhs - rhs) < 1e-5 * abs(K(T, xb))


def test_harmonic_kernel_free_limit():
    assert harmonic_kernel(1.0, 1e-6, 0.8, 0.1, 0.9) == pytest.approx(
        analytic_free_kernel(1.0, 0.8, 0.1, 0.9), rel=1e-9)


def test_harmonic_kernel_semigroup_across_caustic():
    m, w, hbar = 1.0, 1.0, 1.0
    T1, T2, xa, xb = 1.5, 2.0, 0.2, -0.3  # total exceeds pi
    s1, s2 = math.sin(w * T1), math.sin(w * T2)
    a2 = m * w / (2 * hbar) * (math.cos(w * T1) / s1 + math.cos(w * T2) / s2)
    assert a2 < 0  # rotate the other way: conjugate symmetric problem

    def ho(T, x_from, x_to):
        # prefactor and exponent separately so the product can be formed stably
        s = math.sin(w * T)
        pref = math.sqrt(m * w / (2 * math.pi * hbar * abs(s))) * cmath.exp(-0.25j * math.pi) \
            * cmath.exp(-0.5j * math.pi * math.floor(w * T / math.pi))
        return pref, 1j * m * w / (2 * hbar * s) \
            * ((x_from ** 2 + x_to ** 2) * math.cos(w * T) - 2 * x_from * x_to)

    rot = cmath.exp(-0.25j * math.pi)

    def f(s):
        (p2, e2), (p1, e1) = ho(T2, rot * s, xb), ho(T1, xa, rot * s)
        return p2 * p1 * cmath.exp(e2 + e1) * rot

    re = quad(lambda s: f(s).real, -np.inf, np.inf, epsabs=1e-13)[0]
    im = quad(lambda s: f(s).imag, -np.inf, np.inf, epsabs=1e-13)[0]
    assert abs(complex(re, im) - harmonic_kernel(m, w, T1 + T2, xa, xb, hbar)) < 1e-6


def test_lattice_single_slice_is_exact():
    grid = {"x_min": -5, "x_max": 5, "points": 3}
    for xa, xb, T in [(0.0, 0.5, 1.0), (-1.0, 2.0, 0.3)]:
        lat = lattice_path_integral(None, 1.0, 1.0, T, xa, xb, 1, grid)
        exact = analytic_free_kernel(1.0, T, xa, xb, 1.0)
        assert abs(lat - exact) / abs(exact) < 1e-8


def _grid(x_min, x_max, N=64, T=1.0):
    return {"x_min": x_min, "x_max": x_max, "points": nyquist_points(1.0, 1.0, T, N, x_min, x_max)}


def test_lattice_free_64_slices():
    lat = lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 0.5, 64, _grid(-10, 10))
    exact = analytic_free_kernel(1.0, 1.0, 0.0, 0.5, 1.0)
    assert abs(lat - exact) / abs(exact) < 0.02


def test_lattice_harmonic_64_slices():
    U = lambda x: 0.5 * np.asarray(x) ** 2  # noqa: E731
    lat = lattice_path_integral(U, 1.0, 1.0, 1.0, 0.3, -0.2, 64, _grid(-10, 10))
    exact = harmonic_kernel(1.0, 1.0, 1.0, 0.3, -0.2, 1.0)
    assert abs(lat - exact) / abs(exact) < 0.02


def test_lattice_error_decreases_with_refinement():
    exact = analytic_free_kernel(1.0, 1.0, 0.0, 0.5, 1.0)
    errors = []
    for half_width, N in [(5, 16), (7, 32), (9, 48), (12, 64)]:
        lat = lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 0.5, N, _grid(-half_width, half_width, N))
        errors.append(abs(lat - exact) / abs(exact))
    assert all(a > b for a, b in zip(errors, errors[1:])), errors


def test_lattice_nyquist_diagnostic():
    with pytest.raises(GridResolutionError, match="at least"):
        lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 0.5, 64,
                              {"x_min": -10, "x_max": 10, "points": 500})


def test_lattice_rejects_bad_inputs():
    grid = _grid(-2, 2, 4)
    with pytest.raises(RejectedInputError):
        lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 5.0, 4, grid)
    with pytest.raises(RejectedInputError):
        lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 0.5, 0, grid)
    with pytest.raises(RejectedInputError):
        lattice_path_integral(None, 1.0, 1.0, 1.0, 0.0, 0.5, 4, (-1, 1, 2))


def test_ensemble_kernel_flat_fields():
    config = EnsembleConfig(7, Delta(0.0))
    assert ensemble_kernel(config, 3.0, normalization="mean", amplitude_C=2.0).value == 2.0
    assert ensemble_kernel(config, 3.0, normalization="raw_sum", amplitude_C=2.0).value == 14.0


def test_ensemble_kernel_identical_fields():
    config = EnsembleConfig(10, Delta(2.25))
    est = ensemble_kernel(config, 0.8, hbar=0.6, amplitude_C=1.5)
    assert est.value == pytest.approx(1.5 * cmath.exp(1j * 1.5 * 0.8), abs=1e-14)
    assert abs(est.value) == pytest.approx(1.5)
    assert est.std_error < 1e-15


def test_ensemble_kernel_total_action_scale():
    config = EnsembleConfig(10, Delta(1.0))
    # every field carries S = omega t_span, the total is 10 S, so each phase is 1/10
    est = ensemble_kernel(config, 2.0, phase_scale="total_action")
    assert est.value == pytest.approx(cmath.exp(0.1j), abs=1e-14)
    with pytest.raises(RejectedInputError):
        ensemble_kernel(EnsembleConfig(3, Delta(0.0)), 1.0, phase_scale="total_action")


def test_half_normal_kernel_decays_and_scales():
    config = EnsembleConfig(100_000, HalfNormal(1.0), seed=12)
    mags = [abs(ensemble_kernel(config, t).value) for t in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(mags, mags[1:])), mags
    sizes = [100, 1000, 10_000, 100_000]
    errs = [ensemble_kernel(EnsembleConfig(J, HalfNormal(1.0), seed=12), 3.0).std_error
            for J in sizes]
    slope = np.polyfit(np.log10(sizes), np.log10(errs), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_ensemble_kernel_parallel_identical():
    config = EnsembleConfig(50_000, HalfNormal(1.0), seed=3)
    assert ensemble_kernel(config, 2.0, n_jobs=4) == ensemble_kernel(config, 2.0, n_jobs=1)


def test_estimator_api():
    est = EnsembleKernelEstimator(count_J=2000, seed=4)
    with pytest.raises(NotFittedError):
        est.predict([1.0])
    est.fit()
    values = est.predict([0.5, 1.0, 2.0])
    direct = [ensemble_kernel(est.config_, t).value for t in (0.5, 1.0, 2.0)]
    np.testing.assert_array_equal(values, direct)
    assert est.std_error([1.0])[0] > 0
    cloned = clone(est).set_params(count_J=10, distribution={"kind": "delta", "value": 0.0})
    assert cloned.fit().predict([3.0])[0] == 1.0
    assert est.get_params()["count_J"] == 2000


def test_sweep_csv():
    config = EnsembleConfig(50, HalfNormal(1.0))
    rows = [(t, ensemble_kernel(config, t)) for t in (1.0, 2.0)]
    buf = io.StringIO()
    write_kernel_sweep_csv(rows, buf)
    lines = buf.getvalue().strip().split("\r\n")
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    J, t, re, im, se = lines[2].split(",")
    assert int(J) == 50 and float(t) == 2.0
    assert complex(float(re), float(im)) == rows[1][1].value
