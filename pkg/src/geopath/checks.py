"""Oracle comparisons run by ``geopath check``.

Each criterion is a function ``(seed, params, n_jobs) -> CheckResult``. The
``measured`` values are pure functions of the seed and parameters; wall
time is kept apart in ``runtime_s`` so results compare byte for byte.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .deviation import (DeviationState, exp_solution_residual, integrate_deviation,
                        oscillator_closed_form, oscillator_energy)
from .ensemble import EnsembleConfig, FieldSample, HalfNormal, sample_arrays
from .exceptions import ConfigurationError
from .hilbert import decompose_inner_product
from .kernel import (analytic_free_kernel, ensemble_kernel, harmonic_kernel,
                     lattice_path_integral)
from .statistics import (GaussianLaw, action_probability, energy_probability,
                         interval_probability, property_suite, velocity_probability,
                         velocity_report)
from .wave import (WaveField, build_geometric_wavefunction, continuity_residual, evolve,
                   evolve_schrodinger, free_packet_width, gaussian_packet,
                   hamilton_jacobi_residual, madelung_decompose, packet_width,
                   quantum_potential, time_derivatives)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    measured: dict
    thresholds: dict
    runtime_s: float = field(default=0.0, compare=False)
    runtime_budget_s: float = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.criterion} {self.name}: {parts} ({self.runtime_s:.2f}s)"

    def to_dict(self, timing=True):
        out = {"criterion": self.criterion, "name": self.name, "passed": self.passed,
               "measured": self.measured, "thresholds": self.thresholds}
        if timing:
            out["runtime_s"] = self.runtime_s
            out["runtime_budget_s"] = self.runtime_budget_s
        return out


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _params(params, defaults, key):
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown parameters {sorted(unknown)}",
                                 f"{key}.{sorted(unknown)[0]}")
    return {**defaults, **params}


def _fit_orders(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def check_decomposition(seed, params=None, n_jobs=1):
    p = _params(params, {"pairs": 1000, "min_dim": 2, "max_dim": 16, "tol": 1e-12},
                "decomposition")
    pairs = p["pairs"]
    dims = p["min_dim"] + np.floor(
        rng.uniform(seed, rng.stream_id("check/decompose/dim"), np.arange(pairs))
        * (p["max_dim"] - p["min_dim"] + 1)).astype(int)
    recon = sym = antisym = 0.0
    streams = [rng.stream_id(f"check/decompose/{name}") for name in ("u1", "v1", "u2", "v2")]
    for n, d in enumerate(dims):
        idx = n * 64 + np.arange(d)
        u1, v1, u2, v2 = (rng.standard_normal(seed, s, idx) for s in streams)
        psi1, psi2 = u1 + 1j * v1, u2 + 1j * v2
        psi1 /= np.linalg.norm(psi1)
        psi2 /= np.linalg.norm(psi2)
        fwd = decompose_inner_product(psi1, psi2)
        bwd = decompose_inner_product(psi2, psi1)
        direct = complex(np.sum(np.conj(psi1) * psi2))
        recon = max(recon, abs(fwd.reconstruct() - direct))
        sym = max(sym, abs(fwd.riemannian - bwd.riemannian))
        antisym = max(antisym, abs(fwd.symplectic + bwd.symplectic))
    tol = p["tol"]
    return CheckResult(1, "inner_product_decomposition",
                       recon < tol and sym < tol and antisym < tol,
                       {"max_reconstruction_error": recon, "max_symmetry_error": sym,
                        "max_antisymmetry_error": antisym},
                       {"tol": tol}, runtime_budget_s=1.0)


def check_deviation(seed, params=None, n_jobs=1):
    p = _params(params, {"omega": 2 * math.pi, "ell0": 1.0, "v0": 0.5, "periods": 10,
                         "dt_divisor": 1000, "convergence_divisors": [40, 80, 160, 320],
                         "dt_scale": 1.0, "rel_tol": 1e-6, "order": 4.0, "order_tol": 0.2,
                         "energy_tol": 1e-6}, "deviation")
    omega, period = p["omega"], 2 * math.pi / p["omega"]
    sample = FieldSample(1, omega ** 2, omega)
    initial = DeviationState([0.0, p["ell0"], 0.0, 0.0], [0.0, p["v0"], 0.0, 0.0])
    velocity = [1.0, 0.0, 0.0, 0.0]
    t_span = p["periods"] * period

    def run(divisor):
        traj = integrate_deviation(sample, initial, velocity, t_span,
                                   period / divisor * p["dt_scale"])
        exact = oscillator_closed_form(p["ell0"], p["v0"], omega, traj.tau)
        err = float(np.max(np.abs(traj.ell[:, 1] - exact)) / np.max(np.abs(exact)))
        return traj, err

    traj, rel_err = run(p["dt_divisor"])
    energy = oscillator_energy(traj.ell[:, 1], traj.ell_rate[:, 1], omega)
    drift = float(np.max(np.abs(energy - energy[0])) / energy[0])
    errors = [run(d)[1] for d in p["convergence_divisors"]]
    orders = _fit_orders(errors)
    orders_ok = all(abs(o - p["order"]) <= p["order_tol"] for o in orders)
    return CheckResult(2, "deviation_integrator",
                       rel_err < p["rel_tol"] and orders_ok and drift < p["energy_tol"],
                       {"relative_error": rel_err, "convergence_orders": orders,
                        "energy_drift": drift},
                       {"rel_tol": p["rel_tol"], "order": p["order"], "order_tol": p["order_tol"],
                        "energy_tol": p["energy_tol"]}, runtime_budget_s=10.0)


def check_exp_residual(seed, params=None, n_jobs=1):
    p = _params(params, {"samples": 100, "tol": 1e-12, "scale": 1.0, "wave_scale": 1.0},
                "exp_residual")
    config = EnsembleConfig(p["samples"], HalfNormal(p["scale"]), seed=seed,
                            wave_scale=p["wave_scale"])
    arrays = sample_arrays(config)
    idx = np.arange(p["samples"])
    xs = np.column_stack([rng.uniform(seed, rng.stream_id(f"check/exp/x{a}"), idx) * 2 - 1
                          for a in range(4)])
    ts = rng.uniform(seed, rng.stream_id("check/exp/t"), idx) * 10
    worst = 0.0
    for n in range(p["samples"]):
        sample = FieldSample(int(arrays["j"][n]), float(arrays["R1010"][n]),
                             float(arrays["omega"][n]), tuple(arrays["k"][n]))
        worst = max(worst, exp_solution_residual(sample, xs[n], ts[n]))
    return CheckResult(3, "exponential_solution_residual", worst < p["tol"],
                       {"max_residual": worst}, {"tol": p["tol"]}, runtime_budget_s=1.0)


def nyquist_points(m, hbar, T, slices_N, x_min, x_max):
    """Smallest grid size that passes the lattice integrator's phase-gradient check."""
    width = x_max - x_min
    return math.ceil(m * width ** 2 * slices_N / (hbar * T * math.pi)) + 2


def check_kernel_oracles(seed, params=None, n_jobs=1):
    p = _params(params, {"m": 1.0, "hbar": 1.0, "T": 1.0, "xa": 0.0, "xb": 0.5, "slices_N": 64,
                         "x_min": -12.0, "x_max": 12.0, "points": None, "omega": 1.0,
                         "rel_tol": 0.02, "single_slice_tol": 1e-8}, "kernel_oracles")
    m, hbar, T, xa, xb = p["m"], p["hbar"], p["T"], p["xa"], p["xb"]
    points = p["points"] or nyquist_points(m, hbar, T, p["slices_N"], p["x_min"], p["x_max"])
    grid = {"x_min": p["x_min"], "x_max": p["x_max"], "points": points}
    free_exact = analytic_free_kernel(m, T, xa, xb, hbar)
    free_lat = lattice_path_integral(None, m, hbar, T, xa, xb, p["slices_N"], grid)
    free_err = abs(free_lat - free_exact) / abs(free_exact)
    omega = p["omega"]
    ho_exact = harmonic_kernel(m, omega, T, xa, xb, hbar)
    ho_lat = lattice_path_integral(lambda x: 0.5 * m * omega ** 2 * x ** 2, m, hbar, T, xa, xb,
                                   p["slices_N"], grid)
    ho_err = abs(ho_lat - ho_exact) / abs(ho_exact)
    single = lattice_path_integral(None, m, hbar, T, xa, xb, 1, grid)
    single_err = abs(single - free_exact) / abs(free_exact)
    return CheckResult(4, "kernel_oracles",
                       free_err < p["rel_tol"] and ho_err < p["rel_tol"]
                       and single_err < p["single_slice_tol"],
                       {"free_rel_error": free_err, "harmonic_rel_error": ho_err,
                        "single_slice_rel_error": single_err, "grid_points": points},
                       {"rel_tol": p["rel_tol"], "single_slice_tol": p["single_slice_tol"]},
                       runtime_budget_s=60.0)


def check_monte_carlo_scaling(seed, params=None, n_jobs=1):
    p = _params(params, {"sizes": [100, 1000, 10000, 100000], "t_span": 3.0, "scale": 1.0,
                         "slope": -0.5, "slope_tol": 0.1}, "monte_carlo")
    errors = [ensemble_kernel(EnsembleConfig(J, HalfNormal(p["scale"]), seed=seed),
                              p["t_span"], n_jobs=n_jobs).std_error for J in p["sizes"]]
    slope = float(np.polyfit(np.log10(p["sizes"]), np.log10(errors), 1)[0])
    return CheckResult(5, "monte_carlo_scaling", abs(slope - p["slope"]) <= p["slope_tol"],
                       {"slope": slope, "std_errors": errors},
                       {"slope": p["slope"], "slope_tol": p["slope_tol"]}, runtime_budget_s=30.0)


def _stable_dt(dx, m, S0, fraction=0.4):
    # fraction of the kinetic step bound (0.5)
    return fraction * 0.5 * 2.0 * m / (2.0 * S0 * (math.pi / dx) ** 2)


def check_wave_solver(seed, params=None, n_jobs=1):
    p = _params(params, {"points": 512, "steps": 10000, "norm_tol": 1e-10, "width_tol": 0.01,
                         "width_points": 600, "width_length": 60.0, "sigma0": 1.0,
                         "mass_m": 1.0, "S0": 0.5}, "wave")
    m, S0 = p["mass_m"], p["S0"]
    # norm drift on a periodic grid
    n = p["points"]
    dx = 20.0 / n
    wave = WaveField(gaussian_packet(-10.0 + dx * np.arange(n), 0.0, 1.0, 2.0), dx, m, S0,
                     x0=-10.0)
    norms = [wave.norm()]
    evolve(wave, _stable_dt(dx, m, S0), p["steps"], callback=lambda s, w: norms.append(w.norm()))
    norm_drift = float(np.max(np.abs(np.diff(norms))))

    # spreading of a free packet through one width doubling
    n = p["width_points"]
    dx = p["width_length"] / n
    x0 = -0.5 * p["width_length"]
    sigma0 = p["sigma0"]
    packet = WaveField(gaussian_packet(x0 + dx * np.arange(n), 0.0, sigma0), dx, m, S0, x0=x0)
    t_double = math.sqrt(3.0) * 2.0 * m * sigma0 ** 2 / (2.0 * S0)
    checkpoints = 8
    steps = math.ceil(t_double / checkpoints / _stable_dt(dx, m, S0))
    dt = t_double / checkpoints / steps
    width_err = 0.0
    state = packet
    for _ in range(checkpoints):
        state = evolve(state, dt, steps)
        expected = free_packet_width(sigma0, state.time, m, S0)
        width_err = max(width_err, abs(packet_width(state) - expected) / expected)

    # analogue with 2 S0 = hbar against the standard equation
    hbar = 2.0 * S0
    analogue = evolve(packet, dt, steps).amplitudes
    reference = evolve_schrodinger(packet.amplitudes, dx, m, hbar, dt, steps)
    identical = bool(np.array_equal(analogue, reference))
    return CheckResult(6, "wave_solver",
                       norm_drift <= p["norm_tol"] and width_err < p["width_tol"] and identical,
                       {"max_norm_drift_per_step": norm_drift, "max_width_rel_error": width_err,
                        "final_width_ratio": packet_width(state) / sigma0,
                        "reference_bitwise_identical": identical},
                       {"norm_tol": p["norm_tol"], "width_tol": p["width_tol"]},
                       runtime_budget_s=60.0)


def madelung_residuals(points, *, S0=0.5, m=1.0, k=5.0, t_end=0.2):
    """Evolve a periodic WKB packet and return max residual norms on ``points`` grid.

    Returns ``(max |continuity|, max |HJ + Q|, max |Q|)``.
    """
    length = 2 * math.pi
    dx = length / points
    x = dx * np.arange(points)
    wave = build_geometric_wavefunction(1.0 + 0.5 * np.cos(x), 2 * S0 * k * x, S0, dx=dx,
                                        mass_m=m)
    dt = _stable_dt(dx, m, S0, fraction=0.2)
    steps = math.ceil(t_end / dt)
    wave = evolve(wave, t_end / steps, steps)
    fields = madelung_decompose(wave)
    da2_dt, dS_dt = time_derivatives(wave)
    cont = continuity_residual(fields.amplitude_a ** 2, fields.action_S, m, da2_dt, dx=dx)
    hj = hamilton_jacobi_residual(fields.action_S, wave.potential_U, m, dS_dt, dx=dx)
    Q = quantum_potential(fields.amplitude_a, m, S0, dx=dx)
    return float(np.max(np.abs(cont))), float(np.max(np.abs(hj + Q))), float(np.max(np.abs(Q)))


def check_madelung(seed, params=None, n_jobs=1):
    p = _params(params, {"grids": [64, 128, 256], "order": 2.0, "order_tol": 0.3},
                "madelung")
    rows = [madelung_residuals(n) for n in p["grids"]]
    cont_orders = _fit_orders([r[0] for r in rows])
    hj_orders = _fit_orders([r[1] for r in rows])
    ok = all(abs(o - p["order"]) <= p["order_tol"] for o in cont_orders + hj_orders)
    return CheckResult(7, "madelung_residuals", ok,
                       {"continuity_orders": cont_orders, "hj_minus_quantum_potential_orders":
                        hj_orders, "continuity_max": [r[0] for r in rows],
                        "hj_plus_Q_max": [r[1] for r in rows], "quantum_potential_max": rows[-1][2]},
                       {"order": p["order"], "order_tol": p["order_tol"]})


def check_statistics(seed, params=None, n_jobs=1):
    p = _params(params, {"seeds": 20, "samples": 100000, "min_pass_fraction": 0.9,
                         "tol": 1e-12}, "statistics")
    root = 1.0 / math.sqrt(2 * math.pi)
    interval = GaussianLaw(1.0, "interval")
    velocity = GaussianLaw(1.0, "velocity")
    cases = [
        (interval_probability(0.0, interval), root),
        (interval_probability(math.sqrt(2.0), interval), math.exp(-1) * root),
        (velocity_probability(0.0, velocity), root),
        (velocity_probability(1.0, velocity), math.exp(-0.5) * root),
        (action_probability(0.0, 1.0, 1.0), root),
        (action_probability(1.0, 1.0, 1.0), math.exp(-1) * root),
        (energy_probability(2.0, 1.0), math.exp(-1) * root),
    ]
    point_err = max(abs(a - b) for a, b in cases)
    props = property_suite(interval)
    props_ok = all(c.holds for c in props if c.asserted)
    passes = 0
    stream = rng.stream_id("check/statistics/velocity")
    idx = np.arange(p["samples"])
    for s in range(p["seeds"]):
        report = velocity_report(rng.standard_normal(seed + s, stream, idx))
        passes += report.passes_95
    fraction = passes / p["seeds"]
    return CheckResult(8, "statistics",
                       point_err < p["tol"] and props_ok and fraction >= p["min_pass_fraction"],
                       {"max_point_error": point_err, "properties_pass": props_ok,
                        "ks_pass_fraction": fraction},
                       {"tol": p["tol"], "min_pass_fraction": p["min_pass_fraction"]},
                       runtime_budget_s=20.0)


CRITERIA = {
    1: ("decomposition", check_decomposition),
    2: ("deviation", check_deviation),
    3: ("exp_residual", check_exp_residual),
    4: ("kernel_oracles", check_kernel_oracles),
    5: ("monte_carlo", check_monte_carlo_scaling),
    6: ("wave", check_wave_solver),
    7: ("madelung", check_madelung),
    8: ("statistics", check_statistics),
}
PARAM_KEYS = {key: num for num, (key, _) in CRITERIA.items()}


def _run_one(args):
    number, seed, params, n_jobs = args
    func = CRITERIA[number][1]
    start = time.perf_counter()
    result = func(seed, params, n_jobs)
    result.runtime_s = time.perf_counter() - start
    return result


def resolve_criteria(selection):
    if selection in (None, "all"):
        return sorted(CRITERIA)
    chosen = []
    for item in selection:
        if isinstance(item, str) and item in PARAM_KEYS:
            item = PARAM_KEYS[item]
        if item not in CRITERIA:
            raise ConfigurationError(f"unknown criterion {item!r}", "check.criteria")
        chosen.append(item)
    return chosen


def run_checks(seed=0, criteria="all", overrides=None, n_jobs=1):
    """Run the selected criteria; results come back in criterion order.

    ``overrides`` maps a criterion key (e.g. ``"deviation"``) to parameter
    overrides. With ``n_jobs > 1`` criteria run in separate processes.
    """
    numbers = resolve_criteria(criteria)
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(PARAM_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown override block {sorted(unknown)[0]!r}",
                                 f"check.overrides.{sorted(unknown)[0]}")
    jobs = [(n, seed, overrides.get(CRITERIA[n][0]), n_jobs) for n in numbers]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(jobs))) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]
