"""Command-line entry point: ``geopath <experiment> [--config FILE] [--seed N] [--out DIR]``.

A config is a JSON object::

    {"schema_version": 1, "experiment": "kernel", "seed": 42,
     "constants": {"c": 1.0, "hbar": 1.0},
     "kernel": {...experiment block...},
     "output_path": "results"}

Unknown keys are rejected. Every run writes ``<out>/<experiment>.json``
holding the resolved config, outputs, diagnostics and wall time, plus CSV
side files where the experiment has them.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 check-mode oracle mismatch.
"""

import argparse
import copy
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, rng
from .checks import PARAM_KEYS, run_checks
from .deviation import DeviationState, integrate_deviation, write_trajectory_csv
from .ensemble import EnsembleConfig, FieldSample, ensemble_to_records, sample_ensemble
from .exceptions import (ConfigurationError, DomainError, GeopathError,
                         GridResolutionError, RejectedInputError)
from .hilbert import ComplexState, bloch_project, decompose_inner_product, fubini_study_distance
from .kernel import (analytic_free_kernel, ensemble_kernel, harmonic_kernel,
                     lattice_path_integral, write_kernel_sweep_csv)
from .statistics import (GaussianLaw, IntervalMetric, action_probability, empirical_velocity_check,
                         energy_probability, interval_probability, property_suite,
                         velocity_probability, velocity_report)
from .wave import (WaveField, gaussian_packet, madelung_decompose, packet_width,
                   write_snapshot_csv)
from .wave import evolve as evolve_wave

SCHEMA_VERSION = 1
EXPERIMENTS = ("decompose", "ensemble", "deviation", "kernel", "stats", "evolve", "check")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4

_ENSEMBLE_DEFAULTS = {"count_J": 1000, "distribution": {"kind": "half_normal", "scale": 1.0},
                      "stochastic_f": 0.0, "wave_scale": 0.0}

BLOCK_DEFAULTS = {
    "decompose": {"psi1": [[1.0, 0.0], [0.0, 0.0]], "psi2": [[0.0, 0.0], [1.0, 0.0]]},
    "ensemble": dict(_ENSEMBLE_DEFAULTS),
    "deviation": {"curvature_R1010": 1.0, "full_curvature": None, "stochastic_f": 0.0,
                  "ell": [0.0, 1.0, 0.0, 0.0], "rate": [0.0, 0.0, 0.0, 0.0],
                  "worldline_velocity": None, "t_span": 10.0, "dt": 0.01,
                  "forcing_direction": [0.0, 1.0, 0.0, 0.0]},
    "kernel": {"ensemble": dict(_ENSEMBLE_DEFAULTS), "t_span": [1.0], "normalization": "mean",
               "amplitude_C": 1.0, "phase_scale": "hbar", "n_jobs": 1, "oracle": None},
    "stats": {"sigma": 1.0, "printed": True, "delta_ell": [0.0, 1.0, 2.0],
              "delta_u": [0.0, 1.0], "S": [0.0, 1.0], "S0": 1.0, "W": [0.0, 2.0],
              "metric": None, "velocity_source": "synthetic", "velocity_samples": 100000,
              "ensemble": dict(_ENSEMBLE_DEFAULTS, count_J=200), "t_span": 5.0, "dt": 0.01},
    "evolve": {"points": 512, "x_min": -10.0, "x_max": 10.0, "mass_m": 1.0,
               "action_scale_S0": None, "dt": 1e-4, "steps": 100, "boundary": "periodic",
               "initial": {"kind": "gaussian", "x0": 0.0, "sigma0": 1.0, "k": 0.0},
               "potential": {"kind": "free"}, "snapshot_stride": 1},
    "check": {"criteria": "all", "n_jobs": 1, "overrides": {}},
}
ORACLE_DEFAULTS = {"m": 1.0, "T": 1.0, "xa": 0.0, "xb": 0.5, "slices_N": 64,
                   "grid": {"x_min": -12.0, "x_max": 12.0, "points": 11737},
                   "potential": {"kind": "free"}}
TOP_LEVEL = {"schema_version", "experiment", "seed", "constants", "output_path"}


def default_config(experiment):
    return {"schema_version": SCHEMA_VERSION, "experiment": experiment, "seed": 0,
            "constants": {"c": 1.0, "hbar": 1.0}, experiment: {}, "output_path": "."}


def _merge_block(block, defaults, path):
    if not isinstance(block, dict):
        raise ConfigurationError(f"{path} must be an object", path)
    unknown = set(block) - set(defaults)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown key {key!r}", f"{path}.{key}")
    return {**copy.deepcopy(defaults), **block}


def resolve_config(raw, experiment, seed=None, out=None):
    """Validate ``raw`` and fill defaults; returns a fully resolved config dict."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object", "$")
    unknown = set(raw) - TOP_LEVEL - {experiment}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown key {key!r}", key)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version!r}", "schema_version")
    declared = raw.get("experiment", experiment)
    if declared != experiment:
        raise ConfigurationError(f"config is for {declared!r}, not {experiment!r}", "experiment")
    if experiment not in raw:
        raise ConfigurationError(f"missing {experiment!r} block", experiment)
    config = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "seed": raw.get("seed", 0) if seed is None else seed,
        "constants": _merge_block(raw.get("constants", {}), {"c": 1.0, "hbar": 1.0}, "constants"),
        experiment: _merge_block(raw[experiment], BLOCK_DEFAULTS[experiment], experiment),
        "output_path": raw.get("output_path", ".") if out is None else out,
    }
    try:
        config["seed"] = rng.check_seed(config["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), "seed") from None
    for name, value in config["constants"].items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ConfigurationError(f"constant {name} must be a positive number",
                                     f"constants.{name}")
    return config


def _ensemble_config(block, seed, c, path):
    block = _merge_block(block, _ENSEMBLE_DEFAULTS, path)
    return EnsembleConfig.from_dict({**block, "seed": seed, "light_speed_c": c})


def _complex_list(values, path):
    try:
        return np.array([complex(re, im) for re, im in values])
    except (TypeError, ValueError):
        raise ConfigurationError("expected a list of [re, im] pairs", path) from None


def _potential(spec, m, path):
    spec = dict(spec or {"kind": "free"})
    kind = spec.pop("kind", None)
    if kind == "free" and not spec:
        return None, None
    if kind == "harmonic" and set(spec) == {"omega"}:
        omega = float(spec["omega"])
        return (lambda x: 0.5 * m * omega ** 2 * np.asarray(x) ** 2), omega
    raise ConfigurationError("potential must be {'kind': 'free'} or "
                             "{'kind': 'harmonic', 'omega': w}", path)


def run_decompose(cfg, out_dir):
    block = cfg["decompose"]
    psi1 = ComplexState(_complex_list(block["psi1"], "decompose.psi1"))
    psi2 = ComplexState(_complex_list(block["psi2"], "decompose.psi2"))
    parts = decompose_inner_product(psi1, psi2)
    outputs = {"riemannian_G": parts.riemannian, "symplectic_Omega": parts.symplectic,
               "inner_product": parts.reconstruct(),
               "fubini_study_distance": fubini_study_distance(psi1, psi2)}
    if psi1.dimension == 2:
        outputs["bloch"] = [bloch_project(psi1.normalize()).tolist(),
                            bloch_project(psi2.normalize()).tolist()]
    return outputs, {}


def run_ensemble(cfg, out_dir):
    config = _ensemble_config(cfg["ensemble"], cfg["seed"], cfg["constants"]["c"], "ensemble")
    samples = sample_ensemble(config)
    records = ensemble_to_records(samples)
    with open(os.path.join(out_dir, "ensemble_fields.json"), "w", encoding="utf-8") as fh:
        json.dump(records, fh)
    R = np.array([s.curvature_R1010 for s in samples])
    omega = np.array([s.omega for s in samples])
    outputs = {"count_J": len(samples), "mean_R1010": float(R.mean()),
               "var_R1010": float(R.var(ddof=1)) if R.size > 1 else 0.0,
               "expected_mean_R1010": config.distribution.mean(),
               "expected_var_R1010": config.distribution.variance(),
               "mean_omega": float(omega.mean()), "fields_file": "ensemble_fields.json"}
    return outputs, {}


def run_deviation(cfg, out_dir):
    block = cfg["deviation"]
    c, hbar = cfg["constants"]["c"], cfg["constants"]["hbar"]
    full = None
    if block["full_curvature"] is not None:
        try:
            full = {tuple(int(i) for i in entry["index"]): float(entry["value"])
                    for entry in block["full_curvature"]}
        except (KeyError, TypeError, ValueError):
            raise ConfigurationError("full_curvature entries need 'index' (4 ints) and 'value'",
                                     "deviation.full_curvature") from None
    R = float(block["curvature_R1010"])
    omega = c * math.sqrt(R) if R >= 0 else None
    sample = FieldSample(1, R, omega, (0.0 if omega is None else omega / c, 0.0, 0.0, 0.0),
                         float(block["stochastic_f"]), full)
    velocity = block["worldline_velocity"] or [c, 0.0, 0.0, 0.0]
    traj = integrate_deviation(sample, DeviationState(block["ell"], block["rate"]), velocity,
                               block["t_span"], block["dt"], hbar=hbar, c=c,
                               forcing_direction=block["forcing_direction"])
    with open(os.path.join(out_dir, "trajectory.csv"), "w", newline="", encoding="utf-8") as fh:
        write_trajectory_csv(traj, fh)
    outputs = {"steps": len(traj.tau) - 1, "dt_used": traj.dt, "omega": traj.omega,
               "action_S": traj.action_S, "phase_Phi": traj.phase_Phi,
               "final_ell": traj.ell[-1].tolist(), "final_rate": traj.ell_rate[-1].tolist(),
               "trajectory_file": "trajectory.csv"}
    return outputs, {}


def run_kernel(cfg, out_dir):
    block = cfg["kernel"]
    hbar = cfg["constants"]["hbar"]
    config = _ensemble_config(block["ensemble"], cfg["seed"], cfg["constants"]["c"],
                              "kernel.ensemble")
    t_spans = block["t_span"] if isinstance(block["t_span"], list) else [block["t_span"]]
    rows = []
    for t in t_spans:
        est = ensemble_kernel(config, t, hbar, block["normalization"],
                              amplitude_C=block["amplitude_C"], phase_scale=block["phase_scale"],
                              n_jobs=block["n_jobs"])
        rows.append((t, est))
    with open(os.path.join(out_dir, "kernel_sweep.csv"), "w", newline="", encoding="utf-8") as fh:
        write_kernel_sweep_csv(rows, fh)
    outputs = {"kernels": [{"t_span": t, **est.to_dict()} for t, est in rows],
               "phase_scale": block["phase_scale"], "sweep_file": "kernel_sweep.csv"}
    diagnostics = {"endpoints_note": "field phases do not depend on the kernel endpoints"}
    if block["oracle"] is not None:
        oracle = _merge_block(block["oracle"], ORACLE_DEFAULTS, "kernel.oracle")
        U, omega = _potential(oracle["potential"], oracle["m"], "kernel.oracle.potential")
        args = (oracle["m"], oracle["T"], oracle["xa"], oracle["xb"])
        lattice = lattice_path_integral(U, oracle["m"], hbar, oracle["T"], oracle["xa"],
                                        oracle["xb"], oracle["slices_N"], oracle["grid"])
        exact = analytic_free_kernel(*args, hbar) if omega is None else \
            harmonic_kernel(oracle["m"], omega, oracle["T"], oracle["xa"], oracle["xb"], hbar)
        outputs["oracle"] = {"lattice": lattice, "analytic": exact,
                             "relative_error": abs(lattice - exact) / abs(exact)}
    return outputs, diagnostics


def run_stats(cfg, out_dir):
    block = cfg["stats"]
    sigma = block["sigma"]
    interval = GaussianLaw(sigma, "interval")
    velocity = GaussianLaw(sigma, "velocity")
    metric = IntervalMetric(block["metric"]) if block["metric"] is not None else IntervalMetric()
    outputs = {
        "law": {"sigma": sigma, "printed": block["printed"], "S0": block["S0"]},
        "interval": [interval_probability(d, interval, block["printed"]) for d in block["delta_ell"]],
        "velocity": [velocity_probability(d, velocity) for d in block["delta_u"]],
        "action": [action_probability(s, block["S0"], sigma) for s in block["S"]],
        "energy": [energy_probability(w, sigma) for w in block["W"]],
        "properties": [p.to_dict() for p in property_suite(interval, metric, block["printed"])],
    }
    source = block["velocity_source"]
    if source == "synthetic":
        idx = np.arange(block["velocity_samples"])
        v = sigma * rng.standard_normal(cfg["seed"], rng.stream_id("stats/velocity"), idx)
        report = velocity_report(v)
    elif source == "ensemble":
        c = cfg["constants"]["c"]
        config = _ensemble_config(block["ensemble"], cfg["seed"], c, "stats.ensemble")
        initial = DeviationState([0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
        trajectories = [integrate_deviation(s, initial, [c, 0.0, 0.0, 0.0], block["t_span"],
                                            block["dt"], hbar=cfg["constants"]["hbar"], c=c)
                        for s in sample_ensemble(config)]
        report = empirical_velocity_check(trajectories)
    else:
        raise ConfigurationError("velocity_source must be 'synthetic' or 'ensemble'",
                                 "stats.velocity_source")
    outputs["velocity_report"] = report.to_dict()
    return outputs, {}


def run_evolve(cfg, out_dir):
    block = cfg["evolve"]
    S0 = block["action_scale_S0"]
    source = "configured"
    if S0 is None:
        S0, source = 0.5 * cfg["constants"]["hbar"], "hbar/2"
    n = block["points"]
    dx = (block["x_max"] - block["x_min"]) / n
    x = block["x_min"] + dx * np.arange(n)
    init = dict(block["initial"])
    kind = init.pop("kind", None)
    if kind == "gaussian":
        init = _merge_block(init, {"x0": 0.0, "sigma0": 1.0, "k": 0.0}, "evolve.initial")
        psi = gaussian_packet(x, init["x0"], init["sigma0"], init["k"])
    elif kind == "plane_wave":
        init = _merge_block(init, {"k": 1.0}, "evolve.initial")
        psi = np.exp(1j * init["k"] * x) / math.sqrt(n * dx)
    else:
        raise ConfigurationError("initial.kind must be 'gaussian' or 'plane_wave'",
                                 "evolve.initial.kind")
    U, _ = _potential(block["potential"], block["mass_m"], "evolve.potential")
    wave = WaveField(psi, dx, block["mass_m"], S0, None if U is None else U(x), 0.0,
                     block["x_min"], block["boundary"])
    norms = [wave.norm()]
    final = evolve_wave(wave, block["dt"], block["steps"],
                        callback=lambda s, w: norms.append(w.norm()))
    with open(os.path.join(out_dir, "snapshot_initial.csv"), "w", newline="",
              encoding="utf-8") as fh:
        write_snapshot_csv(wave, fh, block["snapshot_stride"])
    with open(os.path.join(out_dir, "snapshot_final.csv"), "w", newline="",
              encoding="utf-8") as fh:
        write_snapshot_csv(final, fh, block["snapshot_stride"])
    outputs = {"action_scale_S0": S0, "action_scale_S0_source": source,
               "hbar_eff": final.hbar_eff, "time": final.time,
               "norm_initial": norms[0], "norm_final": norms[-1], "width_final": packet_width(final),
               "psi_final_re": final.amplitudes.real.tolist(),
               "psi_final_im": final.amplitudes.imag.tolist(),
               "snapshot_files": ["snapshot_initial.csv", "snapshot_final.csv"]}
    diagnostics = {"max_norm_drift_per_step": float(np.max(np.abs(np.diff(norms))))
                   if len(norms) > 1 else 0.0}
    try:
        madelung_decompose(final)
        diagnostics["has_node"] = False
    except GeopathError:
        diagnostics["has_node"] = True
    return outputs, diagnostics


def run_check(cfg, out_dir):
    block = cfg["check"]
    overrides = block["overrides"]
    if not isinstance(overrides, dict):
        raise ConfigurationError("overrides must be an object", "check.overrides")
    for key in overrides:
        if key not in PARAM_KEYS:
            raise ConfigurationError(f"unknown override block {key!r}", f"check.overrides.{key}")
    results = run_checks(cfg["seed"], block["criteria"], overrides, int(block["n_jobs"]))
    outputs = {"results": [r.to_dict(timing=False) for r in results],
               "all_passed": all(r.passed for r in results)}
    diagnostics = {"runtime_s": {str(r.criterion): r.runtime_s for r in results},
                   "lines": [r.line() for r in results]}
    return outputs, diagnostics


RUNNERS = {"decompose": run_decompose, "ensemble": run_ensemble, "deviation": run_deviation,
           "kernel": run_kernel, "stats": run_stats, "evolve": run_evolve, "check": run_check}


def to_jsonable(obj):
    """Convert numpy scalars, complex numbers and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def dump_record(record):
    return json.dumps(to_jsonable(record), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run(config, out_dir=None):
    """Execute a resolved config; returns ``(exit_code, record)`` and writes the record."""
    experiment = config["experiment"]
    out_dir = out_dir or config["output_path"]
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    outputs, diagnostics = RUNNERS[experiment](config, out_dir)
    record = {"config": config, "outputs": outputs, "diagnostics": diagnostics,
              "wall_time": time.perf_counter() - start, "version": __version__}
    with open(os.path.join(out_dir, f"{experiment}.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_record(record))
    code = EXIT_OK
    if experiment == "check" and not outputs["all_passed"]:
        code = EXIT_MISMATCH
    return code, record


def _error_record(out_dir, experiment, exc, code):
    record = {"error": {"type": type(exc).__name__, "message": str(exc),
                        "key_path": getattr(exc, "key_path", None),
                        "tau": getattr(exc, "tau", None), "exit_code": code}}
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{experiment}.error.json"), "w", encoding="utf-8") as fh:
            fh.write(dump_record(record))
    except OSError:
        pass
    return record


def build_parser():
    parser = argparse.ArgumentParser(prog="geopath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory (overrides output_path)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    experiment = args.experiment
    out_dir = args.out or "."
    try:
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read config: {exc}", "$") from None
        else:
            raw = default_config(experiment)
        config = resolve_config(raw, experiment, args.seed, args.out)
        out_dir = config["output_path"]
        code, record = run(config)
    except (ConfigurationError, RejectedInputError, GridResolutionError, DomainError) as exc:
        code = EXIT_CONFIG
        record = _error_record(out_dir, experiment, exc, code)
    except GeopathError as exc:
        code = EXIT_NUMERIC
        record = _error_record(out_dir, experiment, exc, code)
    if "error" in record:
        err = record["error"]
        where = f" at {err['key_path']}" if err["key_path"] else ""
        print(f"geopath {experiment}: {err['type']}{where}: {err['message']}", file=sys.stderr)
    elif experiment == "check":
        for line in record["diagnostics"]["lines"]:
            print(line)
    else:
        print(os.path.join(out_dir, f"{experiment}.json"))
    return code


if __name__ == "__main__":
    sys.exit(main())
