"""Reproducible ensembles of random background fields.

Each field ``j`` carries a tidal curvature component ``R^1_010 >= 0``, the
oscillation frequency ``omega = c * sqrt(R^1_010)``, a wave covector whose
time component is ``omega / c``, and a constant forcing ``f`` (zero unless
configured). Sample ``j`` is a pure function of ``(seed, j)``.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .exceptions import ConfigurationError, DomainError, RejectedInputError
from .utils.validation import check_int, check_scalar

OMEGA_TOL = 1e-12

_CURVATURE_STREAM = rng.stream_id("ensemble/curvature")
_COVECTOR_STREAMS = tuple(rng.stream_id(f"ensemble/covector/{a}") for a in (1, 2, 3))


@dataclass(frozen=True)
class HalfNormal:
    scale: float = 1.0

    def __post_init__(self):
        check_scalar(self.scale, "half_normal.scale", min_val=0.0, include_min=False,
                     error=ConfigurationError)

    def draw(self, seed, index):
        return self.scale * np.abs(rng.standard_normal(seed, _CURVATURE_STREAM, index))

    def mean(self):
        return self.scale * math.sqrt(2.0 / math.pi)

    def variance(self):
        return self.scale ** 2 * (1.0 - 2.0 / math.pi)


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        for name in ("lo", "hi"):
            check_scalar(getattr(self, name), f"log_uniform.{name}", min_val=0.0,
                         include_min=False, error=ConfigurationError)
        if not self.lo < self.hi:
            raise ConfigurationError(f"log_uniform requires lo < hi, got {self.lo}, {self.hi}",
                                     "distribution")

    def draw(self, seed, index):
        u = rng.uniform(seed, _CURVATURE_STREAM, index)
        log_lo, log_hi = math.log(self.lo), math.log(self.hi)
        return np.exp(log_lo + u * (log_hi - log_lo))

    def mean(self):
        return (self.hi - self.lo) / math.log(self.hi / self.lo)

    def variance(self):
        second = (self.hi ** 2 - self.lo ** 2) / (2.0 * math.log(self.hi / self.lo))
        return second - self.mean() ** 2


@dataclass(frozen=True)
class Delta:
    # zero is allowed: the all-flat ensemble is the canonical degenerate case
    value: float

    def __post_init__(self):
        check_scalar(self.value, "delta.value", min_val=0.0, error=ConfigurationError)

    def draw(self, seed, index):
        return np.full(np.atleast_1d(index).shape, float(self.value))

    def mean(self):
        return float(self.value)

    def variance(self):
        return 0.0


DISTRIBUTIONS = {"half_normal": HalfNormal, "log_uniform": LogUniform, "delta": Delta}


def distribution_from_dict(spec):
    """Build a distribution from ``{"kind": ..., **params}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("distribution needs a 'kind' entry", "distribution")
    params = dict(spec)
    kind = params.pop("kind")
    try:
        cls = DISTRIBUTIONS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown distribution {kind!r}; expected one of "
                                 f"{sorted(DISTRIBUTIONS)}", "distribution.kind") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind}: {exc}", "distribution") from None


def distribution_to_dict(dist):
    kind = {cls: name for name, cls in DISTRIBUTIONS.items()}[type(dist)]
    return {"kind": kind, **dist.__dict__}


@dataclass(frozen=True)
class FieldSample:
    """One random background field.

    ``full_curvature`` maps index tuples ``(i, k, m, n)`` to ``R^i_{kmn}``;
    when omitted only ``R^1_010`` is populated.
    """

    index_j: int
    curvature_R1010: float
    omega: float = None
    wave_covector_k: tuple = (0.0, 0.0, 0.0, 0.0)
    stochastic_f: float = 0.0
    full_curvature: dict = field(default=None, compare=False)

    def __post_init__(self):
        if self.omega is not None and self.curvature_R1010 < 0:
            raise DomainError(f"field {self.index_j}: omega requires R1010 >= 0, "
                              f"got {self.curvature_R1010}")
        if len(self.wave_covector_k) != 4:
            raise RejectedInputError("wave_covector_k must have 4 components")

    def riemann(self):
        """Curvature components as a dict, defaulting to ``{(1,0,1,0): R1010}``."""
        if self.full_curvature is not None:
            return dict(self.full_curvature)
        return {(1, 0, 1, 0): self.curvature_R1010}

    def check_consistency(self, c):
        if self.omega is None:
            return
        expected = c * math.sqrt(self.curvature_R1010)
        if abs(self.omega - expected) > OMEGA_TOL * max(1.0, abs(expected)):
            raise DomainError(f"field {self.index_j}: omega={self.omega} != c*sqrt(R)={expected}")


@dataclass(frozen=True)
class EnsembleConfig:
    count_J: int
    distribution: object = field(default_factory=HalfNormal)
    seed: int = 0
    light_speed_c: float = 1.0
    stochastic_f: float = 0.0
    # spread of the spatial covector components; zero keeps them unset
    wave_scale: float = 0.0

    def __post_init__(self):
        check_int(self.count_J, "count_J", min_val=1, error=ConfigurationError)
        if not isinstance(self.distribution, tuple(DISTRIBUTIONS.values())):
            raise ConfigurationError(f"unsupported distribution {self.distribution!r}",
                                     "distribution")
        try:
            rng.check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc), "seed") from None
        check_scalar(self.light_speed_c, "light_speed_c", min_val=0.0, include_min=False,
                     error=ConfigurationError)
        check_scalar(self.stochastic_f, "stochastic_f", error=ConfigurationError)
        check_scalar(self.wave_scale, "wave_scale", min_val=0.0, error=ConfigurationError)

    @classmethod
    def from_dict(cls, block):
        block = dict(block)
        if "distribution" in block:
            block["distribution"] = distribution_from_dict(block["distribution"])
        try:
            return cls(**block)
        except TypeError as exc:
            raise ConfigurationError(str(exc), "ensemble") from None

    def to_dict(self):
        return {
            "count_J": self.count_J,
            "distribution": distribution_to_dict(self.distribution),
            "seed": self.seed,
            "light_speed_c": self.light_speed_c,
            "stochastic_f": self.stochastic_f,
            "wave_scale": self.wave_scale,
        }


def frequency_of(sample, c):
    """``omega = c * sqrt(R^1_010)``; negative curvature is a domain error."""
    R = sample.curvature_R1010 if isinstance(sample, FieldSample) else sample
    if R < 0:
        raise DomainError(f"negative curvature R1010={R} gives imaginary frequency")
    return c * math.sqrt(R)


def sample_arrays(config, indices=None):
    """Vectorized draw for ``indices`` (default ``1..J``).

    Returns a dict of arrays ``j, R1010, omega, k (n, 4), f``.
    """
    if indices is None:
        indices = np.arange(1, config.count_J + 1, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.uint64)
    R = config.distribution.draw(config.seed, indices)
    omega = config.light_speed_c * np.sqrt(R)
    k = np.zeros((indices.size, 4))
    k[:, 0] = omega / config.light_speed_c
    if config.wave_scale > 0:
        for a, stream in enumerate(_COVECTOR_STREAMS, start=1):
            k[:, a] = config.wave_scale * rng.standard_normal(config.seed, stream, indices)
    return {"j": indices.astype(np.int64), "R1010": R, "omega": omega, "k": k,
            "f": np.full(indices.size, float(config.stochastic_f))}


def sample_omegas(config, n_jobs=1):
    """Frequencies for ``j = 1..J`` in index order; ``n_jobs`` only affects speed."""
    indices = np.arange(1, config.count_J + 1, dtype=np.uint64)
    if n_jobs <= 1 or indices.size < 2 * n_jobs:
        return sample_arrays(config, indices)["omega"]
    chunks = np.array_split(indices, n_jobs)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(lambda idx: sample_arrays(config, idx)["omega"], chunks))
    return np.concatenate(parts)


def sample_ensemble(config, n_jobs=1):
    """Draw ``config.count_J`` fields as a list of :class:`FieldSample`."""
    indices = np.arange(1, config.count_J + 1, dtype=np.uint64)
    if n_jobs <= 1 or indices.size < 2 * n_jobs:
        parts = [sample_arrays(config, indices)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda idx: sample_arrays(config, idx),
                                  np.array_split(indices, n_jobs)))
    samples = []
    for arrays in parts:
        for j, R, w, k, f in zip(arrays["j"], arrays["R1010"], arrays["omega"],
                                 arrays["k"], arrays["f"]):
            samples.append(FieldSample(int(j), float(R), float(w),
                                       tuple(float(v) for v in k), float(f)))
    return samples


def ensemble_to_records(samples):
    return [{"j": s.index_j, "R1010": s.curvature_R1010, "omega": s.omega,
             "k": list(s.wave_covector_k), "f": s.stochastic_f} for s in samples]


def ensemble_to_json(samples, **dump_kwargs):
    """Serialize to a JSON array of ``{j, R1010, omega, k, f}`` records."""
    return json.dumps(ensemble_to_records(samples), **dump_kwargs)


def ensemble_from_json(text):
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RejectedInputError(f"invalid ensemble JSON: {exc}") from None
    if not isinstance(records, list):
        raise RejectedInputError("ensemble JSON must be an array of field records")
    samples = []
    for n, rec in enumerate(records):
        missing = {"j", "R1010", "omega", "k", "f"} - set(rec)
        if missing:
            raise RejectedInputError(f"record {n} is missing keys {sorted(missing)}")
        samples.append(FieldSample(int(rec["j"]), float(rec["R1010"]),
                                   None if rec["omega"] is None else float(rec["omega"]),
                                   tuple(float(v) for v in rec["k"]), float(rec["f"])))
    return samples
