"""Phase-factor kernels and their path-integral oracles.

Each field contributes ``C * exp(i S_j / scale)`` where ``scale`` is either
``hbar`` or the summed action of the ensemble. The kernel estimate is the
raw sum of the factors or their mean.

Two independent references are provided: closed-form free-particle and
harmonic-oscillator propagators, and a brute-force time-sliced lattice
evaluation of the real-time path integral.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .deviation import total_action
from .ensemble import EnsembleConfig, distribution_from_dict, sample_omegas
from .exceptions import GridResolutionError, RejectedInputError
from .utils.validation import check_int, check_positive, check_scalar

NORMALIZATIONS = ("raw_sum", "mean")
_EIGHTH_TURN = np.exp(-0.25j * np.pi)


@dataclass(frozen=True)
class PhaseFactor:
    field_index_j: int
    amplitude_C: float
    phase: float

    @property
    def value(self):
        return self.amplitude_C * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class KernelEstimate:
    value: complex
    ensemble_J: int
    std_error: float
    normalization: str = "mean"

    def to_dict(self):
        return {"re": self.value.real, "im": self.value.imag, "abs": abs(self.value),
                "ensemble_J": self.ensemble_J, "std_error": self.std_error,
                "normalization": self.normalization}


def phase_factor(S, scale, C=1.0, field_index_j=0):
    """``C * exp(i S / scale)``."""
    scale = check_positive(scale, "scale")
    C = check_scalar(C, "C", min_val=0.0)
    return PhaseFactor(field_index_j, C, float(S) / scale)


def _check_normalization(normalization):
    if normalization not in NORMALIZATIONS:
        raise RejectedInputError(f"normalization must be one of {NORMALIZATIONS}, "
                                 f"got {normalization!r}")


def sum_values(values, normalization="mean"):
    """Kernel estimate from an array of complex phase-factor values."""
    _check_normalization(normalization)
    values = np.asarray(values, dtype=complex)
    J = values.size
    if J == 0:
        raise RejectedInputError("kernel sum needs at least one phase factor")
    total = np.sum(values)
    value = total if normalization == "raw_sum" else total / J
    if J > 1:
        spread = math.sqrt(np.var(values.real, ddof=1) + np.var(values.imag, ddof=1))
        std_error = spread / math.sqrt(J)
    else:
        std_error = 0.0
    return KernelEstimate(complex(value), J, float(std_error), normalization)


def kernel_sum(phases, normalization="mean"):
    """Sum :class:`PhaseFactor` values in list order.

    ``std_error`` is the sample dispersion of the values over ``sqrt(J)``.
    """
    phases = list(phases)
    if not phases:
        raise RejectedInputError("kernel sum needs at least one phase factor")
    return sum_values([p.value for p in phases], normalization)


def analytic_free_kernel(m, T, xa, xb, hbar=1.0):
    """Free-particle propagator ``sqrt(m/(2 pi i hbar T)) exp(i m (xb-xa)^2 / (2 hbar T))``.

    ``sqrt(1/i)`` is taken on the principal branch, ``exp(-i pi/4)``.
    """
    m = check_positive(m, "m")
    T = check_positive(T, "T")
    hbar = check_positive(hbar, "hbar")
    dx = np.asarray(xb, dtype=float) - np.asarray(xa, dtype=float)
    out = math.sqrt(m / (2 * math.pi * hbar * T)) * _EIGHTH_TURN \
        * np.exp(1j * m * dx ** 2 / (2 * hbar * T))
    return complex(out) if out.ndim == 0 else out


def harmonic_kernel(m, omega, T, xa, xb, hbar=1.0):
    """Closed-form propagator for ``U = m omega^2 x^2 / 2`` (Mehler kernel).

    The prefactor picks up ``exp(-i pi/2)`` at every caustic ``omega T = n pi``.
    """
    m = check_positive(m, "m")
    omega = check_positive(omega, "omega")
    T = check_positive(T, "T")
    hbar = check_positive(hbar, "hbar")
    s = math.sin(omega * T)
    if abs(s) < 1e-14:
        raise RejectedInputError("propagator is singular at a caustic (omega T = n pi)")
    maslov = math.floor(omega * T / math.pi)
    prefactor = math.sqrt(m * omega / (2 * math.pi * hbar * abs(s))) * _EIGHTH_TURN \
        * np.exp(-0.5j * np.pi * maslov)
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    phase = m * omega / (2 * hbar * s) * ((xa ** 2 + xb ** 2) * math.cos(omega * T) - 2 * xa * xb)
    out = prefactor * np.exp(1j * phase)
    return complex(out) if out.ndim == 0 else out


def _parse_grid(grid):
    if isinstance(grid, dict):
        try:
            x_min, x_max, points = grid["x_min"], grid["x_max"], grid["points"]
        except KeyError as exc:
            raise RejectedInputError(f"grid is missing {exc}") from None
    else:
        x_min, x_max, points = grid
    points = check_int(points, "grid.points", min_val=3)
    x_min = check_scalar(x_min, "grid.x_min")
    x_max = check_scalar(x_max, "grid.x_max")
    if not x_min < x_max:
        raise RejectedInputError("grid requires x_min < x_max")
    return x_min, x_max, points


def _taper_window(x, x_min, x_max, taper):
    if taper == 0:
        return np.ones_like(x)
    edge = taper * (x_max - x_min)
    d = np.minimum(x - x_min, x_max - x)
    return np.where(d >= edge, 1.0, np.sin(0.5 * np.pi * np.clip(d / edge, 0.0, 1.0)) ** 2)


def lattice_path_integral(potential, m, hbar, T, xa, xb, slices_N, grid, *, taper=0.2):
    """Brute-force time-sliced evaluation of ``K(xb, T; xa, 0)``.

    The interval is cut into ``slices_N`` steps of ``eps = T / N``; each uses
    the short-time kernel

        sqrt(m / (2 pi i hbar eps)) exp(i/hbar [m (x'-x)^2 / (2 eps) - eps (U(x)+U(x'))/2])

    and the ``N-1`` intermediate positions are integrated with the trapezoid
    rule on ``grid``. The kinetic factor depends only on ``x' - x``, so each
    slice is a Toeplitz product evaluated by FFT convolution.

    The integrand never decays in real time, so a hard grid edge contributes
    spurious endpoint terms. A smooth ``sin^2`` window over the outer
    ``taper`` fraction of the grid on each side suppresses them; ``taper=0``
    gives plain truncation.

    Parameters
    ----------
    potential : callable or None
        Vectorized ``U(x)``; None means free.
    grid : dict or tuple
        ``{"x_min", "x_max", "points"}``.

    Raises
    ------
    GridResolutionError
        When the grid spacing cannot resolve the largest phase gradient of the
        short-time kernel over the grid (Nyquist: gradient * dx <= pi).
    """
    m = check_positive(m, "m")
    hbar = check_positive(hbar, "hbar")
    T = check_positive(T, "T")
    N = check_int(slices_N, "slices_N", min_val=1)
    taper = check_scalar(taper, "taper", min_val=0.0, max_val=0.5, include_max=False)
    U = potential if potential is not None else (lambda x: np.zeros_like(x))
    eps = T / N
    prefactor = math.sqrt(m / (2 * math.pi * hbar * eps)) * _EIGHTH_TURN

    def short_time(x_out, x_in):
        action = m * (x_out - x_in) ** 2 / (2 * eps) - 0.5 * eps * (U(x_out) + U(x_in))
        return prefactor * np.exp(1j * action / hbar)

    if N == 1:
        return complex(short_time(np.float64(xb), np.float64(xa)))

    x_min, x_max, points = _parse_grid(grid)
    if not (x_min <= xa <= x_max and x_min <= xb <= x_max):
        raise RejectedInputError("endpoints xa, xb must lie inside the grid")
    x = np.linspace(x_min, x_max, points)
    dx = x[1] - x[0]
    u = np.asarray(U(x), dtype=float) * np.ones_like(x)
    gradient = m * (x_max - x_min) / (hbar * eps) + eps * np.max(np.abs(np.diff(u))) / (hbar * dx)
    if gradient * dx > math.pi:
        needed = math.ceil(gradient * (x_max - x_min) / math.pi) + 1
        raise GridResolutionError(
            f"grid too coarse: phase gradient {gradient:.4g} needs dx <= {math.pi / gradient:.4g} "
            f"(got {dx:.4g}); use at least {needed} points")

    weights = np.full(points, dx)
    weights[0] = weights[-1] = 0.5 * dx
    weights *= _taper_window(x, x_min, x_max, taper)
    half_potential = np.exp(-0.5j * eps * u / hbar)
    offsets = dx * np.arange(-(points - 1), points)
    toeplitz = prefactor * np.exp(1j * m * offsets ** 2 / (2 * hbar * eps))

    amplitude = short_time(x, np.float64(xa))
    for _ in range(N - 2):
        amplitude = half_potential * fftconvolve(toeplitz, half_potential * weights * amplitude,
                                                 mode="valid")
    return complex(np.sum(short_time(np.float64(xb), x) * weights * amplitude))


def ensemble_kernel(config, t_span, hbar=1.0, normalization="mean", *, amplitude_C=1.0,
                    phase_scale="hbar", n_jobs=1):
    """Kernel from a random-field ensemble.

    Field ``j`` accumulates ``S_j = hbar * omega_j * t_span``; its factor is
    ``C exp(i S_j / scale)`` with ``scale`` equal to ``hbar`` (``"hbar"``), the
    summed action ``sum_j S_j`` (``"total_action"``) or a given positive number.
    """
    if not isinstance(config, EnsembleConfig):
        raise RejectedInputError("config must be an EnsembleConfig")
    t_span = check_positive(t_span, "t_span")
    hbar = check_positive(hbar, "hbar")
    C = check_scalar(amplitude_C, "amplitude_C", min_val=0.0)
    omegas = sample_omegas(config, n_jobs=n_jobs)
    actions = hbar * omegas * t_span
    scale = resolve_phase_scale(phase_scale, hbar, actions)
    return sum_values(C * np.exp(1j * actions / scale), normalization)


def resolve_phase_scale(phase_scale, hbar, actions):
    if phase_scale == "hbar":
        return hbar
    if phase_scale == "total_action":
        return check_positive(total_action(actions), "total action (phase scale)")
    if isinstance(phase_scale, str):
        raise RejectedInputError(f"unknown phase_scale {phase_scale!r}")
    return check_positive(phase_scale, "phase_scale")


class EnsembleKernelEstimator(BaseEstimator):
    """Sample a random-field ensemble once, then predict kernels for any ``t_span``.

    Parameters
    ----------
    count_J : int, default=1000
    distribution : dict, default={"kind": "half_normal", "scale": 1.0}
    seed : int, default=0
    light_speed_c, hbar, amplitude_C : float
    normalization : {"mean", "raw_sum"}, default="mean"
    phase_scale : "hbar", "total_action" or float, default="hbar"
    n_jobs : int, default=1
        Threads used for sampling; results do not depend on it.

    Attributes
    ----------
    omegas_ : ndarray of shape (count_J,)
    config_ : EnsembleConfig
    """

    def __init__(self, count_J=1000, distribution=None, seed=0, light_speed_c=1.0, hbar=1.0,
                 amplitude_C=1.0, normalization="mean", phase_scale="hbar", n_jobs=1):
        self.count_J = count_J
        self.distribution = distribution
        self.seed = seed
        self.light_speed_c = light_speed_c
        self.hbar = hbar
        self.amplitude_C = amplitude_C
        self.normalization = normalization
        self.phase_scale = phase_scale
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        dist = self.distribution or {"kind": "half_normal", "scale": 1.0}
        self.config_ = EnsembleConfig(count_J=self.count_J, distribution=distribution_from_dict(dist),
                                      seed=self.seed, light_speed_c=self.light_speed_c)
        _check_normalization(self.normalization)
        self.omegas_ = sample_omegas(self.config_, n_jobs=self.n_jobs)
        return self

    def kernel(self, t_span):
        check_is_fitted(self, "omegas_")
        t_span = check_positive(t_span, "t_span")
        actions = self.hbar * self.omegas_ * t_span
        scale = resolve_phase_scale(self.phase_scale, self.hbar, actions)
        return sum_values(self.amplitude_C * np.exp(1j * actions / scale), self.normalization)

    def predict(self, X):
        """Complex kernel values for each ``t_span`` in ``X`` (1-D or a single column)."""
        t = np.asarray(X, dtype=float).reshape(-1)
        return np.array([self.kernel(ti).value for ti in t])

    def std_error(self, X):
        t = np.asarray(X, dtype=float).reshape(-1)
        return np.array([self.kernel(ti).std_error for ti in t])


SWEEP_COLUMNS = ["J", "t_span", "Re K", "Im K", "std_error"]


def write_kernel_sweep_csv(rows, fh):
    """Rows are ``(t_span, KernelEstimate)`` pairs."""
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(SWEEP_COLUMNS)
    for t_span, est in rows:
        writer.writerow([est.ensemble_J, repr(float(t_span)), repr(est.value.real),
                         repr(est.value.imag), repr(est.std_error)])
