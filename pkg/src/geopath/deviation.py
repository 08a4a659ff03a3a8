"""Geodesic-deviation integration and per-field action.

The separation ``ell^i`` between two test particles on a reference worldline
with constant velocity ``u = dx/dtau`` obeys

    d^2 ell^i / dtau^2 = -R^i_{kmn} u^k ell^m u^n + f e^i

in a local inertial frame. With only ``R^1_010`` populated and ``u = (c,0,0,0)``
this is the harmonic oscillator ``ell'' + c^2 R^1_010 ell = 0``. The forcing
``f`` acts along ``forcing_direction`` (default the 1-axis).

The action of a field is ``S = hbar * integral(omega dt)`` and the phase is
``Phi = S / hbar``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import FieldSample, frequency_of
from .exceptions import DivergenceError, RejectedInputError
from .utils.validation import check_positive, check_vector

MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class DeviationState:
    ell: np.ndarray
    ell_rate: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ell", check_vector(self.ell, "ell", size=4))
        object.__setattr__(self, "ell_rate", check_vector(self.ell_rate, "ell_rate", size=4))


@dataclass(frozen=True)
class DeviationTrajectory:
    """Uniformly sampled solution for one field.

    ``tau`` has shape ``(n+1,)``; ``ell`` and ``ell_rate`` have shape ``(n+1, 4)``.
    """

    field_index_j: int
    tau: np.ndarray
    ell: np.ndarray
    ell_rate: np.ndarray
    omega: float
    action_S: float
    phase_Phi: float
    hbar: float = 1.0

    @property
    def dt(self):
        return float(self.tau[1] - self.tau[0])

    @property
    def samples(self):
        return [DeviationState(e, r, float(t)) for t, e, r in zip(self.tau, self.ell, self.ell_rate)]

    def check_invariants(self):
        if not math.isclose(self.phase_Phi * self.hbar, self.action_S, rel_tol=1e-9, abs_tol=0.0):
            raise AssertionError("phase and action are inconsistent")
        steps = np.diff(self.tau)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise AssertionError("tau is not uniformly increasing")


def tidal_matrix(curvature, velocity):
    """``A[i, m] = -sum_{k,n} R^i_{kmn} u^k u^n`` from a component dict."""
    A = np.zeros((4, 4))
    for (i, k, m, n), value in curvature.items():
        A[i, m] -= value * velocity[k] * velocity[n]
    return A


def integrate_deviation(sample, initial, worldline_velocity, t_span, dt, *, hbar=1.0,
                        c=1.0, forcing_direction=(0.0, 1.0, 0.0, 0.0)):
    """Advance the deviation equation with classical fixed-step RK4.

    The number of steps is ``ceil(t_span / dt)``; the step actually used is
    ``t_span / n``, so the last sample lands exactly on ``t_span``.

    Raises
    ------
    DivergenceError
        If the state becomes non-finite; carries the offending ``tau``.
    """
    dt = check_positive(dt, "dt")
    t_span = check_positive(t_span, "t_span")
    if t_span < dt * (1 - 1e-12):
        raise RejectedInputError(f"t_span={t_span} is shorter than dt={dt}")
    hbar = check_positive(hbar, "hbar")
    u = check_vector(worldline_velocity, "worldline_velocity", size=4)
    direction = check_vector(forcing_direction, "forcing_direction", size=4)
    if not isinstance(initial, DeviationState):
        raise RejectedInputError("initial must be a DeviationState")

    n = max(1, math.ceil(t_span / dt - 1e-9))
    h = t_span / n
    A = tidal_matrix(sample.riemann(), u)
    force = sample.stochastic_f * direction

    def accel(ell):
        return A @ ell + force

    tau0 = initial.tau
    ell = np.empty((n + 1, 4))
    rate = np.empty((n + 1, 4))
    ell[0], rate[0] = initial.ell, initial.ell_rate
    x, v = initial.ell.copy(), initial.ell_rate.copy()
    # overflow is caught by the finiteness test below
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n):
            k1x, k1v = v, accel(x)
            k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x)
            k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x)
            k4x, k4v = v + h * k3v, accel(x + h * k3x)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                raise DivergenceError("deviation state became non-finite", tau0 + (step + 1) * h)
            ell[step + 1], rate[step + 1] = x, v

    tau = tau0 + h * np.arange(n + 1)
    omega = sample.omega if sample.omega is not None else frequency_of(sample, c)
    S, phi = accumulate_action(omega, hbar, t_span)
    return DeviationTrajectory(sample.index_j, tau, ell, rate, float(omega), S, phi, hbar)


def oscillator_closed_form(ell0, v0, omega, t):
    """``ell0 cos(omega t) + (v0/omega) sin(omega t)``, or ``ell0 + v0 t`` at omega=0."""
    if omega < 0:
        raise RejectedInputError(f"omega must be >= 0, got {omega}")
    t = np.asarray(t, dtype=float)
    if omega == 0:
        out = ell0 + v0 * t
    else:
        out = ell0 * np.cos(omega * t) + (v0 / omega) * np.sin(omega * t)
    return out if out.ndim else float(out)


def oscillator_energy(ell, rate, omega):
    return 0.5 * np.asarray(rate) ** 2 + 0.5 * omega ** 2 * np.asarray(ell) ** 2


def exp_solution_residual(sample, x, t, *, c=1.0, ell0=1.0):
    """Relative residual of ``ell0 exp(k_b x^b + i omega t)`` in ``ell'' + c^2 R ell = 0``.

    Only the spatial components (1..3) of ``x`` and the covector enter the
    ansatz; they cancel from the ratio, which reduces to ``|c^2 R - omega^2|``.
    """
    if sample.omega is None:
        raise RejectedInputError(f"field {sample.index_j} has no omega")
    x = check_vector(x, "x", size=4)
    k = np.asarray(sample.wave_covector_k, dtype=float)
    omega = sample.omega
    ell = ell0 * np.exp(np.dot(k[1:], x[1:]) + 1j * omega * t)
    d2ell = (1j * omega) ** 2 * ell
    return float(abs(d2ell + c ** 2 * sample.curvature_R1010 * ell) / abs(ell))


def accumulate_action(source, hbar, t_span, *, steps=1000, c=1.0):
    """Return ``(S, Phi)`` with ``Phi = integral_0^t_span omega dt`` and ``S = hbar * Phi``.

    ``source`` may be a :class:`FieldSample`, a :class:`DeviationTrajectory`,
    a constant frequency, or a callable ``omega(t)``. Callables are integrated
    with the midpoint rule on ``steps`` uniform cells; constants exactly.
    """
    hbar = check_positive(hbar, "hbar")
    t_span = check_positive(t_span, "t_span")
    if callable(source):
        h = t_span / steps
        mids = h * (np.arange(steps) + 0.5)
        phi = float(np.sum(np.asarray(source(mids), dtype=float)) * h)
    else:
        if isinstance(source, FieldSample):
            omega = source.omega if source.omega is not None else frequency_of(source, c)
        elif isinstance(source, DeviationTrajectory):
            omega = source.omega
        else:
            omega = float(source)
        phi = omega * t_span
    return hbar * phi, phi


def momentum_action(p, x, metric=MINKOWSKI):
    """Plane-wave action ``p^m x_m`` (cross-check for constant-frequency fields)."""
    p = check_vector(p, "p", size=4)
    x = check_vector(x, "x", size=4)
    return float(p @ np.asarray(metric) @ x)


def total_action(actions):
    """Correctly rounded ``sum(S_j)``."""
    actions = list(actions)
    if not actions:
        raise RejectedInputError("total_action needs at least one field action")
    return math.fsum(float(s) for s in actions)


TRAJECTORY_COLUMNS = ["tau"] + [f"ell{i}" for i in range(4)] + [f"rate{i}" for i in range(4)]


def write_trajectory_csv(trajectory, fh):
    """Write ``tau, ell0..ell3, rate0..rate3`` rows to an open text file."""
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for t, e, r in zip(trajectory.tau, trajectory.ell, trajectory.ell_rate):
        writer.writerow([repr(float(t))] + [repr(float(v)) for v in e] + [repr(float(v)) for v in r])
