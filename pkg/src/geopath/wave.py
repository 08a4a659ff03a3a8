"""Geometric wavefunction, its amplitude/action split, and time evolution.

The wavefunction is ``psi = a exp(i S / (2 S0))`` and evolves by

    i (2 S0) d psi/dt = -((2 S0)^2 / (2 m)) psi'' + U psi

which is the Schrodinger equation with ``hbar`` replaced by ``2 S0``. All
routines take ``S0`` and use ``hbar_eff = 2 S0`` internally, so passing
``S0 = hbar / 2`` reproduces the standard equation through the same code.

Grids are uniform and one-dimensional. Spatial derivatives of the Madelung
fields use second-order central differences in the interior and
second-order one-sided stencils at the two ends.
"""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import RejectedInputError, StabilityError, UnwrapError
from .utils.validation import check_int, check_positive, check_scalar, check_vector

BOUNDARIES = ("periodic", "absorbing")
NODE_THRESHOLD = 1e-8
STABILITY_LIMIT = 0.5


@dataclass(frozen=True)
class WaveField:
    amplitudes: np.ndarray
    dx: float
    mass_m: float = 1.0
    action_scale_S0: float = 0.5
    potential_U: np.ndarray = None
    time: float = 0.0
    x0: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        psi = check_vector(self.amplitudes, "amplitudes", dtype=complex, min_size=8)
        object.__setattr__(self, "amplitudes", psi)
        check_positive(self.dx, "dx")
        check_positive(self.mass_m, "mass_m")
        check_positive(self.action_scale_S0, "action_scale_S0")
        U = np.zeros(psi.size) if self.potential_U is None else \
            check_vector(self.potential_U, "potential_U", size=psi.size)
        object.__setattr__(self, "potential_U", U)
        if self.boundary not in BOUNDARIES:
            raise RejectedInputError(f"boundary must be one of {BOUNDARIES}")

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.amplitudes.size)

    @property
    def hbar_eff(self):
        return 2.0 * self.action_scale_S0

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.dx)


@dataclass(frozen=True)
class MadelungFields:
    amplitude_a: np.ndarray
    action_S: np.ndarray
    action_scale_S0: float = field(default=0.5)

    def reconstruct(self):
        return self.amplitude_a * np.exp(1j * self.action_S / (2.0 * self.action_scale_S0))


def build_geometric_wavefunction(a, S, S0, *, dx=1.0, mass_m=1.0, potential_U=None, x0=0.0,
                                 boundary="periodic"):
    """``psi = a exp(i S / (2 S0))`` pointwise, wrapped in a :class:`WaveField`."""
    a = check_vector(a, "a")
    S = check_vector(S, "S")
    S0 = check_positive(S0, "S0")
    if a.size != S.size:
        raise RejectedInputError(f"a and S differ in length ({a.size} vs {S.size})")
    if np.any(a < 0):
        raise RejectedInputError("amplitude a must be non-negative")
    psi = a * np.exp(1j * S / (2.0 * S0))
    return WaveField(psi, dx, mass_m, S0, potential_U, 0.0, x0, boundary)


def madelung_decompose(psi, S0=None, threshold=NODE_THRESHOLD):
    """Split ``psi`` into ``a = |psi|`` and a continuous action ``S``.

    The phase starts from the principal value at the first grid point and is
    continued by the principal angle of ``psi[k+1] * conj(psi[k])``, so each
    step resolves jumps by the nearest multiple of ``2 pi``.

    Raises
    ------
    UnwrapError
        If ``|psi|`` falls to ``threshold`` or below anywhere on the path.
    """
    if isinstance(psi, WaveField):
        S0 = psi.action_scale_S0 if S0 is None else S0
        values = psi.amplitudes
    else:
        values = check_vector(psi, "psi", dtype=complex)
        if S0 is None:
            raise RejectedInputError("S0 is required for a bare amplitude array")
    S0 = check_positive(S0, "S0")
    a = np.abs(values)
    nodes = np.flatnonzero(a <= threshold)
    if nodes.size:
        raise UnwrapError(f"amplitude {a[nodes[0]]:.3g} at or below node threshold {threshold}",
                          int(nodes[0]))
    steps = np.angle(values[1:] * np.conj(values[:-1]))
    phase = np.angle(values[0]) + np.concatenate(([0.0], np.cumsum(steps)))
    return MadelungFields(a, 2.0 * S0 * phase, S0)


def gradient(f, dx):
    """Second-order first derivative; one-sided at the ends."""
    f = np.asarray(f)
    g = np.empty_like(f)
    g[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    g[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return g


def second_derivative(f, dx):
    f = np.asarray(f)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx ** 2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dx ** 2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / dx ** 2
    return out


def hamilton_jacobi_residual(S, U, m, dS_dt, *, dx):
    """Pointwise ``dS/dt + (dS/dx)^2 / (2m) + U``."""
    S, U, dS_dt = (check_vector(v, n) for v, n in ((S, "S"), (U, "U"), (dS_dt, "dS_dt")))
    m = check_positive(m, "m")
    dx = check_positive(dx, "dx")
    return dS_dt + gradient(S, dx) ** 2 / (2.0 * m) + U


def continuity_residual(a_squared, S, m, da2_dt, *, dx):
    """Pointwise ``d(a^2)/dt + d/dx(a^2 (dS/dx) / m)``.

    The flux divergence is expanded by the product rule so that every term is
    a single second-order stencil, including at the grid ends.
    """
    a2, S, da2_dt = (check_vector(v, n) for v, n in
                     ((a_squared, "a_squared"), (S, "S"), (da2_dt, "da2_dt")))
    m = check_positive(m, "m")
    dx = check_positive(dx, "dx")
    return da2_dt + (gradient(a2, dx) * gradient(S, dx) + a2 * second_derivative(S, dx)) / m


def quantum_potential(a, m, S0, *, dx):
    """``Q = -((2 S0)^2 / (2 m)) a'' / a``.

    Substituting ``psi = a exp(iS/(2 S0))`` into the evolution equation gives
    ``dS/dt + (S')^2/(2m) + U + Q = 0``, so the Hamilton-Jacobi residual of
    an exact solution equals ``-Q``.
    """
    a = check_vector(a, "a")
    return -((2.0 * S0) ** 2 / (2.0 * m)) * second_derivative(a, dx) / a


def laplacian_matrix(n, dx, boundary="periodic"):
    """Three-point Laplacian; periodic wraps, absorbing uses zero Dirichlet ends."""
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    L = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    if boundary == "periodic":
        L[0, n - 1] = 1.0
        L[n - 1, 0] = 1.0
    return (L / dx ** 2).tocsc()


def absorbing_profile(n, width_fraction=0.1, strength=1.0):
    """Quadratic imaginary-potential ramp over the outer ``width_fraction`` of each side."""
    width = max(1, int(round(width_fraction * n)))
    idx = np.arange(n)
    depth = np.maximum(width - np.minimum(idx, n - 1 - idx), 0) / width
    return strength * depth ** 2


def hamiltonian(wave, absorb_strength=1.0, absorb_width=0.1):
    n = wave.amplitudes.size
    hbar = wave.hbar_eff
    kinetic = -(hbar ** 2 / (2.0 * wave.mass_m)) * laplacian_matrix(n, wave.dx, wave.boundary)
    U = wave.potential_U.astype(complex)
    if wave.boundary == "absorbing":
        U = U - 1j * absorbing_profile(n, absorb_width, absorb_strength)
    return (kinetic + sp.diags(U)).tocsc()


def check_stability(wave, dt):
    """Raise :class:`StabilityError` unless both step-size bounds hold."""
    hbar = wave.hbar_eff
    potential_term = dt * float(np.max(np.abs(wave.potential_U))) / hbar
    kinetic_term = dt * hbar * (math.pi / wave.dx) ** 2 / (2.0 * wave.mass_m)
    if potential_term >= STABILITY_LIMIT:
        raise StabilityError(f"dt*max|U|/(2 S0) = {potential_term:.4g} >= {STABILITY_LIMIT}", "dt")
    if kinetic_term >= STABILITY_LIMIT:
        raise StabilityError(f"dt*(2 S0)*k_max^2/(2m) = {kinetic_term:.4g} >= {STABILITY_LIMIT}",
                             "dt")


def evolve(wave, dt, steps, *, absorb_strength=1.0, absorb_width=0.1, callback=None):
    """Advance ``steps`` Crank-Nicolson (Cayley) steps of size ``dt``.

    ``(1 + i dt H / (2 hbar)) psi_new = (1 - i dt H / (2 hbar)) psi``, which is
    unitary for the Hermitian periodic Hamiltonian. ``callback(step, wave)``
    is invoked after every step when given.
    """
    dt = check_positive(dt, "dt")
    steps = check_int(steps, "steps", min_val=0)
    check_stability(wave, dt)
    H = hamiltonian(wave, absorb_strength, absorb_width)
    n = wave.amplitudes.size
    factor = 0.5j * dt / wave.hbar_eff
    eye = sp.identity(n, dtype=complex, format="csc")
    lhs = splu((eye + factor * H).tocsc())
    rhs = (eye - factor * H).tocsr()
    psi = wave.amplitudes.copy()
    for step in range(steps):
        psi = lhs.solve(rhs @ psi)
        if callback is not None:
            callback(step + 1, replace(wave, amplitudes=psi, time=wave.time + (step + 1) * dt))
    return replace(wave, amplitudes=psi, time=wave.time + steps * dt)


def evolve_schrodinger(amplitudes, dx, m, hbar, dt, steps, potential_U=None, boundary="periodic"):
    """Standard Schrodinger evolution, i.e. :func:`evolve` with ``S0 = hbar / 2``."""
    wave = WaveField(amplitudes, dx, m, 0.5 * hbar, potential_U, 0.0, 0.0, boundary)
    return evolve(wave, dt, steps).amplitudes


def time_derivatives(wave):
    """Instantaneous ``(d(a^2)/dt, dS/dt)`` implied by the discrete evolution equation."""
    psi = wave.amplitudes
    psi_t = -1j * (hamiltonian(wave) @ psi) / wave.hbar_eff
    da2_dt = 2.0 * np.real(np.conj(psi) * psi_t)
    dS_dt = wave.hbar_eff * np.imag(psi_t / psi)
    return da2_dt, dS_dt


def gaussian_packet(x, x0, sigma0, k=0.0):
    """Normalized packet whose ``|psi|^2`` has standard deviation ``sigma0``."""
    x = np.asarray(x, dtype=float)
    norm = (2.0 * math.pi * sigma0 ** 2) ** -0.25
    return norm * np.exp(-((x - x0) ** 2) / (4.0 * sigma0 ** 2) + 1j * k * x)


def free_packet_width(sigma0, t, m, S0):
    """``sigma0 sqrt(1 + ((2 S0) t / (2 m sigma0^2))^2)``."""
    return sigma0 * np.sqrt(1.0 + ((2.0 * S0) * np.asarray(t) / (2.0 * m * sigma0 ** 2)) ** 2)


def packet_width(wave):
    rho = np.abs(wave.amplitudes) ** 2
    x = wave.x
    total = np.sum(rho)
    mean = np.sum(rho * x) / total
    return float(np.sqrt(np.sum(rho * (x - mean) ** 2) / total))


def plane_wave_energy(k, m, S0):
    """Dispersion ``E = (2 S0)^2 k^2 / (2 m)``."""
    return (2.0 * S0) ** 2 * k ** 2 / (2.0 * m)


SNAPSHOT_COLUMNS = ["x", "Re psi", "Im psi", "|psi|^2", "S"]


def write_snapshot_csv(wave, fh, stride=1):
    """Write ``x, Re psi, Im psi, |psi|^2, S`` every ``stride`` points.

    ``S`` is the unwrapped action, or ``nan`` throughout if the field has a node.
    """
    stride = check_int(stride, "stride", min_val=1)
    try:
        S = madelung_decompose(wave).action_S
    except UnwrapError:
        S = np.full(wave.amplitudes.size, math.nan)
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(SNAPSHOT_COLUMNS)
    psi = wave.amplitudes
    for i in range(0, psi.size, stride):
        writer.writerow([repr(float(wave.x[i])), repr(float(psi[i].real)), repr(float(psi[i].imag)),
                         repr(float(abs(psi[i]) ** 2)), repr(float(S[i]))])


class MadelungTransformer(TransformerMixin, BaseEstimator):
    """Map a complex field on a grid to columns ``[a, S]`` and back.

    Rows are grid points in order; unwrapping runs along the rows.
    """

    def __init__(self, action_scale_S0=0.5, threshold=NODE_THRESHOLD):
        self.action_scale_S0 = action_scale_S0
        self.threshold = threshold

    def fit(self, X, y=None):
        check_positive(self.action_scale_S0, "action_scale_S0")
        check_scalar(self.threshold, "threshold", min_val=0.0)
        return self

    def transform(self, X):
        fields = madelung_decompose(np.asarray(X, dtype=complex).reshape(-1),
                                    self.action_scale_S0, self.threshold)
        return np.column_stack([fields.amplitude_a, fields.action_S])

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return X[:, 0] * np.exp(1j * X[:, 1] / (2.0 * self.action_scale_S0))


class WavePropagator(TransformerMixin, BaseEstimator):
    """Evolve a complex field given as a 1-D array; ``transform`` returns the final field."""

    def __init__(self, dx=0.1, mass_m=1.0, action_scale_S0=0.5, dt=1e-3, steps=100,
                 boundary="periodic", potential_U=None):
        self.dx = dx
        self.mass_m = mass_m
        self.action_scale_S0 = action_scale_S0
        self.dt = dt
        self.steps = steps
        self.boundary = boundary
        self.potential_U = potential_U

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        wave = WaveField(np.asarray(X, dtype=complex).reshape(-1), self.dx, self.mass_m,
                         self.action_scale_S0, self.potential_U, 0.0, 0.0, self.boundary)
        return evolve(wave, self.dt, self.steps).amplitudes
