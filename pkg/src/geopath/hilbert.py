"""Real/symplectic split of the Hermitian inner product and ray geometry.

For ``|psi> = u + i v`` the inner product (conjugate-linear in the first
slot) splits as ``<psi1|psi2> = G(psi1, psi2) - i * Omega(psi1, psi2)`` with

    G     = (u1, u2) + (v1, v2)
    Omega = (v1, u2) - (u1, v2)

Two-level states are projected to the Bloch sphere with ``(1, 0)`` at the
north pole and the azimuth taken from the relative phase of the second
amplitude.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import RejectedInputError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class ComplexState:
    """Finite-dimensional state vector.

    Parameters
    ----------
    amplitudes : array-like of complex
    normalized : bool
        When true the constructor enforces ``sum |a|^2 == 1`` within 1e-12.
    """

    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise RejectedInputError(
                f"amplitudes must be a non-empty 1-D sequence, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise RejectedInputError("amplitudes contain non-finite values")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm_squared - 1.0) > NORM_TOL:
            raise RejectedInputError(
                f"state flagged normalized has norm^2 = {self.norm_squared!r}")

    @property
    def dimension(self):
        return self.amplitudes.size

    @property
    def norm_squared(self):
        return float(np.sum(self.amplitudes.real ** 2 + self.amplitudes.imag ** 2))

    @property
    def u(self):
        return self.amplitudes.real

    @property
    def v(self):
        return self.amplitudes.imag

    def normalize(self):
        n2 = self.norm_squared
        if n2 == 0.0:
            raise RejectedInputError("cannot normalize the zero vector")
        return ComplexState(self.amplitudes / np.sqrt(n2), normalized=True)


def as_state(psi):
    """Coerce ``psi`` to :class:`ComplexState` (no normalization)."""
    if isinstance(psi, ComplexState):
        return psi
    return ComplexState(psi)


@dataclass(frozen=True)
class InnerProductParts:
    riemannian: float
    symplectic: float
    inner: complex = field(repr=False, default=None)

    def reconstruct(self):
        """Return ``G - i*Omega``."""
        return complex(self.riemannian, -self.symplectic)


def _pair(psi1, psi2):
    psi1, psi2 = as_state(psi1), as_state(psi2)
    if psi1.dimension != psi2.dimension:
        raise RejectedInputError(
            f"dimension mismatch: {psi1.dimension} vs {psi2.dimension}")
    return psi1, psi2


def decompose_inner_product(psi1, psi2):
    """Split ``<psi1|psi2>`` into its Riemannian and symplectic parts."""
    psi1, psi2 = _pair(psi1, psi2)
    u1, v1, u2, v2 = psi1.u, psi1.v, psi2.u, psi2.v
    g = float(np.dot(u1, u2) + np.dot(v1, v2))
    omega = float(np.dot(v1, u2) - np.dot(u1, v2))
    return InnerProductParts(g, omega, complex(g, -omega))


def bloch_project(psi):
    """Map a normalized two-level state to a unit vector ``(x, y, z)``."""
    psi = as_state(psi)
    if psi.dimension != 2:
        raise RejectedInputError(f"Bloch projection needs dimension 2, got {psi.dimension}")
    if abs(psi.norm_squared - 1.0) > NORM_TOL:
        raise RejectedInputError(f"state is not normalized (norm^2 = {psi.norm_squared!r})")
    alpha, beta = psi.amplitudes
    coherence = np.conj(alpha) * beta
    vec = np.array([2.0 * coherence.real, 2.0 * coherence.imag,
                    abs(alpha) ** 2 - abs(beta) ** 2])
    return vec / np.linalg.norm(vec)


def bloch_state(vector):
    """Canonical representative ``(cos(theta/2), e^{i phi} sin(theta/2))``."""
    x, y, z = np.asarray(vector, dtype=float)
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.arctan2(y, x)
    return ComplexState([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)],
                        normalized=True)


def fubini_study_distance(psi1, psi2):
    """Geodesic distance between the rays of ``psi1`` and ``psi2``, in ``[0, pi/2]``.

    Evaluated as ``atan2(|b - <a|b> a|, |<a|b>|)`` on the normalized vectors,
    which keeps full precision near zero where ``arccos`` would not.
    """
    psi1, psi2 = _pair(psi1, psi2)
    if psi1.norm_squared == 0.0 or psi2.norm_squared == 0.0:
        raise RejectedInputError("Fubini-Study distance is undefined for the zero vector")
    a = psi1.normalize().amplitudes
    b = psi2.normalize().amplitudes
    overlap = np.vdot(a, b)
    residual = np.linalg.norm(b - overlap * a)
    return float(np.arctan2(residual, abs(overlap)))


class BlochProjector(TransformerMixin, BaseEstimator):
    """Project rows of two-level amplitudes onto the Bloch sphere.

    Parameters
    ----------
    normalize : bool, default=False
        Rescale each row to unit norm before projecting. When false,
        non-normalized rows are rejected.
    """

    def __init__(self, normalize=False):
        self.normalize = normalize

    def fit(self, X, y=None):
        self._validate(X)
        self.n_features_in_ = 2
        return self

    def _validate(self, X):
        X = np.asarray(X, dtype=complex)
        if X.ndim != 2 or X.shape[1] != 2:
            raise RejectedInputError(f"expected shape (n_samples, 2), got {X.shape}")
        return X

    def transform(self, X):
        X = self._validate(X)
        if self.normalize:
            return np.array([bloch_project(ComplexState(row).normalize()) for row in X])
        return np.array([bloch_project(row) for row in X])

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return np.array([bloch_state(row).amplitudes for row in X])
