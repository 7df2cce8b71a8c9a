"""Single-qubit states, two-outcome measurements and their geometry.

Convention used throughout the package: the density matrix of a state with
Stokes vector ``s`` is ``rho = (I + s1*X + s2*Y + s3*Z) / 2`` with ``|0> = |H>``,
so ``s3 = +1`` is horizontal polarization (the transmitted port of the
polarizing beam splitter), ``s1 = +1`` is diagonal and ``s2 = +1`` is circular.

Every function that sits in the particle-filter hot loop has an array form
operating on ``(..., 3)`` Stokes arrays; the scalar objects are thin wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

EPS = 1e-12

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
IDENTITY = np.eye(2, dtype=complex)


class InvalidStateError(ValueError):
    """Raised when a Stokes vector lies outside the Bloch ball."""


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------


def fidelity_stokes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closed-form qubit fidelity for broadcastable Stokes arrays.

    ``F = Tr(ra rb) + 2 sqrt(det ra det rb) = (1 + a.b + sqrt((1-|a|^2)(1-|b|^2))) / 2``
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = np.sum(a * b, axis=-1)
    ma = np.clip(1.0 - np.sum(a * a, axis=-1), 0.0, None)
    mb = np.clip(1.0 - np.sum(b * b, axis=-1), 0.0, None)
    f = 0.5 * (1.0 + dot + np.sqrt(ma * mb))
    return np.clip(f, 0.0, 1.0)


def stokes_to_rho(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return 0.5 * (IDENTITY + np.tensordot(s, PAULI, axes=([-1], [0])))


def rho_to_stokes(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("...ij,kji->...k", rho, PAULI))


def embed_stokes(s: np.ndarray) -> np.ndarray:
    """Stokes vectors -> points on the radius-1/2 3-sphere with x4 >= 0."""
    s = np.asarray(s, dtype=float)
    x4 = 0.5 * np.sqrt(np.clip(1.0 - np.sum(s * s, axis=-1), 0.0, None))
    return np.concatenate([0.5 * s, x4[..., None]], axis=-1)


def project_coords(x: np.ndarray) -> np.ndarray:
    """Points on the radius-1/2 3-sphere -> Stokes vectors (x4 sign is ignored)."""
    return 2.0 * np.asarray(x, dtype=float)[..., :3]


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitState:
    """A qubit density matrix stored as its Stokes vector."""

    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        vals = (self.s1, self.s2, self.s3)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidStateError(f"non-finite Stokes vector {vals}")
        norm2 = self.s1**2 + self.s2**2 + self.s3**2
        if norm2 > 1.0 + EPS:
            raise InvalidStateError(f"|s|^2 = {norm2!r} exceeds 1")
        for name, v in zip(("s1", "s2", "s3"), vals):
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_vector(cls, s: Sequence[float]) -> "QubitState":
        s1, s2, s3 = (float(v) for v in s)
        return cls(s1, s2, s3)

    @classmethod
    def from_rho(cls, rho: np.ndarray) -> "QubitState":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidStateError(f"expected a 2x2 matrix, got shape {rho.shape}")
        return cls.from_vector(rho_to_stokes(rho))

    @classmethod
    def maximally_mixed(cls) -> "QubitState":
        return cls(0.0, 0.0, 0.0)

    @property
    def stokes(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.stokes))

    @property
    def purity(self) -> float:
        return 0.5 * (1.0 + self.radius**2)

    def rho(self) -> np.ndarray:
        return stokes_to_rho(self.stokes)


@dataclass(frozen=True)
class SphereCoord:
    """Point on the 3-sphere of radius 1/2 restricted to the x4 >= 0 hemisphere."""

    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self):
        r2 = self.x1**2 + self.x2**2 + self.x3**2 + self.x4**2
        if abs(r2 - 0.25) > EPS:
            raise InvalidStateError(f"|x|^2 = {r2!r}, expected 1/4")
        if self.x4 < 0:
            raise InvalidStateError("x4 must be non-negative")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.x4])


@dataclass(frozen=True)
class Povm:
    """Finite POVM with elements ``M_g = a_g I + v_g . sigma``.

    Storing the Bloch form keeps completeness exact: the projective
    constructor builds ``a = (1/2, 1/2)`` and ``v = (b/2, -b/2)``.
    """

    weights: Tuple[float, ...]
    vectors: Tuple[Tuple[float, float, float], ...]
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.weights, dtype=float)
        v = np.asarray(self.vectors, dtype=float).reshape(len(a), 3)
        if len(a) < 2:
            raise ValueError("a POVM needs at least two outcomes")
        if abs(a.sum() - 1.0) > EPS or np.any(np.abs(v.sum(axis=0)) > EPS):
            raise ValueError("POVM elements do not sum to the identity")
        if np.any(np.linalg.norm(v, axis=1) > a + EPS):
            raise ValueError("POVM element is not positive semidefinite")
        a.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_v", v)

    @classmethod
    def projective(cls, axis: Sequence[float]) -> "Povm":
        b = np.asarray(axis, dtype=float)
        b = b / np.linalg.norm(b)
        half = tuple(0.5 * b)
        return cls((0.5, 0.5), (half, tuple(-x for x in half)))

    @property
    def n_outcomes(self) -> int:
        return len(self.weights)

    @property
    def a(self) -> np.ndarray:
        return self._a

    @property
    def v(self) -> np.ndarray:
        return self._v

    def matrices(self) -> np.ndarray:
        return self._a[:, None, None] * IDENTITY + np.tensordot(self._v, PAULI, axes=([1], [0]))

    def probs_stokes(self, s: np.ndarray) -> np.ndarray:
        """Born probabilities ``Tr[M_g rho]`` for an ``(..., 3)`` array, shape ``(..., G)``."""
        p = self._a + np.asarray(s, dtype=float) @ self._v.T
        return np.clip(p, 0.0, 1.0)


@dataclass(frozen=True)
class MeasurementConfig:
    """A projective two-outcome analyzer setting.

    ``axis`` is the Bloch vector of the state sent to outcome 0. When the
    setting comes from the waveplate model, ``waveplate_angles`` holds
    ``(theta_q, theta_h)`` in degrees.
    """

    axis: Tuple[float, float, float]
    waveplate_angles: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        b = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(b)
        if b.shape != (3,) or not np.isfinite(n) or n == 0:
            raise ValueError(f"invalid axis {self.axis!r}")
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"axis must be a unit vector, |b| = {n!r}")
        object.__setattr__(self, "axis", tuple(float(x) for x in b / n))

    @classmethod
    def along(cls, axis: Sequence[float]) -> "MeasurementConfig":
        b = np.asarray(axis, dtype=float)
        return cls(tuple(b / np.linalg.norm(b)))

    @classmethod
    def from_waveplates(cls, theta_q: float, theta_h: float, quantize: bool = False) -> "MeasurementConfig":
        if quantize:
            theta_q, theta_h = quantize_angle(theta_q), quantize_angle(theta_h)
        b = waveplate_axis(theta_q, theta_h)
        return cls(tuple(b), (float(theta_q), float(theta_h)))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.axis)

    @cached_property
    def povm(self) -> Povm:
        return Povm.projective(self.axis)

    def key(self) -> Tuple[float, float, float]:
        """Identity used to merge repeated settings in the observation history."""
        return tuple(round(x, 9) + 0.0 for x in self.axis)


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------


def born_probs(state: QubitState, povm: Povm) -> np.ndarray:
    return povm.probs_stokes(state.stokes)


def fidelity(a: QubitState, b: QubitState) -> float:
    return float(fidelity_stokes(a.stokes, b.stokes))


def fidelity_matrix(rho: np.ndarray, sigma: np.ndarray) -> float:
    """General definition ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`` via eigendecompositions."""

    def psd_sqrt(m):
        w, u = np.linalg.eigh(m)
        return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T

    r = psd_sqrt(rho)
    inner = r @ sigma @ r
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def bures_distance(a: QubitState, b: QubitState) -> float:
    f = fidelity(a, b)
    return float(np.sqrt(max(2.0 - 2.0 * np.sqrt(f), 0.0)))


def embed(state: QubitState) -> SphereCoord:
    x = embed_stokes(state.stokes)
    # renormalize against rounding so the sphere invariant holds to EPS
    x = 0.5 * x / np.linalg.norm(x)
    return SphereCoord(*x)


def project(coord: SphereCoord) -> QubitState:
    s = project_coords(coord.vector)
    n = np.linalg.norm(s)
    if n > 1.0:
        s = s / n
    return QubitState.from_vector(s)


# ---------------------------------------------------------------------------
# waveplate analyzer (QWP -> HWP -> PBS, outcome 0 = transmitted H port)
# ---------------------------------------------------------------------------


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate_jones(theta_deg: float, retardance: float) -> np.ndarray:
    """Jones matrix of a retarder with fast axis at ``theta_deg`` from horizontal."""
    t = np.deg2rad(theta_deg)
    return _rotation(t) @ np.diag([1.0, np.exp(1j * retardance)]) @ _rotation(-t)


def analyzer_state(theta_q: float, theta_h: float) -> np.ndarray:
    """Input polarization that the analyzer sends fully to the H port."""
    u = waveplate_jones(theta_h, np.pi) @ waveplate_jones(theta_q, np.pi / 2)
    return u.conj().T @ np.array([1.0, 0.0], dtype=complex)


def waveplate_axis(theta_q: float, theta_h: float) -> np.ndarray:
    psi = analyzer_state(theta_q, theta_h)
    return rho_to_stokes(np.outer(psi, psi.conj()))


def waveplate_povm(theta_q: float, theta_h: float) -> Povm:
    return Povm.projective(waveplate_axis(theta_q, theta_h))


def quantize_angle(theta: float, step: float = 0.1) -> float:
    return round(round(theta / step) * step, 10)


def waveplate_angles_for_axis(axis: Sequence[float]) -> Tuple[float, float]:
    """Plate angles (degrees) realizing a given measurement axis.

    In optics Stokes coordinates (H/V, D/A, circular) the analyzed state has
    ellipse orientation ``theta_q`` and ellipticity set by ``2 theta_h - theta_q``.
    The sign of the circular part is fixed by checking the forward model.
    """
    b = np.asarray(axis, dtype=float)
    b = b / np.linalg.norm(b)
    orient = 0.5 * np.degrees(np.arctan2(b[0], b[2]))
    chi = 0.5 * np.degrees(np.arcsin(np.clip(b[1], -1.0, 1.0)))
    best = None
    for sign in (1.0, -1.0):
        tq = orient
        th = 0.5 * (tq + sign * chi)
        err = np.linalg.norm(waveplate_axis(tq, th) - b)
        if best is None or err < best[0]:
            best = (err, tq, th)
    return float(best[1]), float(best[2])


def mub_axes() -> Tuple[MeasurementConfig, MeasurementConfig, MeasurementConfig]:
    return tuple(MeasurementConfig.along(e) for e in np.eye(3))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def random_unit_vectors(rng: np.random.Generator, n: int, dim: int = 3) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def rotation_between(u: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Proper rotation matrix taking unit vector ``u`` onto unit vector ``v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    c = float(u @ v)
    w = np.cross(u, v)
    s = np.linalg.norm(w)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # half-turn about any axis perpendicular to u
        p = np.eye(3)[np.argmin(np.abs(u))]
        p = p - (p @ u) * u
        p /= np.linalg.norm(p)
        return 2.0 * np.outer(p, p) - np.eye(3)
    k = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    return np.eye(3) + k + k @ k * ((1 - c) / s**2)
