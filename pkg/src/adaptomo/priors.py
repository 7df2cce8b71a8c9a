"""Prior samplers over single-qubit density matrices.

``BuresHaar`` is the uniform measure in the Bures metric, obtained by drawing
a uniform point on the radius-1/2 3-sphere and dropping the fourth
coordinate. ``InducedPure(d)`` traces a ``d``-dimensional environment out of
a Haar-random pure state; it is kept for comparison with the Bures measure,
not as a default inference prior.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .qubit import QubitState, rho_to_stokes


@dataclass(frozen=True)
class BuresHaar:
    name = "bures"


@dataclass(frozen=True)
class InducedPure:
    env_dim: int = 2
    name = "induced"

    def __post_init__(self):
        if int(self.env_dim) != self.env_dim or self.env_dim < 2:
            raise ValueError(f"env_dim must be an integer >= 2, got {self.env_dim!r}")


PriorKind = Union[BuresHaar, InducedPure]


def _check_count(count) -> int:
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count!r}")
    return int(count)


def sample_sphere_coords(count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the radius-1/2 3-sphere, reflected into x4 >= 0."""
    g = rng.standard_normal((count, 4))
    x = 0.5 * g / np.linalg.norm(g, axis=1, keepdims=True)
    x[:, 3] = np.abs(x[:, 3])
    return x


def octahedral_group() -> np.ndarray:
    """The 48 signed permutation matrices (full symmetry group of the cube)."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            m[range(3), perm] = signs
            mats.append(m)
    return np.array(mats)


def symmetrize_stokes(base: np.ndarray, count: int) -> np.ndarray:
    """Orbits of ``base`` under the cube group, truncated to ``count`` rows.

    Each row is still marginally a draw from any rotation-invariant prior, but
    the cloud has no dipole or quadrupole anisotropy, which removes most of the
    Monte Carlo tilt in early information-gain estimates.
    """
    orbits = np.einsum("gij,nj->ngi", octahedral_group(), np.asarray(base, dtype=float))
    return orbits.reshape(-1, 3)[:count]


def _induced_stokes(env_dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, 2, env_dim)) + 1j * rng.standard_normal((count, 2, env_dim))
    rho = g @ np.conj(np.swapaxes(g, 1, 2))
    rho /= np.trace(rho, axis1=1, axis2=2)[:, None, None]
    return rho_to_stokes(rho)


def sample_prior_stokes(kind: PriorKind, count: int, seed=None) -> np.ndarray:
    """Array form of :func:`sample_prior`: an ``(count, 3)`` Stokes array."""
    count = _check_count(count)
    rng = np.random.default_rng(seed)
    if isinstance(kind, BuresHaar):
        s = 2.0 * sample_sphere_coords(count, rng)[:, :3]
    elif isinstance(kind, InducedPure):
        s = _induced_stokes(kind.env_dim, count, rng)
    else:
        raise TypeError(f"unknown prior kind {kind!r}")
    # guard the |s| <= 1 invariant against rounding
    norm = np.linalg.norm(s, axis=1)
    over = norm > 1.0
    s[over] /= norm[over, None]
    return s


def sample_prior(kind: PriorKind, count: int, seed=None) -> list:
    return [QubitState.from_vector(row) for row in sample_prior_stokes(kind, count, seed)]


@dataclass
class SlabProfile:
    """Radial histogram of the samples lying in the slab ``|s3| < halfwidth``."""

    edges: np.ndarray
    counts: np.ndarray
    n_total: int
    halfwidth: float

    @property
    def n_selected(self) -> int:
        return int(self.counts.sum())

    @property
    def is_empty(self) -> bool:
        return self.n_selected == 0

    @property
    def density(self) -> np.ndarray:
        """Counts per unit disc area, normalized to the selected total (NaN when empty)."""
        area = np.pi * np.diff(self.edges**2)
        if self.is_empty:
            return np.full(len(self.counts), np.nan)
        return self.counts / area / self.n_selected

    def to_csv(self, dest) -> None:
        """Write ``radius_bin_low, radius_bin_high, count`` rows to a path or open text stream."""
        if not hasattr(dest, "write"):
            with Path(dest).open("w", newline="") as fh:
                return self.to_csv(fh)
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(["radius_bin_low", "radius_bin_high", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def slab_density_profile(samples, slab_halfwidth: float, bins: int = 10, edges: Optional[np.ndarray] = None) -> SlabProfile:
    """Histogram of in-plane radius ``sqrt(s1^2 + s2^2)`` for samples near the s1-s2 plane.

    ``samples`` may be a list of :class:`QubitState` or an ``(n, 3)`` array.
    An empty selection gives a profile with ``is_empty`` set, not an error.
    """
    if not slab_halfwidth > 0:
        raise ValueError("slab_halfwidth must be positive")
    s = np.asarray([x.stokes for x in samples] if len(samples) and isinstance(samples[0], QubitState) else samples, dtype=float)
    s = s.reshape(-1, 3)
    if edges is None:
        edges = np.linspace(0.0, 1.0, bins + 1)
    sel = s[np.abs(s[:, 2]) < slab_halfwidth]
    r = np.hypot(sel[:, 0], sel[:, 1])
    counts, _ = np.histogram(np.clip(r, 0.0, edges[-1]), bins=edges)
    return SlabProfile(np.asarray(edges, dtype=float), counts, len(s), float(slab_halfwidth))
