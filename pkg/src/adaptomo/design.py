"""Measurement selection: expected information gain and baseline schedules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .inference import Posterior
from .likelihoods import IDEAL, NoiseModel
from .qubit import MeasurementConfig, QubitState, random_unit_vectors, rotation_between

TIE_ATOL = 1e-12
_TINY = 1e-300


def entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy in nats over the last axis."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=-1)


def binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    return -(p * np.log(np.maximum(p, _TINY)) + q * np.log(np.maximum(q, _TINY)))


def info_gains(post: Posterior, axes: np.ndarray, noise: NoiseModel = IDEAL) -> np.ndarray:
    """Expected information gain for each projective axis in an ``(C, 3)`` array.

    ``H[predictive] - E_posterior H[p(outcome | state)]``, clipped at zero.
    """
    axes = np.atleast_2d(np.asarray(axes, dtype=float))
    w = post.weights
    p0 = np.clip(0.5 * (1.0 + post.stokes @ axes.T), 0.0, 1.0)  # (S, C)
    if not noise.is_ideal:
        p0 = noise.apply(np.stack([p0, 1.0 - p0], axis=-1))[..., 0]
    pred = w @ p0
    gain = binary_entropy(pred) - w @ binary_entropy(p0)
    return np.maximum(gain, 0.0)


def info_gain(post: Posterior, config: MeasurementConfig, noise: NoiseModel = IDEAL) -> float:
    return float(info_gains(post, config.vector[None, :], noise)[0])


def argmax_lowest(gains: np.ndarray, atol: float = TIE_ATOL) -> int:
    """Index of the maximum; values within ``atol`` of it count as ties, broken by lowest index."""
    gains = np.asarray(gains, dtype=float)
    return int(np.flatnonzero(gains >= gains.max() - atol)[0])


def fibonacci_hemisphere(n: int) -> np.ndarray:
    """Upper half (z > 0) of a ``2n``-point spherical Fibonacci lattice."""
    m = 2 * n
    i = np.arange(m)
    z = 1.0 - (2.0 * i + 1.0) / m
    r = np.sqrt(1.0 - z * z)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return pts[:n]


def canonical_hemisphere(axes: np.ndarray) -> np.ndarray:
    """Flip each axis so its first non-zero component (z, then y, then x) is positive."""
    axes = np.array(axes, dtype=float)
    for k in (2, 1, 0):
        key = axes[:, k]
        flip = key < 0
        # only rows not yet decided by a higher-priority component
        if k < 2:
            flip &= np.all(axes[:, k + 1 :] == 0, axis=1)
        axes[flip] *= -1
    return axes


def block_size(n: int) -> int:
    """Measurements to take in the next block after ``n`` so far."""
    return max(int(n) // 100, 1)


@dataclass(frozen=True)
class CandidateConfig:
    n_grid: int = 30
    n_fresh: int = 10
    include_mean_axis: bool = True

    def __post_init__(self):
        if self.n_grid < 0 or self.n_fresh < 0:
            raise ValueError("candidate counts must be non-negative")
        if self.n_grid + self.n_fresh + int(self.include_mean_axis) < 1:
            raise ValueError("candidate set is empty")


@dataclass(frozen=True)
class Adaptive:
    candidates: CandidateConfig = CandidateConfig()
    name = "adaptive"


@dataclass(frozen=True)
class RandomAxes:
    name = "random"


@dataclass(frozen=True)
class MubCycle:
    """Cycle through three mutually unbiased axes.

    ``alignment`` is ``generic`` (the lab x, y, z axes), ``best`` (one axis
    along the true state) or ``worst`` (true state equally biased to all three).
    The aligned modes need the hidden true state, so they are simulation-only.
    """

    alignment: str = "generic"
    name = "mub"

    def __post_init__(self):
        if self.alignment not in ("generic", "best", "worst"):
            raise ValueError(f"unknown MUB alignment {self.alignment!r}")

    def axes(self, true_state: Optional[QubitState] = None) -> np.ndarray:
        base = np.eye(3)
        if self.alignment == "generic":
            return base
        if true_state is None or true_state.radius == 0:
            raise ValueError(f"MUB alignment {self.alignment!r} needs a true state with a direction")
        target = true_state.stokes / true_state.radius
        source = base[2] if self.alignment == "best" else np.ones(3) / np.sqrt(3.0)
        rot = rotation_between(source, target)
        return base @ rot.T


Strategy = Union[Adaptive, RandomAxes, MubCycle]


def candidate_axes(cands: CandidateConfig, post: Posterior, rng: np.random.Generator,
                   canonicalize: bool = True) -> np.ndarray:
    """Candidate set: fixed quasi-uniform grid, fresh random axes, then the posterior-mean axis."""
    parts = [fibonacci_hemisphere(cands.n_grid)]
    if cands.n_fresh:
        parts.append(random_unit_vectors(rng, cands.n_fresh))
    if cands.include_mean_axis:
        m = post.mean_stokes()
        n = np.linalg.norm(m)
        if n > 1e-12:
            parts.append((m / n)[None, :])
    axes = np.concatenate(parts, axis=0)
    if canonicalize:
        axes = canonical_hemisphere(axes)
    return axes


def select_measurement(strategy: Strategy, post: Posterior, noise: NoiseModel = IDEAL, step: int = 0,
                       rng: Optional[np.random.Generator] = None,
                       true_state: Optional[QubitState] = None) -> MeasurementConfig:
    """Choose the next analyzer axis.

    ``step`` counts selections made so far (used by the MUB cycle).
    Antipodal candidates are folded together only when the noise model is
    symmetric under swapping the two ports.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if isinstance(strategy, Adaptive):
        axes = candidate_axes(strategy.candidates, post, rng, canonicalize=noise.is_port_symmetric)
        gains = info_gains(post, axes, noise)
        return MeasurementConfig.along(axes[argmax_lowest(gains)])
    if isinstance(strategy, RandomAxes):
        return MeasurementConfig.along(random_unit_vectors(rng, 1)[0])
    if isinstance(strategy, MubCycle):
        return MeasurementConfig.along(strategy.axes(true_state)[step % 3])
    raise TypeError(f"unknown strategy {strategy!r}")
