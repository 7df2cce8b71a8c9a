"""Detector-event probabilities for the ideal and noisy analyzer models.

All mechanisms share one expression,

    p_g  proportional to  Tr[M_g rho] * eta_g * lambda_s + lambda_d_g,

with ``eta_g = 1`` when the efficiency model is off and ``lambda_d_g = 0``
when dark counts are off. Efficiency acts on photons before detection and
dark counts are added at the detector, so they are not attenuated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .qubit import Povm, QubitState


class DegenerateModelError(ValueError):
    """The noise model assigns zero total rate to every outcome."""


@dataclass(frozen=True)
class NoiseModel:
    source_rate: float = 1.0
    dark_rates: Tuple[float, ...] = (0.0, 0.0)
    efficiencies: Tuple[float, ...] = (1.0, 1.0)
    dark_counts: bool = False
    efficiency: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dark_rates", tuple(float(x) for x in self.dark_rates))
        object.__setattr__(self, "efficiencies", tuple(float(x) for x in self.efficiencies))
        if not (np.isfinite(self.source_rate) and self.source_rate > 0):
            raise ValueError("source_rate must be positive and finite")
        if any(not np.isfinite(x) or x < 0 for x in self.dark_rates):
            raise ValueError("dark rates must be finite and non-negative")
        if any(not np.isfinite(x) or not 0 < x <= 1 for x in self.efficiencies):
            raise ValueError("efficiencies must lie in (0, 1]")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def with_dark_counts(cls, source_rate: float, dark_rates: Sequence[float]) -> "NoiseModel":
        return cls(source_rate=source_rate, dark_rates=tuple(dark_rates), dark_counts=True)

    @classmethod
    def with_efficiencies(cls, efficiencies: Sequence[float]) -> "NoiseModel":
        return cls(efficiencies=tuple(efficiencies), efficiency=True)

    @property
    def is_ideal(self) -> bool:
        return not (self.dark_counts and any(self.dark_rates)) and not (
            self.efficiency and len(set(self.efficiencies)) > 1
        )

    @property
    def is_port_symmetric(self) -> bool:
        """True when swapping the two outcome ports leaves the model unchanged."""
        dark_ok = not self.dark_counts or len(set(self.dark_rates)) <= 1
        eff_ok = not self.efficiency or len(set(self.efficiencies)) <= 1
        return dark_ok and eff_ok

    def _terms(self, n_outcomes: int):
        eta = np.asarray(self.efficiencies if self.efficiency else (1.0,) * n_outcomes)
        dark = np.asarray(self.dark_rates if self.dark_counts else (0.0,) * n_outcomes)
        if len(eta) != n_outcomes or len(dark) != n_outcomes:
            raise ValueError(f"noise model is defined for {len(eta)} outcomes, POVM has {n_outcomes}")
        return eta * self.source_rate, dark

    def apply(self, born: np.ndarray) -> np.ndarray:
        """Map Born probabilities ``(..., G)`` to detector-event probabilities."""
        born = np.asarray(born, dtype=float)
        if not self.dark_counts and not self.efficiency:
            return born
        gain, dark = self._terms(born.shape[-1])
        rates = born * gain + dark
        total = rates.sum(axis=-1, keepdims=True)
        if np.any(total <= 0):
            raise DegenerateModelError("all outcome rates vanish for this state and setting")
        return rates / total

    def to_dict(self) -> dict:
        return {
            "source_rate": self.source_rate,
            "dark_rates": list(self.dark_rates),
            "efficiencies": list(self.efficiencies),
            "dark_counts": self.dark_counts,
            "efficiency": self.efficiency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(
            source_rate=d.get("source_rate", 1.0),
            dark_rates=tuple(d.get("dark_rates", (0.0, 0.0))),
            efficiencies=tuple(d.get("efficiencies", (1.0, 1.0))),
            dark_counts=bool(d.get("dark_counts", False)),
            efficiency=bool(d.get("efficiency", False)),
        )


IDEAL = NoiseModel()


@dataclass(frozen=True)
class OutcomeCounts:
    counts: Tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(x) for x in self.counts)
        if any(x != y for x, y in zip(c, self.counts)) or any(x < 0 for x in c):
            raise ValueError(f"counts must be non-negative integers, got {self.counts!r}")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    def __len__(self):
        return len(self.counts)


def outcome_probs(state: QubitState, povm: Povm, noise: NoiseModel = IDEAL) -> np.ndarray:
    return noise.apply(povm.probs_stokes(state.stokes))


def outcome_probs_stokes(s: np.ndarray, povm: Povm, noise: NoiseModel = IDEAL) -> np.ndarray:
    return noise.apply(povm.probs_stokes(s))


def log_likelihood_terms(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """``sum_g counts_g log probs_g`` over the last axis; ``0 log 0 = 0``, ``c log 0 = -inf``."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.log(np.where(counts > 0, probs, 1.0))
    return (counts * logp).sum(axis=-1)


def block_log_likelihood(counts: OutcomeCounts, probs: np.ndarray) -> float:
    """Log-likelihood of a block of outcomes, without the multinomial coefficient."""
    c = counts.as_array() if isinstance(counts, OutcomeCounts) else np.asarray(counts, dtype=float)
    return float(log_likelihood_terms(c, probs))
