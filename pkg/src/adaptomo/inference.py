"""Sequential importance sampling with resample-move over qubit states.

Particles live on the radius-1/2 3-sphere (x4 >= 0). Uniform measure on that
sphere is the Bures prior, so Metropolis-Hastings moves with an isotropic
proposal only need the likelihood ratio (plus a prior density ratio for the
induced priors).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .likelihoods import IDEAL, NoiseModel, OutcomeCounts, log_likelihood_terms
from .priors import (BuresHaar, InducedPure, PriorKind, sample_prior_stokes, sample_sphere_coords,
                     symmetrize_stokes)
from .qubit import MeasurementConfig, QubitState, embed_stokes, fidelity_stokes

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "adaptomo.posterior/1"


class FilterDegeneracyError(RuntimeError):
    """Every particle has zero likelihood; restart with more particles."""


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 1000
    ess_threshold: float = 0.5
    mh_steps: int = 20
    mh_step_scale: float = 0.1
    target_acceptance: float = 0.35
    symmetric_init: bool = True

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise ValueError("n_particles must be an integer >= 2")
        if not 0 <= self.ess_threshold <= 1:
            raise ValueError("ess_threshold is a fraction of n_particles in [0, 1]")
        if self.mh_steps < 0:
            raise ValueError("mh_steps must be >= 0")
        if not self.mh_step_scale > 0:
            raise ValueError("mh_step_scale must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")


class History:
    """Observed data compressed to total counts per distinct setting."""

    def __init__(self):
        self._configs: Dict[tuple, MeasurementConfig] = {}
        self._counts: Dict[tuple, np.ndarray] = {}
        self.n = 0
        self._stack = None

    def add(self, config: MeasurementConfig, counts) -> None:
        c = np.asarray(counts.counts if isinstance(counts, OutcomeCounts) else counts, dtype=np.int64)
        key = config.key()
        if key in self._counts:
            self._counts[key] = self._counts[key] + c
        else:
            self._configs[key] = config
            self._counts[key] = c.copy()
        self.n += int(c.sum())
        self._stack = None

    def __len__(self):
        return len(self._counts)

    def items(self):
        for key, cfg in self._configs.items():
            yield cfg, self._counts[key]

    def _linear_forms(self, noise: NoiseModel):
        """Per-row numerators and per-setting denominators as affine functions of s.

        Event rates are ``eta_g lambda_s (a_g + v_g.s) + lambda_d_g``; only the
        (setting, outcome) rows with a non-zero count contribute a log term.
        """
        if self._stack is None or self._stack[0] != noise:
            povms = [cfg.povm for cfg in self._configs.values()]
            a = np.array([p.a for p in povms])  # (M, G)
            v = np.array([p.v for p in povms])  # (M, G, 3)
            c = np.array(list(self._counts.values()), dtype=float)
            if noise.dark_counts or noise.efficiency:
                gain, dark = noise._terms(a.shape[1])
            else:
                gain, dark = np.ones(a.shape[1]), np.zeros(a.shape[1])
            num_a = a * gain + dark
            num_b = v * gain[None, :, None]
            seen = c > 0
            rows = (num_a[seen], num_b[seen], c[seen])
            den_a = num_a.sum(axis=1)
            den_b = num_b.sum(axis=1)
            n = c.sum(axis=1)
            if np.all(den_b == 0):
                den = (np.sum(n * np.log(den_a)), None, None, None)
            else:
                den = (0.0, den_a, den_b, n)
            self._stack = (noise, rows, den)
        return self._stack[1], self._stack[2]

    def log_likelihood(self, stokes: np.ndarray, noise: NoiseModel = IDEAL) -> np.ndarray:
        """Full-data log-likelihood for each row of an ``(S, 3)`` Stokes array."""
        stokes = np.asarray(stokes, dtype=float)
        if not self._counts:
            return np.zeros(len(stokes))
        (ra, rb, rc), (const, da, db, dn) = self._linear_forms(noise)
        x = np.maximum(stokes @ rb.T + ra, 0.0)
        with np.errstate(divide="ignore"):
            out = np.log(x) @ rc
            if da is not None:
                out -= np.log(stokes @ db.T + da) @ dn
        return out - const

    def to_list(self) -> list:
        return [
            {"axis": list(cfg.axis), "waveplate_angles": list(cfg.waveplate_angles) if cfg.waveplate_angles else None,
             "counts": [int(x) for x in counts]}
            for cfg, counts in self.items()
        ]

    @classmethod
    def from_list(cls, entries) -> "History":
        h = cls()
        for e in entries:
            wp = tuple(e["waveplate_angles"]) if e.get("waveplate_angles") else None
            h.add(MeasurementConfig(tuple(e["axis"]), wp), e["counts"])
        return h


def _prior_logpdf(prior: PriorKind, coords: np.ndarray) -> np.ndarray:
    """Log density of the prior relative to the uniform measure on the sphere."""
    if isinstance(prior, InducedPure):
        # induced density in the ball is (1 - r^2)^(K-2); Bures is (1 - r^2)^(-1/2)
        with np.errstate(divide="ignore"):
            return (prior.env_dim - 1.5) * np.log(4.0 * coords[:, 3] ** 2)
    return np.zeros(len(coords))


class Posterior:
    """Weighted particle approximation of the posterior over qubit states.

    Log-weights are stored unnormalized with their maximum shifted to zero.
    ``loglik`` caches each particle's full-data log-likelihood so that the
    MH move only evaluates proposals.
    """

    def __init__(self, coords, log_weights, loglik, history: History, config: FilterConfig,
                 rng: np.random.Generator, prior: PriorKind = BuresHaar(), mh_scale: Optional[float] = None):
        self.coords = np.asarray(coords, dtype=float)
        self.log_weights = np.asarray(log_weights, dtype=float)
        self.loglik = np.asarray(loglik, dtype=float)
        self.history = history
        self.config = config
        self.rng = rng
        self.prior = prior
        self.mh_scale = config.mh_step_scale if mh_scale is None else float(mh_scale)
        self.n_resamples = 0
        self.last_acceptance = float("nan")
        self._refresh()

    @classmethod
    def init(cls, prior: PriorKind = BuresHaar(), n_particles: Optional[int] = None,
             config: Optional[FilterConfig] = None, seed=None) -> "Posterior":
        config = config or FilterConfig()
        if n_particles is not None:
            config = FilterConfig(**{**asdict(config), "n_particles": n_particles})
        rng = np.random.default_rng(seed)
        S = config.n_particles
        n_base = -(-S // 48) if config.symmetric_init else S
        if isinstance(prior, BuresHaar):
            base = sample_sphere_coords(n_base, rng)
        else:
            base = embed_stokes(sample_prior_stokes(prior, n_base, rng))
        if config.symmetric_init:
            coords = embed_stokes(symmetrize_stokes(2.0 * base[:, :3], S))
        else:
            coords = base
        return cls(coords, np.zeros(S), np.zeros(S), History(), config, rng, prior)

    # -- derived quantities -------------------------------------------------

    def _refresh(self):
        self.stokes = 2.0 * self.coords[:, :3]

    @property
    def n_particles(self) -> int:
        return len(self.coords)

    @property
    def n(self) -> int:
        return self.history.n

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def ess(self) -> float:
        w = np.exp(self.log_weights - self.log_weights.max())
        return float(w.sum() ** 2 / np.sum(w * w))

    def mean_stokes(self) -> np.ndarray:
        m = self.weights @ self.stokes
        n = np.linalg.norm(m)
        return m / n if n > 1.0 else m

    def mean_state(self) -> QubitState:
        return QubitState.from_vector(self.mean_stokes())

    def mean_infidelity(self, reference) -> float:
        ref = reference.stokes if isinstance(reference, QubitState) else np.asarray(reference, dtype=float)
        return float(self.weights @ (1.0 - fidelity_stokes(self.stokes, ref)))

    def particle_probs(self, config: MeasurementConfig, noise: NoiseModel = IDEAL) -> np.ndarray:
        return noise.apply(config.povm.probs_stokes(self.stokes))

    def predictive_probs(self, config: MeasurementConfig, noise: NoiseModel = IDEAL) -> np.ndarray:
        return self.weights @ self.particle_probs(config, noise)

    # -- updates --------------------------------------------------------------

    def update(self, config: MeasurementConfig, counts, noise: NoiseModel = IDEAL) -> "Posterior":
        """Fold one block of outcomes at a single setting into the weights.

        Cost is O(S * G) in the number of particles and outcomes; previous data
        is only touched if the ESS drop triggers :meth:`resample_move`.
        """
        c = counts.as_array() if isinstance(counts, OutcomeCounts) else np.asarray(counts, dtype=float)
        inc = log_likelihood_terms(c, self.particle_probs(config, noise))
        lw = self.log_weights + inc
        top = lw.max()
        if not np.isfinite(top):
            raise FilterDegeneracyError(
                f"all {self.n_particles} particles have zero likelihood after n={self.n}; "
                "restart with more particles"
            )
        self.log_weights = lw - top
        self.loglik = self.loglik + inc
        self.history.add(config, c)
        if self.ess() < self.config.ess_threshold * self.n_particles:
            self.resample_move(noise)
        return self

    def resample(self) -> None:
        """Multinomial redraw by weight; weights become uniform."""
        idx = self.rng.choice(self.n_particles, size=self.n_particles, p=self.weights)
        self.coords = self.coords[idx]
        self.loglik = self.loglik[idx]
        self.log_weights = np.zeros(self.n_particles)
        self._refresh()

    def move(self, noise: NoiseModel = IDEAL, steps: Optional[int] = None) -> float:
        """Metropolis-Hastings rejuvenation on the sphere; returns the mean acceptance rate."""
        steps = self.config.mh_steps if steps is None else steps
        if steps == 0:
            return float("nan")
        S = self.n_particles
        u = 2.0 * self.coords
        cur = self.loglik + _prior_logpdf(self.prior, self.coords)
        scale = self.mh_scale
        target = self.config.target_acceptance
        rates = []
        for t in range(steps):
            xi = self.rng.standard_normal((S, 4)) * scale
            xi -= np.sum(xi * u, axis=1, keepdims=True) * u
            prop = u + xi
            prop /= np.linalg.norm(prop, axis=1, keepdims=True)
            prop[:, 3] = np.abs(prop[:, 3])
            ll = self.history.log_likelihood(prop[:, :3], noise)
            new = ll + _prior_logpdf(self.prior, 0.5 * prop)
            with np.errstate(invalid="ignore"):
                log_ratio = new - cur
            accept = np.log(self.rng.random(S)) < np.nan_to_num(log_ratio, nan=-np.inf)
            u[accept] = prop[accept]
            cur[accept] = new[accept]
            self.loglik[accept] = ll[accept]
            rate = float(accept.mean())
            rates.append(rate)
            # Robbins-Monro on log scale
            scale = float(np.clip(scale * np.exp((rate - target) / np.sqrt(t + 1.0)), 1e-8, 2.0))
        self.coords = 0.5 * u
        self._refresh()
        self.mh_scale = scale
        self.last_acceptance = float(np.mean(rates))
        return self.last_acceptance

    def resample_move(self, noise: NoiseModel = IDEAL) -> "Posterior":
        self.resample()
        acc = self.move(noise)
        self.n_resamples += 1
        log.debug("resample-move at n=%d: acceptance %.3f, scale %.3g", self.n, acc, self.mh_scale)
        return self

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        prior = {"kind": "bures"} if isinstance(self.prior, BuresHaar) else {"kind": "induced", "env_dim": self.prior.env_dim}
        return {
            "format": SNAPSHOT_FORMAT,
            "config": asdict(self.config),
            "prior": prior,
            "n": self.n,
            "coords": self.coords.tolist(),
            "log_weights": self.log_weights.tolist(),
            "loglik": self.loglik.tolist(),
            "history": self.history.to_list(),
            "mh_scale": self.mh_scale,
            "n_resamples": self.n_resamples,
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Posterior":
        if d.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format {d.get('format')!r}")
        state = d["rng_state"]
        bitgen = getattr(np.random, state["bit_generator"])()
        bitgen.state = state
        p = d["prior"]
        prior = BuresHaar() if p["kind"] == "bures" else InducedPure(p["env_dim"])
        post = cls(d["coords"], d["log_weights"], d["loglik"], History.from_list(d["history"]),
                   FilterConfig(**d["config"]), np.random.Generator(bitgen), prior, d["mh_scale"])
        post.n_resamples = d.get("n_resamples", 0)
        if post.n != d["n"]:
            raise ValueError("snapshot history does not add up to its step count")
        return post

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Posterior":
        return cls.from_dict(json.loads(Path(path).read_text()))


def ess_from_weights(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))
