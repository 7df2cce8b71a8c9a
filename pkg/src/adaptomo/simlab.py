"""Simulated analyzer with a hidden true state.

Outcomes are drawn from the categorical event distribution directly. Under
independent Poisson source and dark-count processes, the label of each
registered event is exactly that categorical draw, so no event timing is
simulated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence, Tuple

import numpy as np

from .likelihoods import IDEAL, NoiseModel, OutcomeCounts, outcome_probs
from .qubit import MeasurementConfig, QubitState

EVENT_FIELDS = ("step", "axis", "waveplate_angles", "k", "counts")


class PilotEstimationError(RuntimeError):
    pass


@dataclass
class Apparatus:
    true_state: QubitState
    noise: NoiseModel = IDEAL
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    log: Optional[IO[str]] = None
    n: int = 0

    def draw_block(self, config: MeasurementConfig, k: int) -> OutcomeCounts:
        if int(k) != k or k < 1:
            raise ValueError("block size must be a positive integer")
        p = outcome_probs(self.true_state, config.povm, self.noise)
        counts = self.rng.multinomial(int(k), p / p.sum())
        out = OutcomeCounts(tuple(int(c) for c in counts))
        self.n += int(k)
        if self.log is not None:
            self.log.write(event_line(self.n, config, out) + "\n")
        return out

    def pilot_estimate(self, n_dark: float, n_bright: float) -> "PilotEstimate":
        return pilot_estimate(self, n_dark, n_bright)


def event_line(step: int, config: MeasurementConfig, counts: OutcomeCounts) -> str:
    """One event-log record; keys appear in ``EVENT_FIELDS`` order."""
    rec = {
        "step": int(step),
        "axis": [float(x) for x in config.axis],
        "waveplate_angles": list(config.waveplate_angles) if config.waveplate_angles else None,
        "k": counts.total,
        "counts": list(counts.counts),
    }
    return json.dumps(rec)


def read_event_log(lines) -> Tuple[dict, list]:
    """Parse an event log into ``(header, [(config, counts), ...])``."""
    header = {}
    events = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "header" in rec:
            header = rec["header"]
            continue
        wp = tuple(rec["waveplate_angles"]) if rec.get("waveplate_angles") else None
        cfg = MeasurementConfig(tuple(rec["axis"]), wp)
        counts = OutcomeCounts(tuple(rec["counts"]))
        if counts.total != rec["k"]:
            raise ValueError(f"event at step {rec['step']}: counts do not sum to k")
        events.append((cfg, counts))
    return header, events


@dataclass(frozen=True)
class PilotEstimate:
    """Noise ratios from a pilot run.

    ``dark_ratios[g]`` estimates ``lambda_d_g / (lambda_s * eta_ref)`` and
    ``efficiency_ratio`` estimates ``eta_0 / eta_ref``, where the reference is
    the last channel. Both are exactly what the likelihood depends on.
    """

    dark_ratios: Tuple[float, ...]
    dark_ratio_se: Tuple[float, ...]
    efficiency_ratio: float
    efficiency_ratio_se: float

    def noise_model(self) -> NoiseModel:
        # rescale so the larger efficiency is 1; dark ratios follow the same scale
        m = max(self.efficiency_ratio, 1.0)
        return NoiseModel(
            source_rate=1.0,
            dark_rates=tuple(r / m for r in self.dark_ratios),
            efficiencies=(self.efficiency_ratio / m, 1.0 / m),
            dark_counts=True,
            efficiency=True,
        )


def pilot_estimate(app: Apparatus, n_dark: float, n_bright: float) -> PilotEstimate:
    """Estimate dark-count and efficiency ratios by two timed counting runs.

    Durations are in units of the mean source inter-arrival time ``1/lambda_s``.
    The dark run blocks the source; detector ``g`` registers
    ``Poisson(lambda_d_g * T)`` counts. The bright run feeds unpolarized light
    (Born terms 1/2 on both ports) and registers
    ``Poisson(lambda_s * eta_g * T / 2 + lambda_d_g * T)``.

    Relative standard errors are roughly ``1/sqrt(N)`` in the counts, so a
    dark ratio ``r`` to relative error ``e`` needs ``n_dark ~ 1 / (r e^2)``,
    and an efficiency ratio needs ``n_bright ~ 4 / e^2``.
    """
    if n_dark <= 0 or n_bright <= 0:
        raise ValueError("pilot durations must be positive")
    noise = app.noise
    lam_s = noise.source_rate
    dark = np.asarray(noise.dark_rates if noise.dark_counts else (0.0, 0.0))
    eta = np.asarray(noise.efficiencies if noise.efficiency else (1.0, 1.0))
    t_dark = n_dark / lam_s
    t_bright = n_bright / lam_s
    d = app.rng.poisson(dark * t_dark).astype(float)
    b = app.rng.poisson((0.5 * lam_s * eta + dark) * t_bright).astype(float)

    d_rate, d_var = d / t_dark, np.maximum(d, 1.0) / t_dark**2
    b_rate, b_var = b / t_bright, np.maximum(b, 1.0) / t_bright**2
    signal = b_rate - d_rate  # lambda_s * eta_g / 2
    signal_var = b_var + d_var
    if b.sum() == 0 or np.any(signal <= 0):
        raise PilotEstimationError("bright run registered no source photons on some channel")

    ref, ref_var = 2.0 * signal[-1], 4.0 * signal_var[-1]  # lambda_s * eta_ref
    ratios = d_rate / ref
    ratio_se = np.sqrt(d_var / ref**2 + d_rate**2 * ref_var / ref**4)
    eff = signal[0] / signal[-1]
    eff_se = eff * np.sqrt(signal_var[0] / signal[0] ** 2 + signal_var[-1] / signal[-1] ** 2)
    return PilotEstimate(tuple(ratios), tuple(ratio_se), float(eff), float(eff_se))
