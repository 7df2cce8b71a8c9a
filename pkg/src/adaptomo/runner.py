"""Multi-run simulated tomography experiments and power-law analysis.

Seed derivation: run ``i`` of an experiment with master seed ``m`` uses
``numpy.random.SeedSequence([m, i])`` and spawns four independent children,
in order: true state, apparatus, particle filter, design. Strategies that
share a master seed therefore see the same true states and outcome streams
up to the point where their choices differ, and a replay of an event log with
the filter stream reproduces the recorded posterior exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .design import Adaptive, CandidateConfig, MubCycle, RandomAxes, Strategy, block_size, select_measurement
from .inference import FilterConfig, FilterDegeneracyError, Posterior
from .likelihoods import IDEAL, NoiseModel, OutcomeCounts
from .priors import BuresHaar, InducedPure, PriorKind
from .qubit import MeasurementConfig, QubitState, random_unit_vectors, waveplate_angles_for_axis
from .simlab import Apparatus, event_line, read_event_log

log = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
SUMMARY_FORMAT = "adaptomo.summary/1"
TRAJECTORY_COLUMNS = ("n", "s_axis_1", "s_axis_2", "s_axis_3", "theta_q", "theta_h", "k",
                      "count_0", "count_1", "infid_to_mean", "infid_to_true", "ess")
AVERAGE_COLUMNS = ("n", "infid_to_mean", "infid_to_true", "n_runs")


class ConfigError(ValueError):
    pass


class RunFailure(RuntimeError):
    def __init__(self, run_index: int, step: int, cause: Exception):
        super().__init__(f"run {run_index} failed at n={step}: {cause}")
        self.run_index = run_index
        self.step = step
        self.cause = cause


class FitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy = Adaptive()
    prior: PriorKind = BuresHaar()
    filter: FilterConfig = FilterConfig()
    noise: NoiseModel = IDEAL
    inference_noise: Optional[NoiseModel] = None
    n_measurements: int = 1000
    blocks: bool = False
    n_runs: int = 1
    seed: int = 0
    true_state: Union[str, Tuple[float, float, float]] = "random_pure"
    fit_window: Optional[Tuple[float, float]] = None
    n_checkpoints: int = 25
    waveplates: bool = False
    workers: int = 1

    def __post_init__(self):
        if int(self.n_measurements) != self.n_measurements or self.n_measurements < 0:
            raise ConfigError("n_measurements must be a non-negative integer")
        if int(self.n_runs) != self.n_runs or self.n_runs < 1:
            raise ConfigError("n_runs must be a positive integer")
        if self.n_checkpoints < 1:
            raise ConfigError("n_checkpoints must be positive")
        if isinstance(self.true_state, str):
            if self.true_state != "random_pure":
                raise ConfigError(f"unknown true_state spec {self.true_state!r}")
        else:
            object.__setattr__(self, "true_state", tuple(float(x) for x in self.true_state))
            QubitState.from_vector(self.true_state)
        if self.fit_window is not None:
            lo, hi = self.fit_window
            if not 0 < lo < hi:
                raise ConfigError("fit_window must satisfy 0 < low < high")
            object.__setattr__(self, "fit_window", (float(lo), float(hi)))

    @property
    def filter_noise(self) -> NoiseModel:
        return self.noise if self.inference_noise is None else self.inference_noise

    def default_fit_window(self) -> Tuple[float, float]:
        if self.fit_window is not None:
            return self.fit_window
        n = self.n_measurements
        return (float(max(math.ceil(n / 100), 32)), float(n))

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "strategy": strategy_to_dict(self.strategy),
            "prior": prior_to_dict(self.prior),
            "filter": asdict(self.filter),
            "noise": self.noise.to_dict(),
            "inference_noise": None if self.inference_noise is None else self.inference_noise.to_dict(),
            "n_measurements": self.n_measurements,
            "blocks": self.blocks,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "true_state": self.true_state if isinstance(self.true_state, str) else list(self.true_state),
            "fit_window": None if self.fit_window is None else list(self.fit_window),
            "n_checkpoints": self.n_checkpoints,
            "waveplates": self.waveplates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {CONFIG_SCHEMA_VERSION})")
        d.pop("output", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "strategy" in d:
                d["strategy"] = strategy_from_dict(d["strategy"])
            if "prior" in d:
                d["prior"] = prior_from_dict(d["prior"])
            if "filter" in d:
                d["filter"] = FilterConfig(**d["filter"])
            if "noise" in d:
                d["noise"] = NoiseModel.from_dict(d["noise"])
            if d.get("inference_noise") is not None:
                d["inference_noise"] = NoiseModel.from_dict(d["inference_noise"])
            if isinstance(d.get("true_state"), list):
                d["true_state"] = tuple(d["true_state"])
            if d.get("fit_window") is not None:
                d["fit_window"] = tuple(d["fit_window"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc


def strategy_to_dict(s: Strategy) -> dict:
    if isinstance(s, Adaptive):
        return {"kind": "adaptive", **asdict(s.candidates)}
    if isinstance(s, RandomAxes):
        return {"kind": "random"}
    if isinstance(s, MubCycle):
        return {"kind": "mub", "alignment": s.alignment}
    raise TypeError(s)


def strategy_from_dict(d: dict) -> Strategy:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "adaptive":
        return Adaptive(CandidateConfig(**d))
    if kind == "random":
        return RandomAxes()
    if kind == "mub":
        return MubCycle(**d)
    raise ConfigError(f"unknown strategy kind {kind!r}")


def prior_to_dict(p: PriorKind) -> dict:
    return {"kind": "bures"} if isinstance(p, BuresHaar) else {"kind": "induced", "env_dim": p.env_dim}


def prior_from_dict(d: dict) -> PriorKind:
    if d["kind"] == "bures":
        return BuresHaar()
    if d["kind"] == "induced":
        return InducedPure(int(d["env_dim"]))
    raise ConfigError(f"unknown prior kind {d['kind']!r}")


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    n: int
    axis: Optional[Tuple[float, float, float]]
    waveplate_angles: Optional[Tuple[float, float]]
    counts: Tuple[int, ...]
    infid_to_mean: float
    infid_to_true: float
    ess: float
    wall_clock: float = 0.0

    @property
    def k(self) -> int:
        return sum(self.counts)

    def csv_row(self) -> list:
        axis = self.axis if self.axis is not None else ("",) * 3
        wp = self.waveplate_angles if self.waveplate_angles is not None else ("",) * 2
        counts = tuple(self.counts) + (0,) * (2 - len(self.counts))
        return [self.n, *(_fmt(x) for x in axis), *(_fmt(x) for x in wp), self.k, *counts[:2],
                _fmt(self.infid_to_mean), _fmt(self.infid_to_true), _fmt(self.ess)]


def _fmt(x) -> str:
    return x if isinstance(x, str) else repr(float(x))


@dataclass
class RunResult:
    run_index: int
    true_state: QubitState
    records: List[RunRecord]
    events: List[str]
    n_resamples: int = 0


@dataclass(frozen=True)
class PowerLawFit:
    """``infidelity ~ prefactor * N**exponent`` fitted by least squares in log-log."""

    exponent: float
    prefactor: float
    exponent_se: float
    window: Tuple[float, float]
    n_points: int

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor, "exponent_se": self.exponent_se,
                "window": list(self.window), "n_points": self.n_points}


@dataclass
class ExperimentResult:
    config: RunConfig
    runs: List[RunResult]
    n: np.ndarray
    infid_to_true: np.ndarray
    infid_to_mean: np.ndarray
    fits: Dict[str, Optional[PowerLawFit]] = field(default_factory=dict)

    def summary(self) -> dict:
        seeds = [{"run": r.run_index, "seed_sequence": [self.config.seed, r.run_index]} for r in self.runs]
        return {
            "format": SUMMARY_FORMAT,
            "config": self.config.to_dict(),
            "seeds": seeds,
            "true_states": [list(r.true_state.stokes) for r in self.runs],
            "fits": {k: (None if v is None else v.to_dict()) for k, v in self.fits.items()},
            "final": {
                "n": int(self.n[-1]),
                "infid_to_true": float(self.infid_to_true[-1]),
                "infid_to_mean": float(self.infid_to_mean[-1]),
            },
            "versions": {"adaptomo": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        }


# ---------------------------------------------------------------------------
# power-law fitting
# ---------------------------------------------------------------------------


def fit_power_law(n: Sequence[float], infidelity: Sequence[float],
                  window: Optional[Tuple[float, float]] = None, min_points: int = 5) -> PowerLawFit:
    """Ordinary least squares of ``log infidelity`` on ``log N`` inside ``window``."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(infidelity, dtype=float)
    if window is None:
        window = (float(n.min()), float(n.max()))
    lo, hi = window
    sel = (n >= lo) & (n <= hi)
    if sel.sum() < min_points:
        raise FitError(f"{int(sel.sum())} points in window [{lo}, {hi}], need {min_points}")
    if np.any(n[sel] <= 0) or np.any(~(y[sel] > 0)):
        raise FitError("power-law fit needs positive N and infidelity inside the window")
    res = stats.linregress(np.log(n[sel]), np.log(y[sel]))
    return PowerLawFit(float(res.slope), float(np.exp(res.intercept)), float(res.stderr),
                       (float(lo), float(hi)), int(sel.sum()))


def checkpoint_schedule(n_total: int, count: int = 25) -> np.ndarray:
    """About ``count`` distinct log-spaced integers in ``[1, n_total]`` (always ending at ``n_total``)."""
    if n_total < 1:
        return np.zeros(0, dtype=int)
    pts = np.unique(np.round(np.logspace(0.0, np.log10(n_total), count)).astype(int))
    pts = pts[(pts >= 1) & (pts <= n_total)]
    if pts[-1] != n_total:
        pts = np.append(pts, n_total)
    return pts


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def run_streams(master_seed: int, run_index: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence([int(master_seed), int(run_index)]).spawn(4)
    return {name: np.random.default_rng(ss) for name, ss in zip(("truth", "apparatus", "filter", "design"), children)}


def draw_true_state(cfg: RunConfig, rng: np.random.Generator) -> QubitState:
    if cfg.true_state == "random_pure":
        return QubitState.from_vector(random_unit_vectors(rng, 1)[0])
    return QubitState.from_vector(cfg.true_state)


def _realize(config: MeasurementConfig, waveplates: bool) -> MeasurementConfig:
    if not waveplates:
        return config
    tq, th = waveplate_angles_for_axis(config.axis)
    return MeasurementConfig.from_waveplates(tq, th, quantize=True)


def _record(post: Posterior, truth: QubitState, n: int, config, counts, t0: float) -> RunRecord:
    mean = post.mean_stokes()
    return RunRecord(
        n=n,
        axis=None if config is None else config.axis,
        waveplate_angles=None if config is None else config.waveplate_angles,
        counts=(0, 0) if counts is None else counts.counts,
        infid_to_mean=post.mean_infidelity(mean),
        infid_to_true=post.mean_infidelity(truth),
        ess=post.ess(),
        wall_clock=time.perf_counter() - t0,
    )


def run_single(cfg: RunConfig, run_index: int) -> RunResult:
    """One simulated run: select, measure a block, update, log at checkpoints."""
    streams = run_streams(cfg.seed, run_index)
    truth = draw_true_state(cfg, streams["truth"])
    events = io.StringIO()
    header = {"header": {"run_index": run_index, "seed_sequence": [cfg.seed, run_index],
                         "config": cfg.to_dict(), "format": "adaptomo.events/1"}}
    events.write(json.dumps(header) + "\n")
    app = Apparatus(truth, cfg.noise, streams["apparatus"], log=events)
    post = Posterior.init(cfg.prior, config=cfg.filter, seed=streams["filter"])
    noise = cfg.filter_noise
    design_rng = streams["design"]
    checkpoints = checkpoint_schedule(cfg.n_measurements, cfg.n_checkpoints)

    t0 = time.perf_counter()
    records = [_record(post, truth, 0, None, None, t0)]
    n, step, ci = 0, 0, 0
    try:
        while n < cfg.n_measurements:
            config = select_measurement(cfg.strategy, post, noise, step, design_rng, truth)
            config = _realize(config, cfg.waveplates)
            k = block_size(n) if cfg.blocks else 1
            k = min(k, int(checkpoints[ci]) - n)
            counts = app.draw_block(config, k)
            post.update(config, counts, noise)
            n += k
            step += 1
            if n == checkpoints[ci]:
                records.append(_record(post, truth, n, config, counts, t0))
                ci += 1
    except FilterDegeneracyError as exc:
        raise RunFailure(run_index, n, exc) from exc
    lines = events.getvalue().splitlines()
    return RunResult(run_index, truth, records, lines, post.n_resamples)


def _run_star(args):
    return run_single(*args)


def aggregate(cfg: RunConfig, runs: List[RunResult]) -> ExperimentResult:
    n = np.array([r.n for r in runs[0].records])
    to_true = np.mean([[r.infid_to_true for r in run.records] for run in runs], axis=0)
    to_mean = np.mean([[r.infid_to_mean for r in run.records] for run in runs], axis=0)
    result = ExperimentResult(cfg, runs, n, to_true, to_mean)
    window = cfg.default_fit_window()
    for name, curve in (("infid_to_true", to_true), ("infid_to_mean", to_mean)):
        try:
            result.fits[name] = fit_power_law(n, curve, window)
        except FitError as exc:
            log.info("no %s fit: %s", name, exc)
            result.fits[name] = None
    return result


def run_experiment(cfg: RunConfig, out_dir=None) -> ExperimentResult:
    """Execute ``cfg.n_runs`` independent runs and aggregate the average curves.

    With ``out_dir`` set, outputs are written there; if a run fails the
    completed runs are flushed first and :class:`RunFailure` is re-raised.
    """
    jobs = [(cfg, i) for i in range(cfg.n_runs)]
    runs: List[RunResult] = []
    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                for res in pool.map(_run_star, jobs):
                    runs.append(res)
        else:
            for job in jobs:
                runs.append(_run_star(job))
    except RunFailure:
        if out_dir is not None and runs:
            write_outputs(aggregate(cfg, runs), out_dir)
        raise
    result = aggregate(cfg, runs)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_trajectory(records: Sequence[RunRecord], dest) -> None:
    """Write records as trajectory CSV to a path or an open text stream."""
    if hasattr(dest, "write"):
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(rec.csv_row() for rec in records)
        return
    with Path(dest).open("w", newline="") as fh:
        write_trajectory(records, fh)


def write_curve(n, to_mean, to_true, n_runs: int, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AVERAGE_COLUMNS)
        for row in zip(n, to_mean, to_true):
            w.writerow([int(row[0]), _fmt(row[1]), _fmt(row[2]), n_runs])


def read_curve(path, column: str = "infid_to_true") -> Tuple[np.ndarray, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows or column not in rows[0]:
        raise FitError(f"{path}: no column {column!r}")
    return (np.array([float(r["n"]) for r in rows]), np.array([float(r[column]) for r in rows]))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_outputs(result: ExperimentResult, out_dir) -> Path:
    out = Path(out_dir)
    (out / "events").mkdir(parents=True, exist_ok=True)
    for run in result.runs:
        write_trajectory(run.records, out / f"run_{run.run_index:03d}.csv")
        (out / "events" / f"run_{run.run_index:03d}.jsonl").write_text("\n".join(run.events) + "\n")
    write_curve(result.n, result.infid_to_mean, result.infid_to_true, len(result.runs), out / "average.csv")
    write_json(result.summary(), out / "summary.json")
    return out


# ---------------------------------------------------------------------------
# comparison and replay
# ---------------------------------------------------------------------------


DEFAULT_COMPARISON = {
    "adaptive": Adaptive(),
    "random": RandomAxes(),
    "mub": MubCycle("generic"),
    "mub_best": MubCycle("best"),
    "mub_worst": MubCycle("worst"),
}


def compare_strategies(base: RunConfig, strategies: Optional[Dict[str, Strategy]] = None,
                       out_dir=None) -> Dict[str, ExperimentResult]:
    """Run each strategy with the same master seed, hence the same true states."""
    strategies = DEFAULT_COMPARISON if strategies is None else strategies
    results = {}
    for name, strategy in strategies.items():
        log.info("comparison: running %s", name)
        sub = None if out_dir is None else Path(out_dir) / name
        results[name] = run_experiment(replace(base, strategy=strategy), sub)
    if out_dir is not None:
        write_json(comparison_table(results), Path(out_dir) / "comparison.json")
    return results


def comparison_table(results: Dict[str, ExperimentResult]) -> dict:
    rows = {}
    for name, res in results.items():
        fit = res.fits.get("infid_to_true")
        rows[name] = {
            "strategy": strategy_to_dict(res.config.strategy),
            "fit": None if fit is None else fit.to_dict(),
            "final_infid_to_true": float(res.infid_to_true[-1]),
            "final_infid_to_mean": float(res.infid_to_mean[-1]),
        }
    return {"format": "adaptomo.comparison/1", "strategies": rows}


def replay(lines, seed_sequence: Optional[Sequence[int]] = None, true_state: Optional[QubitState] = None,
           cfg: Optional[RunConfig] = None) -> List[RunRecord]:
    """Rebuild the posterior trajectory from an event log.

    The log header supplies the run config and seed; the filter stream is
    re-derived from it, so replaying a log written by :func:`run_single`
    reproduces the recorded posteriors exactly. Records are produced after
    every event; ``infid_to_true`` is NaN when the true state is unknown.
    """
    header, events = read_event_log(lines)
    if cfg is None:
        if "config" not in header:
            raise ConfigError("event log has no header config; pass cfg explicitly")
        cfg = RunConfig.from_dict(header["config"])
    if seed_sequence is None:
        seed_sequence = header.get("seed_sequence", [cfg.seed, 0])
    filter_rng = run_streams(*seed_sequence)["filter"]
    post = Posterior.init(cfg.prior, config=cfg.filter, seed=filter_rng)
    noise = cfg.filter_noise
    t0 = time.perf_counter()

    def rec(config, counts):
        r = _record(post, true_state if true_state is not None else QubitState.maximally_mixed(),
                    post.n, config, counts, t0)
        if true_state is None:
            r.infid_to_true = float("nan")
        return r

    out = [rec(None, None)]
    for config, counts in events:
        post.update(config, counts, noise)
        out.append(rec(config, counts))
    return out
