"""Adaptive Bayesian tomography of a single qubit."""

__version__ = "0.1.0"

from .qubit import (  # noqa: E402
    MeasurementConfig,
    Povm,
    QubitState,
    SphereCoord,
    born_probs,
    bures_distance,
    embed,
    fidelity,
    mub_axes,
    project,
    waveplate_povm,
)
from .priors import BuresHaar, InducedPure, sample_prior, slab_density_profile  # noqa: E402
from .likelihoods import NoiseModel, OutcomeCounts, block_log_likelihood, outcome_probs  # noqa: E402
from .inference import FilterConfig, FilterDegeneracyError, Posterior  # noqa: E402
from .design import Adaptive, CandidateConfig, MubCycle, RandomAxes, block_size, info_gain, select_measurement  # noqa: E402
from .simlab import Apparatus, pilot_estimate  # noqa: E402
from .runner import RunConfig, compare_strategies, fit_power_law, run_experiment  # noqa: E402
