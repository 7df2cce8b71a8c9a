"""Watch the adaptive rule pick its first few analyzer axes.

From the uninformative prior the information gain is the same along every
axis, so the first choice is arbitrary. After one outcome the posterior
leans along that axis and the best next axis is orthogonal to it; after two
the third is orthogonal to both. The first three choices therefore form an
(approximately) mutually unbiased set, without that being programmed in.
"""

import argparse

import numpy as np

from adaptomo.design import Adaptive, CandidateConfig, select_measurement
from adaptomo.inference import Posterior
from adaptomo.likelihoods import NoiseModel
from adaptomo.priors import BuresHaar
from adaptomo.qubit import QubitState, random_unit_vectors
from adaptomo.simlab import Apparatus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=int, default=6)
    args = ap.parse_args()

    ss = np.random.SeedSequence(args.seed).spawn(3)
    truth = QubitState.from_vector(random_unit_vectors(np.random.default_rng(ss[0]), 1)[0])
    app = Apparatus(truth, NoiseModel(), np.random.default_rng(ss[1]))
    post = Posterior.init(BuresHaar(), 1000, seed=ss[2])
    rng = np.random.default_rng(args.seed)
    strategy = Adaptive(CandidateConfig(n_grid=200))

    print(f"true Stokes vector {np.round(truth.stokes, 3)}")
    axes = []
    for step in range(args.steps):
        cfg = select_measurement(strategy, post, step=step, rng=rng)
        counts = app.draw_block(cfg, 1)
        post.update(cfg, counts)
        axes.append(cfg.vector)
        print(f"step {step + 1}: axis {np.round(cfg.vector, 3)}  outcome {counts.counts}  "
              f"mean {np.round(post.mean_stokes(), 3)}  infidelity {post.mean_infidelity(truth):.3f}")

    b = np.array(axes[:3])
    print("\noverlaps |b_i . b_j| of the first three axes:")
    print(np.round(np.abs(b @ b.T), 3))


if __name__ == "__main__":
    main()
