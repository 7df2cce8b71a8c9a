"""Look at the priors on the Bloch ball.

The Bures prior is the uniform measure on a 3-sphere of radius 1/2, read
through the first three coordinates; it piles weight up near the pure-state
surface. Induced measures from partial traces of larger random pure states
push weight towards the maximally mixed centre instead. The slab histogram
shows the density of samples close to the s1-s2 plane as a function of radius.
"""

import argparse

import numpy as np

from adaptomo.priors import BuresHaar, InducedPure, sample_prior_stokes, slab_density_profile
from adaptomo.qubit import embed_stokes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--halfwidth", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    priors = {"bures": BuresHaar(), "induced(2)": InducedPure(2), "induced(3)": InducedPure(3)}
    for name, prior in priors.items():
        s = sample_prior_stokes(prior, args.samples, seed=args.seed)
        purity = (1 + np.linalg.norm(s, axis=1) ** 2) / 2
        prof = slab_density_profile(s, args.halfwidth, bins=5)
        dens = " ".join(f"{d:6.3f}" for d in prof.density)
        print(f"{name:<11} median purity {np.median(purity):.3f}  slab density by radius: {dens}")

    x4 = embed_stokes(sample_prior_stokes(BuresHaar(), args.samples, seed=args.seed))[:, 3]
    print(f"\nBures: E[x4^2] = {np.mean(x4 ** 2):.5f} (uniform on the 3-sphere gives 1/16 = 0.0625)")


if __name__ == "__main__":
    main()
