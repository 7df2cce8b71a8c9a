"""Reference computations that share no code path with the particle filter."""

import numpy as np


def bures_grid(n_u=60, n_cos=80, n_phi=120):
    """Cell-centred grid over the Bloch ball with exact Bures cell weights.

    With ``r = sin(u)`` the Bures measure is ``sin(u)^2 du dOmega``, so the
    radial weight of a cell ``[u0, u1]`` is ``(u1 - u0)/2 - (sin 2u1 - sin 2u0)/4``.
    """
    ue = np.linspace(0, np.pi / 2, n_u + 1)
    ce = np.linspace(-1, 1, n_cos + 1)
    pe = np.linspace(0, 2 * np.pi, n_phi + 1)
    u = 0.5 * (ue[1:] + ue[:-1])
    c = 0.5 * (ce[1:] + ce[:-1])
    p = 0.5 * (pe[1:] + pe[:-1])
    wu = 0.5 * np.diff(ue) - 0.25 * np.diff(np.sin(2 * ue))
    U, C, P = np.meshgrid(u, c, p, indexing="ij")
    W = np.broadcast_to(wu[:, None, None], U.shape)
    r = np.sin(U)
    sn = np.sqrt(1 - C * C)
    s = np.stack([r * sn * np.cos(P), r * sn * np.sin(P), r * C], axis=-1).reshape(-1, 3)
    return s, W.reshape(-1) / W.sum()


def grid_posterior_mean(observations, grid=None):
    """Exact Bayes posterior mean on the grid for ideal projective data.

    ``observations`` is a list of ``(axis, (count_0, count_1))``.
    """
    s, w = bures_grid() if grid is None else grid
    ll = np.zeros(len(s))
    for axis, (c0, c1) in observations:
        d = s @ np.asarray(axis, dtype=float)
        if c0:
            ll += c0 * np.log(np.maximum(0.5 * (1 + d), 1e-300))
        if c1:
            ll += c1 * np.log(np.maximum(0.5 * (1 - d), 1e-300))
    post = w * np.exp(ll - ll.max())
    post /= post.sum()
    return post @ s


def simulate_ideal(true_s, axes, rng):
    """One ideal single-shot outcome per axis."""
    p0 = 0.5 * (1 + np.asarray(axes) @ np.asarray(true_s))
    out = (rng.random(len(axes)) >= p0).astype(int)
    return [(a, (1 - o, o)) for a, o in zip(axes, out)]
