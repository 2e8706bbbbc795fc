"""Reproducible per-trajectory random streams.

Each trajectory owns an independent counter-based Philox stream keyed by
(seed, trajectory index) through SeedSequence spawn keys. Streams never
interact, so ensemble results are bit-identical for any thread count or
scheduling order.
"""
import numpy as np


def trajectory_rng(seed, index):
    """Generator for trajectory `index` of the run seeded with `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def kraus_noise_block(rng, n_steps):
    """Draw the per-step random inputs consumed by one Kraus trajectory.

    Returns (uniforms, normals) with shapes (n,) and (n, 4). Column order of
    the normals is fixed: readout-1, readout-2, epsilon, lambda. The draw
    order is part of the reproducibility contract.
    """
    uniforms = rng.random(n_steps)
    normals = rng.standard_normal((n_steps, 4))
    return uniforms, normals


def sde_noise_block(rng, n_steps):
    """Unit normals consumed by one Euler-Maruyama trajectory, shape (n, 4).

    Column order is fixed: theta, phi, epsilon, lambda.
    """
    return rng.standard_normal((n_steps, 4))
