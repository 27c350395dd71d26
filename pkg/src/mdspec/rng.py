"""Reproducible random streams.

Every stage draws from its own Philox stream derived from a master seed, so
adding a stage never perturbs the randomness of earlier ones.  Gaussian
variates come from Box-Muller on Philox uniforms rather than numpy's ziggurat,
which keeps datasets bit-reproducible across numpy versions.
"""

import numpy as np

# Fixed stage identifiers; never renumber.
STAGES = {
    "points": 0,
    "noise": 1,
    "solver": 2,
    "convergence": 3,
}


def stage_generator(seed, stage):
    """Return a Philox-backed generator for ``stage`` under master ``seed``."""
    if stage not in STAGES:
        raise KeyError(f"unknown rng stage {stage!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STAGES[stage],))
    return np.random.Generator(np.random.Philox(ss))


def uniform(gen, size):
    """Uniform variates on [0, 1)."""
    return gen.random(size)


def box_muller(gen, size):
    """Standard normal variates by the Box-Muller transform.

    Draws are consumed in pairs, and the first ``k`` values of a request are the
    same regardless of the total requested size.
    """
    size = int(size)
    pairs = (size + 1) // 2
    u = gen.random(2 * pairs).reshape(pairs, 2)
    # 1 - u lies in (0, 1], keeping the log finite
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = radius * np.cos(angle)
    z[:, 1] = radius * np.sin(angle)
    return z.reshape(-1)[:size]
