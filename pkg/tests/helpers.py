"""Small constructors shared by the test modules."""

import numpy as np

from magnetotherm import make_grid


def box(n, length=1.0):
    return make_grid({"kind": "box_noslip", "dims": n, "length": length})


def shell(n, r1=0.5, r2=1.0, a=1.0):
    return make_grid({"kind": "shell_masked", "n": n, "inner_radius": r1, "outer_radius": r2, "half_width": a})


def random_unit(rng, shape):
    m = rng.normal(size=shape)
    return m / np.sqrt((m**2).sum(axis=0))
