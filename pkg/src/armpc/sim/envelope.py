"""Feasible-envelope measurement over initial states.

The envelope of a controller variant is the set of initial states from
which its first-step robust QP is feasible.  For planar states the
fraction is (area of the convex hull of feasible grid points) / (area
of the state set); higher dimensions fall back to a Monte-Carlo
membership ratio.  Empty ingredients (no terminal set, or inputs
tightened away) give fraction zero without solving anything.
"""

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from ..geom import EmptySetError
from ..mpc import qp_feasible
from .run import episode_ingredients, parallel_map, setup_experiment
from .seeding import make_rng

__all__ = [
    "poly_area_2d",
    "state_grid",
    "feasible_fraction",
    "envelope_sweep",
]


def poly_area_2d(P):
    """Area of a bounded planar polytope via its vertex hull."""
    try:
        center, _ = P.chebyshev()
    except EmptySetError:
        return 0.0
    halfspaces = np.hstack([P.A, -P.b[:, None]])
    points = HalfspaceIntersection(halfspaces, center).intersections
    return float(ConvexHull(points).volume)


def state_grid(X, grid):
    """Regular grid over the bounding box of X, kept to points inside X."""
    box = X.bounding_box()
    axes = [np.linspace(c - r, c + r, grid)
            for c, r in zip(box.center, box.radii)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return points[[X.contains(p) for p in points]]


def feasible_fraction(exp, state, controller, grid=41, mc_samples=2000,
                      rng=None):
    """Envelope fraction and hull vertices for one controller variant."""
    ing = episode_ingredients(exp, state, controller)
    X = exp.mpc.X
    n = exp.mpc.n
    if ing is None:
        return 0.0, []
    if n == 2:
        points = state_grid(X, grid)
        feasible = np.array([p for p in points if qp_feasible(ing.qp, p)])
        if len(feasible) < 3:
            return 0.0, [list(p) for p in feasible]
        try:
            hull = ConvexHull(feasible)
        except QhullError:
            # collinear feasible points: zero area
            return 0.0, [list(p) for p in feasible]
        vertices = [list(feasible[i]) for i in hull.vertices]
        return float(hull.volume) / poly_area_2d(X), vertices
    if rng is None:
        rng = make_rng(0)
    samples = X.sample(rng, mc_samples)
    hits = sum(1 for p in samples if qp_feasible(ing.qp, p))
    return hits / len(samples), []


def envelope_sweep(make_exp, values, controller, seed=0, grid=41,
                   mc_samples=2000):
    """Envelope fraction per parameter value for one controller.

    make_exp maps a parameter value to an Experiment; every value gets
    its own warm start drawn from the same seed schedule so that sweeps
    for different controllers see identical estimator states.
    """

    def one(task):
        index, value = task
        exp = make_exp(value)
        exp_state = setup_experiment(exp, make_rng(seed, 0))
        fraction, hull = feasible_fraction(
            exp, exp_state, controller, grid=grid, mc_samples=mc_samples,
            rng=make_rng(seed, 4, index))
        return {"param": float(value), "fraction": float(fraction),
                "hull_vertices": hull}

    return parallel_map(one, list(enumerate(values)))
