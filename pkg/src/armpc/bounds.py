"""Support sets for the learned model error and the compound disturbance.

From a committed estimate (W_hat, radii) these helpers build:

* F: a zero-centered box bounding W phi(x) for every parameter the
  confidence sets still allow (row radius ||w_hat_i|| + 2 r_i),
* F_hat: the running intersection of the F boxes seen so far,
* D: a zero-centered box bounding (W_hat - W) phi(x) (row radius r_i),
* D_hat: the compound disturbance box (I - B B+) F_hat + B B+ D + V
  driving the constraint tightening, where B+ is the pseudo-inverse.

All of them rely on features with norm at most one on the constraint
set, which `check_feature_norm` validates by sampling.
"""

import numpy as np

from .geom import Box, box_minkowski, image_hull

__all__ = [
    "UncertaintyBounds",
    "f_support",
    "f_hat_step",
    "d_bound",
    "compound_disturbance",
    "input_projector",
    "check_feature_norm",
]


def input_projector(B):
    """B B+ and its complement for a full-column-rank input matrix."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    gram = B.T @ B
    if np.linalg.matrix_rank(gram) < B.shape[1]:
        raise ValueError("input matrix must have full column rank")
    B_pinv = np.linalg.solve(gram, B.T)
    P = B @ B_pinv
    return P, np.eye(B.shape[0]) - P


def f_support(W_hat, radii):
    """Zero-centered box bounding the learned term for all admissible W."""
    W_hat = np.atleast_2d(np.asarray(W_hat, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    row_norms = np.linalg.norm(W_hat, axis=1)
    return Box(np.zeros(W_hat.shape[0]), row_norms + 2.0 * radii)


def f_hat_step(prev, F_now):
    """Recursive intersection of zero-centered support boxes."""
    if prev is None:
        return F_now
    if prev.dim != F_now.dim:
        raise ValueError("dimension mismatch")
    return Box(np.zeros(prev.dim), np.minimum(prev.radii, F_now.radii))


def d_bound(radii):
    """Zero-centered box bounding the estimation error term."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    return Box(np.zeros(radii.shape[0]), radii.copy())


def compound_disturbance(B, F_hat, D, V):
    """Box containing noise plus matched error plus unmatched model term."""
    P, P_perp = input_projector(B)
    out = box_minkowski(image_hull(P_perp, F_hat), image_hull(P, D))
    return box_minkowski(out, V)


class UncertaintyBounds:
    """Current support boxes, refreshed from committed estimates.

    refresh() recomputes F from the committed estimate, intersects it
    into F_hat, rebuilds D and the compound box D_hat.  Nestedness of
    all four follows from the commit gate upstream.
    """

    def __init__(self, B, V):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.V = V
        self.F = None
        self.F_hat = None
        self.D = None
        self.D_hat = None

    def refresh(self, committed):
        self.F = f_support(committed.W_hat, committed.radii)
        self.F_hat = f_hat_step(self.F_hat, self.F)
        self.D = d_bound(committed.radii)
        self.D_hat = compound_disturbance(self.B, self.F_hat, self.D, self.V)
        return self


def check_feature_norm(feature_fn, X_box, rng, samples=10000, tol=1e-9):
    """Verify ||phi(x)|| <= 1 over sampled points of the state box."""
    pts = X_box.sample(rng, samples)
    worst = 0.0
    for x in pts:
        worst = max(worst, float(np.linalg.norm(feature_fn(x))))
        if worst > 1.0 + tol:
            raise ValueError(
                f"feature norm {worst:.6f} exceeds 1 on the state set")
    return worst
