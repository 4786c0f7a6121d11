"""Robust adaptive MPC with online disturbance learning.

Tube MPC over affine disturbance-feedback policies, paired with online
set-membership / Bayesian estimation of an additive model error and
certainty-equivalent cancellation of its input-aligned component.
"""

__version__ = "0.1.0"

from .geom import (
    Box,
    HPolytope,
    EmptySetError,
    LpError,
    image_hull,
    box_image_hull,
    box_minkowski,
    box_support,
    poly_intersect_reduce,
    poly_pontryagin_box,
    poly_is_subset,
    poly_chebyshev,
    pre_set,
)

__all__ = [
    "__version__",
    "Box",
    "HPolytope",
    "EmptySetError",
    "LpError",
    "image_hull",
    "box_image_hull",
    "box_minkowski",
    "box_support",
    "poly_intersect_reduce",
    "poly_pontryagin_box",
    "poly_is_subset",
    "poly_chebyshev",
    "pre_set",
]
