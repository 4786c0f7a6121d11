"""Plant models: linear core, learned term, clipped Gaussian noise."""

from dataclasses import dataclass

import numpy as np

from ..geom import Box
from .features import FeatureFamily, eval_features, tanh_matched, \
    sin_tanh_unmatched

__all__ = [
    "NoiseModel",
    "Plant",
    "sample_noise",
    "noise_box",
    "plant_step",
    "matched_plant",
    "unmatched_plant",
]

CLIP_MULTIPLE = 1.959964  # two-sided 95% point of the standard normal


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian, redrawn until within the clip bound."""

    sigma: float
    dim: int
    clip: float = CLIP_MULTIPLE

    @property
    def bound(self):
        return self.clip * self.sigma


def sample_noise(model, rng):
    if model.sigma == 0.0:
        return np.zeros(model.dim)
    out = model.sigma * rng.standard_normal(model.dim)
    bound = model.bound
    bad = np.abs(out) > bound
    while np.any(bad):
        out[bad] = model.sigma * rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def noise_box(model):
    """Support box of the clipped noise."""
    return Box(np.zeros(model.dim), np.full(model.dim, model.bound))


@dataclass(frozen=True)
class Plant:
    """x+ = A x + B u + W_true phi(x) + v."""

    A: np.ndarray
    B: np.ndarray
    W_true: np.ndarray
    features: FeatureFamily
    noise: NoiseModel

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def f(self, x):
        return self.W_true @ eval_features(self.features, x)


def plant_step(plant, x, u, v):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return plant.A @ x + plant.B @ u + plant.f(x) + v


def _integrator_AB():
    A = np.array([[1.0, 0.2], [0.0, 1.0]])
    B = np.array([[0.0], [1.0]])
    return A, B


def matched_plant(w1=0.5, sigma2=5e-3):
    """Double integrator with an input-aligned tanh term."""
    A, B = _integrator_AB()
    return Plant(A=A, B=B, W_true=np.array([[0.0], [w1]]),
                 features=tanh_matched(index=1),
                 noise=NoiseModel(sigma=float(np.sqrt(sigma2)), dim=2))


def unmatched_plant(w1=0.2, w2=0.3, sigma2=5e-3):
    """Double integrator with a term no input direction can cancel."""
    A, B = _integrator_AB()
    return Plant(A=A, B=B, W_true=np.diag([w1, w2]),
                 features=sin_tanh_unmatched(),
                 noise=NoiseModel(sigma=float(np.sqrt(sigma2)), dim=2))
