"""Feature families for the learned term f(x) = W phi(x).

All families keep ||phi(x)|| <= 1 on the relevant state sets: tanh is
bounded by one, the two-term family carries a 1/sqrt(2) factor, and
random Fourier features carry 1/sqrt(d).
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FeatureFamily",
    "eval_features",
    "tanh_matched",
    "sin_tanh_unmatched",
    "random_fourier",
]

KINDS = ("tanh-matched", "sin-tanh-unmatched", "random-fourier")


@dataclass(frozen=True)
class FeatureFamily:
    kind: str
    d: int
    index: int = 1
    alpha: np.ndarray = None  # (d, n) frequency directions
    beta: np.ndarray = None   # (d,) phases

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature family {self.kind!r}")
        if self.kind == "random-fourier" and (self.alpha is None or
                                              self.beta is None):
            raise ValueError("random Fourier features need alpha and beta")


def tanh_matched(index=1):
    """Single feature tanh(x_index); pairs with a one-column W."""
    return FeatureFamily(kind="tanh-matched", d=1, index=index)


def sin_tanh_unmatched():
    """Two features (sin(4 x_0), tanh(x_1)) / sqrt(2)."""
    return FeatureFamily(kind="sin-tanh-unmatched", d=2)


def random_fourier(d, n, rng, lengthscale=1.0, active=None):
    """d normalized cosine features over the chosen state coordinates.

    Frequencies are Gaussian with standard deviation 1/lengthscale on
    the active coordinates (all of them by default) and zero elsewhere;
    phases are uniform on [0, 2*pi).
    """
    alpha = np.zeros((d, n))
    cols = range(n) if active is None else active
    for c in cols:
        alpha[:, c] = rng.standard_normal(d) / lengthscale
    beta = rng.uniform(0.0, 2.0 * np.pi, d)
    return FeatureFamily(kind="random-fourier", d=d, alpha=alpha, beta=beta)


def eval_features(fam, x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    if fam.kind == "tanh-matched":
        return np.array([np.tanh(x[fam.index])])
    if fam.kind == "sin-tanh-unmatched":
        return np.array([np.sin(4.0 * x[0]), np.tanh(x[1])]) / np.sqrt(2.0)
    return np.cos(fam.alpha @ x + fam.beta) / np.sqrt(fam.d)
