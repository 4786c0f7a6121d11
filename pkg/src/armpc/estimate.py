"""Online estimation of W in f(x) = W phi(x).

Two estimators over the rows of W:

* set-membership: per-row feasible polytopes refined by interval
  observations, with Chebyshev-center point estimates, and
* recursive Bayesian linear regression with time-uniform confidence
  radii valid simultaneously for all times.

A shrink-gate keeps the controller-visible estimate's confidence radii
nonincreasing: raw estimates are committed only when every row's radius
has shrunk (or tied), so downstream tightenings never grow.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammainc

from .geom import HPolytope, poly_chebyshev

__all__ = [
    "EstimationError",
    "SetMembershipRow",
    "BlrRow",
    "CommittedEstimate",
    "sm_update",
    "sm_point",
    "blr_update",
    "blr_beta",
    "blr_radius",
    "chi2_quantile",
    "gated_commit",
    "warm_start_blr",
    "SmEstimator",
    "BlrEstimator",
]


class EstimationError(RuntimeError):
    """Raised when an observation contradicts the assumed noise model."""


# ------------------------------------------------------------------ rows

@dataclass(frozen=True)
class SetMembershipRow:
    """Feasible parameter set for one row of W, with its noise bound."""

    feasible: HPolytope
    noise_bound: float

    @classmethod
    def from_box(cls, lo, hi, noise_bound):
        return cls(HPolytope.from_bounds(lo, hi), float(noise_bound))


@dataclass(frozen=True)
class BlrRow:
    """Recursive Bayesian regression state for one row of W.

    lambda_inv is the precision inverse maintained by rank-one updates;
    log_det_lambda tracks log det of the precision itself.
    """

    w_hat: np.ndarray
    lambda_inv: np.ndarray
    lambda0: np.ndarray
    sigma: float
    log_det_lambda: float

    @classmethod
    def from_prior(cls, w0, lambda0, sigma):
        w0 = np.asarray(w0, dtype=float)
        lambda0 = np.asarray(lambda0, dtype=float)
        sign, logdet = np.linalg.slogdet(lambda0)
        if sign <= 0:
            raise ValueError("prior precision must be positive definite")
        return cls(w_hat=w0.copy(),
                   lambda_inv=np.linalg.inv(lambda0),
                   lambda0=lambda0.copy(),
                   sigma=float(sigma),
                   log_det_lambda=float(logdet))

    @property
    def dim(self):
        return self.w_hat.shape[0]


@dataclass(frozen=True)
class CommittedEstimate:
    """Controller-visible estimate: matrix, per-row 2-norm radii, risk."""

    W_hat: np.ndarray
    radii: np.ndarray
    delta: float


# ------------------------------------------------- set-membership updates

def sm_update(row, phi, residual):
    """Intersect the feasible set with one interval observation.

    The observation residual = w^T phi + v with |v| <= noise_bound cuts
    the slab residual - sigma <= w^T phi <= residual + sigma.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)) or not np.isfinite(residual):
        raise ValueError("non-finite observation")
    if np.all(np.abs(phi) == 0.0):
        return row
    sig = row.noise_bound
    cut = HPolytope(np.vstack([phi, -phi]),
                    np.array([residual + sig, sig - residual]))
    new = row.feasible.intersect(cut)
    if new.is_empty():
        raise EstimationError("noise model violated")
    return replace(row, feasible=new)


def sm_point(row):
    """Chebyshev center and radius of the current feasible set."""
    center, radius = poly_chebyshev(row.feasible)
    return center, radius


# ------------------------------------------------------------ BLR updates

def blr_update(row, phi, y):
    """Rank-one posterior update for one scalar observation y = w^T phi + v."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)) or not np.isfinite(y):
        raise ValueError("non-finite observation")
    Li_phi = row.lambda_inv @ phi
    k = float(phi @ Li_phi)
    denom = 1.0 + k
    y_pred = float(row.w_hat @ phi)
    w_new = row.w_hat - (y_pred - y) / denom * Li_phi
    Li_new = row.lambda_inv - np.outer(Li_phi, Li_phi) / denom
    Li_new = 0.5 * (Li_new + Li_new.T)
    return replace(row,
                   w_hat=w_new,
                   lambda_inv=Li_new,
                   log_det_lambda=row.log_det_lambda + np.log(denom))


def _power_lambda_max(M, tol=1e-10, max_iter=100000, hint=None,
                      return_vector=False):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    A hint vector (e.g. the eigenvector from before a rank-one update)
    cuts the iteration to a handful of steps on slowly-changing
    matrices.
    """
    n = M.shape[0]
    if hint is not None and np.linalg.norm(hint) > 0.0:
        v = hint / np.linalg.norm(hint)
    else:
        v = np.ones(n) / np.sqrt(n)
    prev = 0.0
    val = 0.0
    for _ in range(max_iter):
        w = M @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return (0.0, v) if return_vector else 0.0
        v = w / nrm
        val = float(v @ (M @ v))
        if abs(val - prev) <= tol * max(1.0, abs(val)):
            break
        prev = val
    return (val, v) if return_vector else val


def lambda_min_from_inverse(lambda_inv, tol=1e-10, hint=None,
                            return_vector=False):
    """Smallest eigenvalue of Lambda, from its maintained inverse."""
    out = _power_lambda_max(lambda_inv, tol=tol, hint=hint,
                            return_vector=return_vector)
    top, vec = out if return_vector else (out, None)
    if top <= 0.0:
        raise ValueError("precision inverse not positive definite")
    return (1.0 / top, vec) if return_vector else 1.0 / top


def chi2_quantile(dof, p):
    """Quantile of the chi-square distribution with `dof` degrees of freedom.

    Bisection on the regularized lower incomplete gamma to 1e-10
    absolute; the initial bracket is widened if the target lies beyond.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("probability must be in [0, 1)")
    if p == 0.0:
        return 0.0
    a = 0.5 * dof
    lo, hi = 0.0, dof + 40.0 * np.sqrt(dof)
    while gammainc(a, 0.5 * hi) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("quantile bracket failed")
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if gammainc(a, 0.5 * mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def blr_beta(row, delta_row, lmin_t=None):
    """Time-uniform confidence scale for one row.

    beta = sqrt(2 log(det(L_t)^1/2 / (delta' det(L_0)^1/2)))
         + sqrt(lmax(L_0)/lmin(L_t) * chi2_dof(1 - delta')).
    The confidence set is {e : (e^T L_t e)^1/2 <= sigma * beta}.
    """
    if not 0.0 < delta_row < 1.0:
        raise ValueError("risk must be in (0, 1)")
    sign0, logdet0 = np.linalg.slogdet(row.lambda0)
    gap = row.log_det_lambda - logdet0 - 2.0 * np.log(delta_row)
    first = np.sqrt(max(gap, 0.0))
    lmax0 = float(np.linalg.eigvalsh(row.lambda0)[-1])
    if lmin_t is None:
        lmin_t = lambda_min_from_inverse(row.lambda_inv)
    second = np.sqrt(lmax0 / lmin_t * chi2_quantile(row.dim, 1.0 - delta_row))
    return float(first + second)


def blr_radius(row, delta_row, lmin_t=None):
    """Committed 2-norm radius: sigma * beta / sqrt(lmin(Lambda_t))."""
    if lmin_t is None:
        lmin_t = lambda_min_from_inverse(row.lambda_inv)
    beta = blr_beta(row, delta_row, lmin_t=lmin_t)
    return float(row.sigma * beta / np.sqrt(lmin_t))


def warm_start_blr(phis, ys, sigma, ridge=1e-8):
    """Least-squares prior from a batch of feature/target samples.

    The Gram matrix of the samples becomes the prior precision (plus a
    tiny ridge so it is invertible) and the least-squares fit becomes
    the prior mean.
    """
    Phi = np.atleast_2d(np.asarray(phis, dtype=float))
    y = np.asarray(ys, dtype=float)
    d = Phi.shape[1]
    gram = Phi.T @ Phi + ridge * np.eye(d)
    w0 = np.linalg.solve(gram, Phi.T @ y)
    return BlrRow.from_prior(w0, gram, sigma)


# ---------------------------------------------------------------- gating

def gated_commit(current, candidate_W, candidate_radii):
    """Commit a candidate estimate only if no row's radius grew."""
    candidate_W = np.asarray(candidate_W, dtype=float)
    candidate_radii = np.asarray(candidate_radii, dtype=float)
    if candidate_W.shape != current.W_hat.shape:
        raise ValueError("estimate shape mismatch")
    if candidate_radii.shape != current.radii.shape:
        raise ValueError("radii shape mismatch")
    if np.all(candidate_radii <= current.radii):
        return CommittedEstimate(candidate_W.copy(), candidate_radii.copy(),
                                 current.delta)
    return current


# ------------------------------------------------------- matrix wrappers

class SmEstimator:
    """Set-membership estimation of all rows of W, plus the shrink gate."""

    def __init__(self, rows, delta=0.0):
        self.rows = list(rows)
        W0, r0 = self._point()
        self.committed = CommittedEstimate(W0, r0, delta)

    def _point(self):
        centers, radii = [], []
        for row in self.rows:
            c, r = sm_point(row)
            centers.append(c)
            radii.append(r)
        return np.array(centers), np.array(radii)

    def update(self, phi, residuals):
        self.rows = [sm_update(row, phi, res)
                     for row, res in zip(self.rows, residuals)]
        W, radii = self._point()
        self.committed = gated_commit(self.committed, W, radii)
        return self.committed


class BlrEstimator:
    """Recursive Bayesian regression of all rows of W, plus the shrink gate."""

    def __init__(self, rows, delta):
        self.rows = list(rows)
        self.delta = float(delta)
        # top-eigenvector hints warm-start the per-row power iterations
        self._hints = [None] * len(self.rows)
        W0, r0 = self._point()
        self.committed = CommittedEstimate(W0, r0, self.delta)

    @property
    def delta_row(self):
        return self.delta / len(self.rows)

    def _point(self):
        W = np.array([row.w_hat for row in self.rows])
        radii = np.zeros(len(self.rows))
        for i, row in enumerate(self.rows):
            lmin, vec = lambda_min_from_inverse(row.lambda_inv,
                                                hint=self._hints[i],
                                                return_vector=True)
            self._hints[i] = vec
            radii[i] = blr_radius(row, self.delta_row, lmin_t=lmin)
        return W, radii

    def update(self, phi, residuals):
        self.rows = [blr_update(row, phi, res)
                     for row, res in zip(self.rows, residuals)]
        W, radii = self._point()
        self.committed = gated_commit(self.committed, W, radii)
        return self.committed
