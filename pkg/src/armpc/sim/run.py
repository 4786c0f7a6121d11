"""Closed-loop episode runner and experiment presets.

The loop per step: observe the state, update the estimator with the
previous transition and gate the commit, refresh bounds on the chosen
schedule, solve the tube QP, apply the variant's input law, then step
the plant.  Controller variants:

* "ce"        tube on the compound disturbance, inputs tightened by the
              matched support, applied input cancels the learned term,
* "benchmark" tube on (learned-term support + noise), no tightening,
              no cancellation,
* "naive"     tube on the noise alone, no learning in the loop.

Episodes reuse one estimator; bounds and the terminal set refresh
between episodes (or every step with refresh="step").
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..bounds import UncertaintyBounds, check_feature_norm
from ..estimate import (
    BlrEstimator,
    BlrRow,
    SetMembershipRow,
    SmEstimator,
    warm_start_blr,
)
from ..geom import Box, HPolytope, image_hull, poly_pontryagin_box
from ..mpc import (
    MpcConfig,
    StepIngredients,
    build_qp,
    ce_policy,
    predicted_tubes,
    pseudo_inverse,
    solve_qp,
    solve_step,
)
from ..terminal import max_rpi, solve_dare
from .features import eval_features
from .plant import matched_plant, noise_box, plant_step, sample_noise, \
    unmatched_plant
from .seeding import make_rng

__all__ = [
    "EstimatorSpec",
    "PriorCalibration",
    "calibrated_rows",
    "Experiment",
    "ExperimentState",
    "TraceRecord",
    "EpisodeResult",
    "CONTROLLERS",
    "setup_experiment",
    "episode_ingredients",
    "run_episode",
    "run_experiment",
    "matched_experiment",
    "unmatched_experiment",
    "trace_header",
    "write_trace_csv",
    "read_trace_csv",
    "parallel_map",
]

CONTROLLERS = ("ce", "benchmark", "naive")


@dataclass(frozen=True)
class PriorCalibration:
    """Eigen-structured regression prior built from the warm batch.

    The warm Gram's top `rich_dims` eigendirections carry most of the
    signal the trajectories will revisit, so they get the weak floor
    `lam_rich` and keep learning online; the remaining directions are
    floored at `lam_flat` so they never become the precision's smallest
    eigenvalue (which would freeze the commit gate, since only a growing
    smallest eigenvalue can shrink the confidence radii).  Per-row noise
    scales start from the warm residual RMS and inflate only its excess
    over the plant noise floor by `sigma_factor`, so rows that carry no
    signal stay near the noise scale while rows with real signal get
    balls wide enough to cover it.
    """

    rich_dims: int = 2
    lam_rich: float = 110.0
    lam_flat: float = 160.0
    sigma_factor: float = 0.4


@dataclass(frozen=True)
class EstimatorSpec:
    """Estimator family plus warm-start protocol.

    prior_scale None selects the data-driven prior (the Gram matrix of
    the warm samples); a scalar or per-row vector selects an isotropic
    prior of that precision, calibrated with the warm samples.  A
    PriorCalibration in `calibration` overrides both: the warm batch
    then builds the prior (precision and noise scales) and is not
    replayed as updates.  warm_lo/warm_hi override the unit-box warm
    sampling region; warm_states gives the historical states explicitly
    (one plant step is simulated from each), overriding both.
    """

    kind: str = "blr"
    delta: float = 0.05
    warm_k: int = 45
    prior_bound: float = 1.0
    prior_scale: object = None
    sigma: float = None
    ridge: float = 1e-8
    calibration: PriorCalibration = None
    warm_lo: object = None
    warm_hi: object = None
    warm_states: object = None


@dataclass(frozen=True)
class Experiment:
    """One closed-loop setup: plant, controller config, estimator, protocol.

    validation_box overrides the region on which the feature-norm bound
    is sample-checked; it defaults to the bounding box of the state
    constraints and must be given when those leave directions free.
    """

    plant: object
    mpc: MpcConfig
    est: EstimatorSpec
    x0: np.ndarray
    steps: int = 50
    refresh: str = "episode"
    clamp_fhat: bool = False
    validation_box: Box = None
    name: str = "experiment"


@dataclass
class ExperimentState:
    """Mutable cross-episode state: estimator, bounds, cached ingredients."""

    estimator: object
    bounds: UncertaintyBounds
    P: np.ndarray
    K: np.ndarray
    B_dagger: np.ndarray


@dataclass(frozen=True)
class TraceRecord:
    t: int
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_stage: float
    qp_status: str
    qp_cost: float
    radii: np.ndarray
    fhat_radii: np.ndarray
    dhat_radii: np.ndarray


@dataclass
class EpisodeResult:
    trace: list
    realized_cost: float
    feasible: bool
    violation: str = None
    final_x: np.ndarray = None
    sets: dict = None


def _estimator_sigma(exp):
    """Noise scale handed to the estimator.

    Set-membership needs the hard support bound; the regression
    estimator uses the Gaussian scale as its variance proxy (clipping
    only trims tails, it cannot widen them).
    """
    if exp.est.sigma is not None:
        return exp.est.sigma
    if exp.est.kind == "set-membership":
        return exp.plant.noise.bound
    return exp.plant.noise.sigma


def calibrated_rows(phis, residuals, sigma, cal):
    """Regression rows with an eigen-structured prior from the warm batch.

    The prior precision is the warm Gram plus per-direction floors:
    weak on the Gram's top eigendirections (where future data lands, so
    the smallest precision eigenvalue can keep growing and the commit
    gate keeps firing), strong everywhere else.  Prior means are zero;
    the batch informs the geometry and the per-row noise scales only,
    so the first episode still shows the estimator learning the term.
    All rows share the precision, which keeps their radii proportional
    and lets the all-rows commit gate act on a single scalar.
    """
    Phi = np.asarray(phis, dtype=float)
    Y = np.asarray(residuals, dtype=float)
    d = Phi.shape[1]
    gram = Phi.T @ Phi
    evals, vecs = np.linalg.eigh(gram)
    floor = np.where(np.arange(d) >= d - cal.rich_dims,
                     cal.lam_rich, cal.lam_flat)
    lambda0 = (vecs * floor) @ vecs.T + gram
    lambda0 = 0.5 * (lambda0 + lambda0.T)
    rms = np.sqrt(np.mean(Y * Y, axis=0))
    sig = np.maximum(sigma, rms + cal.sigma_factor * np.maximum(rms - sigma, 0.0))
    return [BlrRow.from_prior(np.zeros(d), lambda0, sig[i])
            for i in range(Y.shape[1])]


def setup_experiment(exp, rng):
    """Validate features, cache LQR pieces, warm-start the estimator."""
    plant = exp.plant
    n = plant.n
    X_box = exp.validation_box
    if X_box is None:
        X_box = exp.mpc.X.bounding_box()
    check_feature_norm(lambda x: eval_features(plant.features, x), X_box,
                       rng, samples=10000, tol=1e-9)
    P, K = solve_dare(exp.mpc.A, exp.mpc.B, exp.mpc.Q, exp.mpc.R)
    B_dagger = pseudo_inverse(exp.mpc.B)
    sigma = _estimator_sigma(exp)
    d = plant.features.d

    if exp.est.warm_states is not None:
        warm_xs = np.atleast_2d(np.asarray(exp.est.warm_states, float))
    else:
        warm_lo = np.broadcast_to(np.asarray(
            -1.0 if exp.est.warm_lo is None else exp.est.warm_lo, float),
            (n,))
        warm_hi = np.broadcast_to(np.asarray(
            1.0 if exp.est.warm_hi is None else exp.est.warm_hi, float),
            (n,))
        warm_xs = rng.uniform(warm_lo, warm_hi, (exp.est.warm_k, n))
    phis, residuals = [], []
    for x in warm_xs:
        v = sample_noise(plant.noise, rng)
        x_next = plant_step(plant, x, np.zeros(plant.m), v)
        phis.append(eval_features(plant.features, x))
        residuals.append(x_next - plant.A @ x)

    if exp.est.kind == "set-membership":
        rows = [SetMembershipRow.from_box(-exp.est.prior_bound * np.ones(d),
                                          exp.est.prior_bound * np.ones(d),
                                          sigma) for _ in range(n)]
        est = SmEstimator(rows, delta=exp.est.delta)
        for phi, res in zip(phis, residuals):
            est.update(phi, res)
    elif exp.est.kind == "blr":
        if exp.est.calibration is not None:
            rows = calibrated_rows(phis, residuals, sigma,
                                   exp.est.calibration)
            est = BlrEstimator(rows, delta=exp.est.delta)
        elif exp.est.prior_scale is None:
            if not phis:
                raise ValueError("data-driven prior needs warm samples")
            Y = np.array(residuals)
            rows = [warm_start_blr(phis, Y[:, i], sigma, ridge=exp.est.ridge)
                    for i in range(n)]
            est = BlrEstimator(rows, delta=exp.est.delta)
        else:
            scales = np.broadcast_to(np.asarray(exp.est.prior_scale,
                                                dtype=float), (n,))
            rows = [BlrRow.from_prior(np.zeros(d), scales[i] * np.eye(d),
                                      sigma) for i in range(n)]
            est = BlrEstimator(rows, delta=exp.est.delta)
            for phi, res in zip(phis, residuals):
                est.update(phi, res)
    else:
        raise ValueError(f"unknown estimator kind {exp.est.kind!r}")

    bounds = UncertaintyBounds(exp.mpc.B, noise_box(plant.noise))
    return ExperimentState(estimator=est, bounds=bounds, P=P, K=K,
                           B_dagger=B_dagger)


@dataclass
class _Ingredients:
    tube: Box
    U_tight: HPolytope
    O: HPolytope
    qp: object

    def step(self, P):
        return StepIngredients(D_hat=self.tube, U_tight=self.U_tight,
                               O=self.O, P=P)


def episode_ingredients(exp, state, controller):
    """Tube set, tightened inputs, terminal set, and the parametric QP.

    Returns None when the variant's ingredients are empty (the episode
    is infeasible before it starts).
    """
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}")
    committed = state.estimator.committed
    ub = state.bounds.refresh(committed)
    V = ub.V
    cfg = exp.mpc
    if controller == "ce":
        tube = ub.D_hat
        matched = image_hull(state.B_dagger, ub.F_hat)
        U_tight = poly_pontryagin_box(cfg.U, matched)
        if U_tight.is_empty():
            return None
    elif controller == "benchmark":
        tube = ub.F_hat.minkowski(V)
        U_tight = cfg.U
    else:  # naive
        tube = V
        U_tight = cfg.U
    A_K = cfg.A - cfg.B @ state.K
    O = max_rpi(A_K, cfg.X, U_tight, state.K, tube)
    if O.is_empty():
        return None
    qp = build_qp(cfg, tube, U_tight, O, state.P)
    return _Ingredients(tube=tube, U_tight=U_tight, O=O, qp=qp)


def _nan_record(t, x, state, status):
    ub = state.bounds
    return TraceRecord(
        t=t, x=np.asarray(x, float).copy(), u=None, v=None,
        cost_stage=math.nan, qp_status=status, qp_cost=math.nan,
        radii=state.estimator.committed.radii.copy(),
        fhat_radii=ub.F_hat.radii.copy(), dhat_radii=ub.D_hat.radii.copy())


def run_episode(exp, state, rng, controller="ce", collect_sets=False):
    """One closed-loop episode; returns the trace and realized cost."""
    plant = exp.plant
    cfg = exp.mpc
    ing = episode_ingredients(exp, state, controller)
    x = np.asarray(exp.x0, dtype=float).copy()
    trace = []
    if ing is None:
        trace.append(_nan_record(0, x, state, "infeasible"))
        return EpisodeResult(trace=trace, realized_cost=math.nan,
                             feasible=False, violation=None, final_x=x)

    total = 0.0
    violation = None
    prev = None
    sets = None
    feasible = True
    for t in range(exp.steps):
        if prev is not None:
            phi_prev, x_prev, u_prev = prev
            residual = x - (plant.A @ x_prev + plant.B @ u_prev)
            state.estimator.update(phi_prev, residual)
            if exp.refresh == "step":
                ing = episode_ingredients(exp, state, controller)
                if ing is None:
                    trace.append(_nan_record(t, x, state, "infeasible"))
                    feasible = False
                    break
        sol = solve_step(cfg, x, ing.step(state.P), qp=ing.qp)
        if sol.status != "optimal":
            trace.append(_nan_record(t, x, state, "infeasible"))
            feasible = False
            break
        u_star = sol.u_bar[0]
        phi = eval_features(plant.features, x)
        if controller == "ce":
            committed = state.estimator.committed
            f_hat = committed.W_hat @ phi
            clamp = state.bounds.F_hat if exp.clamp_fhat else None
            u = ce_policy(u_star, f_hat, state.B_dagger, clamp=clamp)
        else:
            u = u_star
        if violation is None:
            if not cfg.X.contains(x, tol=1e-7):
                violation = f"state outside bounds at t={t}"
            elif not cfg.U.contains(u, tol=1e-7):
                violation = f"input outside bounds at t={t}"
        if collect_sets and t == 0:
            tubes = predicted_tubes(cfg, sol, ing.tube)
            sets = {"tubes": [b.to_dict() for b in tubes],
                    "terminal_set": ing.O.to_dict(),
                    "state_set": cfg.X.to_dict()}
        v = sample_noise(plant.noise, rng)
        stage = float(x @ cfg.Q @ x + u @ cfg.R @ u)
        total += stage
        ub = state.bounds
        trace.append(TraceRecord(
            t=t, x=x.copy(), u=np.asarray(u, float).copy(), v=v.copy(),
            cost_stage=stage, qp_status=sol.status, qp_cost=sol.cost,
            radii=state.estimator.committed.radii.copy(),
            fhat_radii=ub.F_hat.radii.copy(),
            dhat_radii=ub.D_hat.radii.copy()))
        prev = (phi, x, u)
        x = plant_step(plant, x, u, v)
    else:
        trace.append(_nan_record(exp.steps, x, state, ""))
    return EpisodeResult(trace=trace, realized_cost=total, feasible=feasible,
                         violation=violation, final_x=x.copy(), sets=sets)


def run_experiment(exp, episodes, seed, controller="ce", collect_sets=False):
    """Run several episodes carrying the estimator across them."""
    state = setup_experiment(exp, make_rng(seed, 0))
    results = []
    for ep in range(episodes):
        results.append(run_episode(exp, state, make_rng(seed, 1, ep),
                                   controller,
                                   collect_sets=collect_sets and ep == 0))
    return results


# ------------------------------------------------------------- presets

def _integrator_mpc(N=3, feedback_mode="optimized"):
    return MpcConfig(
        A=np.array([[1.0, 0.2], [0.0, 1.0]]),
        B=np.array([[0.0], [1.0]]),
        Q=np.eye(2),
        R=np.array([[1.0]]),
        N=N,
        X=HPolytope.from_bounds([-4.0, -3.0], [4.0, 3.0]),
        U=HPolytope.from_bounds([-2.0], [2.0]),
        feedback_mode=feedback_mode,
    )


def matched_experiment(w1=0.5, N=3, steps=50, warm_k=45, delta=0.05,
                       estimator="set-membership", feedback_mode="optimized",
                       sigma2=5e-3, refresh="episode", clamp_fhat=False,
                       prior_bound=2.5):
    return Experiment(
        plant=matched_plant(w1=w1, sigma2=sigma2),
        mpc=_integrator_mpc(N=N, feedback_mode=feedback_mode),
        est=EstimatorSpec(kind=estimator, delta=delta, warm_k=warm_k,
                          prior_bound=prior_bound),
        x0=np.array([2.0, 2.0]),
        steps=steps,
        refresh=refresh,
        clamp_fhat=clamp_fhat,
        name="matched",
    )


def unmatched_experiment(w1=0.2, w2=0.3, N=3, steps=50, warm_k=45,
                         delta=0.05, estimator="set-membership",
                         feedback_mode="optimized", sigma2=5e-3,
                         refresh="episode", clamp_fhat=False,
                         prior_bound=2.5):
    return Experiment(
        plant=unmatched_plant(w1=w1, w2=w2, sigma2=sigma2),
        mpc=_integrator_mpc(N=N, feedback_mode=feedback_mode),
        est=EstimatorSpec(kind=estimator, delta=delta, warm_k=warm_k,
                          prior_bound=prior_bound),
        x0=np.array([2.0, 2.0]),
        steps=steps,
        refresh=refresh,
        clamp_fhat=clamp_fhat,
        name="unmatched",
    )


# ------------------------------------------------------------ trace IO

def trace_header(n, m):
    cols = ["t"]
    cols += [f"x_{i}" for i in range(n)]
    cols += [f"u_{i}" for i in range(m)]
    cols += [f"v_{i}" for i in range(n)]
    cols += ["cost_stage", "qp_status", "qp_cost"]
    cols += [f"radius_{i}" for i in range(n)]
    cols += [f"fhat_radius_{i}" for i in range(n)]
    cols += [f"dhat_radius_{i}" for i in range(n)]
    return cols


def _fmt(value):
    if value is None:
        return "nan"
    return repr(float(value))


def write_trace_csv(path, trace, n, m):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n, m))
        for rec in trace:
            u = rec.u if rec.u is not None else [None] * m
            v = rec.v if rec.v is not None else [None] * n
            row = [rec.t]
            row += [_fmt(val) for val in rec.x]
            row += [_fmt(val) for val in u]
            row += [_fmt(val) for val in v]
            row += [_fmt(rec.cost_stage), rec.qp_status, _fmt(rec.qp_cost)]
            row += [_fmt(val) for val in rec.radii]
            row += [_fmt(val) for val in rec.fhat_radii]
            row += [_fmt(val) for val in rec.dhat_radii]
            writer.writerow(row)


def read_trace_csv(path):
    """Columns of a trace file as a dict of lists (floats where numeric)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, val in zip(header, row):
                if name == "qp_status":
                    cols[name].append(val)
                else:
                    cols[name].append(float(val))
    return cols


# ----------------------------------------------------------- fan-out

def parallel_map(fn, items):
    """Ordered map over independent tasks, thread count capped by env."""
    items = list(items)
    env = os.environ.get("ARMPC_THREADS", "").strip()
    workers = int(env) if env else min(4, os.cpu_count() or 1)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
