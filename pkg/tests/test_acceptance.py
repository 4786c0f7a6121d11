"""End-to-end acceptance checks, one test per headline claim.

Each test exercises a full pipeline (robust counterpart, estimation,
closed loop, envelopes, quadrotor) at its stated tolerance and prints
one summary line with the measured numbers.
"""

import dataclasses
import time
from itertools import product

import numpy as np
import numpy.testing as npt

from _oracle import enum_policy_feasible, enum_worst_slacks
from armpc.estimate import BlrRow, blr_update
from armpc.geom import Box, HPolytope
from armpc.mpc import (
    MpcConfig,
    StepIngredients,
    build_qp,
    qp_feasible,
    solve_qp,
    solve_step,
)
from armpc.sim.envelope import feasible_fraction
from armpc.sim.quadrotor import quadrotor_setup
from armpc.sim.run import (
    EstimatorSpec,
    episode_ingredients,
    matched_experiment,
    run_episode,
    run_experiment,
    setup_experiment,
)
from armpc.sim.seeding import make_rng

W1_GRID = [round(0.1 * i, 1) for i in range(1, 21)]
X0 = np.array([2.0, 2.0])


def _report(name, detail):
    print(f"ACCEPTANCE {name}: {detail}")


def _interval(lo, hi):
    return HPolytope.from_bounds([lo], [hi])


def _random_counterpart_instance(rng, N):
    A = rng.uniform(-1.2, 1.2, (2, 2))
    B = rng.uniform(-1.0, 1.0, (2, 1))
    if np.linalg.norm(B) < 0.3:
        B = B + 0.5 * np.sign(B + 1e-12)
    X = HPolytope.from_bounds(-rng.uniform(1.0, 3.0, 2),
                              rng.uniform(1.0, 3.0, 2))
    U = _interval(-rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
    mode = rng.choice(["optimized", "open-loop"])
    cfg = MpcConfig(A=A, B=B, Q=np.eye(2), R=np.array([[1.0]]), N=N,
                    X=X, U=U, feedback_mode=mode)
    D_hat = Box(np.zeros(2), rng.uniform(0.0, 0.15, 2))
    U_tight = _interval(-rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5))
    O = HPolytope.from_bounds(-rng.uniform(0.5, 2.0, 2),
                              rng.uniform(0.5, 2.0, 2))
    x0 = rng.uniform(-1.5, 1.5, 2)
    return cfg, D_hat, U_tight, O, x0


def test_acceptance_counterpart_oracle_equivalence():
    # 50 random instances: QP agrees with vertex enumeration to 1e-6
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    n_feasible = 0
    worst_gap = 0.0
    for _ in range(50):
        N = int(rng.integers(1, 4))
        cfg, D_hat, U_tight, O, x0 = _random_counterpart_instance(rng, N)
        qp = build_qp(cfg, D_hat, U_tight, O, np.eye(2))
        sol = solve_qp(qp, x0)
        want = enum_policy_feasible(cfg, x0, D_hat, U_tight, O)
        assert (sol.status == "optimal") == want
        if sol.status != "optimal":
            continue
        n_feasible += 1
        sol = solve_step(cfg, x0,
                         StepIngredients(D_hat, U_tight, O, np.eye(2)),
                         qp=qp)
        enum_lhs, robust_lhs, rhs = enum_worst_slacks(
            cfg, x0, sol, D_hat, U_tight, O)
        npt.assert_allclose(enum_lhs, robust_lhs, atol=1e-6)
        assert np.all(robust_lhs <= rhs + 1e-6)
        worst_gap = max(worst_gap,
                        float(np.max(np.abs(enum_lhs - robust_lhs))))
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    _report("counterpart oracle",
            f"50 instances ({n_feasible} feasible), worst slack gap "
            f"{worst_gap:.2e}, {elapsed:.1f}s")


def test_acceptance_blr_recursive_matches_batch():
    # 200-step recursive posterior equals the batch solve to 1e-8
    start = time.monotonic()
    rng = np.random.default_rng(7)
    d = 8
    lam0 = np.diag(rng.uniform(0.5, 3.0, d))
    w0 = rng.standard_normal(d)
    row = BlrRow.from_prior(w0, lam0, 0.1)
    phis, ys = [], []
    for _ in range(200):
        phi = rng.standard_normal(d)
        y = rng.standard_normal()
        phis.append(phi)
        ys.append(y)
        row = blr_update(row, phi, y)
    Phi = np.array(phis)
    y = np.array(ys)
    lam_batch = lam0 + Phi.T @ Phi
    w_batch = np.linalg.solve(lam_batch, lam0 @ w0 + Phi.T @ y)
    err_w = float(np.max(np.abs(row.w_hat - w_batch)))
    err_lam = float(np.max(np.abs(row.lambda_inv - np.linalg.inv(lam_batch))))
    assert err_w <= 1e-8
    assert err_lam <= 1e-8
    elapsed = time.monotonic() - start
    _report("blr oracle",
            f"200 steps, max error {max(err_w, err_lam):.2e}, "
            f"{elapsed:.2f}s")


def test_acceptance_recursive_feasibility():
    # 100 rollouts: once feasible at t=0, never infeasible, never violated
    start = time.monotonic()
    skipped = 0
    for seed in range(100):
        result = run_experiment(matched_experiment(), 1, seed)[0]
        if result.trace[0].qp_status == "infeasible":
            skipped += 1
            continue
        assert result.feasible, f"seed {seed} lost feasibility mid-episode"
        assert result.violation is None, f"seed {seed}: {result.violation}"
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    _report("recursive feasibility",
            f"100 rollouts, {skipped} infeasible at t=0, zero losses, "
            f"zero violations, {elapsed:.0f}s")


def _max_feasible_w1(controller, seeds):
    """Largest grid w1 whose t=0 problem from X0 is feasible for a
    majority of the warm-start seeds."""
    best = 0.0
    for w1 in W1_GRID:
        votes = 0
        for seed in seeds:
            exp = matched_experiment(w1=w1)
            state = setup_experiment(exp, make_rng(seed, 0))
            ing = episode_ingredients(exp, state, controller)
            if ing is not None and qp_feasible(ing.qp, X0):
                votes += 1
        if 2 * votes > len(seeds):
            best = w1
    return best


def test_acceptance_matched_feasibility_margin():
    # cancellation keeps the plant controllable well past the benchmark
    start = time.monotonic()
    seeds = range(5)
    ce_max = _max_feasible_w1("ce", seeds)
    bm_max = _max_feasible_w1("benchmark", seeds)
    assert bm_max > 0.0
    assert ce_max >= 1.5 * bm_max
    elapsed = time.monotonic() - start
    assert elapsed < 600.0
    _report("feasibility margin",
            f"ce w1<={ce_max}, benchmark w1<={bm_max}, ratio "
            f"{ce_max / bm_max:.2f} (needs >=1.5), {elapsed:.0f}s")


def test_acceptance_envelope_dominance():
    # ce envelope covers the benchmark's at every w1 and outlives it
    start = time.monotonic()
    fractions = {}
    bm_empty = {}
    for w1 in W1_GRID:
        exp = matched_experiment(w1=w1)
        state = setup_experiment(exp, make_rng(0, 0))
        ce, _ = feasible_fraction(exp, state, "ce", grid=21)
        bm, _ = feasible_fraction(exp, state, "benchmark", grid=21)
        fractions[w1] = (ce, bm)
        bm_empty[w1] = episode_ingredients(exp, state, "benchmark") is None
    for w1, (ce, bm) in fractions.items():
        assert ce >= bm - 1e-12, f"w1={w1}: ce {ce} < benchmark {bm}"
    breaking = [w1 for w1 in W1_GRID if fractions[w1][1] == 0.0]
    assert breaking, "benchmark envelope never emptied on the grid"
    first_break = breaking[0]
    assert fractions[first_break][0] > 0.0
    assert bm_empty[first_break]
    assert fractions[first_break][1] == 0.0
    elapsed = time.monotonic() - start
    assert elapsed < 900.0
    _report("envelope dominance",
            f"ce >= benchmark on all {len(W1_GRID)} values; benchmark "
            f"empties at w1={first_break} where ce="
            f"{fractions[first_break][0]:.3f}, {elapsed:.0f}s")


def test_acceptance_cost_parity():
    # cancellation costs nothing where the benchmark also works
    start = time.monotonic()
    ratios = {}
    for w1 in (0.1, 0.2, 0.3):
        ce_costs, bm_costs = [], []
        for seed in range(20):
            exp = matched_experiment(w1=w1)
            ce = run_experiment(exp, 1, seed, controller="ce")[0]
            bm = run_experiment(exp, 1, seed, controller="benchmark")[0]
            assert ce.feasible and bm.feasible
            ce_costs.append(ce.realized_cost)
            bm_costs.append(bm.realized_cost)
        ratio = float(np.mean(ce_costs) / np.mean(bm_costs))
        assert ratio <= 1.15
        ratios[w1] = ratio
    elapsed = time.monotonic() - start
    _report("cost parity",
            "mean ce/benchmark cost over 20 seeds: "
            + ", ".join(f"w1={w}: {r:.3f}" for w, r in ratios.items())
            + f" (needs <=1.15), {elapsed:.0f}s")


def test_acceptance_bound_nestedness():
    # committed radii and both support boxes never grow, exactly
    start = time.monotonic()
    for seed in range(5):
        exp = matched_experiment()
        state = setup_experiment(exp, make_rng(seed, 0))
        rows = []
        for ep in range(3):
            res = run_episode(exp, state, make_rng(seed, 1, ep))
            rows += [(rec.radii, rec.fhat_radii, rec.dhat_radii)
                     for rec in res.trace]
        for prev, cur in zip(rows, rows[1:]):
            for p, c in zip(prev, cur):
                assert np.all(c <= p)
    elapsed = time.monotonic() - start
    _report("bound nestedness",
            f"5 seeds x 3 episodes, all radii nonincreasing, "
            f"{elapsed:.0f}s")


def test_acceptance_rpi_sampling():
    # 500 points x all tube vertices stay inside the terminal set
    start = time.monotonic()
    exp = matched_experiment()
    state = setup_experiment(exp, make_rng(0, 0))
    ing = episode_ingredients(exp, state, "ce")
    A_K = exp.mpc.A - exp.mpc.B @ state.K
    points = ing.O.sample(make_rng(0, 5), 500)
    escapes = 0
    worst = -np.inf
    for signs in product((-1.0, 1.0), repeat=2):
        vertex = ing.tube.center + np.array(signs) * ing.tube.radii
        for x in points:
            x_next = A_K @ x + vertex
            worst = max(worst, float(np.max(ing.O.A @ x_next - ing.O.b)))
            if not ing.O.contains(x_next, tol=1e-7):
                escapes += 1
    assert escapes == 0
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    _report("rpi sampling",
            f"500 points x 4 vertices, zero escapes, worst slack "
            f"{worst:.2e}, {elapsed:.1f}s")


def test_acceptance_quadrotor_learning_trend():
    # ten episodes of wind learning cut cost and land nearer the origin
    start = time.monotonic()
    exp, _ = quadrotor_setup(seed=0)
    ce = run_experiment(exp, 10, seed=0, controller="ce")
    assert all(r.feasible for r in ce)
    assert all(r.violation is None for r in ce)
    costs = [r.realized_cost for r in ce]
    assert costs[9] <= 0.97 * costs[0], (costs[0], costs[9])
    naive = run_experiment(exp, 1, seed=0, controller="naive")[0]
    ce_err = float(np.linalg.norm(ce[-1].final_x[:2]))
    naive_err = float(np.linalg.norm(naive.final_x[:2]))
    assert ce_err < naive_err
    elapsed = time.monotonic() - start
    assert elapsed < 1200.0
    _report("quadrotor trend",
            f"episode cost {costs[0]:.1f} -> {costs[9]:.1f} "
            f"({100 * (1 - costs[9] / costs[0]):.1f}% drop, needs >=3%), "
            f"final position error {ce_err:.3f} vs naive {naive_err:.3f}, "
            f"{elapsed:.0f}s")


def test_acceptance_safety_chance_bound():
    # with truth drawn from the prior, violations stay within budget
    start = time.monotonic()
    sigma = float(np.sqrt(5e-3))
    lam0 = 1.0
    violations = 0
    for seed in range(200):
        W = (sigma / np.sqrt(lam0)) * \
            make_rng(seed, 9).standard_normal((2, 1))
        exp = matched_experiment()
        exp = dataclasses.replace(
            exp,
            plant=dataclasses.replace(exp.plant, W_true=W),
            est=EstimatorSpec(kind="blr", delta=0.05, warm_k=45,
                              prior_scale=lam0))
        result = run_experiment(exp, 1, seed)[0]
        if result.violation is not None:
            violations += 1
    fraction = violations / 200.0
    assert fraction <= 0.08
    elapsed = time.monotonic() - start
    _report("safety chance bound",
            f"200 prior-drawn rollouts at delta=0.05, violation fraction "
            f"{fraction:.3f} (needs <=0.08), {elapsed:.0f}s")
