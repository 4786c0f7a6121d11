"""Constraint-tightened robust MPC over affine disturbance feedback.

The controller plans a nominal input sequence u_bar plus causal feedback
gains K_{k,j} acting on past disturbances.  For a box disturbance set
the worst case of each constraint row splits per disturbance coordinate,
so the robust counterpart is exact with one absolute-value epigraph
variable per (row, step, coordinate) and the problem stays a QP:

    u_k = u_bar_k + sum_{j<k} K_{k,j} d_j
    x_k = xbar_k + sum_{j<k} M_{k,j} d_j,
    M_{k,j} = A^{k-1-j} + sum_{l=j+1}^{k-1} A^{k-1-l} B K_{l,j}

Feedback modes: "optimized" (gains are decision variables), "fixed"
(K_{k,j} = -K (A-BK)^{k-1-j} from a given stabilizing K, tightenings
become constants), "open-loop" (zero gains).

Constraints are affine in the measured state, so the QP is built once
per set of ingredients and re-solved for each new x0.
"""

import contextlib
import os
import sys
import threading
from dataclasses import dataclass, field

import numpy as np
import osqp
import scipy.sparse as sp
from scipy.optimize import linprog

from .geom import Box, HPolytope

__all__ = [
    "SolverError",
    "MpcConfig",
    "StepIngredients",
    "MpcSolution",
    "QpLayout",
    "QpForm",
    "pseudo_inverse",
    "build_qp",
    "qp_feasible",
    "solve_qp",
    "solve_step",
    "ce_policy",
    "benchmark_policy",
    "predicted_tubes",
]

FEEDBACK_MODES = ("optimized", "fixed", "open-loop")


class SolverError(RuntimeError):
    """QP backend failed in a way that is not a certified infeasibility."""


@dataclass(frozen=True)
class MpcConfig:
    """Plant matrices, costs, constraints, horizon, and feedback mode."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    N: int
    X: HPolytope
    U: HPolytope
    feedback_mode: str = "optimized"
    K_fixed: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, float)))
        object.__setattr__(self, "B", np.atleast_2d(np.asarray(self.B, float)))
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, float)))
        object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, float)))
        if self.N < 1:
            raise ValueError("horizon must be at least 1")
        if self.feedback_mode not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.feedback_mode!r}")
        if self.feedback_mode == "fixed" and self.K_fixed is None:
            raise ValueError("fixed feedback mode needs a gain")
        if np.any(np.linalg.eigvalsh(self.Q) <= 0):
            raise ValueError("state cost must be positive definite")
        if np.any(np.linalg.eigvalsh(self.R) <= 0):
            raise ValueError("input cost must be positive definite")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class StepIngredients:
    """Per-episode data the QP depends on besides the measured state."""

    D_hat: Box
    U_tight: HPolytope
    O: HPolytope
    P: np.ndarray


@dataclass(frozen=True)
class MpcSolution:
    """First-input policy plus diagnostics for one solved step."""

    status: str                    # "optimal" | "infeasible"
    u_bar: np.ndarray = None       # (N, m)
    gains: dict = None             # (k, j) -> (m, n); None unless optimized
    nominal_traj: np.ndarray = None  # (N+1, n), exact under A, B
    cost: float = np.nan
    solver_status: str = ""
    iterations: int = 0

    @property
    def u0(self):
        return self.u_bar[0]


@dataclass(frozen=True)
class QpLayout:
    """Where each decision block lives in the stacked variable vector."""

    N: int
    n: int
    m: int
    mode: str
    n_u: int
    gain_offsets: dict
    n_gain: int
    n_epi: int

    @property
    def nz(self):
        return self.n_u + self.n_gain + self.n_epi

    def u_bar_of(self, z):
        return z[:self.n_u].reshape(self.N, self.m)

    def gains_of(self, z):
        if self.mode != "optimized":
            return None
        return {kj: z[off:off + self.m * self.n].reshape(self.m, self.n)
                for kj, off in self.gain_offsets.items()}


@dataclass
class QpForm:
    """Sparse QP, affine in the measured state.

    objective  0.5 z^T H z + (Gx0 x0)^T z + x0^T C x0
    subject to G z <= h_const - E x0
    """

    H: sp.csc_matrix
    Gx0: np.ndarray
    C: np.ndarray
    G: sp.csc_matrix
    h_const: np.ndarray
    E: np.ndarray
    layout: QpLayout

    def q_of(self, x0):
        return self.Gx0 @ x0

    def h_of(self, x0):
        return self.h_const - self.E @ x0

    def cost_const(self, x0):
        return float(x0 @ self.C @ x0)


def pseudo_inverse(B):
    """Left pseudo-inverse (B^T B)^{-1} B^T of a full-column-rank matrix."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    gram = B.T @ B
    if np.linalg.matrix_rank(gram) < B.shape[1]:
        raise ValueError("input matrix must have full column rank")
    return np.linalg.solve(gram, B.T)


def _fixed_gains(cfg):
    """K_{k,j} = -K (A - B K)^{k-1-j} for the tube law u = u_bar - K e."""
    K = np.atleast_2d(np.asarray(cfg.K_fixed, dtype=float))
    A_K = cfg.A - cfg.B @ K
    powers = [np.eye(cfg.n)]
    for _ in range(cfg.N):
        powers.append(A_K @ powers[-1])
    return {(k, j): -K @ powers[k - 1 - j]
            for k in range(1, cfg.N) for j in range(k)}


class _RowAccumulator:
    """Collects sparse constraint rows G z <= h_const - E x0."""

    def __init__(self, n):
        self.rows, self.cols, self.vals = [], [], []
        self.h_const = []
        self.E_rows = []
        self.n = n
        self.nrows = 0

    def add_row(self, cols_vals, h_const, e_row=None):
        r = self.nrows
        for c, v in cols_vals:
            if v != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(v)
        self.h_const.append(h_const)
        self.E_rows.append(np.zeros(self.n) if e_row is None else e_row)
        self.nrows += 1
        return r

    def add_at(self, r, c, v):
        if v != 0.0:
            self.rows.append(r)
            self.cols.append(c)
            self.vals.append(v)

    def bump_h(self, r, delta):
        self.h_const[r] += delta

    def matrices(self, nz):
        G = sp.coo_matrix((self.vals, (self.rows, self.cols)),
                          shape=(self.nrows, nz)).tocsc()
        return G, np.array(self.h_const), np.array(self.E_rows)


def build_qp(cfg, D_hat, U_tight, O, P):
    """Robust counterpart of the tube MPC as a parametric QP.

    State rows cover k = 1..N-1 (the measured state is row zero and
    needs no constraint), the terminal set binds the step-N tube, and
    input rows cover k = 0..N-1 against the tightened input set.
    """
    n, m, N = cfg.n, cfg.m, cfg.N
    A, B = cfg.A, cfg.B
    optimized = cfg.feedback_mode == "optimized"

    Apow = [np.eye(n)]
    for _ in range(N):
        Apow.append(A @ Apow[-1])
    AB = [Apow[p] @ B for p in range(N)]

    known_gains = None
    if cfg.feedback_mode == "fixed":
        known_gains = _fixed_gains(cfg)
    elif cfg.feedback_mode == "open-loop":
        known_gains = {(k, j): np.zeros((m, n))
                       for k in range(1, N) for j in range(k)}

    gain_offsets = {}
    n_gain = 0
    if optimized:
        off = N * m
        for k in range(1, N):
            for j in range(k):
                gain_offsets[(k, j)] = off
                off += m * n
        n_gain = off - N * m

    c_D, r_D = D_hat.center, D_hat.radii
    acc = _RowAccumulator(n)
    epi_count = 0
    epi_rows_pending = []  # (coef_c0, coef_map, main_row, weight)

    def gain_col(l, j, q, i):
        return gain_offsets[(l, j)] + q * n + i

    def add_robust_terms(main_row, k, a, state_row):
        """Worst-case disturbance contributions for one constraint row."""
        nonlocal epi_count
        for j in range(k):
            if state_row:
                c0 = Apow[k - 1 - j].T @ a
                terms = [(l, AB[k - 1 - l].T @ a) for l in range(j + 1, k)]
            else:
                c0 = np.zeros(n)
                terms = [(k, a.copy())]  # input row: coef = K_{k,j}^T a
            if not optimized:
                coef = c0.copy()
                for l, s in terms:
                    coef += known_gains[(l, j)].T @ s
                acc.bump_h(main_row, -(coef @ c_D + np.abs(coef) @ r_D))
                continue
            # center part: coef^T c_D is affine in the gains
            acc.bump_h(main_row, -(c0 @ c_D))
            for l, s in terms:
                for q in range(m):
                    if s[q] == 0.0:
                        continue
                    for i in range(n):
                        if c_D[i] != 0.0:
                            acc.add_at(main_row, gain_col(l, j, q, i),
                                       s[q] * c_D[i])
            # absolute-value part, one epigraph variable per coordinate;
            # coordinates no gain touches tighten the offset directly
            for i in range(n):
                if r_D[i] == 0.0:
                    continue
                gcols = [(gain_col(l, j, q, i), s[q])
                         for l, s in terms for q in range(m) if s[q] != 0.0]
                if not gcols:
                    acc.bump_h(main_row, -abs(c0[i]) * r_D[i])
                    continue
                epi_rows_pending.append((c0[i], gcols, main_row, r_D[i]))
                epi_count += 1

    # state rows k = 1..N-1
    for k in range(1, N):
        for a, bo in zip(cfg.X.A, cfg.X.b):
            cols = [(l * m + q, float((AB[k - 1 - l].T @ a)[q]))
                    for l in range(k) for q in range(m)]
            r = acc.add_row(cols, float(bo), Apow[k].T @ a)
            add_robust_terms(r, k, a, state_row=True)

    # terminal rows k = N
    for a, bo in zip(O.A, O.b):
        cols = [(l * m + q, float((AB[N - 1 - l].T @ a)[q]))
                for l in range(N) for q in range(m)]
        r = acc.add_row(cols, float(bo), Apow[N].T @ a)
        add_robust_terms(r, N, a, state_row=True)

    # input rows k = 0..N-1
    for k in range(N):
        for a, bo in zip(U_tight.A, U_tight.b):
            cols = [(k * m + q, float(a[q])) for q in range(m)]
            r = acc.add_row(cols, float(bo))
            if k > 0:
                add_robust_terms(r, k, a, state_row=False)

    # materialize epigraph variables and their two defining rows each
    n_u = N * m
    epi_base = n_u + n_gain
    for e, (c0_i, gcols, main_row, weight) in enumerate(epi_rows_pending):
        t_col = epi_base + e
        acc.add_at(main_row, t_col, weight)
        acc.add_row(gcols + [(t_col, -1.0)], -c0_i)          # coef - t <= 0
        acc.add_row([(c, -v) for c, v in gcols] + [(t_col, -1.0)], c0_i)

    layout = QpLayout(N=N, n=n, m=m, mode=cfg.feedback_mode, n_u=n_u,
                      gain_offsets=gain_offsets, n_gain=n_gain,
                      n_epi=epi_count)
    G, h_const, E = acc.matrices(layout.nz)

    # objective on the nominal trajectory only
    P = np.atleast_2d(np.asarray(P, dtype=float))
    S = np.zeros((N * n, N * n))
    for k in range(N - 1):
        S[k * n:(k + 1) * n, k * n:(k + 1) * n] = cfg.Q
    S[(N - 1) * n:, (N - 1) * n:] = P
    Phi = np.vstack([Apow[k] for k in range(1, N + 1)])
    Gam = np.zeros((N * n, N * m))
    for k in range(1, N + 1):
        for l in range(k):
            Gam[(k - 1) * n:k * n, l * m:(l + 1) * m] = AB[k - 1 - l]
    H_u = 2.0 * (Gam.T @ S @ Gam + np.kron(np.eye(N), cfg.R))
    H = sp.block_diag(
        [sp.csc_matrix(H_u), sp.csc_matrix((layout.nz - n_u,
                                            layout.nz - n_u))]).tocsc()
    Gx0 = np.zeros((layout.nz, n))
    Gx0[:n_u] = 2.0 * Gam.T @ S @ Phi
    C = cfg.Q + Phi.T @ S @ Phi
    return QpForm(H=H, Gx0=Gx0, C=C, G=G, h_const=h_const, E=E,
                  layout=layout)


def _lp_feasible(G, h):
    res = linprog(np.zeros(G.shape[1]), A_ub=G, b_ub=h,
                  bounds=[(None, None)] * G.shape[1], method="highs")
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverError(f"feasibility LP ended with status {res.status}")


def qp_feasible(qp, x0):
    """Feasibility of the parametric QP at x0, settled by a zero-cost LP."""
    return _lp_feasible(qp.G, qp.h_of(np.asarray(x0, dtype=float)))


_quiet_lock = threading.Lock()
_quiet_depth = 0
_quiet_saved = None


@contextlib.contextmanager
def _quiet_stdout():
    """Mute the solver backend's polish chatter.

    The backend prints through the interpreter's sys.stdout object, so
    a Python-level swap catches it.  Reference-counted so concurrent
    solves from worker threads share one swap instead of racing.
    """
    global _quiet_depth, _quiet_saved
    with _quiet_lock:
        if _quiet_depth == 0:
            _quiet_saved = sys.stdout
            sys.stdout = open(os.devnull, "w")
        _quiet_depth += 1
    try:
        yield
    finally:
        with _quiet_lock:
            _quiet_depth -= 1
            if _quiet_depth == 0:
                sys.stdout.close()
                sys.stdout = _quiet_saved
                _quiet_saved = None


def solve_qp(qp, x0, eps=1e-8, max_iter=200000):
    """Solve the parametric QP at a concrete measured state."""
    x0 = np.asarray(x0, dtype=float)
    q = qp.q_of(x0)
    h = qp.h_of(x0)
    nc = qp.G.shape[0]
    with _quiet_stdout():
        solver = osqp.OSQP()
        solver.setup(P=qp.H, q=q, A=qp.G, l=np.full(nc, -np.inf), u=h,
                     verbose=False, eps_abs=eps, eps_rel=eps,
                     max_iter=max_iter, polishing=True)
        res = solver.solve(raise_error=False)
    status = res.info.status
    layout = qp.layout
    if status in ("solved", "solved inaccurate"):
        z = np.asarray(res.x)
        cost = float(res.info.obj_val) + qp.cost_const(x0)
        return _make_solution(layout, z, cost, status, res.info.iter)
    if "primal infeasible" in status:
        return MpcSolution(status="infeasible", solver_status=status,
                           iterations=int(res.info.iter))
    # ambiguous backend outcome: settle feasibility with an LP
    if not _lp_feasible(qp.G, h):
        return MpcSolution(status="infeasible", solver_status=status,
                           iterations=int(res.info.iter))
    raise SolverError(f"QP backend returned {status!r} on a feasible problem")


def _make_solution(layout, z, cost, status, iters):
    u_bar = layout.u_bar_of(z)
    return MpcSolution(status="optimal", u_bar=u_bar,
                       gains=layout.gains_of(z), nominal_traj=None,
                       cost=cost, solver_status=status,
                       iterations=int(iters))


def _with_trajectory(sol, cfg, x0):
    if sol.status != "optimal":
        return sol
    traj = np.zeros((cfg.N + 1, cfg.n))
    traj[0] = x0
    for k in range(cfg.N):
        traj[k + 1] = cfg.A @ traj[k] + cfg.B @ sol.u_bar[k]
    return MpcSolution(status=sol.status, u_bar=sol.u_bar, gains=sol.gains,
                       nominal_traj=traj, cost=sol.cost,
                       solver_status=sol.solver_status,
                       iterations=sol.iterations)


def solve_step(cfg, x0, ing, qp=None):
    """One receding-horizon step: build (or reuse) the QP and solve it."""
    if qp is None:
        qp = build_qp(cfg, ing.D_hat, ing.U_tight, ing.O, ing.P)
    sol = solve_qp(qp, np.asarray(x0, dtype=float))
    return _with_trajectory(sol, cfg, np.asarray(x0, dtype=float))


def ce_policy(u_star, f_hat_at_x, B_dagger, clamp=None):
    """Cancel the matched part of the learned term: u* - B+ f_hat."""
    f_hat_at_x = np.asarray(f_hat_at_x, dtype=float)
    if clamp is not None:
        lo = clamp.center - clamp.radii
        hi = clamp.center + clamp.radii
        f_hat_at_x = np.clip(f_hat_at_x, lo, hi)
    return np.asarray(u_star, dtype=float) - B_dagger @ f_hat_at_x


def benchmark_policy(cfg, x0, V_prime, O_bench, P, qp=None):
    """Tube MPC that treats the whole learned term as disturbance.

    The tube uses F_hat + V, inputs stay untightened, and the applied
    input is u* with no cancellation.
    """
    ing = StepIngredients(D_hat=V_prime, U_tight=cfg.U, O=O_bench, P=P)
    return solve_step(cfg, x0, ing, qp=qp)


def tube_matrices(cfg, gains):
    """M_{k,j} for the solved policy (identity-led for fixed/open modes)."""
    n, N = cfg.n, cfg.N
    A, B = cfg.A, cfg.B
    Apow = [np.eye(n)]
    for _ in range(N):
        Apow.append(A @ Apow[-1])
    if gains is None:
        if cfg.feedback_mode == "fixed":
            gains = _fixed_gains(cfg)
        else:
            gains = {(k, j): np.zeros((cfg.m, n))
                     for k in range(1, N) for j in range(k)}
    M = {}
    for k in range(1, N + 1):
        for j in range(k):
            Mkj = Apow[k - 1 - j].copy()
            for l in range(j + 1, k):
                Mkj += Apow[k - 1 - l] @ B @ gains[(l, j)]
            M[(k, j)] = Mkj
    return M


def predicted_tubes(cfg, sol, D_hat):
    """Per-step boxes containing the realized state around the nominal."""
    from .geom import box_minkowski, image_hull

    M = tube_matrices(cfg, sol.gains)
    tubes = [Box(sol.nominal_traj[0].copy(), np.zeros(cfg.n))]
    for k in range(1, cfg.N + 1):
        spread = Box(np.zeros(cfg.n), np.zeros(cfg.n))
        for j in range(k):
            spread = box_minkowski(spread, image_hull(M[(k, j)], D_hat))
        tubes.append(Box(sol.nominal_traj[k] + spread.center, spread.radii))
    return tubes
