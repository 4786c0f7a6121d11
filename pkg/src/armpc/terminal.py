"""Terminal ingredients: LQR cost-to-go, gain, and the maximal robust
positive invariant set of the closed loop x+ = (A - BK)x + d.
"""

from dataclasses import dataclass

import numpy as np

from .geom import Box, HPolytope, poly_is_subset, pre_set

__all__ = [
    "TerminalIngredients",
    "RpiIterationError",
    "solve_dare",
    "max_rpi",
    "terminal_ingredients",
]

DARE_TOL = 1e-10
DARE_MAX_ITER = 100000
RPI_TOL = 1e-9
RPI_MAX_ITER = 200


class RpiIterationError(RuntimeError):
    """Invariant-set iteration hit its cap; carries the last iterate."""

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class TerminalIngredients:
    """Terminal cost x^T P x, terminal law u = -Kx, terminal set O."""

    P: np.ndarray
    K: np.ndarray
    O: HPolytope


def solve_dare(A, B, Q, R):
    """Fixed point of the Riccati recursion, with the associated gain.

    Iterates P <- Q + A^T P A - A^T P B (R + B^T P B)^-1 B^T P A from
    P = Q until the max-norm change drops below 1e-10.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    for _ in range(DARE_MAX_ITER):
        BtP = B.T @ P
        gain = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.max(np.abs(P_next)) > 1e150:
            raise RuntimeError("not stabilizable")
        if np.max(np.abs(P_next - P)) < DARE_TOL:
            K = np.linalg.solve(R + B.T @ P_next @ B, B.T @ P_next @ A)
            return P_next, K
        P = P_next
    raise RuntimeError("not stabilizable")


def max_rpi(A_K, X, U_tight, K, D_hat, tol=RPI_TOL, max_iter=RPI_MAX_ITER):
    """Maximal robust positive invariant subset of X with terminal law -Kx.

    Starts from Omega_0 = X intersected with {x : -Kx in U_tight} and
    iterates Omega <- pre_set(A_K, Omega, D_hat) cap Omega_0 until two
    consecutive iterates coincide (mutual subset within tol).  An empty
    result is a valid outcome.
    """
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    omega0 = X
    if U_tight is not None and U_tight.nrows > 0:
        K = np.atleast_2d(np.asarray(K, dtype=float))
        in_u = HPolytope(-U_tight.A @ K, U_tight.b.copy())
        omega0 = X.intersect(in_u)
    if omega0.is_empty():
        return omega0
    omega = omega0
    for _ in range(max_iter):
        nxt = pre_set(A_K, omega, D_hat, tol=tol).intersect(omega0, tol=tol)
        if nxt.is_empty():
            return nxt
        if poly_is_subset(omega, nxt, tol=tol) and poly_is_subset(nxt, omega, tol=tol):
            return nxt
        omega = nxt
    raise RpiIterationError("invariant set iteration did not converge", omega)


def terminal_ingredients(A, B, Q, R, X, U_tight, D_hat):
    """DARE cost and gain plus the matching terminal set."""
    P, K = solve_dare(A, B, Q, R)
    A_K = np.atleast_2d(np.asarray(A, dtype=float)) - \
        np.atleast_2d(np.asarray(B, dtype=float)) @ K
    O = max_rpi(A_K, X, U_tight, K, D_hat)
    return TerminalIngredients(P=P, K=K, O=O)
