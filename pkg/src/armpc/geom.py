"""Axis-aligned box and H-polytope algebra.

Boxes carry the disturbance supports; H-polytopes carry state/input
constraints, feasible parameter sets and terminal sets.  All values are
immutable after construction and every operation is a pure function, so
they are safe to share across threads.
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.optimize import linprog

# Absolute tolerance on halfspace offsets for redundancy / containment tests.
DEFAULT_TOL = 1e-9

# Rows with a normal shorter than this are treated as zero rows.
_ZERO_ROW = 1e-12


class EmptySetError(ValueError):
    """Raised when an operation requires a nonempty set."""


class LpError(RuntimeError):
    """LP backend failed (numerical trouble or unexpected status)."""


@dataclass
class LpSolution:
    """Outcome of min/max of a linear objective over an H-polytope.

    ``value`` is finite iff ``status == "optimal"``.
    """

    status: str            # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float

    @property
    def optimal(self):
        return self.status == "optimal"


def solve_lp(c, A, b, maximize=False):
    """Optimize c^T x over {x : A x <= b} with free variables.

    Thin wrapper over HiGHS;  statuses other than optimal / infeasible /
    unbounded surface as :class:`LpError`.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    sign = -1.0 if maximize else 1.0
    if A is None or A.shape[0] == 0:
        # No constraints: optimum is 0 at the origin only if c == 0.
        if np.all(c == 0.0):
            return LpSolution("optimal", np.zeros(n), 0.0)
        return LpSolution("unbounded", None, -np.inf if not maximize else np.inf)
    res = linprog(sign * c, A_ub=A, b_ub=b, bounds=[(None, None)] * n,
                  method="highs")
    if res.status == 0:
        return LpSolution("optimal", np.asarray(res.x), float(sign * res.fun))
    if res.status == 2:
        return LpSolution("infeasible", None, np.nan)
    if res.status == 3:
        return LpSolution("unbounded", None, np.inf if maximize else -np.inf)
    raise LpError(f"LP solver failed with status {res.status}: {res.message}")


@dataclass
class Box:
    """Axis-aligned interval set {c - r <= x <= c + r}.

    The empty box is a distinguished value (``empty=True``); radii are
    never negative.
    """

    center: np.ndarray
    radii: np.ndarray
    empty: bool = False

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if self.center.shape != self.radii.shape:
            raise ValueError("center and radii dimensions differ")
        if not self.empty and np.any(self.radii < 0):
            raise ValueError("negative radii; use Box.make_empty for the empty box")

    @classmethod
    def make_empty(cls, dim):
        return cls(np.zeros(dim), np.zeros(dim), empty=True)

    @classmethod
    def from_bounds(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls((lo + hi) / 2.0, (hi - lo) / 2.0)

    @property
    def dim(self):
        return self.center.shape[0]

    def support(self, a):
        """Exact support value h(a) = a^T c + sum_i |a_i| r_i."""
        if self.empty:
            raise EmptySetError("empty set")
        a = np.asarray(a, dtype=float)
        if a.shape != self.center.shape:
            raise ValueError("direction dimension mismatch")
        return float(a @ self.center + np.abs(a) @ self.radii)

    def minkowski(self, other):
        """Minkowski sum; exact for boxes (centers and radii add)."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        if self.empty or other.empty:
            return Box.make_empty(self.dim)
        return Box(self.center + other.center, self.radii + other.radii)

    def contains(self, x, tol=DEFAULT_TOL):
        if self.empty:
            return False
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.abs(x - self.center) <= self.radii + tol))

    def vertices(self):
        """All 2^n corner points (small n only)."""
        if self.empty:
            return np.zeros((0, self.dim))
        n = self.dim
        signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n))).T.reshape(-1, n)
        return self.center + signs * self.radii

    def sample(self, rng, count):
        """Uniform samples from the box."""
        if self.empty:
            raise EmptySetError("empty set")
        u = rng.uniform(-1.0, 1.0, size=(count, self.dim))
        return self.center + u * self.radii

    def to_hpolytope(self):
        if self.empty:
            raise EmptySetError("empty set")
        n = self.dim
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([self.center + self.radii, self.radii - self.center])
        return HPolytope(A, b)

    def to_dict(self):
        return {"center": self.center.tolist(), "radii": self.radii.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["center"]), np.asarray(d["radii"]))


def image_hull(M, box):
    """Tightest box containing M * S: center M c, radii |M| r."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != box.dim:
        raise ValueError("matrix/box dimension mismatch")
    if box.empty:
        return Box.make_empty(M.shape[0])
    return Box(M @ box.center, np.abs(M) @ box.radii)


box_image_hull = image_hull


def box_minkowski(a, b):
    return a.minkowski(b)


def box_support(box, a):
    return box.support(a)


@dataclass
class HPolytope:
    """Halfspace representation {x : A x <= b}."""

    A: np.ndarray
    b: np.ndarray
    dim: int = field(default=None)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.dim is None:
            self.dim = self.A.shape[1]
        if self.A.shape != (self.b.shape[0], self.dim):
            raise ValueError("inconsistent halfspace shapes")

    @classmethod
    def universe(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def from_box(cls, box):
        return box.to_hpolytope()

    @classmethod
    def from_bounds(cls, lo, hi):
        return Box.from_bounds(lo, hi).to_hpolytope()

    @property
    def nrows(self):
        return self.A.shape[0]

    def support(self, a):
        """max a^T x over the polytope, as an LpSolution."""
        return solve_lp(np.asarray(a, dtype=float), self.A, self.b, maximize=True)

    def is_empty(self):
        if self.nrows == 0:
            return False
        sol = solve_lp(np.zeros(self.dim), self.A, self.b)
        return sol.status == "infeasible"

    def contains(self, x, tol=DEFAULT_TOL):
        x = np.asarray(x, dtype=float)
        if self.nrows == 0:
            return True
        return bool(np.all(self.A @ x <= self.b + tol))

    def normalized(self):
        """Scale rows to unit normals; drop trivial zero rows.

        A zero row with negative offset encodes an empty set and is kept
        as an explicit 'impossible' marker via a contradictory pair.
        """
        norms = np.linalg.norm(self.A, axis=1)
        keep = norms > _ZERO_ROW
        bad = ~keep & (self.b < -DEFAULT_TOL)
        A = self.A[keep] / norms[keep, None]
        b = self.b[keep] / norms[keep]
        if np.any(bad):
            # 0^T x <= b < 0 is infeasible: encode with contradictory halfspaces.
            e = np.zeros(self.dim)
            e[0] = 1.0
            A = np.vstack([A, e, -e])
            b = np.concatenate([b, [-1.0, -1.0]])
        return HPolytope(A, b, dim=self.dim)

    def reduce(self, tol=DEFAULT_TOL):
        """Remove redundant rows.

        Row i is redundant when max a_i^T x over the remaining rows is at
        most b_i + tol.  Duplicate / dominated rows (same normal, larger
        offset) are dropped cheaply before the per-row LPs.
        """
        P = self.normalized()
        if P.nrows <= 1:
            return P
        if P.is_empty():
            return P
        A, b = P.A, P.b
        # Cheap pass: for (near-)identical normals keep only the smallest offset.
        order = np.lexsort(np.round(A, 10).T)
        A, b = A[order], b[order]
        keep_mask = np.ones(A.shape[0], dtype=bool)
        last = 0
        for i in range(1, A.shape[0]):
            if np.allclose(A[i], A[last], atol=1e-10):
                if b[i] >= b[last]:
                    keep_mask[i] = False
                else:
                    keep_mask[last] = False
                    last = i
            else:
                last = i
        A, b = A[keep_mask], b[keep_mask]
        # LP pass.
        active = np.ones(A.shape[0], dtype=bool)
        for i in range(A.shape[0]):
            active[i] = False
            rest = active.copy()
            sol = solve_lp(A[i], A[rest], b[rest], maximize=True)
            if sol.status == "optimal" and sol.value <= b[i] + tol:
                continue  # redundant, stays dropped
            active[i] = True
        return HPolytope(A[active], b[active], dim=self.dim)

    def intersect(self, other, tol=DEFAULT_TOL):
        """Stack halfspaces and reduce."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        stacked = HPolytope(np.vstack([self.A, other.A]),
                            np.concatenate([self.b, other.b]), dim=self.dim)
        return stacked.reduce(tol)

    def pontryagin_box(self, box):
        """P minus-sunken by a box: offsets shrink by the box support."""
        if self.dim != box.dim:
            raise ValueError("dimension mismatch")
        if box.empty:
            raise EmptySetError("empty subtrahend")
        tighten = np.array([box.support(a) for a in self.A])
        return HPolytope(self.A, self.b - tighten, dim=self.dim)

    def is_subset_of(self, other, tol=DEFAULT_TOL):
        """True iff every facet of `other` is respected by all of self.

        Unbounded directions count as not-subset; an empty self is a
        subset of anything.
        """
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        for a, bo in zip(other.A, other.b):
            sol = self.support(a)
            if sol.status == "infeasible":
                return True
            if sol.status == "unbounded":
                return False
            if sol.value > bo + tol:
                return False
        return True

    def chebyshev(self):
        """Center and radius of the largest inscribed ball.

        Solves max r s.t. a_i^T x + ||a_i|| r <= b_i.  An optimum with
        r < 0 certifies emptiness.
        """
        norms = np.linalg.norm(self.A, axis=1)
        if self.nrows == 0:
            raise LpError("chebyshev center of the whole space is undefined")
        Aext = np.hstack([self.A, norms[:, None]])
        c = np.zeros(self.dim + 1)
        c[-1] = 1.0
        sol = solve_lp(c, Aext, self.b, maximize=True)
        if sol.status == "unbounded":
            raise LpError("unbounded polytope has no Chebyshev center")
        if sol.status != "optimal":
            raise LpError(f"chebyshev LP status {sol.status}")
        radius = sol.value
        if radius < -DEFAULT_TOL:
            raise EmptySetError("empty set")
        return sol.x[:-1].copy(), max(radius, 0.0)

    def bounding_box(self, inflate=0.0):
        """Axis-aligned bounding box via 2n support LPs."""
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            up = self.support(e)
            dn = self.support(-e)
            if not (up.optimal and dn.optimal):
                raise LpError("polytope is unbounded or empty")
            hi[i] = up.value + inflate
            lo[i] = -dn.value - inflate
        return Box.from_bounds(lo, hi)

    def sample(self, rng, count, burn=20):
        """Hit-and-run samples from the interior (needs a bounded set)."""
        x, _ = self.chebyshev()
        pts = np.empty((count, self.dim))
        total = count * max(burn, 1)
        dirs = rng.standard_normal((total, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        k = 0
        for step in range(total):
            d = dirs[step]
            Ad = self.A @ d
            slack = self.b - self.A @ x
            upper = np.inf
            lower = -np.inf
            pos = Ad > 1e-14
            neg = Ad < -1e-14
            if np.any(pos):
                upper = np.min(slack[pos] / Ad[pos])
            if np.any(neg):
                lower = np.max(slack[neg] / Ad[neg])
            if not np.isfinite(upper) or not np.isfinite(lower):
                continue
            t = rng.uniform(min(lower, upper), max(lower, upper))
            x = x + t * d
            if (step + 1) % burn == 0:
                pts[k] = x
                k += 1
                if k == count:
                    break
        if k < count:
            pts[k:] = x
        return pts

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A"]), np.asarray(d["b"]))


def poly_intersect_reduce(P, Q, tol=DEFAULT_TOL):
    return P.intersect(Q, tol)


def poly_pontryagin_box(P, S):
    return P.pontryagin_box(S)


def poly_is_subset(P, Q, tol=DEFAULT_TOL):
    return P.is_subset_of(Q, tol)


def poly_chebyshev(P):
    return P.chebyshev()


def pre_set(A_K, Omega, D, tol=DEFAULT_TOL):
    """One-step robust predecessor set of Omega under x+ = A_K x + d, d in D.

    {x : a_i^T A_K x <= b_i - h_D(a_i)}, reduced.  May be empty.
    """
    A_K = np.asarray(A_K, dtype=float)
    if A_K.shape[0] != A_K.shape[1] or A_K.shape[0] != Omega.dim:
        raise ValueError("A_K must be square and match Omega")
    tighten = np.array([D.support(a) for a in Omega.A]) if Omega.nrows else np.zeros(0)
    raw = HPolytope(Omega.A @ A_K, Omega.b - tighten, dim=Omega.dim)
    return raw.reduce(tol)
