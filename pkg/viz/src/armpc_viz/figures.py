"""Figure builders for armpc exports.

Four kinds: state-space trajectory with tubes and terminal set,
feasible-envelope fractions vs a swept parameter, sweep cost curves
with 2-sigma bars, and quadrotor xy-paths over the learned wind field.
All functions take loaded data (see io) and return a matplotlib
Figure; saving is the caller's job.
"""

import os

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt
from matplotlib.collections import LineCollection
from matplotlib.patches import Rectangle

from .io import SchemaError

__all__ = ["plot_trajectory", "plot_envelope", "plot_sweep",
           "plot_quadrotor", "polygon_vertices"]


def polygon_vertices(A, b, tol=1e-7):
    """Vertices of {x : Ax <= b} in the plane, ordered by angle.

    Pairwise constraint intersections filtered by feasibility; fine for
    the small polytopes the exports contain.  None if the set has no
    planar interior to outline.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    if A.ndim != 2 or A.shape[1] != 2:
        return None
    points = []
    for i in range(len(A)):
        for j in range(i + 1, len(A)):
            M = np.array([A[i], A[j]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, np.array([b[i], b[j]]))
            if np.all(A @ v <= b + tol):
                points.append(v)
    if len(points) < 3:
        return None
    pts = np.unique(np.round(np.array(points), 9), axis=0)
    if len(pts) < 3:
        return None
    mid = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - mid[1], pts[:, 0] - mid[0]))
    return pts[order]


def _outline(ax, poly, **kwargs):
    verts = polygon_vertices(*poly)
    if verts is None:
        return
    closed = np.vstack([verts, verts[:1]])
    ax.plot(closed[:, 0], closed[:, 1], **kwargs)


def _tube_rect(box, **kwargs):
    c, r = box["center"][:2], box["radii"][:2]
    return Rectangle((c[0] - r[0], c[1] - r[1]), 2 * r[0], 2 * r[1],
                     **kwargs)


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def plot_trajectory(trace, sets=None):
    """Realized path, nominal prediction, tubes, terminal set."""
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    if sets is not None:
        _outline(ax, sets["state_set"], color="0.6", lw=1.0,
                 label="state constraints")
        _outline(ax, sets["terminal_set"], color="seagreen", lw=1.4,
                 ls="--", label="terminal set")
        tubes = sets["tubes"]
        for k, box in enumerate(tubes):
            edge = k in (0, len(tubes) - 1)
            ax.add_patch(_tube_rect(
                box, fill=False, lw=1.3 if edge else 0.7,
                edgecolor="tab:red" if edge else "lightcoral",
                alpha=1.0 if edge else 0.6))
        centers = np.array([box["center"][:2] for box in tubes])
        ax.plot(centers[:, 0], centers[:, 1], color="tab:red",
                marker="o", ms=3.5, lw=1.2,
                label="nominal prediction (t=0)")
    ax.plot(trace.x[:, 0], trace.x[:, 1], color="navy", marker=".",
            ms=3, lw=1.4, label="realized")
    ax.plot(*trace.x[0, :2], marker="s", color="navy", ms=7)
    ax.plot(*trace.x[-1, :2], marker="*", color="navy", ms=11)
    step = trace.truncation_step
    if step is not None:
        ax.plot(*trace.x[-1, :2], marker="x", color="crimson", ms=11,
                mew=2.5)
        ax.annotate(f"infeasible at t={step}", trace.x[-1, :2],
                    textcoords="offset points", xytext=(8, 8),
                    color="crimson", fontsize=9)
    ax.set_xlabel("x_0")
    ax.set_ylabel("x_1")
    ax.set_title(_stem(trace.path))
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    return fig


def plot_envelope(env):
    """Feasible fraction vs parameter, solid ce, dashed benchmark."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    styles = {"ce": {"ls": "-", "marker": "o", "color": "tab:blue"},
              "benchmark": {"ls": "--", "marker": "s",
                            "color": "tab:orange"}}
    for name in ("ce", "benchmark"):
        pts = np.array(env[name])
        ax.plot(pts[:, 0], pts[:, 1], label=name, **styles[name])
    ax.set_xlabel(env["param"])
    ax.set_ylabel("feasible fraction of state set")
    ax.set_ylim(-0.03, 1.05)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def plot_sweep(rows, xlabel="parameter value"):
    """Mean realized cost with 2-sigma bars; infeasible values marked
    at the axis floor."""
    feasible = [r for r in rows if r["cost_mean"] is not None]
    if not feasible:
        raise SchemaError("sweep has no feasible rows to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    xs = [r["param"] for r in feasible]
    means = [r["cost_mean"] for r in feasible]
    bars = [r["cost_2sigma"] for r in feasible]
    ax.errorbar(xs, means, yerr=bars, fmt="o-", color="tab:blue",
                capsize=4, lw=1.4)
    dead = [r["param"] for r in rows if r["cost_mean"] is None]
    if dead:
        ax.plot(dead, [0.03] * len(dead), "x", color="crimson", ms=9,
                mew=2, transform=ax.get_xaxis_transform(),
                clip_on=False, label="no feasible seed")
        ax.legend(fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("realized cost (mean, 2-sigma bars)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def plot_quadrotor(traces, wind):
    """xy-paths with orientation glyphs over learned wind contours."""
    for trace in traces:
        if trace.n != 6:
            raise SchemaError(f"{trace.path}: quadrotor figure needs a "
                              f"6-state trace, got n={trace.n}")
    fig, ax = plt.subplots(figsize=(6.6, 5.6))
    cs = ax.contourf(wind["x"], wind["y"], wind["speed"], levels=18,
                     cmap="viridis", alpha=0.85)
    fig.colorbar(cs, ax=ax, label="learned wind speed (m/s)")
    colors = ["black", "crimson", "white", "gold"]
    for idx, trace in enumerate(traces):
        color = colors[idx % len(colors)]
        ax.plot(trace.x[:, 0], trace.x[:, 1], color=color, lw=1.6,
                label=_stem(trace.path))
        ax.plot(*trace.x[0, :2], marker="s", color=color, ms=6)
        ax.plot(*trace.x[-1, :2], marker="*", color=color, ms=11)
        every = max(1, len(trace.x) // 12)
        half = 0.09
        segs = []
        for px, py, th in trace.x[::every, :3]:
            d = half * np.array([np.cos(th), np.sin(th)])
            segs.append([(px - d[0], py - d[1]),
                         (px + d[0], py + d[1])])
        ax.add_collection(LineCollection(segs, colors=color, lw=2.2))
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal", adjustable="box")
    fig.tight_layout()
    return fig
