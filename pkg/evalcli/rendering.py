"""
Static figures: per-frame SVGs of trajectories, metric curves and
constraint landscapes. Rendering only reads its inputs.
"""
import logging
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Rectangle  # noqa: E402

import numpy as np  # noqa: E402

from graphs.services import GraphService  # noqa: E402

logger = logging.getLogger(__name__)

ROPE_NODE_RADIUS = 0.05


def _limits(trajectory, margin=0.5):
    if trajectory.box is not None:
        lower = np.asarray(trajectory.box.lower, dtype=float)
        upper = np.asarray(trajectory.box.upper, dtype=float)
        return lower - 0.1, upper + 0.1
    positions = trajectory.positions
    lower = positions.reshape(-1, positions.shape[-1]).min(axis=0)
    upper = positions.reshape(-1, positions.shape[-1]).max(axis=0)
    return lower - margin, upper + margin


def draw_frame(ax, positions, statics, box=None, edges=None, color="C0"):
    if box is not None:
        lower, upper = box.lower, box.upper
        ax.add_patch(Rectangle(lower, upper[0] - lower[0],
                               upper[1] - lower[1], fill=False,
                               edgecolor="black", linewidth=1.0))
    if edges is not None and len(edges):
        for sender, receiver in edges:
            if sender < receiver:
                ax.plot(positions[[sender, receiver], 0],
                        positions[[sender, receiver], 1], color=color,
                        linewidth=1.5)
    radii = statics.radius if statics.radius is not None else \
        np.full(statics.num_nodes, ROPE_NODE_RADIUS)
    fixed = statics.fixed_mask
    for j, (point, radius) in enumerate(zip(positions, radii)):
        ax.add_patch(Circle(point, radius, facecolor="black" if fixed[j]
                            else color, edgecolor="none", alpha=0.8))


def render_trajectory(trajectory, directory, prefix, connectivity=None,
                      start=0):
    """One SVG per frame from `start`: <prefix>_000.svg, <prefix>_001.svg..."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edges = None
    if connectivity == "chain":
        edges = GraphService.build_connectivity(trajectory.positions[0],
                                                "chain")
    lower, upper = _limits(trajectory)
    paths = []
    for index, positions in enumerate(trajectory.positions[start:]):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        draw_frame(ax, positions, trajectory.statics, trajectory.box, edges)
        ax.set_xlim(lower[0], upper[0])
        ax.set_ylim(lower[1], upper[1])
        ax.set_aspect("equal")
        ax.set_axis_off()
        path = directory / f"{prefix}_{index:03d}.svg"
        fig.savefig(path, format="svg", bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    logger.info("%d frames written to %s", len(paths), directory)
    return paths


def render_curves(frame, path, ylabel="position MSE", logy=True):
    """Line plot of every column of `frame` against its index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for column in frame.columns:
        ax.plot(frame.index, frame[column], marker="o", label=str(column))
    ax.set_xlabel(str(frame.index.name or ""))
    ax.set_ylabel(ylabel)
    if logy and np.all(frame.to_numpy() > 0):
        ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg",
                bbox_inches="tight")
    plt.close(fig)
    return path


def render_landscape(landscape, path):
    """Heatmap of the constraint with the solver iterates on top."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    xs, ys = landscape.xs, landscape.ys
    if len(xs) > 1:
        mesh = ax.pcolormesh(xs, ys, landscape.values, shading="nearest",
                             cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="constraint value")
    else:
        ax.scatter(xs, ys, c=landscape.values.ravel(), cmap="viridis")
    trace = landscape.trace
    ax.plot(trace[:, 0], trace[:, 1], color="white", marker="o",
            markersize=3, linewidth=1.0)
    ax.plot(trace[-1, 0], trace[-1, 1], color="red", marker="x")
    ax.set_xlabel("proposal x")
    ax.set_ylabel("proposal y")
    ax.set_title(f"node {landscape.node}")
    fig.savefig(path, format=path.suffix.lstrip(".") or "png",
                bbox_inches="tight")
    plt.close(fig)
    return path
