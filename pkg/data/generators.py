"""
Reference ground-truth generators.

Ropes are integrated with position-based dynamics: semi-implicit Euler
prediction followed by Gauss-Seidel projection of the segment-length
constraints, with node 0 pinned. Bouncing balls use impulse-based
perfectly elastic contacts plus positional de-penetration inside a box.
Both record every `substeps`-th substep.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

from data.exceptions import PlacementError
from data.structures import Trajectory
from graphs.structures import Box, NODE_FIXED, NODE_FREE, Statics

logger = logging.getLogger(__name__)

GRAVITY = np.array([0.0, -9.81])
DT = 0.001
SUBSTEPS = 30
NUM_FRAMES = 160
PBD_SWEEPS = 50
MAX_PLACEMENT_ATTEMPTS = 10_000
CONTACT_SLOP = 1e-12

ROPE_DEFAULTS = {
    "num_nodes": [5, 10],
    "rest_length": [0.6, 1.1],
    "dt": DT,
    "substeps": SUBSTEPS,
    "num_frames": NUM_FRAMES,
    "sweeps": PBD_SWEEPS,
}

BALLS_DEFAULTS = {
    "num_balls": [5, 10],
    "radius": [0.11, 0.3],
    "speed": 2.0,
    "box": {"lower": [0.0, 0.0], "upper": [5.0, 5.0]},
    "gravity": True,
    "dt": DT,
    "substeps": SUBSTEPS,
    "num_frames": NUM_FRAMES,
}


def child_rng(seed, index):
    """Independent stream for trajectory `index` of a dataset."""
    return np.random.default_rng([int(seed), int(index)])


def _node_count(rng, bounds):
    low, high = bounds
    return int(rng.integers(low, high + 1))


def _meta(params, seed, index):
    return {"dt_record": params["dt"] * params["substeps"],
            "substeps": params["substeps"], "seed": int(seed),
            "index": int(index)}


# rope

def _rope_initial(rng, params):
    num_nodes = _node_count(rng, params["num_nodes"])
    rest = float(rng.uniform(*params["rest_length"]))
    angle = float(rng.uniform(0.0, 2.0 * np.pi))
    direction = np.array([np.cos(angle), np.sin(angle)])
    positions = np.arange(num_nodes)[:, None] * rest * direction
    return positions, rest


def project_segments(positions, inv_mass, rest, active, sweeps):
    """
    Gauss-Seidel projection of |p[s+1] - p[s]| = rest over a batch of
    padded chains, in place. Segments are swept even-first then odd;
    segments of one parity share no node.

    positions: B x J x D, inv_mass: B x J, rest: B, active: B x (J-1).
    """
    num_segments = positions.shape[1] - 1
    passes = [np.arange(0, num_segments, 2), np.arange(1, num_segments, 2)]
    for _ in range(sweeps):
        for seg in passes:
            if seg.size == 0:
                continue
            head, tail = positions[:, seg], positions[:, seg + 1]
            delta = tail - head
            length = np.sqrt(np.sum(delta * delta, axis=-1))
            w_head, w_tail = inv_mass[:, seg], inv_mass[:, seg + 1]
            w_sum = w_head + w_tail
            ok = active[:, seg] & (w_sum > 0) & (length > 1e-12)
            safe_len = np.where(ok, length, 1.0)
            scale = np.where(ok, (length - rest[:, None])
                             / np.where(ok, w_sum, 1.0), 0.0)
            correction = (scale / safe_len)[..., None] * delta
            positions[:, seg] = head + w_head[..., None] * correction
            positions[:, seg + 1] = tail - w_tail[..., None] * correction


def simulate_ropes(initial, rests, params, with_velocities=False):
    """
    Integrate a batch of ropes (lists of J_b x 2 initial positions).

    Returns per-rope frame arrays (num_frames x J_b x 2) and, on request,
    the matching velocities.
    """
    batch = len(initial)
    counts = [p.shape[0] for p in initial]
    width = max(counts)
    positions = np.zeros((batch, width, 2))
    inv_mass = np.zeros((batch, width))
    active = np.zeros((batch, max(width - 1, 0)), dtype=bool)
    for b, p in enumerate(initial):
        positions[b, :counts[b]] = p
        inv_mass[b, 1:counts[b]] = 1.0
        active[b, :counts[b] - 1] = True
    rest = np.asarray(rests, dtype=np.float64)
    velocity = np.zeros_like(positions)
    moving = (inv_mass > 0)[..., None]
    dt = params["dt"]

    frames = [positions.copy()]
    speeds = [velocity.copy()]
    for _ in range(1, params["num_frames"]):
        for _ in range(params["substeps"]):
            velocity = velocity + np.where(moving, GRAVITY * dt, 0.0)
            predicted = positions + velocity * dt
            project_segments(predicted, inv_mass, rest, active,
                             params["sweeps"])
            velocity = (predicted - positions) / dt
            positions = predicted
        frames.append(positions.copy())
        speeds.append(velocity.copy())

    frames = np.stack(frames, axis=1)
    speeds = np.stack(speeds, axis=1)
    out = [frames[b, :, :counts[b]] for b in range(batch)]
    if with_velocities:
        return out, [speeds[b, :, :counts[b]] for b in range(batch)]
    return out


def generate_rope(seed, n_traj, **overrides):
    """Rope trajectories; `num_nodes=[20, 20]` gives fixed-length ropes."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    params = {**ROPE_DEFAULTS, **overrides}
    initial, rests = [], []
    for index in range(n_traj):
        positions, rest = _rope_initial(child_rng(seed, index), params)
        initial.append(positions)
        rests.append(rest)
    frames = simulate_ropes(initial, rests, params)

    trajectories = []
    for index, (positions, rest) in enumerate(zip(frames, rests)):
        node_type = [NODE_FIXED] + [NODE_FREE] * (positions.shape[1] - 1)
        trajectories.append(Trajectory(
            positions, Statics(node_type, rest_length=rest),
            meta=_meta(params, seed, index)))
    logger.info("generated %d rope trajectories (seed %s)", n_traj, seed)
    return trajectories


# bouncing balls

def place_balls(rng, radius, box, max_attempts=MAX_PLACEMENT_ATTEMPTS):
    """Rejection-sample non-overlapping centres inside `box`."""
    lower = np.asarray(box.lower, dtype=np.float64)
    upper = np.asarray(box.upper, dtype=np.float64)
    placed = []
    attempts = 0
    for r in radius:
        while True:
            attempts += 1
            if attempts > max_attempts:
                raise PlacementError(max_attempts, len(radius))
            candidate = rng.uniform(lower + r, upper - r)
            if all(np.linalg.norm(candidate - p) >= r + q
                   for p, q in zip(placed, radius)):
                placed.append(candidate)
                break
    return np.array(placed)


def resolve_ball_contact(positions, velocity, radius, i, j, restitution=1.0,
                         impulse=True):
    """
    Unit-mass impulse between balls i and j when they overlap and approach,
    plus symmetric de-penetration. Arrays are updated in place; with
    `impulse=False` only the positions are separated.
    """
    delta = positions[j] - positions[i]
    distance = float(np.sqrt(delta @ delta))
    overlap = radius[i] + radius[j] - distance
    if overlap <= 0.0 or distance == 0.0:
        return False
    normal = delta / distance
    approach = float((velocity[j] - velocity[i]) @ normal)
    if impulse and approach < 0.0:
        exchange = 0.5 * (1.0 + restitution) * approach
        velocity[i] += exchange * normal
        velocity[j] -= exchange * normal
    positions[i] -= 0.5 * overlap * normal
    positions[j] += 0.5 * overlap * normal
    return True


def reflect_walls(positions, velocity, radius, box):
    """Negate the normal velocity of balls moving into a wall and clamp
    them back inside; tangential components are untouched."""
    lower = np.asarray(box.lower, dtype=np.float64)
    upper = np.asarray(box.upper, dtype=np.float64)
    r = radius[:, None]
    below = positions - r < lower
    above = positions + r > upper
    velocity[below & (velocity < 0)] *= -1.0
    velocity[above & (velocity > 0)] *= -1.0
    np.clip(positions, lower + r, upper - r, out=positions)


def _overlapping_pairs(positions, radius):
    delta = positions[None, :, :] - positions[:, None, :]
    distance = np.sqrt(np.sum(delta * delta, axis=-1))
    reach = radius[:, None] + radius[None, :]
    i, j = np.nonzero(np.triu(distance < reach - CONTACT_SLOP, k=1))
    return list(zip(i.tolist(), j.tolist()))


def step_balls(positions, velocity, radius, box, dt, gravity=True,
               relax_passes=20):
    if gravity:
        velocity += GRAVITY * dt
    positions += velocity * dt
    for pass_index in range(relax_passes):
        pairs = _overlapping_pairs(positions, radius)
        for i, j in pairs:
            # later passes only separate what the clamping pushed together
            resolve_ball_contact(positions, velocity, radius, i, j,
                                 impulse=pass_index == 0)
        reflect_walls(positions, velocity, radius, box)
        if not pairs:
            break


def simulate_balls(positions, velocity, radius, box, params):
    positions = np.array(positions, dtype=np.float64)
    velocity = np.array(velocity, dtype=np.float64)
    radius = np.asarray(radius, dtype=np.float64)
    frames = [positions.copy()]
    speeds = [velocity.copy()]
    for _ in range(1, params["num_frames"]):
        for _ in range(params["substeps"]):
            step_balls(positions, velocity, radius, box, params["dt"],
                       params["gravity"])
        frames.append(positions.copy())
        speeds.append(velocity.copy())
    return np.stack(frames), np.stack(speeds)


def sample_balls(rng, params, box):
    """Initial centres, velocities and radii of one trajectory."""
    count = _node_count(rng, params["num_balls"])
    radius = rng.uniform(*params["radius"], size=count)
    start = place_balls(rng, radius, box)
    speed = params["speed"]
    velocity = rng.uniform(-speed, speed, size=(count, 2))
    return start, velocity, radius


def _one_balls_trajectory(seed, index, params, box):
    start, velocity, radius = sample_balls(child_rng(seed, index), params,
                                           box)
    frames, _ = simulate_balls(start, velocity, radius, box, params)
    return Trajectory(frames, Statics([NODE_FREE] * len(radius),
                                      radius=radius),
                      box, meta=_meta(params, seed, index))


def generate_bouncing_balls(seed, n_traj, gravity_on=True, **overrides):
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    params = {**BALLS_DEFAULTS, **overrides, "gravity": bool(gravity_on)}
    box = Box(tuple(params["box"]["lower"]), tuple(params["box"]["upper"]))
    workers = max(1, int(getattr(settings, "CGNS_WORKERS", 1)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        trajectories = list(pool.map(
            lambda index: _one_balls_trajectory(seed, index, params, box),
            range(n_traj)))
    logger.info("generated %d bouncing-balls trajectories (seed %s, "
                "gravity %s)", n_traj, seed, params["gravity"])
    return trajectories


def generator_params(domain, **overrides):
    """The parameter record stored in a dataset manifest."""
    base = ROPE_DEFAULTS if domain == "rope" else BALLS_DEFAULTS
    return {**base, **overrides}
