"""Distributed allocation engine.

Synchronous descent loop shared by every analysis in the package: the
provider reassigns each user to its squared-distance-nearest robot of the
right tier, every robot follows the negative energy gradient plus a
logarithmic repulsion barrier, controls are clipped to unit norm, and all
robots move simultaneously off the same snapshot. Tiers advance on one
global clock because the barrier couples them; a tier whose energy change
drops below epsilon freezes and its robots become static obstacles for the
rest.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class InfeasibleAllocationError(RuntimeError):
    """A tier has users to serve but no robot that can serve them."""

    def __init__(self, type_index: int, n_users: int, n_robots: int):
        self.type_index = type_index
        self.n_users = n_users
        self.n_robots = n_robots
        super().__init__(
            f"tier {type_index} has {n_users} user(s) but {n_robots} robot(s)"
        )


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned rectangular arena; robots are clamped to it each step."""

    xmin: float = 0.0
    ymin: float = 0.0
    xmax: float = 10.0
    ymax: float = 10.0

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("workspace must have positive extent")

    def clamp(self, xy: np.ndarray) -> np.ndarray:
        out = np.empty_like(xy)
        np.clip(xy[:, 0], self.xmin, self.xmax, out=out[:, 0])
        np.clip(xy[:, 1], self.ymin, self.ymax, out=out[:, 1])
        return out

    def contains(self, xy) -> bool:
        x, y = float(xy[0]), float(xy[1])
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        low = (self.xmin, self.ymin)
        high = (self.xmax, self.ymax)
        return rng.uniform(low, high, size=(n, 2))


@dataclass(frozen=True)
class PhysicsParams:
    """Step size, barrier weight, safety geometry, and stopping rule."""

    alpha: float = 0.1
    beta: float = 10.0
    r_safe: float = 0.5
    epsilon: float = 1e-3
    t_max: int = 200
    d_coll: float = 0.1
    workspace: Workspace = field(default_factory=Workspace)

    def __post_init__(self) -> None:
        for name in ("alpha", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative (0 disables the barrier)")
        if not 0 < self.d_coll < self.r_safe:
            raise ValueError(
                f"need 0 < d_coll < r_safe, got d_coll={self.d_coll} r_safe={self.r_safe}"
            )
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


def assign_users(user_positions, weights, robot_positions) -> np.ndarray:
    """0/1 assignment matrix b with b[i, j] = 1 iff robot j is the
    squared-distance-nearest to user i (ties to the lowest robot index).

    Weights do not influence the per-user argmin; they are validated here
    because zero-weight users still get a row (contributing zero energy).
    """
    q = np.atleast_2d(np.asarray(user_positions, dtype=np.float64))
    x = np.atleast_2d(np.asarray(robot_positions, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("need at least one robot")
    if w.shape[0] != q.shape[0]:
        raise ValueError(f"{w.shape[0]} weights for {q.shape[0]} users")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    idx = kernels.nearest_assignment(np.ascontiguousarray(q), np.ascontiguousarray(x))
    b = np.zeros((q.shape[0], x.shape[0]), dtype=np.int8)
    b[np.arange(q.shape[0]), idx] = 1
    return b


def locational_energy(b, user_positions, weights, robot_positions) -> float:
    """Weighted quadratic energy of an explicit 0/1 assignment matrix."""
    b = np.asarray(b)
    q = np.atleast_2d(np.asarray(user_positions, dtype=np.float64))
    x = np.atleast_2d(np.asarray(robot_positions, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    if b.shape != (q.shape[0], x.shape[0]):
        raise ValueError(f"assignment shape {b.shape} does not match "
                         f"{q.shape[0]} users x {x.shape[0]} robots")
    if np.any(b.sum(axis=1) != 1):
        raise ValueError("each user must be assigned exactly one robot")
    idx = np.ascontiguousarray(np.argmax(b, axis=1), dtype=np.int64)
    return kernels.assigned_energy(np.ascontiguousarray(q), np.ascontiguousarray(w),
                                   np.ascontiguousarray(x), idx)


def attraction_control(robot_position, assigned_user_positions, weights, alpha: float) -> np.ndarray:
    """Single-robot attraction control: -alpha * sum_i 2 w_i (x - q_i)."""
    x = np.asarray(robot_position, dtype=np.float64)
    q = np.asarray(assigned_user_positions, dtype=np.float64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64)
    if q.shape[0] == 0:
        return np.zeros(2)
    return -2.0 * alpha * np.sum(w[:, None] * (x[None, :] - q), axis=0)


def barrier_control(robot_position, neighbor_positions, beta: float, r_safe: float) -> np.ndarray:
    """Single-robot repulsion: beta (x - x_l) / |x - x_l|^2 summed over
    neighbors strictly inside r_safe.

    A coincident neighbor (distance below the singularity guard) yields a
    unit push along +x instead of a blow-up; the batched engine kernel
    additionally signs such pushes by robot order so coincident robots
    separate.
    """
    x = np.asarray(robot_position, dtype=np.float64)
    xs = np.asarray(neighbor_positions, dtype=np.float64).reshape(-1, 2)
    u = np.zeros(2)
    for xl in xs:
        d = x - xl
        dist2 = float(d[0] * d[0] + d[1] * d[1])
        if dist2 < kernels.COINCIDENT_DIST ** 2:
            log.warning("coincident robots at %s; applying fixed-axis push", x)
            u[0] += 1.0
        elif dist2 < r_safe * r_safe:
            u += beta * d / dist2
    return u


def clip_controls(u: np.ndarray) -> np.ndarray:
    """Row-wise clip to unit Euclidean norm."""
    norms = np.sqrt(u[:, 0] ** 2 + u[:, 1] ** 2)
    factor = np.where(norms > 1.0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return u * factor[:, None]


def _min_pairwise_distance(positions: np.ndarray) -> float:
    if positions.shape[0] < 2:
        return math.inf
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    iu = np.triu_indices(positions.shape[0], k=1)
    return float(np.sqrt(d2[iu].min()))


@dataclass
class _TierInputs:
    users: np.ndarray    # (M_k, 2)
    weights: np.ndarray  # (M_k,)
    robots: np.ndarray   # (N_k, 2)


def _prepare_tiers(users_by_type, robots_by_type, weights_by_type) -> list[_TierInputs]:
    tiers = []
    for k, (uq, rx) in enumerate(zip(users_by_type, robots_by_type), start=1):
        uq = np.ascontiguousarray(np.asarray(uq, dtype=np.float64).reshape(-1, 2))
        rx = np.ascontiguousarray(np.asarray(rx, dtype=np.float64).reshape(-1, 2))
        if weights_by_type is None:
            w = np.ones(uq.shape[0])
        else:
            w = np.ascontiguousarray(np.asarray(weights_by_type[k - 1], dtype=np.float64))
        if uq.shape[0] > 0 and rx.shape[0] == 0:
            raise InfeasibleAllocationError(k, uq.shape[0], rx.shape[0])
        if w.shape[0] != uq.shape[0]:
            raise ValueError(f"tier {k}: {w.shape[0]} weights for {uq.shape[0]} users")
        tiers.append(_TierInputs(uq, w, rx))
    return tiers


@dataclass
class AllocationTrace:
    """Per-tier record of one engine run.

    `positions[t]` and `energies[t]` are the snapshot the provider saw at
    tick t; per the loop ordering the final (post-break) placement is one
    extra move beyond the last recorded tick and is kept separately.
    """

    type_index: int
    positions: list[np.ndarray]
    energies: list[float]
    steps: int
    converged: bool
    final_positions: np.ndarray
    final_assignment: np.ndarray
    final_energy: float


@dataclass
class AllocationResult:
    traces: list[AllocationTrace]
    min_distance: float
    degeneracies: int

    @property
    def total_energy(self) -> float:
        return float(sum(tr.final_energy for tr in self.traces))

    @property
    def max_steps(self) -> int:
        return max((tr.steps for tr in self.traces), default=0)

    @property
    def all_converged(self) -> bool:
        return all(tr.converged for tr in self.traces)


@dataclass
class WorldState:
    """Global snapshot: tick index, per-tier robot positions, the matching
    fresh assignments, and re-optimized per-tier energies."""

    t: int
    positions: list[np.ndarray]
    assignments: list[np.ndarray]
    energies: list[float]


def make_world(users_by_type, robots_by_type, weights_by_type=None) -> WorldState:
    """Initial WorldState with assignments and energies at the start layout."""
    tiers = _prepare_tiers(users_by_type, robots_by_type, weights_by_type)
    positions = [tier.robots.copy() for tier in tiers]
    assignments, energies = [], []
    for tier, pos in zip(tiers, positions):
        if tier.users.shape[0] and pos.shape[0]:
            a = kernels.nearest_assignment(tier.users, pos)
        else:
            a = np.zeros(tier.users.shape[0], dtype=np.int64)
        assignments.append(a)
        energies.append(kernels.assigned_energy(tier.users, tier.weights, pos, a)
                        if pos.shape[0] else 0.0)
    return WorldState(0, positions, assignments, energies)


def step_world(state: WorldState, users_by_type, robots_by_type, params: PhysicsParams,
               weights_by_type=None) -> WorldState:
    """One synchronous tick on every tier: refresh assignments from the
    time-t snapshot, apply clipped attraction + barrier controls
    simultaneously, clamp to the workspace, and recompute assignments and
    energies at the moved positions."""
    tiers = _prepare_tiers(users_by_type, robots_by_type, weights_by_type)
    new_positions = _advance_tick(state.positions, tiers,
                                  [True] * len(tiers), params)[0]
    assignments, energies = [], []
    for tier, pos in zip(tiers, new_positions):
        if tier.users.shape[0] and pos.shape[0]:
            a = kernels.nearest_assignment(tier.users, pos)
        else:
            a = np.zeros(tier.users.shape[0], dtype=np.int64)
        assignments.append(a)
        energies.append(kernels.assigned_energy(tier.users, tier.weights, pos, a)
                        if pos.shape[0] else 0.0)
    return WorldState(state.t + 1, new_positions, assignments, energies)


def _advance_tick(positions: list[np.ndarray], tiers: list[_TierInputs],
                  active: list[bool], params: PhysicsParams):
    """Move every active tier off the shared snapshot. Returns the new
    position list, per-tier snapshot assignments/energies, and the number
    of coincidence degeneracies hit in the barrier."""
    all_pos = (np.ascontiguousarray(np.concatenate(positions))
               if positions else np.zeros((0, 2)))
    barrier_u, degeneracies = kernels.barrier_controls(all_pos, params.beta, params.r_safe)

    new_positions: list[np.ndarray] = []
    assignments: list[np.ndarray | None] = []
    energies: list[float] = []
    offset = 0
    for tier, pos, act in zip(tiers, positions, active):
        n = pos.shape[0]
        if n == 0:
            new_positions.append(pos)
            assignments.append(np.zeros(0, dtype=np.int64))
            energies.append(0.0)
            continue
        if tier.users.shape[0]:
            a = kernels.nearest_assignment(tier.users, pos)
        else:
            a = np.zeros(0, dtype=np.int64)
        assignments.append(a)
        energies.append(kernels.assigned_energy(tier.users, tier.weights, pos, a))
        if act:
            u1 = kernels.attraction_controls(pos, tier.users, tier.weights, a, params.alpha)
            u = clip_controls(u1 + barrier_u[offset:offset + n])
            new_positions.append(params.workspace.clamp(pos + u))
        else:
            new_positions.append(pos)
        offset += n
    return new_positions, assignments, energies, degeneracies


def run_allocation(users_by_type, robots_by_type, params: PhysicsParams,
                   weights_by_type=None) -> AllocationResult:
    """Run the full multi-tier loop to convergence.

    Every tier checks its stop rule (|L_t - L_{t-1}| < epsilon, or the tick
    cap) after the simultaneous move, so the final placement is one step
    past the last recorded trace row. Frozen tiers stop moving but keep
    exerting barrier pushes on the rest. Returns per-tier traces plus the
    minimum inter-robot distance ever sampled and the degeneracy count.
    """
    tiers = _prepare_tiers(users_by_type, robots_by_type, weights_by_type)
    n_tiers = len(tiers)
    positions = [tier.robots.copy() for tier in tiers]
    active = [tier.robots.shape[0] > 0 for tier in tiers]
    prev_energy = [math.inf] * n_tiers
    trace_positions: list[list[np.ndarray]] = [[] for _ in range(n_tiers)]
    trace_energies: list[list[float]] = [[] for _ in range(n_tiers)]
    steps = [0] * n_tiers
    converged = [tier.robots.shape[0] == 0 for tier in tiers]
    min_distance = math.inf
    degeneracies = 0

    t = 0
    while any(active):
        min_distance = min(min_distance, _min_pairwise_distance(np.concatenate(positions)))
        new_positions, assignments, energies, degen = _advance_tick(
            positions, tiers, active, params)
        degeneracies += degen
        for k in range(n_tiers):
            if not active[k]:
                continue
            stop_eps = abs(energies[k] - prev_energy[k]) < params.epsilon
            if stop_eps or t > params.t_max:
                active[k] = False
                converged[k] = stop_eps
                steps[k] = t
            else:
                trace_positions[k].append(positions[k].copy())
                trace_energies[k].append(energies[k])
                prev_energy[k] = energies[k]
        positions = new_positions
        t += 1

    if positions:
        min_distance = min(min_distance, _min_pairwise_distance(np.concatenate(positions)))
    if degeneracies:
        log.warning("%d coincident-robot degeneracy event(s) during run", degeneracies)

    traces = []
    for k, tier in enumerate(tiers):
        pos = np.ascontiguousarray(positions[k])
        if tier.users.shape[0] and pos.shape[0]:
            final_a = kernels.nearest_assignment(tier.users, pos)
            final_e = kernels.assigned_energy(tier.users, tier.weights, pos, final_a)
        else:
            final_a = np.zeros(tier.users.shape[0], dtype=np.int64)
            final_e = 0.0
        traces.append(AllocationTrace(
            type_index=k + 1,
            positions=trace_positions[k],
            energies=trace_energies[k],
            steps=steps[k],
            converged=converged[k],
            final_positions=pos,
            final_assignment=final_a,
            final_energy=float(final_e),
        ))
    return AllocationResult(traces=traces, min_distance=min_distance,
                            degeneracies=degeneracies)
