"""Distributed allocation engine: assignment, energy, control laws, the
synchronous multi-tier loop, and its documented worked example."""

import math

import numpy as np
import pytest

from contractalloc import (
    AllocationResult,
    InfeasibleAllocationError,
    PhysicsParams,
    Workspace,
    assign_users,
    attraction_control,
    barrier_control,
    clip_controls,
    locational_energy,
    make_world,
    run_allocation,
    step_world,
)


def test_workspace_clamp_and_contains():
    ws = Workspace()
    clamped = ws.clamp(np.array([[-1.0, 5.0], [11.0, 12.0], [3.0, 4.0]]))
    assert clamped.tolist() == [[0.0, 5.0], [10.0, 10.0], [3.0, 4.0]]
    assert ws.contains((0.0, 10.0))
    assert not ws.contains((10.1, 5.0))
    with pytest.raises(ValueError):
        Workspace(xmin=1.0, xmax=1.0)


def test_workspace_sample_stays_inside():
    ws = Workspace(xmin=2.0, ymin=3.0, xmax=4.0, ymax=5.0)
    pts = ws.sample(np.random.default_rng(1), 200)
    assert pts.shape == (200, 2)
    assert np.all(pts[:, 0] >= 2.0) and np.all(pts[:, 0] <= 4.0)
    assert np.all(pts[:, 1] >= 3.0) and np.all(pts[:, 1] <= 5.0)


def test_physics_params_validation():
    PhysicsParams()  # defaults are valid
    PhysicsParams(beta=0.0)  # barrier may be disabled
    with pytest.raises(ValueError):
        PhysicsParams(alpha=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(beta=-1.0)
    with pytest.raises(ValueError):
        PhysicsParams(epsilon=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(d_coll=0.5, r_safe=0.5)
    with pytest.raises(ValueError):
        PhysicsParams(t_max=0)


def test_assign_users_examples():
    b = assign_users([[0.0, 0.0], [5.0, 5.0], [2.1, 0.0]], [1.0, 1.0, 1.0],
                     [[0.0, 1.0], [4.0, 4.0]])
    assert b.tolist() == [[1, 0], [0, 1], [1, 0]]
    # equidistant user goes to the lower robot index
    b = assign_users([[1.0, 0.0]], [1.0], [[0.0, 0.0], [2.0, 0.0]])
    assert b.tolist() == [[1, 0]]


def test_assign_users_validation():
    with pytest.raises(ValueError):
        assign_users([[0.0, 0.0]], [1.0], np.zeros((0, 2)))
    with pytest.raises(ValueError):
        assign_users([[0.0, 0.0]], [1.0, 1.0], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        assign_users([[0.0, 0.0]], [-1.0], [[1.0, 1.0]])


def test_locational_energy_examples():
    users = [[0.0, 0.0], [2.0, 0.0]]
    robots = [[1.0, 0.0]]
    b = [[1], [1]]
    assert locational_energy(b, users, [1.0, 1.0], robots) == 2.0
    assert locational_energy(b, users, [0.25, 0.75], robots) == pytest.approx(1.0)
    # zero-weight users are legal and contribute nothing
    assert locational_energy(b, users, [0.0, 1.0], robots) == pytest.approx(1.0)


def test_locational_energy_validation():
    with pytest.raises(ValueError):
        locational_energy([[1, 1]], [[0.0, 0.0]], [1.0], [[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        locational_energy([[1]], [[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0], [[1.0, 0.0]])


def test_attraction_control_examples():
    u = attraction_control([0.0, 0.0], [[1.0, 0.0]], [1.0], 0.1)
    assert u == pytest.approx([0.2, 0.0], abs=1e-15)
    assert attraction_control([3.0, 3.0], np.zeros((0, 2)), np.zeros(0), 0.1).tolist() == [0.0, 0.0]


def test_barrier_control_examples():
    u = barrier_control([0.0, 0.0], [[0.4, 0.0]], 10.0, 0.5)
    assert u == pytest.approx([-25.0, 0.0], abs=1e-12)
    assert barrier_control([0.0, 0.0], [[0.6, 0.0]], 10.0, 0.5).tolist() == [0.0, 0.0]
    # a coincident neighbor degenerates to a unit +x push, not a blow-up
    u = barrier_control([1.0, 1.0], [[1.0, 1.0]], 10.0, 0.5)
    assert u.tolist() == [1.0, 0.0]


def test_clip_controls():
    u = clip_controls(np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]]))
    assert np.linalg.norm(u[0]) == pytest.approx(1.0, abs=1e-15)
    assert u[0] == pytest.approx([0.6, 0.8])
    assert u[1].tolist() == [0.3, 0.4]
    assert u[2].tolist() == [0.0, 0.0]


def test_worked_contraction_example():
    # one robot serving two users: the move contracts toward the midpoint
    # by a factor 0.6 per tick until the energy change falls under epsilon
    result = run_allocation(
        users_by_type=[[[0.0, 0.0], [2.0, 0.0]]],
        robots_by_type=[[[0.0, 1.0]]],
        params=PhysicsParams(),
    )
    trace = result.traces[0]
    assert trace.steps == 9
    assert len(trace.energies) == 9
    assert len(trace.positions) == 9
    assert trace.converged
    # energies strictly decrease toward the optimum value 2.0
    assert all(a > b for a, b in zip(trace.energies, trace.energies[1:]))
    dist = float(np.linalg.norm(trace.final_positions[0] - np.array([1.0, 0.0])))
    assert dist == pytest.approx(0.008551208616403872, abs=1e-15)
    assert dist < 1e-2
    assert trace.final_energy == pytest.approx(2.0 + 2 * dist * dist / 2, abs=1e-3)
    assert result.all_converged
    assert result.max_steps == 9
    assert result.degeneracies == 0


def test_empty_user_tier_converges_immediately():
    result = run_allocation(
        users_by_type=[np.zeros((0, 2))],
        robots_by_type=[[[4.0, 4.0]]],
        params=PhysicsParams(),
    )
    trace = result.traces[0]
    assert trace.steps == 1
    assert trace.energies == [0.0]
    assert trace.converged
    assert trace.final_energy == 0.0
    assert trace.final_positions.tolist() == [[4.0, 4.0]]


def test_users_without_robots_is_infeasible():
    with pytest.raises(InfeasibleAllocationError) as exc:
        run_allocation(
            users_by_type=[[[1.0, 1.0]], [[2.0, 2.0], [3.0, 3.0]]],
            robots_by_type=[[[0.0, 0.0]], np.zeros((0, 2))],
            params=PhysicsParams(),
        )
    assert exc.value.type_index == 2
    assert exc.value.n_users == 2
    assert exc.value.n_robots == 0


def test_descent_without_barrier():
    # with the barrier disabled the loop is pure gradient flow, so recorded
    # per-tier energies must be non-increasing on moderate-load instances
    rng = np.random.default_rng(918)
    params = PhysicsParams(beta=0.0, epsilon=0.02)
    for _ in range(20):
        m = int(rng.integers(2, 10))
        n = int(rng.integers(1, 11))
        users = rng.uniform(0, 10, size=(m, 2))
        robots = rng.uniform(0, 10, size=(n, 2))
        result = run_allocation([users], [robots], params)
        trace = result.traces[0]
        assert trace.converged
        diffs = np.diff(trace.energies + [trace.final_energy])
        assert np.all(diffs <= 1e-9)


def test_robots_stay_clamped_to_workspace():
    # heavy off-workspace demand drags the robot to the wall, not past it
    users = [[20.0, 5.0]] * 30
    result = run_allocation([users], [[[9.5, 5.0]]], params=PhysicsParams())
    final = result.traces[0].final_positions[0]
    assert final[0] == pytest.approx(10.0, abs=1e-12)
    assert final[1] == pytest.approx(5.0, abs=1e-12)
    for pos in result.traces[0].positions:
        assert np.all(pos[:, 0] <= 10.0) and np.all(pos[:, 1] <= 10.0)


def test_run_allocation_is_deterministic():
    rng = np.random.default_rng(5150)
    users = [rng.uniform(0, 10, size=(8, 2)), rng.uniform(0, 10, size=(5, 2))]
    robots = [rng.uniform(0, 10, size=(3, 2)), rng.uniform(0, 10, size=(2, 2))]
    a = run_allocation(users, robots, PhysicsParams())
    b = run_allocation(users, robots, PhysicsParams())
    assert a.min_distance == b.min_distance
    assert a.degeneracies == b.degeneracies
    for ta, tb in zip(a.traces, b.traces):
        assert ta.steps == tb.steps
        assert ta.energies == tb.energies
        assert np.array_equal(ta.final_positions, tb.final_positions)
        assert np.array_equal(ta.final_assignment, tb.final_assignment)


def test_world_stepping_fixed_point_at_centroids():
    users = [[[1.0, 1.0], [3.0, 1.0]], [[7.0, 7.0]]]
    robots = [[[2.0, 1.0]], [[7.0, 7.0]]]  # already at the optima, far apart
    state = make_world(users, robots)
    assert state.t == 0
    assert state.energies == [pytest.approx(2.0), pytest.approx(0.0)]
    nxt = step_world(state, users, robots, PhysicsParams())
    assert nxt.t == 1
    for before, after in zip(state.positions, nxt.positions):
        assert np.allclose(before, after, atol=1e-12)
    assert nxt.energies == pytest.approx(state.energies, abs=1e-12)
    assert [a.tolist() for a in nxt.assignments] == [[0, 0], [0]]


def test_frozen_tier_still_repels_neighbors():
    # tier 1 has no users, so it freezes after one idle tick; its robot must
    # keep acting as a static obstacle for the tier-2 robot whose user sits
    # on the far side of it
    users = [np.zeros((0, 2)), [[4.5, 5.0]]]
    robots = [[[5.0, 5.0]], [[5.9, 5.0]]]
    result = run_allocation(users, robots, PhysicsParams())
    idle, worker = result.traces
    assert idle.steps == 1
    assert idle.converged
    assert idle.final_positions.tolist() == [[5.0, 5.0]]  # never moved
    # the worker glides toward its user, is ejected by the frozen robot's
    # barrier each time it enters the safety radius, and never crosses
    assert not worker.converged
    xs = [pos[0, 0] for pos in worker.positions] + [worker.final_positions[0, 0]]
    assert min(xs) > 5.0
    jumps = [float(np.linalg.norm(b - a))
             for a, b in zip(worker.positions, worker.positions[1:])]
    # attraction alone is bounded by 0.28 here, so a unit-norm move can only
    # come from the frozen tier's repulsion
    assert max(jumps) == pytest.approx(1.0, abs=1e-12)
    assert 0.29 < result.min_distance < 0.5
