"""Comparison strategies: belief-averaged (robust) deployment and the two
point-estimate uncertainty reductions, plus mismatch and energy-difference
accounting.

The robust baseline never learns true tiers: each tier's robots serve every
user weighted by the belief mass on that tier. The max/sample baselines
collapse the belief to one tier per user (argmax, or an inverse-CDF draw)
and then run the same engine as the contract pipeline. A mismatch is an
under-provision: the estimated tier falls below the user's true need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import AllocationResult, PhysicsParams, run_allocation

METHOD_CONTRACT = "contract"
METHOD_ROBUST = "robust"
METHOD_MAX = "max"
METHOD_SAMPLE = "samp"
BASELINE_METHODS = (METHOD_ROBUST, METHOD_MAX, METHOD_SAMPLE)


@dataclass(frozen=True)
class TypeEstimate:
    """Per-user tier estimates for one method; robust carries none, it
    stays distributional."""

    method: str
    values: tuple[int, ...] | None

    def __post_init__(self) -> None:
        if self.method == METHOD_ROBUST:
            if self.values is not None:
                raise ValueError("robust estimates are distributional, not per-user")
        elif self.values is None:
            raise ValueError(f"method {self.method!r} needs per-user estimates")


def estimate_max(p) -> int:
    """Tier with the largest belief mass, ties to the lowest tier."""
    p = np.asarray(p, dtype=np.float64)
    return int(np.argmax(p)) + 1


def estimate_sample(p, rng: np.random.Generator) -> int:
    """Inverse-CDF tier draw from the belief, deterministic given the
    generator state."""
    p = np.asarray(p, dtype=np.float64)
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(idx, len(p) - 1) + 1


def count_mismatches(estimates: TypeEstimate, true_types) -> int:
    """Users whose estimated tier is strictly below their true need.

    Over-provision is not a mismatch: a higher-tier robot still covers the
    request, it just wastes resources.
    """
    if estimates.values is None:
        raise ValueError("robust estimates carry no point types to compare")
    true_arr = np.asarray(true_types, dtype=np.int64)
    est_arr = np.asarray(estimates.values, dtype=np.int64)
    if est_arr.shape != true_arr.shape:
        raise ValueError(f"{est_arr.shape[0]} estimates for {true_arr.shape[0]} users")
    return int(np.sum(est_arr < true_arr))


def group_users_by_type(user_positions, types, K: int) -> list[np.ndarray]:
    """Split user positions into K per-tier arrays following a type label
    per user (1-based)."""
    q = np.asarray(user_positions, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(types, dtype=np.int64)
    if labels.shape[0] != q.shape[0]:
        raise ValueError("one type label per user required")
    if labels.size and not (1 <= labels.min() and labels.max() <= K):
        raise ValueError(f"type labels must lie in 1..{K}")
    return [q[labels == k] for k in range(1, K + 1)]


def run_with_types(user_positions, types, robots_by_type, params: PhysicsParams) -> AllocationResult:
    """Engine run where each tier serves exactly the users labelled with it
    at unit weight (the contract pipeline and both point-estimate baselines
    differ only in where the labels come from)."""
    groups = group_users_by_type(user_positions, types, K=len(robots_by_type))
    return run_allocation(groups, robots_by_type, params)


def run_robust(user_positions, beliefs, robots_by_type, params: PhysicsParams) -> tuple[AllocationResult, float]:
    """Belief-averaged deployment: every tier's robots serve all users,
    weighted by the belief mass the provider holds on that tier.

    Returns the engine result and the expected energy (the sum of final
    per-tier weighted energies). Never reads true types, so the output is
    invariant to the realized type draw.
    """
    q = np.asarray(user_positions, dtype=np.float64).reshape(-1, 2)
    p = np.asarray(beliefs, dtype=np.float64)
    K = len(robots_by_type)
    if p.shape != (q.shape[0], K):
        raise ValueError(f"belief matrix must be ({q.shape[0]}, {K}), got {p.shape}")
    groups = [q] * K
    weights = [np.ascontiguousarray(p[:, k]) for k in range(K)]
    result = run_allocation(groups, robots_by_type, params, weights_by_type=weights)
    return result, result.total_energy


def true_type_energy(user_positions, true_types, final_positions_by_type) -> float:
    """Diagnostic (not part of the published tables): energy of serving
    every user's true tier from the run's final robot placement, each user
    at the nearest robot of exactly that tier."""
    q = np.asarray(user_positions, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(true_types, dtype=np.int64)
    total = 0.0
    for k, pos in enumerate(final_positions_by_type, start=1):
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 2)
        members = q[labels == k]
        if members.shape[0] == 0:
            continue
        if pos.shape[0] == 0:
            raise ValueError(f"tier {k} has users but no robots for realized energy")
        diff = members[:, None, :] - pos[None, :, :]
        d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
        total += float(d2.min(axis=1).sum())
    return total


def energy_differences(baseline_energies, contract_energies) -> np.ndarray:
    """Case-wise baseline-minus-contract energies for matched case indices."""
    base = np.asarray(baseline_energies, dtype=np.float64)
    ref = np.asarray(contract_energies, dtype=np.float64)
    if base.shape != ref.shape:
        raise ValueError(f"case counts differ: {base.shape[0]} vs {ref.shape[0]}")
    return base - ref


@dataclass
class ComparisonReport:
    """Batch-level comparison for one scenario: per-method energies and
    mismatches by case, plus baseline-minus-contract differences."""

    scenario: int
    cases: tuple[int, ...]
    energies: dict[str, list[float]]
    mismatches: dict[str, list[int]]
    realized_energies: dict[str, list[float]]

    def differences(self, method: str) -> np.ndarray:
        return energy_differences(self.energies[method], self.energies[METHOD_CONTRACT])
