"""Service pricing economics: gain curve, menu design, and truthful reporting.

A provider sells K inclusive service tiers (a tier-k robot can serve any
request of tier <= k) at a base gain of r per served user. Over-requesting
inflates a user's gain through a concave multiplier, so the menu of per-tier
prices has to be designed so that truthful tier requests maximize every
user's utility. The closed-form menu, an independent polytope oracle, the
constraint verifier, and the user's best response all live here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ParameterError(ValueError):
    """Economic parameter set is invalid or violates the menu assumption."""


class GainMode(Enum):
    """Denominator convention for the gain multiplier's log normalizer.

    TEXT_K uses log(K); TABLE_K_PLUS_1 uses log(K + 1). The published price
    menus are only reproduced by the K + 1 convention, which is therefore
    the default. Both are kept selectable.
    """

    TEXT_K = "text-k"
    TABLE_K_PLUS_1 = "table-k1"


@dataclass(frozen=True)
class EconomicParams:
    """Number of tiers, base gain, gain-curve convention, and the unused
    joint-objective weight gamma (stored for config completeness only)."""

    K: int
    r: float = 10.0
    gain_mode: GainMode = GainMode.TABLE_K_PLUS_1
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if not self.r > 0:
            raise ParameterError(f"r must be positive, got {self.r}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")
        if self.gain_mode is GainMode.TEXT_K and self.K == 1:
            raise ParameterError("text-k gain mode needs K >= 2 (log(1) = 0)")
        if self.K >= 2:
            g1 = gain(1, self)
            bound = self.K / (self.K - 1)
            if not g1 < bound:
                raise ParameterError(
                    f"one-step gain g(1)={g1:.6f} must be < K/(K-1)={bound:.6f}; "
                    f"no truthful menu exists for K={self.K} in mode "
                    f"{self.gain_mode.value}"
                )

    @property
    def gain_denominator(self) -> int:
        return self.K if self.gain_mode is GainMode.TEXT_K else self.K + 1


def gain(diff: int, params: EconomicParams) -> float:
    """Gain multiplier for requesting `diff` tiers above the true need.

    Zero for under-requests (a low tier cannot cover a high need), one for
    a truthful request, and log(diff + 1) / (2 log D) + 1 above that, with
    D set by the gain mode. Increasing and concave on diff >= 0.
    """
    if diff < 0:
        return 0.0
    if diff == 0:
        return 1.0
    return math.log(diff + 1) / (2.0 * math.log(params.gain_denominator)) + 1.0


def distance_energy(d: float) -> float:
    """Deployment energy of serving a user at distance d (quadratic)."""
    if d < 0:
        raise ValueError(f"distance must be nonnegative, got {d}")
    return d * d


@dataclass(frozen=True)
class UserProfile:
    """A service user: position, true tier need, provider-side belief, and
    the reported tier (filled in after the best response)."""

    id: int
    q: tuple[float, float]
    theta: int
    p: tuple[float, ...]
    phi: int | None = None

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.p):
            raise ValueError("belief entries must be nonnegative")
        if abs(sum(self.p) - 1.0) > 1e-9:
            raise ValueError(f"belief must sum to 1, got {sum(self.p)!r}")
        if not 1 <= self.theta <= len(self.p):
            raise ValueError(f"theta={self.theta} outside 1..{len(self.p)}")


@dataclass(frozen=True)
class RobotProfile:
    """A service robot: tier it provides and its initial position."""

    id: int
    service_type: int
    x0: tuple[float, float]


@dataclass(frozen=True)
class PaymentMenu:
    """Per-tier service prices. Entry k-1 is the price of a tier-k request.

    Arbitrary menus are representable so the verifier can reject bad ones;
    only menus produced by `optimal_payment` carry the optimality
    invariants (top price = r, strictly increasing, all within [0, r]).
    """

    rho: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.rho) < 1:
            raise ValueError("menu must have at least one price")
        if any(not math.isfinite(x) for x in self.rho):
            raise ValueError("menu prices must be finite")

    @property
    def K(self) -> int:
        return len(self.rho)

    def price(self, k: int) -> float:
        return self.rho[k - 1]

    def expand(self, assignments: dict[int, dict[int, int]]) -> dict[tuple[int, int, int], float]:
        """Per-(tier, user, robot) price map: the tier price where a robot is
        assigned, zero for every unassigned pair."""
        table: dict[tuple[int, int, int], float] = {}
        for k, users in assignments.items():
            for uid, rid in users.items():
                table[(k, uid, rid)] = self.price(k)
        return table


def optimal_payment(params: EconomicParams) -> PaymentMenu:
    """Closed-form revenue-maximizing truthful menu.

    Price of tier k is (K-k+1)r - (K-k)g(1)r: the top tier costs the full
    gain r and each step down is discounted by the one-step over-request
    gain, which is exactly what makes the adjacent upward deviation bind.
    """
    K, r = params.K, params.r
    if K == 1:
        return PaymentMenu(rho=(r,))
    g1 = gain(1, params)
    rho = tuple((K - k + 1) * r - (K - k) * g1 * r for k in range(1, K + 1))
    return PaymentMenu(rho=rho)


def _feasible(point: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(A @ point <= b + tol))


def payment_oracle(params: EconomicParams) -> PaymentMenu:
    """Independent menu oracle: exact vertex enumeration of the price polytope.

    Maximizes sum_k rho_k over 0 <= rho_k <= r, rho_k - rho_l <= r (l < k)
    and rho_l - rho_k >= g(l-k) r - r (l > k) by enumerating all vertices
    (every K-subset of active constraints) and keeping the best feasible
    one. Exponential in K, which is fine at desk scale (K <= 6), and shares
    no algebra with the closed form above.
    """
    K, r = params.K, params.r
    if K > 6:
        raise ParameterError(f"payment oracle is desk-scale only (K <= 6), got K={K}")
    if K == 1:
        return PaymentMenu(rho=(r,))

    # Constraint rows in A x <= b form.
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for k in range(K):
        e = np.zeros(K)
        e[k] = 1.0
        rows.append(e.copy())
        rhs.append(r)  # rho_k <= r
        rows.append(-e)
        rhs.append(0.0)  # rho_k >= 0
    for k in range(K):
        for l in range(K):
            if l < k:
                row = np.zeros(K)
                row[k], row[l] = 1.0, -1.0
                rows.append(row)
                rhs.append(r)  # rho_k - rho_l <= r
            elif l > k:
                row = np.zeros(K)
                row[k], row[l] = 1.0, -1.0
                rows.append(row)
                rhs.append(r - gain(l - k, params) * r)  # rho_k - rho_l <= r - g(l-k) r
    A = np.asarray(rows)
    b = np.asarray(rhs)

    best: np.ndarray | None = None
    best_val = -math.inf
    for subset in itertools.combinations(range(len(rows)), K):
        sub = A[list(subset)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        vertex = np.linalg.solve(sub, b[list(subset)])
        if _feasible(vertex, A, b):
            val = float(vertex.sum())
            if val > best_val:
                best_val = val
                best = vertex
    if best is None:
        raise ParameterError("price polytope came out empty; assumption violated?")
    return PaymentMenu(rho=tuple(float(x) for x in best))


@dataclass(frozen=True)
class ConstraintReport:
    """Signed slack of every pricing constraint; nonnegative means satisfied.

    ic_down[(k, l)] covers requesting l below the true tier k, ic_up[(k, l)]
    requesting l above it. A menu passes when every residual is above
    -1e-9.
    """

    ir: tuple[float, ...]
    nonneg: tuple[float, ...]
    ic_down: dict[tuple[int, int], float] = field(default_factory=dict)
    ic_up: dict[tuple[int, int], float] = field(default_factory=dict)
    tol: float = 1e-9

    @property
    def min_residual(self) -> float:
        residuals = list(self.ir) + list(self.nonneg)
        residuals += list(self.ic_down.values()) + list(self.ic_up.values())
        return min(residuals)

    @property
    def passed(self) -> bool:
        return self.min_residual >= -self.tol

    def failures(self) -> list[str]:
        out = []
        for k, res in enumerate(self.ir, start=1):
            if res < -self.tol:
                out.append(f"IR k={k}: {res:.3e}")
        for k, res in enumerate(self.nonneg, start=1):
            if res < -self.tol:
                out.append(f"nonneg k={k}: {res:.3e}")
        for (k, l), res in sorted(self.ic_down.items()):
            if res < -self.tol:
                out.append(f"IC-down k={k} l={l}: {res:.3e}")
        for (k, l), res in sorted(self.ic_up.items()):
            if res < -self.tol:
                out.append(f"IC-up k={k} l={l}: {res:.3e}")
        return out


def verify_ic_ir(menu: PaymentMenu, params: EconomicParams) -> ConstraintReport:
    """Residuals of participation (IR), truthfulness (IC both directions),
    and price non-negativity for an arbitrary menu."""
    if menu.K != params.K:
        raise ParameterError(f"menu has {menu.K} tiers, params have {params.K}")
    r = params.r
    ir = tuple(r - p for p in menu.rho)
    nonneg = tuple(menu.rho)
    ic_down: dict[tuple[int, int], float] = {}
    ic_up: dict[tuple[int, int], float] = {}
    for k in range(1, params.K + 1):
        for l in range(1, params.K + 1):
            if l < k:
                ic_down[(k, l)] = (r - menu.price(k)) - (0.0 - menu.price(l))
            elif l > k:
                ic_up[(k, l)] = (r - menu.price(k)) - (gain(l - k, params) * r - menu.price(l))
    return ConstraintReport(ir=ir, nonneg=nonneg, ic_down=ic_down, ic_up=ic_up)


def request_utility(theta: int, phi: int, menu: PaymentMenu, params: EconomicParams) -> float:
    """Utility of a true-tier-theta user requesting tier phi."""
    return gain(phi - theta, params) * params.r - menu.price(phi)


def user_best_response(theta: int, menu: PaymentMenu, params: EconomicParams) -> int:
    """Tier request maximizing the user's utility, ties broken to the
    lowest tier.

    Under the optimal menu the one-step-up deviation ties exactly with the
    truthful request, so the low tie-break is what makes reporting
    deterministic (and truthful).
    """
    if not 1 <= theta <= params.K:
        raise ParameterError(f"theta={theta} outside 1..{params.K}")
    # The exact tie must not be decided by rounding noise (the closed-form
    # menu binds the one-step-up constraint with equality, and recomputing
    # g(1) here can land a few ulp on either side), so a switch to a higher
    # tier requires a margin far above noise but far below any real
    # preference gap.
    tie_tol = 1e-9 * max(1.0, params.r)
    best_phi, best_u = 1, -math.inf
    for phi in range(1, params.K + 1):
        u = request_utility(theta, phi, menu, params)
        if u > best_u + tie_tol:
            best_phi, best_u = phi, u
    return best_phi
