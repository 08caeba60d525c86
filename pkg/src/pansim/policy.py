"""Edge-resident decision modules: dynamic lockdown, mobility scheduling,
a discounted welfare score for comparing runs, and consensus fusion of
competing per-zone decisions.

Every tie that could affect public health breaks toward the stricter
option; boundaries are inclusive upward (a ratio exactly at a threshold
escalates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class PolicyError(ValueError):
    pass


class LockdownLevel(Enum):
    NONE = "none"
    MODERATE = "moderate"
    HARD = "hard"

    @property
    def mobility_multiplier(self) -> float:
        return {"none": 1.0, "moderate": 0.5, "hard": 0.1}[self.value]

    @property
    def strictness(self) -> int:
        return {"none": 0, "moderate": 1, "hard": 2}[self.value]


STRICTNESS_ORDER = [LockdownLevel.NONE, LockdownLevel.MODERATE, LockdownLevel.HARD]


@dataclass
class LockdownCall:
    zone: int
    level: LockdownLevel
    ratio: float                 # projected hospitalized / capacity
    degenerate: bool = False     # capacity was zero


def decide_lockdown(
    infected: dict[int, int],
    capacity: dict[int, int],
    theta_moderate: float,
    theta_hard: float,
    hospitalization_fraction: float = 0.05,
) -> dict[int, LockdownCall]:
    """Per-zone level from projected hospital pressure.

    projected = hospitalization_fraction * I_b; the level is HARD when
    projected/capacity >= theta_hard, MODERATE when >= theta_moderate,
    otherwise NONE. A zone without capacity is HARD with the degenerate
    flag set.
    """
    if not 0 < theta_moderate < theta_hard:
        raise PolicyError(
            f"thresholds must satisfy 0 < moderate < hard, got "
            f"{theta_moderate}, {theta_hard}")
    calls: dict[int, LockdownCall] = {}
    for zone in sorted(infected):
        projected = hospitalization_fraction * infected[zone]
        cap = capacity.get(zone, 0)
        if cap <= 0:
            calls[zone] = LockdownCall(zone, LockdownLevel.HARD,
                                       ratio=math.inf, degenerate=True)
            continue
        ratio = projected / cap
        if ratio >= theta_hard:
            level = LockdownLevel.HARD
        elif ratio >= theta_moderate:
            level = LockdownLevel.MODERATE
        else:
            level = LockdownLevel.NONE
        calls[zone] = LockdownCall(zone, level, ratio=ratio)
    return calls


def schedule_mobility(
    current_zone: int,
    candidates: list[int],
    cp_map: dict[int, float],
    levels: dict[int, LockdownLevel] | None = None,
) -> int:
    """Destination with the lowest mean contagion potential.

    Hard-locked zones other than the current one are off limits; ties go
    to the smaller zone id, and when everything is barred the agent stays
    put.
    """
    if not candidates:
        raise PolicyError("candidate list must be non-empty")
    if current_zone not in candidates:
        raise PolicyError("the current zone must be a candidate")
    levels = levels or {}
    open_zones = [
        z for z in candidates
        if z == current_zone or levels.get(z, LockdownLevel.NONE) is not LockdownLevel.HARD
    ]
    if not open_zones:
        return current_zone
    return min(open_zones, key=lambda z: (cp_map.get(z, 0.0), z))


@dataclass
class WelfareParams:
    discount_rate: float         # r
    vaccine_probability: float   # v
    victim_income: float         # omega
    death_rate: float            # gamma_D

    def __post_init__(self):
        if self.discount_rate <= 0:
            raise PolicyError(
                f"discount rate must be positive, got {self.discount_rate}")
        if self.vaccine_probability < 0:
            raise PolicyError("vaccine probability must be >= 0")


def welfare_score(
    income: np.ndarray,
    vaccine_income: np.ndarray,
    infected: np.ndarray,
    params: WelfareParams,
) -> float:
    """Discounted net-income score of a run, higher is better.

    W = sum_t e^{-(r+v) t} sum_j [U(j,t) + (v/r) * U~(j,t)
        - omega * gamma_D * I(j,t)]

    over per-step, per-zone series: realized income U, income under free
    vaccine availability U~, and infected counts I. A scoring functional
    for comparing policy runs, not an optimizer.
    """
    def as_series(arr) -> np.ndarray:
        a = np.asarray(arr, dtype=float)
        return a.reshape(-1, 1) if a.ndim == 1 else a   # 1-D means one zone

    u, ut, inf = as_series(income), as_series(vaccine_income), as_series(infected)
    if not (u.shape == ut.shape == inf.shape):
        raise PolicyError("income, vaccine income and infected series must align")
    r, v = params.discount_rate, params.vaccine_probability
    t = np.arange(u.shape[0])
    discount = np.exp(-(r + v) * t)
    per_step = (u + (v / r) * ut
                - params.victim_income * params.death_rate * inf).sum(axis=1)
    return float((discount * per_step).sum())


def integrate_decisions(
    candidates: list[dict[int, LockdownLevel]],
) -> tuple[dict[int, LockdownLevel], dict[int, dict[str, float]]]:
    """Fuse candidate per-zone decisions through a consensus matrix.

    The matrix holds, per zone, each level's assignment frequency across
    the candidate sets; every zone takes its modal level and frequency
    ties break toward the stricter level. Returns (fused decision,
    consensus matrix).
    """
    if not candidates:
        raise PolicyError("need at least one candidate decision set")
    zones = sorted({z for cand in candidates for z in cand})
    matrix: dict[int, dict[str, float]] = {}
    fused: dict[int, LockdownLevel] = {}
    n = len(candidates)
    for zone in zones:
        votes = {lvl: 0 for lvl in STRICTNESS_ORDER}
        for cand in candidates:
            if zone in cand:
                votes[cand[zone]] += 1
        matrix[zone] = {lvl.value: votes[lvl] / n for lvl in STRICTNESS_ORDER}
        fused[zone] = max(STRICTNESS_ORDER,
                          key=lambda lvl: (votes[lvl], lvl.strictness))
    return fused, matrix
