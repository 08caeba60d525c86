"""Vaccine distribution: fairness-constrained minimum-cost shipping.

Shipments are fractions of the per-epoch stock: the decision variable
x[w, b, v] in [0, 1] is the share of the total stock moved from warehouse
w to zone b as vaccine type v. The supply cap becomes ``sum(x) <= 1``
(equality in full-distribution mode) and each zone's fairness floor
becomes ``sum_{w,v} x[w,b,v] >= c_b * tau``; dose counts are recovered as
``x * stock`` at reporting time.

Fairness floors by mode:

* ``density``: c_b = delta_b + 1/|B| = D_b / sum(D), where
  delta_b = (D_b - mean(D)) / sum(D);
* ``infected``: c_b = iota_b + 1/|B| = rho_b / sum(rho), where
  iota_b = (rho_b - mean(rho)) / sum(rho) and rho_b = I_b / S_b;
* ``susceptible``: c_b = (S_b - sum_v r_v * doses_{b,v}) / sum(S), which
  depends on the shipment itself, so the r_v terms are folded into the
  constraint's left side to keep the program linear.

Both delta and iota sum to zero by construction; the +1/|B| shift is the
smallest one that keeps every floor nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import ContactGraph, connectivity_centrality
from .lp import (INFEASIBLE, LPProblem, LPSolution, OPTIMAL,
                 feasibility_residual, lp_solve)

MODES = ("susceptible", "density", "infected")


class AllocationError(ValueError):
    pass


@dataclass
class AllocatorInputs:
    distances: np.ndarray            # (W, B) cost d(w, b) >= 0
    stock_total: float               # |Z| doses available this epoch
    warehouse_stock: np.ndarray      # (W,) dose capacity per warehouse
    efficacy: list[float]            # r_v per vaccine type
    susceptible: np.ndarray          # (B,) S_b
    densities: np.ndarray            # (B,) D_b
    infected_ratio: np.ndarray       # (B,) rho_b
    tau: float
    full_distribution: bool = False

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=float)
        self.warehouse_stock = np.asarray(self.warehouse_stock, dtype=float)
        self.susceptible = np.asarray(self.susceptible, dtype=float)
        self.densities = np.asarray(self.densities, dtype=float)
        self.infected_ratio = np.asarray(self.infected_ratio, dtype=float)
        if self.distances.ndim != 2:
            raise AllocationError("distances must be a (warehouses, zones) matrix")
        if (self.distances < 0).any():
            raise AllocationError("distances must be nonnegative")
        if self.stock_total < 0:
            raise AllocationError("stock must be nonnegative")
        if not 0.0 <= self.tau <= 1.0:
            raise AllocationError(f"tau must be in [0,1], got {self.tau}")
        for i, r in enumerate(self.efficacy):
            if not 0.0 <= r <= 1.0:
                raise AllocationError(f"efficacy[{i}] must be in [0,1], got {r}")

    @property
    def n_warehouses(self) -> int:
        return self.distances.shape[0]

    @property
    def n_zones(self) -> int:
        return self.distances.shape[1]

    @property
    def n_types(self) -> int:
        return len(self.efficacy)


def density_deltas(densities) -> np.ndarray:
    """delta_b = (D_b - mean(D)) / sum(D); sums to zero exactly."""
    d = np.asarray(densities, dtype=float)
    total = d.sum()
    if total <= 0:
        raise AllocationError("density mode needs a positive total density")
    return (d - d.mean()) / total


def infected_iotas(infected_ratio) -> np.ndarray:
    """iota_b = (rho_b - mean(rho)) / sum(rho); sums to zero exactly."""
    rho = np.asarray(infected_ratio, dtype=float)
    total = rho.sum()
    if total <= 0:
        raise AllocationError("infected mode needs a positive total infected ratio")
    return (rho - rho.mean()) / total


@dataclass
class SusceptibleCoefficient:
    """Linear form of the susceptible-mode fairness coefficient.

    c_b = base - sum_v dose_rate[v] * (sum_w x[w, b, v]); the shipment
    dependence is kept symbolic so the LP constraint stays linear.
    """

    base: float
    dose_rate: list[float]


def fairness_coefficient(mode: str, zone: int, inputs: AllocatorInputs):
    """Per-zone fairness coefficient c_b for the requested mode.

    Density and infected modes return plain numbers; susceptible mode
    returns the linear form because c_b depends on the shipment.
    """
    if mode not in MODES:
        raise AllocationError(f"unknown fairness mode {mode!r}")
    n_zones = inputs.n_zones
    if not 0 <= zone < n_zones:
        raise AllocationError(f"zone {zone} out of range")
    if mode == "density":
        return float(density_deltas(inputs.densities)[zone] + 1.0 / n_zones)
    if mode == "infected":
        return float(infected_iotas(inputs.infected_ratio)[zone] + 1.0 / n_zones)
    total_s = float(inputs.susceptible.sum())
    if total_s <= 0:
        raise AllocationError("susceptible mode needs a positive total susceptible count")
    return SusceptibleCoefficient(
        base=float(inputs.susceptible[zone]) / total_s,
        dose_rate=[r * inputs.stock_total / total_s for r in inputs.efficacy],
    )


@dataclass
class AllocationMatrix:
    """Fractional shipments x[w, b, v] plus the stock they are fractions of."""

    x: np.ndarray
    stock_total: float

    def zone_doses(self) -> np.ndarray:
        """(B, V) doses arriving per zone and vaccine type."""
        return self.x.sum(axis=0) * self.stock_total

    def warehouse_doses(self) -> np.ndarray:
        """(W,) doses leaving each warehouse."""
        return self.x.sum(axis=(1, 2)) * self.stock_total

    @property
    def total_fraction(self) -> float:
        return float(self.x.sum())


@dataclass
class AllocationResult:
    status: str
    matrix: AllocationMatrix | None
    objective: float | None
    problem: LPProblem
    solution: LPSolution
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def build_allocation_lp(inputs: AllocatorInputs, mode: str) -> LPProblem:
    """Assemble the shipping LP for one fairness mode."""
    W, B, V = inputs.n_warehouses, inputs.n_zones, inputs.n_types

    def idx(w: int, b: int, v: int) -> int:
        return (w * B + b) * V + v

    n = W * B * V
    c = np.zeros(n)
    for w in range(W):
        for b in range(B):
            for v in range(V):
                c[idx(w, b, v)] = inputs.distances[w, b]
    problem = LPProblem(c=c, upper=np.ones(n))

    total = np.ones(n)
    problem.add_row(total, "=" if inputs.full_distribution else "<=", 1.0)

    for b in range(B):
        coeff = fairness_coefficient(mode, b, inputs)
        row = np.zeros(n)
        if isinstance(coeff, SusceptibleCoefficient):
            for w in range(W):
                for v in range(V):
                    row[idx(w, b, v)] = 1.0 + inputs.tau * coeff.dose_rate[v]
            rhs = inputs.tau * coeff.base
        else:
            for w in range(W):
                for v in range(V):
                    row[idx(w, b, v)] = 1.0
            rhs = inputs.tau * coeff
        problem.add_row(row, ">=", rhs)

    if inputs.stock_total > 0:
        for w in range(W):
            row = np.zeros(n)
            for b in range(B):
                for v in range(V):
                    row[idx(w, b, v)] = 1.0
            problem.add_row(row, "<=", float(inputs.warehouse_stock[w]) / inputs.stock_total)
    return problem


def check_allocation(inputs: AllocatorInputs, mode: str, x: np.ndarray) -> float:
    """Worst constraint violation of a shipment, recomputed from scratch."""
    problem = build_allocation_lp(inputs, mode)
    return feasibility_residual(problem, x.reshape(-1))


def solve_allocation(inputs: AllocatorInputs, mode: str) -> AllocationResult:
    """Solve the fairness-constrained shipping problem for one epoch."""
    problem = build_allocation_lp(inputs, mode)
    solution = lp_solve(problem)
    W, B, V = inputs.n_warehouses, inputs.n_zones, inputs.n_types
    if solution.status != OPTIMAL:
        note = solution.note
        if solution.status == INFEASIBLE:
            floors = []
            for b in range(B):
                coeff = fairness_coefficient(mode, b, inputs)
                base = coeff.base if isinstance(coeff, SusceptibleCoefficient) else coeff
                floors.append((inputs.tau * base, b))
            worst, zone = max(floors)
            note = f"zone {zone} lower bound {worst:.6f} unsatisfiable; {note}"
        return AllocationResult(solution.status, None, None, problem, solution, note)

    x = solution.x.reshape(W, B, V)
    residual = check_allocation(inputs, mode, x)
    if residual > 1e-7:
        return AllocationResult(
            INFEASIBLE, None, None, problem, solution,
            note=f"independent recheck failed: residual {residual:.3e}")
    return AllocationResult(
        OPTIMAL, AllocationMatrix(x=x, stock_total=inputs.stock_total),
        solution.objective, problem, solution)


def coverage_metric(alpha_k: float, stop_benefit: float, transit_stops: int) -> float:
    """Vaccination coverage for a zone tier: min(1, alpha_k + b * N_i)."""
    if not 0.0 <= alpha_k <= 1.0:
        raise AllocationError(f"baseline coverage must be in [0,1], got {alpha_k}")
    if stop_benefit < 0:
        raise AllocationError(f"stop benefit must be >= 0, got {stop_benefit}")
    if transit_stops < 0:
        raise AllocationError(f"stop count must be >= 0, got {transit_stops}")
    return min(1.0, alpha_k + stop_benefit * transit_stops)


def hub_targets(graph: ContactGraph, budget: int, max_path_len: int = 4) -> list[int]:
    """The ``budget`` agents with the highest connectivity centrality,
    ties broken toward the smaller agent id."""
    if budget < 0:
        raise AllocationError(f"budget must be >= 0, got {budget}")
    if budget > graph.node_count:
        raise AllocationError(
            f"budget {budget} exceeds node count {graph.node_count}")
    scored = [(-connectivity_centrality(graph, u, max_path_len), u) for u in graph.nodes]
    scored.sort()
    return [u for _, u in scored[:budget]]
