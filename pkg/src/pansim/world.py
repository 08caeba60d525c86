"""Synthetic world: zones, warehouses, agents, and the seeded random source.

The world is the single mutable truth of a simulation run. Everything
stochastic flows through ``WorldState.rng`` in a documented call order so
that two runs with the same (config, seed) are bit-identical.

Generator call order during :func:`build_world`:

1. per zone, in zone-id order: ``rng.random((n_zone, 2))`` for agent
   positions inside the zone rectangle (agents assigned to zones in
   contiguous id blocks, remainder to the lowest-id zones);
2. ``rng.choice(population, size=k_I + k_E, replace=False)`` picking the
   initially infected (first ``k_I``) and exposed (next ``k_E``) agents;
3. ``rng.integers(0, len(AGE_BANDS), size=population)`` for age bands;
4. ``rng.random(population)`` against the device-holder fraction;
5. ``rng.random(population)`` against the tracing consent probability.

Mobility (called from the harness loop) draws, per tick:

1. ``rng.random(n_agents)`` migration draws;
2. ``rng.integers(0, n_zones, size=n_movers)`` destinations (only when
   mobility scheduling is off; scheduled moves consume no randomness);
3. ``rng.random((n_movers, 2))`` placement inside the destination zone;
4. ``rng.normal(0, step_km, (n_agents, 2))`` position jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

AGE_BANDS = ("0-17", "18-44", "45-64", "65+")


class Compartment(str, Enum):
    S = "S"
    E = "E"
    I = "I"
    R = "R"
    D = "D"


# dense integer codes for vectorized paths; order matches enum declaration
COMPARTMENT_CODE = {Compartment.S: 0, Compartment.E: 1, Compartment.I: 2,
                    Compartment.R: 3, Compartment.D: 4}


def compartment_codes(agents) -> np.ndarray:
    """int8 code per agent, indexed by list position (= agent id when the
    list is the world's id-ordered population)."""
    return np.fromiter((COMPARTMENT_CODE[a.compartment] for a in agents),
                       dtype=np.int8, count=len(agents))


class WorldError(ValueError):
    """Invalid world configuration or an impossible state mutation."""


@dataclass
class Zone:
    """A rectangular zone; density is always current-count / area."""

    id: int
    area_km2: float
    origin: tuple[float, float]          # lower-left corner of the rectangle
    width: float
    height: float
    population: int                      # agents currently inside (D included)
    healthcare_capacity: int             # hospital beds
    accessibility_level: int             # travel-time tier >= 1
    transit_stops: int
    income_per_capita: float

    @property
    def density(self) -> float:
        return self.population / self.area_km2

    def contains(self, x: float, y: float) -> bool:
        x0, y0 = self.origin
        return x0 <= x <= x0 + self.width and y0 <= y <= y0 + self.height


@dataclass
class Agent:
    id: int
    home_zone: int
    current_zone: int
    position: tuple[float, float]
    compartment: Compartment
    age_band: str
    vaccinated: dict[int, bool] = field(default_factory=dict)   # vaccine type -> flag
    device: str | None = None
    consent: bool = True
    susceptibility: float = 1.0          # scaled down by vaccination

    @property
    def alive(self) -> bool:
        return self.compartment is not Compartment.D


@dataclass
class Warehouse:
    id: int
    position: tuple[float, float]
    stock: dict[int, float]              # vaccine type -> doses
    served_zones: list[int]

    def check(self) -> None:
        for v, s in self.stock.items():
            if s < 0:
                raise WorldError(f"warehouse {self.id} stock for type {v} negative")


@dataclass
class WorldState:
    tick: int
    zones: list[Zone]
    warehouses: list[Warehouse]
    agents: list[Agent]
    rng: np.random.Generator
    total_population: int

    def compartment_totals(self) -> dict[str, int]:
        totals = {c.value: 0 for c in Compartment}
        for a in self.agents:
            totals[a.compartment.value] += 1
        return totals

    def assert_conserved(self) -> None:
        if sum(self.compartment_totals().values()) != self.total_population:
            raise WorldError(f"population not conserved at tick {self.tick}")


@dataclass
class ZoneMetrics:
    """Per-zone epidemic aggregates for one tick."""

    zone: int
    S: int
    E: int
    I: int
    R: int
    D: int
    population: int
    density: float
    infected_ratio: float                # rho = I / S, 0 when S == 0
    degenerate: bool                     # True when S == 0 forced the sentinel

    @property
    def total(self) -> int:
        return self.S + self.E + self.I + self.R + self.D


def _zone_grid(n_zones: int, area_km2: float) -> list[tuple[tuple[float, float], float, float]]:
    """Square zones of side sqrt(area) laid out on a near-square grid."""
    side = math.sqrt(area_km2)
    cols = math.ceil(math.sqrt(n_zones))
    rects = []
    for z in range(n_zones):
        row, col = divmod(z, cols)
        rects.append(((col * side, row * side), side, side))
    return rects


def build_world(config, seed: int) -> WorldState:
    """Create the initial world for a validated :class:`ScenarioConfig`.

    Agents are placed uniformly inside their home zone rectangle and the
    initial compartments follow the configured seed fractions. Identical
    (config, seed) pairs yield bit-identical worlds; see the module
    docstring for the exact generator call order.
    """
    w = config.world
    n_zones = w.zones
    population = w.population

    k_infected = int(round(w.initial_infected_fraction * population))
    k_exposed = int(round(w.initial_exposed_fraction * population))
    if k_infected + k_exposed > population:
        raise WorldError("world: initial infected + exposed exceed population")

    rng = np.random.default_rng(seed)
    rects = _zone_grid(n_zones, w.zone_area_km2)

    # contiguous id blocks, remainder to the lowest-id zones
    base, rem = divmod(population, n_zones)
    counts = [base + (1 if z < rem else 0) for z in range(n_zones)]

    zones: list[Zone] = []
    overrides = {o["id"]: o for o in w.zone_overrides}
    for z in range(n_zones):
        origin, width, height = rects[z]
        o = overrides.get(z, {})
        beds = o.get(
            "healthcare_capacity",
            int(round(w.healthcare_beds_per_1000 * counts[z] / 1000.0)),
        )
        zones.append(
            Zone(
                id=z,
                area_km2=w.zone_area_km2,
                origin=origin,
                width=width,
                height=height,
                population=counts[z],
                healthcare_capacity=beds,
                accessibility_level=o.get("accessibility_level", 1),
                transit_stops=o.get("transit_stops", 0),
                income_per_capita=o.get("income_per_capita", w.income_per_capita),
            )
        )

    agents: list[Agent] = []
    agent_id = 0
    for z in range(n_zones):
        origin, width, height = rects[z]
        unit = rng.random((counts[z], 2))
        for i in range(counts[z]):
            x = origin[0] + unit[i, 0] * width
            y = origin[1] + unit[i, 1] * height
            agents.append(
                Agent(
                    id=agent_id,
                    home_zone=z,
                    current_zone=z,
                    position=(float(x), float(y)),
                    compartment=Compartment.S,
                    age_band="",
                )
            )
            agent_id += 1

    seeded = rng.choice(population, size=k_infected + k_exposed, replace=False)
    for idx in seeded[:k_infected]:
        agents[int(idx)].compartment = Compartment.I
    for idx in seeded[k_infected:]:
        agents[int(idx)].compartment = Compartment.E

    bands = rng.integers(0, len(AGE_BANDS), size=population)
    for a, b in zip(agents, bands):
        a.age_band = AGE_BANDS[int(b)]

    device_draws = rng.random(population)
    for a, d in zip(agents, device_draws):
        if d < config.tracing.device_fraction:
            a.device = f"dev-{a.id}"

    consent_draws = rng.random(population)
    for a, c in zip(agents, consent_draws):
        a.consent = bool(c < config.tracing.consent_probability)

    warehouses = _build_warehouses(config, zones)

    return WorldState(
        tick=0,
        zones=zones,
        warehouses=warehouses,
        agents=agents,
        rng=rng,
        total_population=population,
    )


def _build_warehouses(config, zones: list[Zone]) -> list[Warehouse]:
    n_w = config.allocator.warehouses
    n_zones = len(zones)
    stock = config.allocator.warehouse_stock
    warehouses = []
    for j in range(n_w):
        anchor = zones[(j * n_zones) // n_w]
        cx = anchor.origin[0] + anchor.width / 2.0
        cy = anchor.origin[1] + anchor.height / 2.0
        warehouses.append(
            Warehouse(
                id=j,
                position=(cx, cy),
                stock={v: float(stock) for v in range(len(config.allocator.vaccine_efficacy))},
                served_zones=list(range(n_zones)),
            )
        )
    return warehouses


def zone_metrics(state: WorldState) -> dict[int, ZoneMetrics]:
    """Aggregate compartment counts, density and infected ratio per zone.

    rho_b = I_b / S_b; a zone with S_b = 0 reports rho_b = 0 with the
    degenerate flag set so downstream fairness terms stay finite.
    """
    counts = {z.id: {c: 0 for c in Compartment} for z in state.zones}
    for a in state.agents:
        counts[a.current_zone][a.compartment] += 1

    metrics: dict[int, ZoneMetrics] = {}
    for z in state.zones:
        c = counts[z.id]
        s, e, i = c[Compartment.S], c[Compartment.E], c[Compartment.I]
        r, d = c[Compartment.R], c[Compartment.D]
        degenerate = s == 0
        rho = 0.0 if degenerate else i / s
        metrics[z.id] = ZoneMetrics(
            zone=z.id,
            S=s,
            E=e,
            I=i,
            R=r,
            D=d,
            population=z.population,
            density=z.density,
            infected_ratio=rho,
            degenerate=degenerate,
        )
    total = sum(m.total for m in metrics.values())
    if total != state.total_population:
        raise WorldError(f"zone metrics lost agents at tick {state.tick}")
    return metrics


def positions_array(state: WorldState) -> np.ndarray:
    return np.array([a.position for a in state.agents], dtype=float)


def step_mobility(
    state: WorldState,
    move_probability: float,
    jitter_km: float,
    multipliers: dict[int, float] | None = None,
    destination_for=None,
) -> int:
    """Move agents for one tick; returns the number of inter-zone migrations.

    Each living agent migrates with probability ``move_probability`` scaled
    by its current zone's lockdown multiplier. ``destination_for(agent) ->
    zone_id`` supplies scheduled destinations; without it destinations are
    uniform over zones (a draw equal to the current zone is a no-op).
    Everyone alive then jitters inside their zone rectangle. Dead agents
    never move. Generator call order is documented in the module docstring.
    """
    n = len(state.agents)
    zones = state.zones
    draws = state.rng.random(n)
    movers = []
    for a, u in zip(state.agents, draws):
        if not a.alive:
            continue
        mult = 1.0 if multipliers is None else multipliers.get(a.current_zone, 1.0)
        if u < move_probability * mult:
            movers.append(a)

    migrations = 0
    if movers:
        if destination_for is None:
            dests = state.rng.integers(0, len(zones), size=len(movers))
            targets = [int(d) for d in dests]
        else:
            targets = [destination_for(a) for a in movers]
        placements = state.rng.random((len(movers), 2))
        for a, dest, unit in zip(movers, targets, placements):
            if dest == a.current_zone:
                continue
            zones[a.current_zone].population -= 1
            zones[dest].population += 1
            a.current_zone = dest
            z = zones[dest]
            a.position = (
                float(z.origin[0] + unit[0] * z.width),
                float(z.origin[1] + unit[1] * z.height),
            )
            migrations += 1

    jitter = state.rng.normal(0.0, jitter_km, (n, 2))
    for a, (dx, dy) in zip(state.agents, jitter):
        if not a.alive:
            continue
        z = zones[a.current_zone]
        x = min(max(a.position[0] + dx, z.origin[0]), z.origin[0] + z.width)
        y = min(max(a.position[1] + dy, z.origin[1]), z.origin[1] + z.height)
        a.position = (float(x), float(y))
    return migrations
