"""SEIRD compartment dynamics driven by a per-tick contact graph.

One step works on the pre-tick snapshot, so a freshly exposed agent cannot
progress further within the same tick. Transition draws consume the world
generator in a fixed order (agents ascending by id within each phase):

1. ``rng.random(#S-with-infected-contacts)`` exposure draws;
2. ``rng.random(#E)`` incubation draws;
3. ``rng.random(#I)`` exit draws;
4. ``rng.random(#exiting)`` death-vs-recovery draws.

The agents list must be sorted ascending by id (as ``build_world``
produces it) for the draw order to be well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import ContactGraph
from .world import Agent, Compartment, WorldState, compartment_codes


class EpidemicError(ValueError):
    pass


def derive_beta(gamma: float, r0: float) -> float:
    """Per-contact transmission intensity beta = gamma * R0.

    Beta is an intensity, not a probability, so it may exceed 1; the
    per-edge infection probability clamps later.
    """
    if gamma < 0 or gamma > 1:
        raise EpidemicError(f"gamma must be in [0,1], got {gamma}")
    if r0 < 0:
        raise EpidemicError(f"r0 must be >= 0, got {r0}")
    return gamma * r0


@dataclass
class EpidemicParams:
    r0: float
    gamma: float
    sigma: float
    alpha: float
    beta: float = field(init=False)

    def __post_init__(self):
        for name in ("gamma", "sigma", "alpha"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise EpidemicError(f"{name} must be in [0,1], got {v}")
        self.beta = derive_beta(self.gamma, self.r0)


@dataclass
class StepResult:
    """Agent ids that changed compartment during one step."""

    exposed: list[int] = field(default_factory=list)
    infected: list[int] = field(default_factory=list)
    recovered: list[int] = field(default_factory=list)
    died: list[int] = field(default_factory=list)


def _id_positions(agents: list[Agent]) -> np.ndarray:
    """Lookup array mapping agent id -> list index; ids must be unique."""
    max_id = max(a.id for a in agents)
    pos = np.full(max_id + 1, -1, dtype=np.int64)
    for i, a in enumerate(agents):
        pos[a.id] = i
    return pos


def step_epidemic(
    state: WorldState,
    params: EpidemicParams,
    contacts: ContactGraph,
) -> StepResult:
    """Advance every agent one tick and increment the world tick.

    An S agent catches the infection with probability
    ``s_u * (1 - prod_e (1 - min(1, beta * w_e)))`` over the contact edges
    arriving from infected agents, where ``s_u`` is the agent's
    vaccine-scaled susceptibility. Exposed agents turn infectious with
    probability sigma; infectious agents exit with probability gamma and
    then die with probability alpha, otherwise recover.
    """
    agents = state.agents
    rng = state.rng
    result = StepResult()
    n = len(agents)
    if n == 0:
        state.tick += 1
        return result

    codes = compartment_codes(agents)          # pre-tick snapshot
    has_infected = bool((codes == 2).any())

    # phase 1: exposure of susceptibles along infected -> susceptible edges
    if has_infected and params.beta > 0:
        src, dst, w = contacts.edge_arrays()
        if len(src):
            pos = _id_positions(agents)
            si = pos[src]
            di = pos[dst]
            valid = (si >= 0) & (di >= 0)
            si, di, we = si[valid], di[valid], w[valid]
            hot = (codes[si] == 2) & (codes[di] == 0)
            if hot.any():
                q = np.minimum(1.0, params.beta * we[hot])
                targets_all = di[hot]
                log_safe = np.zeros(n)
                surely = q >= 1.0
                if surely.any():
                    log_safe[targets_all[surely]] = -np.inf
                soft = ~surely
                if soft.any():
                    np.add.at(log_safe, targets_all[soft], np.log1p(-q[soft]))
                exposed_idx = np.nonzero(log_safe < 0)[0]
                if len(exposed_idx):
                    sus = np.fromiter((agents[i].susceptibility for i in exposed_idx),
                                      dtype=float, count=len(exposed_idx))
                    p = sus * -np.expm1(log_safe[exposed_idx])
                    draws = rng.random(len(exposed_idx))
                    for i in exposed_idx[draws < p]:
                        a = agents[int(i)]
                        a.compartment = Compartment.E
                        result.exposed.append(a.id)

    # phase 2: incubation E -> I
    e_idx = np.nonzero(codes == 1)[0]
    if len(e_idx):
        draws = rng.random(len(e_idx))
        for i in e_idx[draws < params.sigma]:
            a = agents[int(i)]
            a.compartment = Compartment.I
            result.infected.append(a.id)

    # phase 3: I exit, split gamma*(1-alpha) recovery vs gamma*alpha death
    i_idx = np.nonzero(codes == 2)[0]
    if len(i_idx):
        exit_draws = rng.random(len(i_idx))
        exiting = i_idx[exit_draws < params.gamma]
        if len(exiting):
            death_draws = rng.random(len(exiting))
            dies = death_draws < params.alpha
            for i, dead in zip(exiting, dies):
                a = agents[int(i)]
                if dead:
                    a.compartment = Compartment.D
                    result.died.append(a.id)
                else:
                    a.compartment = Compartment.R
                    result.recovered.append(a.id)

    state.tick += 1
    state.assert_conserved()
    return result


def mean_field_trajectory(
    n: int,
    k_exposed: float,
    k_infected: float,
    params: EpidemicParams,
    contact_weight: float,
    ticks: int,
) -> np.ndarray:
    """Deterministic expected-count recursion for a uniform complete graph.

    Iterates the exact per-agent hazard of :func:`step_epidemic` on real-
    valued compartment counts: with every pair connected at weight ``w``,
    each susceptible is exposed with probability ``1 - (1 - min(1, beta*w))^I``.
    Returns an array of shape (ticks+1, 5) with columns S, E, I, R, D.
    """
    q = min(1.0, params.beta * contact_weight)
    s = float(n) - k_exposed - k_infected
    e, i, r, d = float(k_exposed), float(k_infected), 0.0, 0.0
    out = [(s, e, i, r, d)]
    for _ in range(ticks):
        p_inf = 1.0 - (1.0 - q) ** i
        new_e = s * p_inf
        new_i = e * params.sigma
        exits = i * params.gamma
        s -= new_e
        e += new_e - new_i
        i += new_i - exits
        r += exits * (1.0 - params.alpha)
        d += exits * params.alpha
        out.append((s, e, i, r, d))
    return np.array(out)


def well_mixed_graph(agent_ids: list[int], weight: float, tick: int = 0) -> ContactGraph:
    """Complete symmetric contact graph with a uniform edge weight."""
    ids = np.asarray(agent_ids, dtype=np.int64)
    n = len(ids)
    src = np.repeat(ids, n)
    dst = np.tile(ids, n)
    keep = src != dst
    weights = np.full(keep.sum(), float(weight))
    return ContactGraph.from_arrays(ids, src[keep], dst[keep], weights, tick=tick)


def seed_compartments(agents: list[Agent], infected_ids, exposed_ids=()) -> None:
    """Test helper: force initial compartments on a fresh all-S population."""
    infected = set(infected_ids)
    exposed = set(exposed_ids)
    for a in agents:
        if a.id in infected:
            a.compartment = Compartment.I
        elif a.id in exposed:
            a.compartment = Compartment.E
