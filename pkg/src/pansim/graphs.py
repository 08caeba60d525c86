"""Per-tick proximity contact graphs and the analytics on top of them:
giant connected component, K-core decomposition, connectivity centrality,
and contagion potential.

Graphs are directed with weights in [0, 1]; the proximity builder emits
every contact in both directions, so the analytics treat edges as mutual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .world import Compartment


class GraphError(ValueError):
    pass


class ContactGraph:
    """Weighted directed graph keyed by integer node ids.

    Insertion order is deterministic; edge arrays and the undirected
    adjacency view are cached and invalidated on mutation.
    """

    def __init__(self, tick: int = 0):
        self.tick = tick
        self._succ: dict[int, dict[int, float]] = {}
        self._arrays: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._undirected: dict[int, list[int]] | None = None

    # -- construction -------------------------------------------------

    def add_node(self, u: int) -> None:
        if u not in self._succ:
            self._succ[u] = {}
            self._invalidate()

    def add_edge(self, u: int, v: int, w: float) -> None:
        if u == v:
            raise GraphError("self-loops are not allowed")
        if not 0.0 <= w <= 1.0:
            raise GraphError(f"edge weight must be in [0,1], got {w}")
        self.add_node(u)
        self.add_node(v)
        self._succ[u][v] = float(w)
        self._invalidate()

    @classmethod
    def from_arrays(cls, nodes, src, dst, weights, tick: int = 0) -> "ContactGraph":
        """Bulk constructor used by the vectorized proximity builder."""
        g = cls(tick=tick)
        for u in nodes:
            g._succ[int(u)] = {}
        for u, v, w in zip(src, dst, weights):
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise GraphError("self-loops are not allowed")
            if not 0.0 <= w <= 1.0:
                raise GraphError(f"edge weight must be in [0,1], got {w}")
            g._succ.setdefault(u, {})
            g._succ.setdefault(v, {})
            g._succ[u][v] = w
        return g

    def _invalidate(self) -> None:
        self._arrays = None
        self._undirected = None

    # -- views ---------------------------------------------------------

    @property
    def nodes(self) -> list[int]:
        return list(self._succ)

    @property
    def node_count(self) -> int:
        return len(self._succ)

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self._succ.values())

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._succ.get(u, {})

    def weight(self, u: int, v: int) -> float:
        return self._succ[u][v]

    def out_edges(self, u: int):
        return self._succ.get(u, {}).items()

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, weight) arrays in deterministic insertion order."""
        if self._arrays is None:
            src, dst, w = [], [], []
            for u, nbrs in self._succ.items():
                for v, wt in nbrs.items():
                    src.append(u)
                    dst.append(v)
                    w.append(wt)
            self._arrays = (
                np.array(src, dtype=np.int64),
                np.array(dst, dtype=np.int64),
                np.array(w, dtype=float),
            )
        return self._arrays

    def undirected_adjacency(self) -> dict[int, list[int]]:
        """Node -> distinct neighbors over the union of both directions."""
        if self._undirected is None:
            adj: dict[int, set[int]] = {u: set() for u in self._succ}
            for u, nbrs in self._succ.items():
                for v in nbrs:
                    adj[u].add(v)
                    adj[v].add(u)
            self._undirected = {u: sorted(vs) for u, vs in adj.items()}
        return self._undirected

    def export_edges_csv(self, path: str | Path) -> int:
        """Write one ``u,v,w,tick`` row per directed edge; returns row count."""
        rows = 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "v", "w", "tick"])
            for u, nbrs in self._succ.items():
                for v, w in nbrs.items():
                    writer.writerow([u, v, f"{w:.9f}", self.tick])
                    rows += 1
        return rows


def build_contact_graph(agents, radius_km: float, tick: int) -> ContactGraph:
    """Proximity graph: symmetric edges between living agents of the same
    zone within ``radius_km``, weighted ``1 - distance/radius``.

    Dead agents generate no contacts and are excluded from the node set.
    """
    if radius_km <= 0:
        raise GraphError(f"radius must be positive, got {radius_km}")

    alive = [a for a in agents if a.compartment is not Compartment.D]
    g = ContactGraph(tick=tick)
    for a in alive:
        g.add_node(a.id)

    by_zone: dict[int, list] = {}
    for a in alive:
        by_zone.setdefault(a.current_zone, []).append(a)

    for zone_agents in by_zone.values():
        n = len(zone_agents)
        if n < 2:
            continue
        ids = np.array([a.id for a in zone_agents], dtype=np.int64)
        pos = np.array([a.position for a in zone_agents], dtype=float)
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        iu, ju = np.triu_indices(n, k=1)
        close = dist[iu, ju] <= radius_km
        for i, j in zip(iu[close], ju[close]):
            w = 1.0 - dist[i, j] / radius_km
            g._succ[int(ids[i])][int(ids[j])] = float(w)
            g._succ[int(ids[j])][int(ids[i])] = float(w)
    g._invalidate()
    return g


# -- component and core structure ---------------------------------------


def gcc_size(graph: ContactGraph) -> int:
    """Size of the largest connected component, edges taken as undirected."""
    adj = graph.undirected_adjacency()
    seen: set[int] = set()
    best = 0
    for start in graph.nodes:
        if start in seen:
            continue
        size = 0
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            size += 1
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        best = max(best, size)
    return best


def core_decomposition(graph: ContactGraph) -> dict[int, int]:
    """Core number of every node by iterative minimum-degree peeling."""
    adj = graph.undirected_adjacency()
    degree = {u: len(vs) for u, vs in adj.items()}
    # bucket queue over current degrees
    if not degree:
        return {}
    max_deg = max(degree.values())
    buckets: list[list[int]] = [[] for _ in range(max_deg + 1)]
    for u in graph.nodes:
        buckets[degree[u]].append(u)

    core: dict[int, int] = {}
    removed: set[int] = set()
    k = 0
    d = 0
    while len(core) < len(degree):
        while d <= max_deg and not buckets[d]:
            d += 1
        u = buckets[d].pop()
        if u in removed or degree[u] != d:
            continue
        k = max(k, d)
        core[u] = k
        removed.add(u)
        for v in adj[u]:
            if v in removed:
                continue
            if degree[v] > d:
                degree[v] -= 1
                buckets[degree[v]].append(v)
    return core


def max_core(graph: ContactGraph) -> int:
    core = core_decomposition(graph)
    return max(core.values(), default=0)


# -- connectivity centrality ---------------------------------------------


def count_simple_paths(graph: ContactGraph, u: int, v: int, max_len: int) -> int:
    """Number of simple paths from u to v with at most ``max_len`` edges."""
    if max_len < 1:
        raise GraphError(f"path-length cap must be >= 1, got {max_len}")
    succ = graph._succ
    count = 0
    on_path = {u}

    def dfs(node: int, depth: int) -> None:
        nonlocal count
        for nxt in succ.get(node, {}):
            if nxt == v:
                count += 1
            if depth < max_len and nxt not in on_path and nxt != v:
                on_path.add(nxt)
                dfs(nxt, depth + 1)
                on_path.remove(nxt)

    dfs(u, 1)
    return count


def connectivity_centrality(graph: ContactGraph, u: int, max_path_len: int = 4) -> float:
    """Sum over direct neighbors v of w(u,v) / h(u,v), where h counts the
    simple paths of length <= ``max_path_len`` between u and v.

    Counting all simple paths is intractable in general, so h is capped at
    ``max_path_len`` edges; the edge (u,v) itself guarantees h >= 1.
    """
    if max_path_len < 1:
        raise GraphError(f"path-length cap must be >= 1, got {max_path_len}")
    total = 0.0
    for v, w in graph.out_edges(u):
        h = count_simple_paths(graph, u, v, max_path_len)
        total += w / h
    return total


# -- contagion potential ---------------------------------------------------


@dataclass
class CPHistory:
    """Instantaneous infected-contact fractions per agent over time.

    ``P_t(u)`` is the fraction of u's contacts at tick t that were
    infected (0 when u had no contacts). One value is appended per
    recorded tick; histories across agents stay aligned.
    """

    values: dict[int, list[float]] = field(default_factory=dict)
    compartment: dict[int, Compartment] = field(default_factory=dict)

    def record_tick(self, graph: ContactGraph, compartments: dict[int, Compartment]) -> None:
        """Append P_t for every known agent from one contact snapshot."""
        infected: dict[int, int] = {}
        total: dict[int, int] = {}
        src, dst, _ = graph.edge_arrays()
        for u, v in zip(src, dst):
            u, v = int(u), int(v)
            total[u] = total.get(u, 0) + 1
            if compartments.get(v) is Compartment.I:
                infected[u] = infected.get(u, 0) + 1
        for agent_id, comp in compartments.items():
            t = total.get(agent_id, 0)
            p = infected.get(agent_id, 0) / t if t else 0.0
            self.values.setdefault(agent_id, []).append(p)
            self.compartment[agent_id] = comp

    def record_values(self, agent_id: int, ps, compartment: Compartment) -> None:
        self.values.setdefault(agent_id, []).extend(float(p) for p in ps)
        self.compartment[agent_id] = compartment


class CPTracker:
    """Streaming contagion-potential accumulator over dense agent ids.

    Same P_t definition as :class:`CPHistory` but keeps only running sums,
    which is what the per-tick harness loop needs at scale.
    """

    def __init__(self, n_agents: int):
        self.sums = np.zeros(n_agents)
        self.ticks = 0

    def record(self, graph: ContactGraph, comp_codes: np.ndarray) -> None:
        """comp_codes[i] is the compartment code of agent id i (see world)."""
        n = len(self.sums)
        src, dst, _ = graph.edge_arrays()
        total = np.zeros(n)
        infected = np.zeros(n)
        if len(src):
            np.add.at(total, src, 1.0)
            np.add.at(infected, src, (comp_codes[dst] == 2).astype(float))
        p = np.divide(infected, total, out=np.zeros(n), where=total > 0)
        self.sums += p
        self.ticks += 1

    def z_scores(self, comp_codes: np.ndarray) -> np.ndarray:
        """Piecewise contagion potential per agent: 1 if infected, 0 if
        recovered or dead, otherwise the mean recorded P_t."""
        if self.ticks == 0:
            z = np.zeros(len(self.sums))
        else:
            z = self.sums / self.ticks
        z[comp_codes == 2] = 1.0
        z[(comp_codes == 3) | (comp_codes == 4)] = 0.0
        return z


def contagion_potential(history: CPHistory, agent_id: int, horizon: int | None = None) -> float:
    """Piecewise contagion potential in [0, 1].

    Dead or recovered agents score 0, currently infected agents score 1,
    and everyone else scores the mean of their recorded instantaneous
    values (over the last ``horizon`` ticks when given).
    """
    if agent_id not in history.compartment:
        raise GraphError(f"unknown agent {agent_id}")
    comp = history.compartment[agent_id]
    if comp in (Compartment.R, Compartment.D):
        return 0.0
    if comp is Compartment.I:
        return 1.0
    ps = history.values.get(agent_id, [])
    if horizon is not None:
        if horizon < 1:
            raise GraphError(f"horizon must be >= 1, got {horizon}")
        ps = ps[-horizon:]
    if not ps:
        return 0.0
    return float(sum(ps) / len(ps))
