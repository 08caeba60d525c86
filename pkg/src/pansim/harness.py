"""Scenario runner: the per-tick pipeline and the report artifacts.

Stage order within one tick is fixed: mobility -> contact build ->
epidemic step -> tracing -> fabric. Policy, allocation and forecasting
run on the post-step snapshot every ``run.decision_epoch`` ticks. All
randomness flows through the world generator begun in ``build_world``,
in this stage order, so a (config, seed) pair reproduces its artifacts
byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .allocation import (AllocationError, AllocatorInputs, coverage_metric,
                         hub_targets, solve_allocation)
from .config import ConfigError, ScenarioConfig, load_config
from .epidemic import EpidemicParams, step_epidemic
from .fabric import (CloudStore, DeviceRecord, MecServer, dp_aggregate,
                     k_anonymize, route_task, sync_to_cloud, handoff)
from .forecast import ForecastError, fit_ar, fit_static, predict_ar
from .graphs import CPTracker, build_contact_graph, gcc_size, max_core
from .policy import (LockdownLevel, WelfareParams, decide_lockdown,
                     integrate_decisions, schedule_mobility, welfare_score)
from .tracing import RadioModel, TracingSession
from .world import (Compartment, WorldState, build_world, compartment_codes,
                    step_mobility, zone_metrics)


class InvariantViolation(RuntimeError):
    """A runtime invariant broke; carries the tick and the invariant name."""

    def __init__(self, tick: int, name: str, detail: str = ""):
        self.tick = tick
        self.name = name
        super().__init__(f"invariant '{name}' violated at tick {tick}"
                         + (f": {detail}" if detail else ""))


REPORT_COLUMNS = [
    "tick", "zone", "S", "E", "I", "R", "D", "population", "density",
    "infected_ratio", "degenerate", "gcc", "max_core", "mean_cp",
    "lockdown", "forecast_infected",
]


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    fabric_events: list[dict] = field(default_factory=list)
    trace_messages: list[dict] = field(default_factory=list)
    welfare: float = 0.0
    summary: dict = field(default_factory=dict)


def _zone_mec_map(n_zones: int, n_mecs: int) -> list[int]:
    return [z * n_mecs // n_zones for z in range(n_zones)]


def _zone_centroids(state: WorldState) -> np.ndarray:
    return np.array([
        (z.origin[0] + z.width / 2.0, z.origin[1] + z.height / 2.0)
        for z in state.zones
    ])


class _ScenarioRun:
    """Mutable run context; one instance per run_scenario call."""

    def __init__(self, config: ScenarioConfig, seed: int):
        self.config = config
        self.seed = seed
        self.state = build_world(config, seed)
        self.params = EpidemicParams(
            r0=config.epidemic.r0, gamma=config.epidemic.gamma,
            sigma=config.epidemic.sigma, alpha=config.epidemic.alpha)
        self.report = RunReport()
        n_zones = config.world.zones

        self.levels: dict[int, LockdownLevel] = {
            z: LockdownLevel.NONE for z in range(n_zones)}
        self.zone_cp: dict[int, float] = {z: 0.0 for z in range(n_zones)}
        self.cp_tracker = CPTracker(config.world.population)
        self.infected_history: list[list[int]] = [[] for _ in range(n_zones)]
        self.forecast_map: dict[tuple[int, int], float] = {}
        self.prev_removed = -1
        self.migrations = 0

        self.u_series: list[np.ndarray] = []
        self.ut_series: list[np.ndarray] = []
        self.i_series: list[np.ndarray] = []

        self.static_rows: list[tuple[int, int, list[float], list[float]]] = []

        # tracing
        tc = config.tracing
        self.tracing_on = tc.enabled
        self.session = None
        self.reports_sent = 0
        self.reports_refused = 0
        self.exposed_flagged: set[str] = set()
        if self.tracing_on:
            radio = RadioModel(
                rssi_0=tc.radio.rssi_0, d_0_km=tc.radio.d_0_km,
                path_loss_exponent=tc.radio.path_loss_exponent,
                rssi_min=tc.radio.rssi_min, rssi_max=tc.radio.rssi_max)
            self.session = TracingSession(
                mode=tc.mode, radio=radio, threshold=tc.threshold,
                window=tc.window, key_rotation_ticks=tc.radio.key_rotation_ticks)
            for a in self.state.agents:
                if a.device is not None:
                    self.session.register(a.device, consent=a.consent, tick=0)

        # fabric
        fc = config.fabric
        self.fabric_on = fc.enabled
        self.mecs: list[MecServer] = []
        self.cloud: CloudStore | None = None
        self.zone_mec: list[int] = []
        self.device_mec: dict[str, int] = {}
        self.device_seq: dict[str, int] = {}
        self.records_generated = 0
        self.edge_tasks = 0
        self.cloud_tasks = 0
        self.latency_total = 0
        if self.fabric_on:
            self.zone_mec = _zone_mec_map(n_zones, fc.mec_servers)
            covered: dict[int, list[int]] = {}
            for z, m in enumerate(self.zone_mec):
                covered.setdefault(m, []).append(z)
            self.mecs = [
                MecServer(m, covered.get(m, []), fc.mec_capacity, fc.latency_local)
                for m in range(fc.mec_servers)
            ]
            self.cloud = CloudStore(fc.latency_backhaul)
            for a in self.state.agents:
                if a.device is not None:
                    self.device_mec[a.device] = self.zone_mec[a.current_zone]
                    self.device_seq[a.device] = 0

    # -- per-tick stages --------------------------------------------------

    def _destination_for(self, agent) -> int:
        n_zones = len(self.state.zones)
        z = agent.current_zone
        if n_zones == 1:
            return z
        alt = (z + 1 + (agent.id % (n_zones - 1))) % n_zones
        return schedule_mobility(z, sorted({z, alt}), self.zone_cp, self.levels)

    def _stage_mobility(self) -> None:
        w = self.config.world
        multipliers = {z: lvl.mobility_multiplier for z, lvl in self.levels.items()}
        scheduler = self._destination_for if self.config.policy.enabled else None
        self.migrations += step_mobility(
            self.state, w.move_probability, w.jitter_km, multipliers, scheduler)

    def _stage_tracing(self, contacts, tick: int, newly_infected: list[int]) -> None:
        if not self.tracing_on:
            return
        agents = self.state.agents
        device_of = {a.id: a.device for a in agents if a.device is not None}
        radius = self.config.world.contact_radius_km
        src, dst, wts = contacts.edge_arrays()
        for u, v, w in zip(src, dst, wts):
            if u < v:                      # one encounter per mutual pair
                du, dv = device_of.get(int(u)), device_of.get(int(v))
                if du is not None and dv is not None:
                    distance = (1.0 - float(w)) * radius
                    self.session.record_encounter(du, dv, tick, distance)
        for agent_id in newly_infected:
            dev = device_of.get(agent_id)
            if dev is None:
                continue
            outcome = self.session.report_positive(dev, self.state.tick)
            if outcome.refused:
                self.reports_refused += 1
            else:
                self.reports_sent += 1
                self.exposed_flagged |= outcome.flagged
        self.session.prune_logs(self.state.tick)

    def _stage_fabric(self, tick: int) -> dict:
        if not self.fabric_on:
            return {}
        fc = self.config.fabric
        for mec in self.mecs:
            mec.reset_load()
        handoffs = 0
        reports = 0
        edge = cloud = 0
        for a in self.state.agents:
            if a.device is None or not a.alive:
                continue
            target_mec = self.zone_mec[a.current_zone]
            if self.device_mec[a.device] != target_mec:
                handoff(a.device, self.mecs[self.device_mec[a.device]],
                        self.mecs[target_mec], self.cloud, tick)
                self.device_mec[a.device] = target_mec
                handoffs += 1
            seq = self.device_seq[a.device]
            self.device_seq[a.device] = seq + 1
            record = DeviceRecord(device=a.device, seq=seq, tick=tick)
            mec = self.mecs[target_mec]
            mec.receive_report(record)
            self.records_generated += 1
            reports += 1
            routed = route_task(fc.report_demand, tick, mec, self.cloud)
            self.latency_total += routed.completion_tick - tick
            if routed.site == "edge":
                edge += 1
            else:
                cloud += 1
        synced = 0
        if (tick + 1) % fc.sync_period == 0:
            for mec in self.mecs:
                synced += sync_to_cloud(mec, self.cloud, tick)
        self.edge_tasks += edge
        self.cloud_tasks += cloud
        return {"tick": tick, "reports": reports, "edge": edge, "cloud": cloud,
                "handoffs": handoffs, "synced": synced}

    # -- epoch decisions ----------------------------------------------------

    def _epoch_forecasts(self, tick: int) -> dict[int, float]:
        fc = self.config.forecast
        epoch = self.config.run.decision_epoch
        predictions: dict[int, float] = {}
        if not fc.enabled:
            return predictions
        for z, history in enumerate(self.infected_history):
            if len(history) < 2 * fc.order + 2:
                continue
            try:
                model = fit_ar(history, fc.order)
            except ForecastError:
                continue
            path = predict_ar(model, history, epoch)
            for j, value in enumerate(path, start=1):
                self.forecast_map[(tick + j, z)] = max(0.0, float(value))
            predictions[z] = max(0.0, float(path[-1]))
        return predictions

    def _epoch_allocation(self, metrics) -> dict:
        ac = self.config.allocator
        if not ac.enabled or ac.stock <= 0:
            return {"status": "disabled"}
        zones = self.state.zones
        n_zones = len(zones)
        susceptible = np.array([metrics[z].S for z in range(n_zones)], dtype=float)
        densities = np.array([metrics[z].density for z in range(n_zones)])
        rho = np.array([metrics[z].infected_ratio for z in range(n_zones)])

        if ac.mode == "susceptible" and susceptible.sum() <= 0:
            return {"status": "skipped", "note": "no susceptible population"}
        if ac.mode == "density" and densities.sum() <= 0:
            return {"status": "skipped", "note": "zero total density"}
        if ac.mode == "infected" and rho.sum() <= 0:
            return {"status": "skipped", "note": "no infections to weight"}

        centroids = _zone_centroids(self.state)
        wpos = np.array([w.position for w in self.state.warehouses])
        distances = np.sqrt(((wpos[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2))
        warehouse_capacity = np.array([
            sum(w.stock.get(v, 0.0) for v in range(len(ac.vaccine_efficacy)))
            for w in self.state.warehouses
        ])
        inputs = AllocatorInputs(
            distances=distances,
            stock_total=ac.stock,
            warehouse_stock=warehouse_capacity,
            efficacy=list(ac.vaccine_efficacy),
            susceptible=susceptible,
            densities=densities,
            infected_ratio=rho,
            tau=ac.tau,
            full_distribution=ac.full_distribution,
        )
        try:
            result = solve_allocation(inputs, ac.mode)
        except AllocationError as exc:
            return {"status": "error", "note": str(exc)}
        if not result.ok:
            return {"status": result.status, "note": result.note}

        doses = result.matrix.zone_doses()            # (B, V)
        per_warehouse = result.matrix.x.sum(axis=1) * ac.stock   # (W, V)
        for w, warehouse in enumerate(self.state.warehouses):
            for v in range(doses.shape[1]):
                left = warehouse.stock.get(v, 0.0) - float(per_warehouse[w, v])
                warehouse.stock[v] = max(0.0, left)   # clamp solver-tolerance dust
        self._apply_vaccination(doses)
        return {
            "status": "optimal",
            "objective": result.objective,
            "mode": ac.mode,
            "doses": [[float(d) for d in row] for row in doses],
            "matrix": [[[float(x) for x in vv] for vv in bb] for bb in result.matrix.x],
        }

    def _apply_vaccination(self, doses: np.ndarray) -> None:
        efficacy = self.config.allocator.vaccine_efficacy
        by_zone: dict[int, list] = {}
        for a in self.state.agents:
            if a.compartment is Compartment.S:
                by_zone.setdefault(a.current_zone, []).append(a)
        for b in range(doses.shape[0]):
            queue = by_zone.get(b, [])
            cursor = 0
            for v in range(doses.shape[1]):
                budget = int(doses[b, v])
                while budget > 0 and cursor < len(queue):
                    agent = queue[cursor]
                    cursor += 1
                    if agent.vaccinated.get(v):
                        continue
                    agent.vaccinated[v] = True
                    agent.susceptibility *= (1.0 - efficacy[v])
                    budget -= 1

    def _epoch_decisions(self, contacts, metrics) -> None:
        pc = self.config.policy
        tick = self.state.tick
        infected = {z: metrics[z].I for z in metrics}
        capacity = {z.id: z.healthcare_capacity for z in self.state.zones}

        forecasts = self._epoch_forecasts(tick)
        fused = dict(self.levels)
        consensus: dict[int, dict[str, float]] = {}
        degenerate: list[int] = []
        if pc.enabled:
            current_rule = decide_lockdown(
                infected, capacity, pc.theta_moderate, pc.theta_hard,
                pc.hospitalization_fraction)
            projected = {z: forecasts.get(z, float(infected[z])) for z in infected}
            forecast_rule = decide_lockdown(
                {z: int(round(v)) for z, v in projected.items()}, capacity,
                pc.theta_moderate, pc.theta_hard, pc.hospitalization_fraction)

            cp_rule = {}
            for z in infected:
                cp = self.zone_cp.get(z, 0.0)
                if cp >= pc.cp_hard:
                    cp_rule[z] = LockdownLevel.HARD
                elif cp >= pc.cp_moderate:
                    cp_rule[z] = LockdownLevel.MODERATE
                else:
                    cp_rule[z] = LockdownLevel.NONE

            candidates = [
                {z: call.level for z, call in current_rule.items()},
                {z: call.level for z, call in forecast_rule.items()},
                cp_rule,
            ]
            fused, consensus = integrate_decisions(candidates)
            degenerate = sorted(
                z for z, call in current_rule.items() if call.degenerate)
            self.levels = fused

        allocation = self._epoch_allocation(metrics)

        cc = self.config.allocator.coverage
        fallback = min(cc.baselines.values())
        coverage = {
            z.id: coverage_metric(cc.baselines.get(z.accessibility_level, fallback),
                                  cc.stop_benefit, z.transit_stops)
            for z in self.state.zones
        }
        hubs = hub_targets(contacts, min(5, contacts.node_count))

        record = {
            "tick": tick,
            "levels": {str(z): fused[z].value for z in fused},
            "degenerate_zones": degenerate,
            "consensus": {str(z): consensus[z] for z in consensus},
            "allocation": allocation,
            "coverage": {str(z): v for z, v in coverage.items()},
            "hubs": hubs,
            "forecast_next_epoch": {str(z): v for z, v in sorted(forecasts.items())},
        }

        if self.fabric_on:
            true_counts = np.array([metrics[z].I for z in sorted(metrics)])
            noisy = dp_aggregate(true_counts, self.config.fabric.epsilon,
                                 self.state.rng)
            case_records = [
                {"zone": a.current_zone, "age_band": a.age_band}
                for a in self.state.agents
                if a.compartment is Compartment.I and a.device is not None
            ]
            released = k_anonymize(case_records, self.config.fabric.k_anonymity,
                                   ["zone", "age_band"])
            self.report.fabric_events.append({
                "tick": tick, "event": "privacy_release",
                "dp_infected": [int(v) for v in noisy],
                "case_records": len(case_records),
                "k_released": len(released),
            })

        for z in sorted(metrics):
            m = metrics[z]
            doses_z = 0.0
            if allocation.get("status") == "optimal":
                doses_z = float(sum(allocation["doses"][z]))
            self.static_rows.append((
                tick, z,
                [float(m.S), float(m.I), float(m.density)],
                [float(fused[z].strictness), doses_z],
            ))

        self.report.decisions.append(record)

    # -- invariants and reporting -------------------------------------------

    def _check_invariants(self, metrics) -> None:
        tick = self.state.tick
        total = sum(m.total for m in metrics.values())
        if total != self.state.total_population:
            raise InvariantViolation(tick, "population-conservation",
                                     f"{total} != {self.state.total_population}")
        removed = sum(m.R + m.D for m in metrics.values())
        if removed < self.prev_removed:
            raise InvariantViolation(tick, "removed-monotonicity",
                                     f"{removed} < {self.prev_removed}")
        self.prev_removed = removed
        for z in self.state.zones:
            if metrics[z.id].total != z.population:
                raise InvariantViolation(
                    tick, "zone-count-consistency",
                    f"zone {z.id}: counted {metrics[z.id].total}, "
                    f"tracked {z.population}")

    def _emit_rows(self, metrics, gcc: int, kmax: int) -> None:
        tick = self.state.tick
        codes = compartment_codes(self.state.agents)
        z_scores = self.cp_tracker.z_scores(codes)
        sums: dict[int, float] = {z.id: 0.0 for z in self.state.zones}
        counts: dict[int, int] = {z.id: 0 for z in self.state.zones}
        for a, score in zip(self.state.agents, z_scores):
            if a.alive:
                sums[a.current_zone] += float(score)
                counts[a.current_zone] += 1
        for z in sorted(metrics):
            m = metrics[z]
            mean_cp = sums[z] / counts[z] if counts[z] else 0.0
            self.zone_cp[z] = mean_cp
            forecast = self.forecast_map.get((tick, z))
            self.report.rows.append({
                "tick": tick,
                "zone": z,
                "S": m.S, "E": m.E, "I": m.I, "R": m.R, "D": m.D,
                "population": m.population,
                "density": m.density,
                "infected_ratio": m.infected_ratio,
                "degenerate": int(m.degenerate),
                "gcc": gcc,
                "max_core": kmax,
                "mean_cp": mean_cp,
                "lockdown": self.levels[z].value,
                "forecast_infected": forecast,
            })

    def _accumulate_welfare(self, metrics) -> None:
        zones = self.state.zones
        u = np.zeros(len(zones))
        ut = np.zeros(len(zones))
        inf = np.zeros(len(zones))
        for z in zones:
            m = metrics[z.id]
            productive = max(m.population - m.I - m.D, 0)
            ut[z.id] = z.income_per_capita * productive
            u[z.id] = ut[z.id] * self.levels[z.id].mobility_multiplier
            inf[z.id] = m.I
        self.u_series.append(u)
        self.ut_series.append(ut)
        self.i_series.append(inf)

    # -- main loop -------------------------------------------------------------

    def run(self) -> RunReport:
        cfg = self.config
        epoch = cfg.run.decision_epoch
        for _ in range(cfg.run.ticks):
            tick = self.state.tick
            self._stage_mobility()
            contacts = build_contact_graph(
                self.state.agents, cfg.world.contact_radius_km, tick)
            self.cp_tracker.record(contacts, compartment_codes(self.state.agents))
            gcc = gcc_size(contacts)
            kmax = max_core(contacts)
            result = step_epidemic(self.state, self.params, contacts)
            self._stage_tracing(contacts, tick, result.infected)
            fabric_event = self._stage_fabric(tick)
            if fabric_event:
                self.report.fabric_events.append(fabric_event)

            metrics = zone_metrics(self.state)
            self._check_invariants(metrics)
            for z in sorted(metrics):
                self.infected_history[z].append(metrics[z].I)
            self._emit_rows(metrics, gcc, kmax)
            self._accumulate_welfare(metrics)

            run_epoch = (cfg.policy.enabled or cfg.allocator.enabled
                         or cfg.forecast.enabled)
            if run_epoch and self.state.tick % epoch == 0:
                self._epoch_decisions(contacts, metrics)

        self._finalize()
        return self.report

    def _finalize(self) -> None:
        cfg = self.config
        wc = cfg.policy.welfare
        params = WelfareParams(
            discount_rate=wc.discount_rate,
            vaccine_probability=wc.vaccine_probability,
            victim_income=wc.victim_income,
            death_rate=wc.death_rate)
        if self.u_series:
            self.report.welfare = welfare_score(
                np.array(self.u_series), np.array(self.ut_series),
                np.array(self.i_series), params)

        static_summary: dict = {"status": "skipped", "note": "not enough epochs"}
        epoch = cfg.run.decision_epoch
        by_key = {(t, z): (feat, dec) for t, z, feat, dec in self.static_rows}
        rows_x, rows_d, rows_y = [], [], []
        for (t, z), (feat, dec) in by_key.items():
            nxt = (t + epoch, z)
            if nxt in by_key:
                rows_x.append(feat)
                rows_d.append(dec)
                rows_y.append(by_key[nxt][0][1])    # next-epoch infected count
        if rows_y and len(rows_y) >= len(rows_x[0]) + len(rows_d[0]) + 2:
            try:
                model = fit_static(rows_x, rows_d, rows_y)
                static_summary = {"status": "fitted", "r_squared": model.r_squared}
            except ForecastError as exc:
                static_summary = {"status": "skipped", "note": str(exc)}

        if self.tracing_on:
            self.report.trace_messages = self.session.message_dicts()

        totals = self.state.compartment_totals()
        tasks = self.edge_tasks + self.cloud_tasks
        self.report.summary = {
            "seed": self.seed,
            "ticks": cfg.run.ticks,
            "zones": cfg.world.zones,
            "population": cfg.world.population,
            "final_compartments": totals,
            "migrations": self.migrations,
            "welfare": self.report.welfare,
            "tracing": {
                "mode": cfg.tracing.mode if self.tracing_on else None,
                "reports": self.reports_sent,
                "refused": self.reports_refused,
                "flagged_devices": len(self.exposed_flagged),
            },
            "fabric": {
                "records": self.records_generated,
                "offload_fraction": (self.cloud_tasks / tasks) if tasks else 0.0,
                "mean_latency": (self.latency_total / tasks) if tasks else 0.0,
                "cloud_records": self.cloud.total_records() if self.cloud else 0,
            },
            "static_model": static_summary,
            "peak_infected": int(max(
                (sum(r["I"] for r in self.report.rows if r["tick"] == t)
                 for t in range(1, cfg.run.ticks + 1)), default=0)),
        }


def run_scenario(config: ScenarioConfig | str | Path,
                 seed_override: int | None = None) -> RunReport:
    """Run one scenario to completion and return its report.

    Raises :class:`ConfigError` for bad configs and
    :class:`InvariantViolation` when a runtime invariant breaks.
    """
    if isinstance(config, (str, Path)):
        config = load_config(config)
    if not isinstance(config, ScenarioConfig):
        raise ConfigError("config must be a ScenarioConfig or a path")
    seed = config.run.seed if seed_override is None else seed_override
    return _ScenarioRun(config, seed).run()


# -- artifact writers ---------------------------------------------------------


def _format_cell(column: str, value) -> str:
    if value is None:
        return ""
    if column in ("density", "infected_ratio", "mean_cp", "forecast_infected"):
        return f"{value:.6f}"
    return str(value)


def write_outputs(report: RunReport, out_dir: str | Path,
                  epochs_only: bool = False,
                  decision_epoch: int = 1) -> dict[str, Path]:
    """Write report.csv, decisions.jsonl, fabric.jsonl and trace.jsonl.

    With ``epochs_only`` the CSV keeps only decision-epoch rows (the
    JSONL artifacts are epoch- or event-grained already).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "decisions": out / "decisions.jsonl",
        "fabric": out / "fabric.jsonl",
        "trace": out / "trace.jsonl",
    }
    with open(paths["report"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            if epochs_only and row["tick"] % decision_epoch != 0:
                continue
            writer.writerow([_format_cell(c, row[c]) for c in REPORT_COLUMNS])
    with open(paths["decisions"], "w") as fh:
        for record in report.decisions:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with open(paths["fabric"], "w") as fh:
        for event in report.fabric_events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    with open(paths["trace"], "w") as fh:
        for message in report.trace_messages:
            fh.write(json.dumps(message, sort_keys=True) + "\n")
    return paths
