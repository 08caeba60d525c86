"""Scenario configuration: JSON schema, defaults, and strict validation.

Every numeric field is range-checked at load time and unknown keys are
rejected, both with full field paths so a bad config fails loudly before
any simulation work starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for any malformed scenario config; message names the field."""


@dataclass
class WorldConfig:
    zones: int = 1
    population: int = 100
    zone_area_km2: float = 1.0
    initial_infected_fraction: float = 0.0
    initial_exposed_fraction: float = 0.0
    move_probability: float = 0.05
    jitter_km: float = 0.02
    contact_radius_km: float = 0.05
    healthcare_beds_per_1000: float = 3.0
    income_per_capita: float = 1.0
    zone_overrides: list[dict] = field(default_factory=list)


@dataclass
class EpidemicConfig:
    r0: float = 3.0
    gamma: float = 0.1
    sigma: float = 0.25
    alpha: float = 0.02


@dataclass
class RadioConfig:
    rssi_0: float = -40.0        # dBm at the reference distance
    d_0_km: float = 0.001
    path_loss_exponent: float = 2.0
    rssi_min: float = -90.0      # range cutoff
    rssi_max: float = -40.0
    key_rotation_ticks: int = 15


@dataclass
class TracingConfig:
    enabled: bool = True
    mode: str = "centralized"    # or "distributed"
    threshold: float = 3.0
    window: int = 30
    device_fraction: float = 1.0
    consent_probability: float = 1.0
    radio: RadioConfig = field(default_factory=RadioConfig)


@dataclass
class CoverageConfig:
    baselines: dict[int, float] = field(default_factory=lambda: {1: 0.6, 2: 0.5, 3: 0.4})
    stop_benefit: float = 0.01


@dataclass
class AllocatorConfig:
    enabled: bool = True
    mode: str = "density"        # susceptible | density | infected
    tau: float = 0.5
    stock: float = 100.0         # doses available per decision epoch (|Z|)
    vaccine_efficacy: list[float] = field(default_factory=lambda: [0.9])
    warehouses: int = 2
    warehouse_stock: float = 1e9  # ample unless a scenario caps it
    full_distribution: bool = False
    coverage: CoverageConfig = field(default_factory=CoverageConfig)


@dataclass
class WelfareConfig:
    discount_rate: float = 0.05  # r
    vaccine_probability: float = 0.1
    victim_income: float = 10.0  # omega
    death_rate: float = 0.002    # gamma_D


@dataclass
class PolicyConfig:
    enabled: bool = True
    theta_moderate: float = 0.3
    theta_hard: float = 0.7
    hospitalization_fraction: float = 0.05
    cp_moderate: float = 0.25
    cp_hard: float = 0.5
    welfare: WelfareConfig = field(default_factory=WelfareConfig)


@dataclass
class FabricConfig:
    enabled: bool = True
    mec_servers: int = 2
    mec_capacity: int = 100      # tasks per tick
    latency_local: int = 1
    latency_backhaul: int = 5
    sync_period: int = 10
    epsilon: float = 1.0
    k_anonymity: int = 2
    report_demand: int = 1


@dataclass
class ForecastConfig:
    enabled: bool = True
    order: int = 2
    horizon: int = 10


@dataclass
class RunConfig:
    ticks: int = 100
    decision_epoch: int = 10
    seed: int = 0


@dataclass
class ScenarioConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    epidemic: EpidemicConfig = field(default_factory=EpidemicConfig)
    tracing: TracingConfig = field(default_factory=TracingConfig)
    allocator: AllocatorConfig = field(default_factory=AllocatorConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    fabric: FabricConfig = field(default_factory=FabricConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    run: RunConfig = field(default_factory=RunConfig)


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _check_keys(raw: dict, allowed: set[str], path: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _num(raw: dict, key: str, path: str, default, lo=None, hi=None, integer=False):
    val = raw.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
    if lo is not None:
        _require(val >= lo, f"{path}.{key}", f"must be >= {lo}, got {val}")
    if hi is not None:
        _require(val <= hi, f"{path}.{key}", f"must be <= {hi}, got {val}")
    return int(val) if integer else float(val)


def _flag(raw: dict, key: str, path: str, default: bool) -> bool:
    val = raw.get(key, default)
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected a boolean, got {val!r}")
    return val


def _parse_world(raw: dict) -> WorldConfig:
    _check_keys(raw, {
        "zones", "population", "zone_area_km2", "initial_infected_fraction",
        "initial_exposed_fraction", "move_probability", "jitter_km",
        "contact_radius_km", "healthcare_beds_per_1000", "income_per_capita",
        "zone_overrides",
    }, "world")
    d = WorldConfig()
    cfg = WorldConfig(
        zones=_num(raw, "zones", "world", d.zones, lo=1, integer=True),
        population=_num(raw, "population", "world", d.population, lo=1, integer=True),
        zone_area_km2=_num(raw, "zone_area_km2", "world", d.zone_area_km2, lo=1e-9),
        initial_infected_fraction=_num(raw, "initial_infected_fraction", "world",
                                       d.initial_infected_fraction, lo=0.0, hi=1.0),
        initial_exposed_fraction=_num(raw, "initial_exposed_fraction", "world",
                                      d.initial_exposed_fraction, lo=0.0, hi=1.0),
        move_probability=_num(raw, "move_probability", "world", d.move_probability, lo=0.0, hi=1.0),
        jitter_km=_num(raw, "jitter_km", "world", d.jitter_km, lo=0.0),
        contact_radius_km=_num(raw, "contact_radius_km", "world", d.contact_radius_km, lo=1e-12),
        healthcare_beds_per_1000=_num(raw, "healthcare_beds_per_1000", "world",
                                      d.healthcare_beds_per_1000, lo=0.0),
        income_per_capita=_num(raw, "income_per_capita", "world", d.income_per_capita, lo=0.0),
    )
    total_seed = cfg.initial_infected_fraction + cfg.initial_exposed_fraction
    _require(total_seed <= 1.0, "world.initial_infected_fraction",
             "infected + exposed fractions exceed 1")
    overrides = raw.get("zone_overrides", [])
    _require(isinstance(overrides, list), "world.zone_overrides", "expected a list")
    for i, o in enumerate(overrides):
        path = f"world.zone_overrides[{i}]"
        _require(isinstance(o, dict), path, "expected an object")
        _check_keys(o, {"id", "healthcare_capacity", "accessibility_level",
                        "transit_stops", "income_per_capita"}, path)
        _require("id" in o, path, "missing 'id'")
        zid = _num(o, "id", path, None, lo=0, integer=True)
        _require(zid < cfg.zones, f"{path}.id", f"zone {zid} out of range")
        if "healthcare_capacity" in o:
            _num(o, "healthcare_capacity", path, None, lo=0, integer=True)
        if "accessibility_level" in o:
            _num(o, "accessibility_level", path, None, lo=1, integer=True)
        if "transit_stops" in o:
            _num(o, "transit_stops", path, None, lo=0, integer=True)
        if "income_per_capita" in o:
            _num(o, "income_per_capita", path, None, lo=0.0)
        cfg.zone_overrides.append({k: (int(v) if k != "income_per_capita" else float(v))
                                   for k, v in o.items()})
    return cfg


def _parse_epidemic(raw: dict) -> EpidemicConfig:
    _check_keys(raw, {"r0", "gamma", "sigma", "alpha"}, "epidemic")
    d = EpidemicConfig()
    return EpidemicConfig(
        r0=_num(raw, "r0", "epidemic", d.r0, lo=0.0),
        gamma=_num(raw, "gamma", "epidemic", d.gamma, lo=0.0, hi=1.0),
        sigma=_num(raw, "sigma", "epidemic", d.sigma, lo=0.0, hi=1.0),
        alpha=_num(raw, "alpha", "epidemic", d.alpha, lo=0.0, hi=1.0),
    )


def _parse_radio(raw: dict) -> RadioConfig:
    _check_keys(raw, {"rssi_0", "d_0_km", "path_loss_exponent", "rssi_min",
                      "rssi_max", "key_rotation_ticks"}, "tracing.radio")
    d = RadioConfig()
    cfg = RadioConfig(
        rssi_0=_num(raw, "rssi_0", "tracing.radio", d.rssi_0),
        d_0_km=_num(raw, "d_0_km", "tracing.radio", d.d_0_km, lo=1e-12),
        path_loss_exponent=_num(raw, "path_loss_exponent", "tracing.radio",
                                d.path_loss_exponent, lo=0.0),
        rssi_min=_num(raw, "rssi_min", "tracing.radio", d.rssi_min),
        rssi_max=_num(raw, "rssi_max", "tracing.radio", d.rssi_max),
        key_rotation_ticks=_num(raw, "key_rotation_ticks", "tracing.radio",
                                d.key_rotation_ticks, lo=1, integer=True),
    )
    _require(cfg.rssi_min < cfg.rssi_max, "tracing.radio.rssi_min", "must be below rssi_max")
    return cfg


def _parse_tracing(raw: dict) -> TracingConfig:
    _check_keys(raw, {"enabled", "mode", "threshold", "window", "device_fraction",
                      "consent_probability", "radio"}, "tracing")
    d = TracingConfig()
    mode = raw.get("mode", d.mode)
    _require(mode in ("centralized", "distributed"), "tracing.mode",
             f"must be 'centralized' or 'distributed', got {mode!r}")
    return TracingConfig(
        enabled=_flag(raw, "enabled", "tracing", d.enabled),
        mode=mode,
        threshold=_num(raw, "threshold", "tracing", d.threshold, lo=1e-12),
        window=_num(raw, "window", "tracing", d.window, lo=1, integer=True),
        device_fraction=_num(raw, "device_fraction", "tracing", d.device_fraction, lo=0.0, hi=1.0),
        consent_probability=_num(raw, "consent_probability", "tracing",
                                 d.consent_probability, lo=0.0, hi=1.0),
        radio=_parse_radio(raw.get("radio", {})),
    )


def _parse_coverage(raw: dict) -> CoverageConfig:
    _check_keys(raw, {"baselines", "stop_benefit"}, "allocator.coverage")
    d = CoverageConfig()
    baselines = d.baselines
    if "baselines" in raw:
        _require(isinstance(raw["baselines"], dict), "allocator.coverage.baselines",
                 "expected an object mapping level -> baseline")
        baselines = {}
        for k, v in raw["baselines"].items():
            try:
                level = int(k)
            except (TypeError, ValueError):
                raise ConfigError(f"allocator.coverage.baselines: level {k!r} is not an integer")
            _require(level >= 1, "allocator.coverage.baselines", f"level {level} must be >= 1")
            _require(isinstance(v, (int, float)) and 0.0 <= v <= 1.0,
                     f"allocator.coverage.baselines[{level}]", f"must be in [0,1], got {v!r}")
            baselines[level] = float(v)
    return CoverageConfig(
        baselines=baselines,
        stop_benefit=_num(raw, "stop_benefit", "allocator.coverage", d.stop_benefit, lo=0.0),
    )


def _parse_allocator(raw: dict) -> AllocatorConfig:
    _check_keys(raw, {"enabled", "mode", "tau", "stock", "vaccine_efficacy",
                      "warehouses", "warehouse_stock", "full_distribution",
                      "coverage"}, "allocator")
    d = AllocatorConfig()
    mode = raw.get("mode", d.mode)
    _require(mode in ("susceptible", "density", "infected"), "allocator.mode",
             f"must be susceptible|density|infected, got {mode!r}")
    eff = raw.get("vaccine_efficacy", list(d.vaccine_efficacy))
    _require(isinstance(eff, list) and len(eff) >= 1, "allocator.vaccine_efficacy",
             "expected a non-empty list")
    for i, r in enumerate(eff):
        _require(isinstance(r, (int, float)) and 0.0 <= r <= 1.0,
                 f"allocator.vaccine_efficacy[{i}]", f"must be in [0,1], got {r!r}")
    return AllocatorConfig(
        enabled=_flag(raw, "enabled", "allocator", d.enabled),
        mode=mode,
        tau=_num(raw, "tau", "allocator", d.tau, lo=0.0, hi=1.0),
        stock=_num(raw, "stock", "allocator", d.stock, lo=0.0),
        vaccine_efficacy=[float(r) for r in eff],
        warehouses=_num(raw, "warehouses", "allocator", d.warehouses, lo=1, integer=True),
        warehouse_stock=_num(raw, "warehouse_stock", "allocator", d.warehouse_stock, lo=0.0),
        full_distribution=_flag(raw, "full_distribution", "allocator", d.full_distribution),
        coverage=_parse_coverage(raw.get("coverage", {})),
    )


def _parse_welfare(raw: dict) -> WelfareConfig:
    _check_keys(raw, {"discount_rate", "vaccine_probability", "victim_income",
                      "death_rate"}, "policy.welfare")
    d = WelfareConfig()
    return WelfareConfig(
        discount_rate=_num(raw, "discount_rate", "policy.welfare", d.discount_rate, lo=1e-12),
        vaccine_probability=_num(raw, "vaccine_probability", "policy.welfare",
                                 d.vaccine_probability, lo=0.0),
        victim_income=_num(raw, "victim_income", "policy.welfare", d.victim_income, lo=0.0),
        death_rate=_num(raw, "death_rate", "policy.welfare", d.death_rate, lo=0.0),
    )


def _parse_policy(raw: dict) -> PolicyConfig:
    _check_keys(raw, {"enabled", "theta_moderate", "theta_hard",
                      "hospitalization_fraction", "cp_moderate", "cp_hard",
                      "welfare"}, "policy")
    d = PolicyConfig()
    cfg = PolicyConfig(
        enabled=_flag(raw, "enabled", "policy", d.enabled),
        theta_moderate=_num(raw, "theta_moderate", "policy", d.theta_moderate, lo=1e-12),
        theta_hard=_num(raw, "theta_hard", "policy", d.theta_hard, lo=1e-12),
        hospitalization_fraction=_num(raw, "hospitalization_fraction", "policy",
                                      d.hospitalization_fraction, lo=0.0, hi=1.0),
        cp_moderate=_num(raw, "cp_moderate", "policy", d.cp_moderate, lo=0.0, hi=1.0),
        cp_hard=_num(raw, "cp_hard", "policy", d.cp_hard, lo=0.0, hi=1.0),
        welfare=_parse_welfare(raw.get("welfare", {})),
    )
    _require(cfg.theta_moderate < cfg.theta_hard, "policy.theta_moderate",
             "must be below policy.theta_hard")
    return cfg


def _parse_fabric(raw: dict) -> FabricConfig:
    _check_keys(raw, {"enabled", "mec_servers", "mec_capacity", "latency_local",
                      "latency_backhaul", "sync_period", "epsilon", "k_anonymity",
                      "report_demand"}, "fabric")
    d = FabricConfig()
    return FabricConfig(
        enabled=_flag(raw, "enabled", "fabric", d.enabled),
        mec_servers=_num(raw, "mec_servers", "fabric", d.mec_servers, lo=1, integer=True),
        mec_capacity=_num(raw, "mec_capacity", "fabric", d.mec_capacity, lo=1, integer=True),
        latency_local=_num(raw, "latency_local", "fabric", d.latency_local, lo=0, integer=True),
        latency_backhaul=_num(raw, "latency_backhaul", "fabric", d.latency_backhaul,
                              lo=0, integer=True),
        sync_period=_num(raw, "sync_period", "fabric", d.sync_period, lo=1, integer=True),
        epsilon=_num(raw, "epsilon", "fabric", d.epsilon, lo=1e-12),
        k_anonymity=_num(raw, "k_anonymity", "fabric", d.k_anonymity, lo=1, integer=True),
        report_demand=_num(raw, "report_demand", "fabric", d.report_demand, lo=1, integer=True),
    )


def _parse_forecast(raw: dict) -> ForecastConfig:
    _check_keys(raw, {"enabled", "order", "horizon"}, "forecast")
    d = ForecastConfig()
    return ForecastConfig(
        enabled=_flag(raw, "enabled", "forecast", d.enabled),
        order=_num(raw, "order", "forecast", d.order, lo=1, integer=True),
        horizon=_num(raw, "horizon", "forecast", d.horizon, lo=1, integer=True),
    )


def _parse_run(raw: dict) -> RunConfig:
    _check_keys(raw, {"ticks", "decision_epoch", "seed"}, "run")
    d = RunConfig()
    return RunConfig(
        ticks=_num(raw, "ticks", "run", d.ticks, lo=0, integer=True),
        decision_epoch=_num(raw, "decision_epoch", "run", d.decision_epoch, lo=1, integer=True),
        seed=_num(raw, "seed", "run", d.seed, integer=True),
    )


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a raw JSON object into a :class:`ScenarioConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    _check_keys(raw, {"world", "epidemic", "tracing", "allocator", "policy",
                      "fabric", "forecast", "run"}, "config")
    for section in raw:
        _require(isinstance(raw[section], dict), section, "expected an object")
    cfg = ScenarioConfig(
        world=_parse_world(raw.get("world", {})),
        epidemic=_parse_epidemic(raw.get("epidemic", {})),
        tracing=_parse_tracing(raw.get("tracing", {})),
        allocator=_parse_allocator(raw.get("allocator", {})),
        policy=_parse_policy(raw.get("policy", {})),
        fabric=_parse_fabric(raw.get("fabric", {})),
        forecast=_parse_forecast(raw.get("forecast", {})),
        run=_parse_run(raw.get("run", {})),
    )
    seeded = cfg.world.initial_infected_fraction * cfg.world.population
    _require(seeded <= cfg.world.population, "world.initial_infected_fraction",
             "initial infected exceed population")
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario config from a JSON file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
