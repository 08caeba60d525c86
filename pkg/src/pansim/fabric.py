"""Simulated device/edge/cloud fabric: zone-scoped MEC servers, load-based
offloading to an infinite cloud, handoff with state migration, periodic
cloud sync, and the privacy mechanisms on the reporting path.

Record ownership is strict: a device's records live at exactly one MEC
(plus the cloud once synced), every record is delivered exactly once, and
after every sync the cloud holds a superset of each MEC's store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FabricError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class DeviceRecord:
    """One device report; (device, seq) is unique across the run."""

    device: str
    seq: int
    tick: int
    kind: str = "report"


@dataclass
class FabricMessage:
    source: str                  # device | edge | cloud
    destination: str
    kind: str                    # report | task | recommendation | sync | migration
    size: int
    enqueue_tick: int
    dequeue_tick: int

    def __post_init__(self):
        if self.dequeue_tick < self.enqueue_tick:
            raise FabricError("messages cannot dequeue before they enqueue")


@dataclass
class RoutedTask:
    site: str                    # edge | cloud
    completion_tick: int
    demand: int


class MecServer:
    def __init__(self, server_id: int, covered_zones: list[int],
                 capacity: int, latency_local: int):
        if capacity < 1:
            raise FabricError("MEC capacity must be >= 1")
        self.id = server_id
        self.covered_zones = list(covered_zones)
        self.capacity = capacity
        self.latency_local = latency_local
        self.load = 0
        self.store: dict[str, list[DeviceRecord]] = {}
        self.pending: dict[str, list[DeviceRecord]] = {}

    def reset_load(self) -> None:
        self.load = 0

    def receive_report(self, record: DeviceRecord) -> None:
        self.store.setdefault(record.device, []).append(record)
        self.pending.setdefault(record.device, []).append(record)

    def device_records(self, device: str) -> list[DeviceRecord]:
        return list(self.store.get(device, []))

    def pending_count(self) -> int:
        return sum(len(v) for v in self.pending.values())


class CloudStore:
    def __init__(self, latency_backhaul: int):
        self.latency_backhaul = latency_backhaul
        self.records: dict[str, list[DeviceRecord]] = {}

    def absorb(self, device: str, records: list[DeviceRecord]) -> int:
        if not records:
            return 0
        self.records.setdefault(device, []).extend(records)
        return len(records)

    def device_records(self, device: str) -> list[DeviceRecord]:
        return list(self.records.get(device, []))

    def total_records(self) -> int:
        return sum(len(v) for v in self.records.values())


def route_task(demand: int, tick: int, mec: MecServer, cloud: CloudStore) -> RoutedTask:
    """Threshold offloading: run at the MEC while it has headroom,
    otherwise forward to the cloud and pay the backhaul latency."""
    if demand < 0:
        raise FabricError("task demand must be >= 0")
    if mec.load + demand <= mec.capacity:
        mec.load += demand
        return RoutedTask("edge", tick + mec.latency_local, demand)
    return RoutedTask("cloud", tick + mec.latency_local + cloud.latency_backhaul,
                      demand)


def sync_to_cloud(mec: MecServer, cloud: CloudStore, tick: int) -> int:
    """Push every pending record with tick <= now to the cloud; restores
    the cloud-superset invariant for this MEC."""
    moved = 0
    for device in list(mec.pending):
        ready = [r for r in mec.pending[device] if r.tick <= tick]
        if not ready:
            continue
        moved += cloud.absorb(device, ready)
        left = [r for r in mec.pending[device] if r.tick > tick]
        if left:
            mec.pending[device] = left
        else:
            del mec.pending[device]
    return moved


def handoff(device: str, old_mec: MecServer, new_mec: MecServer,
            cloud: CloudStore, tick: int) -> int:
    """Migrate a device between MEC servers through the cloud.

    The old MEC flushes the device's unsynced records to the cloud and
    forgets it; the new MEC pulls the full cloud history. Returns the
    number of records the new MEC now holds; same-MEC handoff is a no-op.
    """
    if old_mec is new_mec:
        return len(new_mec.store.get(device, []))
    pending = old_mec.pending.pop(device, [])
    cloud.absorb(device, pending)
    old_mec.store.pop(device, None)
    migrated = cloud.device_records(device)
    new_mec.store[device] = list(migrated)
    return len(migrated)


def cloud_superset_violations(mecs: list[MecServer], cloud: CloudStore) -> list[str]:
    """Devices whose synced MEC records are missing from the cloud."""
    bad = []
    for mec in mecs:
        for device, records in mec.store.items():
            pending = {(r.device, r.seq) for r in mec.pending.get(device, [])}
            have = {(r.device, r.seq) for r in cloud.records.get(device, [])}
            for r in records:
                key = (r.device, r.seq)
                if key not in pending and key not in have:
                    bad.append(device)
                    break
    return bad


# -- privacy mechanisms -----------------------------------------------------


def dp_aggregate(counts, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Laplace mechanism for count queries at sensitivity 1.

    Adds Laplace(0, 1/epsilon) noise to each count, then post-processes by
    rounding to the nearest nonnegative integer (post-processing cannot
    weaken the epsilon guarantee).
    """
    if epsilon <= 0:
        raise FabricError(f"epsilon must be positive, got {epsilon}")
    values = np.asarray(counts, dtype=float)
    if (values < 0).any():
        raise FabricError("counts must be nonnegative")
    noisy = values + rng.laplace(0.0, 1.0 / epsilon, size=values.shape)
    return np.maximum(np.rint(noisy), 0.0).astype(np.int64)


def k_anonymize(records: list[dict], k: int, quasi_identifiers: list[str]) -> list[dict]:
    """Suppression-based k-anonymity.

    Groups records by their quasi-identifier tuple and withholds every
    class smaller than k; released records keep their original order.
    """
    if k < 1:
        raise FabricError(f"k must be >= 1, got {k}")
    groups: dict[tuple, int] = {}
    keys = []
    for rec in records:
        key = tuple(rec.get(q) for q in quasi_identifiers)
        keys.append(key)
        groups[key] = groups.get(key, 0) + 1
    return [rec for rec, key in zip(records, keys) if groups[key] >= k]
