"""Contact-tracing protocols over simulated radio encounters.

Two architectures share one encounter substrate:

* centralized: devices register up front, record encounters locally, and a
  positive device uploads its encounter log; the server resolves the peer
  tokens, scores exposure, and notifies the flagged devices.
* distributed: no registration; devices broadcast rotating pseudo-random
  keys and record what they hear. A positive device uploads only its own
  keys, the server re-advertises them, and every device scores its own log
  locally.

Because encounters are written symmetrically with the same signal
strength, both architectures flag exactly the same devices for the same
threshold and window - the protocol-equivalence property the test suite
pins down.

The radio is a log-distance path-loss model: rssi(d) = rssi_0 -
10 * n * log10(d / d_0), clamped to rssi_0 inside the reference distance
and dropped entirely below the cutoff rssi_min.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

MessageKind = str  # registration | encounter_upload | key_upload | advertisement | exposure_notice

DEVICE_TO_SERVER = ("registration", "encounter_upload", "key_upload")
SERVER_TO_DEVICE = ("advertisement", "exposure_notice")


class TracingError(ValueError):
    pass


@dataclass
class RadioModel:
    rssi_0: float = -40.0
    d_0_km: float = 0.001
    path_loss_exponent: float = 2.0
    rssi_min: float = -90.0
    rssi_max: float = -40.0

    def rssi_at(self, distance_km: float) -> float:
        d = max(distance_km, self.d_0_km)
        return self.rssi_0 - 10.0 * self.path_loss_exponent * math.log10(d / self.d_0_km)

    def in_range(self, distance_km: float) -> bool:
        return self.rssi_at(distance_km) >= self.rssi_min

    def proximity_weight(self, rssi: float) -> float:
        w = (rssi - self.rssi_min) / (self.rssi_max - self.rssi_min)
        return min(1.0, max(0.0, w))


@dataclass
class EncounterRecord:
    peer_token: str          # the peer's rotating key at encounter time
    tick: int
    rssi: float
    duration: int = 1


@dataclass
class TraceMessage:
    kind: MessageKind
    payload: dict
    sender: str
    tick: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sender": self.sender, "tick": self.tick,
                "payload": self.payload}


@dataclass
class RiskScore:
    device: str
    score: float
    flagged: bool


@dataclass
class DeviceState:
    id: str
    consent: bool = True
    log: deque = field(default_factory=deque)

    def key_for(self, window: int) -> str:
        """Rotating pseudo-random identifier for one key window."""
        digest = hashlib.sha256(f"{self.id}:{window}".encode()).hexdigest()
        return digest[:16]


@dataclass
class ReportOutcome:
    messages: list[TraceMessage]
    scores: list[RiskScore]
    flagged: set[str]
    refused: bool = False


class TracingSession:
    """One tracing deployment: a set of devices plus the (simulated) server."""

    def __init__(self, mode: str, radio: RadioModel | None = None,
                 threshold: float = 3.0, window: int = 30,
                 key_rotation_ticks: int = 15):
        if mode not in ("centralized", "distributed"):
            raise TracingError(f"mode must be centralized or distributed, got {mode!r}")
        if threshold <= 0:
            raise TracingError(f"threshold must be positive, got {threshold}")
        if window < 1:
            raise TracingError(f"window must be >= 1, got {window}")
        self.mode = mode
        self.radio = radio or RadioModel()
        self.threshold = threshold
        self.window = window
        self.key_rotation_ticks = key_rotation_ticks
        self.devices: dict[str, DeviceState] = {}
        self.messages: list[TraceMessage] = []
        self.events: list[dict] = []

    # -- device lifecycle ------------------------------------------------

    def register(self, device_id: str, consent: bool = True, tick: int = 0) -> DeviceState:
        if device_id in self.devices:
            return self.devices[device_id]
        dev = DeviceState(id=device_id, consent=consent)
        self.devices[device_id] = dev
        if self.mode == "centralized":
            # registration deposits the token schedule with the server,
            # standing in for server-issued rotating identifiers
            self.messages.append(TraceMessage(
                kind="registration", payload={"device": device_id},
                sender=device_id, tick=tick))
        return dev

    def _key_window(self, tick: int) -> int:
        return tick // self.key_rotation_ticks

    def token_owner(self, token: str, tick: int) -> str | None:
        """Server-side token resolution; only meaningful in centralized mode."""
        window = self._key_window(tick)
        for dev in self.devices.values():
            if dev.key_for(window) == token:
                return dev.id
        return None

    # -- encounter substrate ----------------------------------------------

    def record_encounter(self, a: str, b: str, tick: int, distance_km: float) -> bool:
        """Append symmetric encounter records; no-op beyond radio range."""
        if a == b:
            raise TracingError("a device cannot encounter itself")
        if a not in self.devices or b not in self.devices:
            raise TracingError("both devices must be registered with the session")
        if not self.radio.in_range(distance_km):
            return False
        rssi = self.radio.rssi_at(distance_km)
        window = self._key_window(tick)
        dev_a, dev_b = self.devices[a], self.devices[b]
        dev_a.log.append(EncounterRecord(dev_b.key_for(window), tick, rssi))
        dev_b.log.append(EncounterRecord(dev_a.key_for(window), tick, rssi))
        return True

    def prune_logs(self, now: int) -> None:
        """Drop records that can no longer fall inside any report window."""
        horizon = now - self.window
        for dev in self.devices.values():
            while dev.log and dev.log[0].tick < horizon:
                dev.log.popleft()

    # -- reporting and risk -------------------------------------------------

    def _in_window(self, record_tick: int, report_tick: int) -> bool:
        return report_tick - self.window < record_tick <= report_tick

    def report_positive(self, device_id: str, tick: int) -> ReportOutcome:
        """Run the full report protocol for one positive device."""
        dev = self.devices.get(device_id)
        if dev is None:
            raise TracingError(f"unknown device {device_id!r}")
        if not dev.consent:
            self.events.append({"event": "report_refused", "device": device_id,
                                "tick": tick})
            return ReportOutcome([], [], set(), refused=True)

        produced: list[TraceMessage] = []
        if self.mode == "centralized":
            records = [r for r in dev.log if self._in_window(r.tick, tick)]
            produced.append(TraceMessage(
                kind="encounter_upload",
                payload={"records": [
                    {"peer_token": r.peer_token, "tick": r.tick,
                     "rssi": r.rssi, "duration": r.duration} for r in records]},
                sender=device_id, tick=tick))
            scores = self._assess_centralized(records, device_id, tick)
            for s in scores:
                if s.flagged:
                    produced.append(TraceMessage(
                        kind="exposure_notice", payload={"device": s.device},
                        sender="server", tick=tick))
        else:
            windows = sorted({self._key_window(t) for t in
                              range(max(0, tick - self.window + 1), tick + 1)})
            keys = [dev.key_for(w) for w in windows]
            produced.append(TraceMessage(
                kind="key_upload", payload={"keys": keys},
                sender=device_id, tick=tick))
            produced.append(TraceMessage(
                kind="advertisement", payload={"keys": keys},
                sender="server", tick=tick))
            scores = self._assess_distributed(keys, device_id, tick)

        self.messages.extend(produced)
        flagged = {s.device for s in scores if s.flagged}
        return ReportOutcome(produced, scores, flagged)

    def _score(self, records: Iterable[EncounterRecord]) -> float:
        return sum(r.duration * self.radio.proximity_weight(r.rssi) for r in records)

    def _assess_centralized(self, records: list[EncounterRecord],
                            reporter: str, tick: int) -> list[RiskScore]:
        """Server-side: resolve the reporter's peer tokens and score them."""
        per_device: dict[str, list[EncounterRecord]] = {}
        for r in records:
            owner = self.token_owner(r.peer_token, r.tick)
            if owner is None or owner == reporter:
                continue
            per_device.setdefault(owner, []).append(r)
        return self._finalize_scores(per_device, reporter)

    def _assess_distributed(self, advertised_keys: list[str],
                            reporter: str, tick: int) -> list[RiskScore]:
        """Device-side: every device matches the advertised keys locally."""
        keys = set(advertised_keys)
        per_device: dict[str, list[EncounterRecord]] = {}
        for dev in self.devices.values():
            if dev.id == reporter:
                continue
            matches = [r for r in dev.log
                       if r.peer_token in keys and self._in_window(r.tick, tick)]
            if matches:
                per_device[dev.id] = matches
        return self._finalize_scores(per_device, reporter)

    def _finalize_scores(self, per_device: dict[str, list[EncounterRecord]],
                         reporter: str) -> list[RiskScore]:
        scores = []
        for device_id in sorted(per_device):
            s = self._score(per_device[device_id])
            scores.append(RiskScore(device=device_id, score=s,
                                    flagged=s >= self.threshold))
        return scores

    # -- audit ---------------------------------------------------------------

    def message_dicts(self) -> list[dict]:
        return [m.to_dict() for m in self.messages]


def assess_risk(session: TracingSession, reporter: str, tick: int) -> list[RiskScore]:
    """Score exposure for one report without emitting protocol messages.

    Centralized mode scores at the server over the reporter's uploaded
    records; distributed mode scores on each device against the
    reporter's advertised keys. Same threshold, same window, same radio:
    the flagged sets agree across modes.
    """
    dev = session.devices.get(reporter)
    if dev is None:
        raise TracingError(f"unknown device {reporter!r}")
    if session.mode == "centralized":
        records = [r for r in dev.log if session._in_window(r.tick, tick)]
        return session._assess_centralized(records, reporter, tick)
    windows = sorted({session._key_window(t) for t in
                      range(max(0, tick - session.window + 1), tick + 1)})
    keys = [dev.key_for(w) for w in windows]
    return session._assess_distributed(keys, reporter, tick)
