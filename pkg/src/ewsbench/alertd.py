"""Streaming alert daemon.

Reads newline-delimited JSON events, keeps a short observation buffer per
encounter, rebuilds the encounter's five-timestamp window on every
observation and scores it with a saved model plus MEWS and NEWS2.

Events::

    {"type": "register", "encounter_id": "E1", "hospital_id": "H1", "age": 71,
     "sex": "female", "ward": "W2", "department": "clinical",
     "admission_time": "2019-03-01T08:00"}
    {"encounter_id": "E1", "ts": "2019-03-02T14:00", "measure": "heart_rate", "value": 118}
    {"encounter_id": "E1", "ts": "2019-03-02T20:00",
     "vitals": {"heart_rate": 204, "systolic_bp": 47}}

The last form delivers one collection bundle, scored once with all of its
values in place.

Live windows are anchored at the observation time with no gap. The twelve
hour gap used when building training windows only exists to keep the
outcome out of the features; delaying a live alert by it would serve no
purpose. Cells still empty after forward filling take the training medians
shipped in the model file.

An alert fires when the model score crosses the model threshold upward or a
protocol flag turns on, unless an alert with the same dedup key was emitted
within the cooldown. Alerts go to standard output, malformed events to
standard error, both as NDJSON.
"""
import argparse
import asyncio
import json
import sys
import threading
from bisect import insort
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from . import ews
from .explain import explain_alert
from .ingest import Encounter, Observation, VitalKind, parse_timestamp
from .models.spec import load_model
from .windowing import N_SLOTS, SEX_CODES, Encoders, TimeGrid, make_window, window_row, \
    vital_columns, static_columns

LIVE_STEP = timedelta(hours=6)
LIVE_GAP = timedelta(0)
BUFFER_SPAN = timedelta(hours=48)
DEFAULT_COOLDOWN = timedelta(hours=6)
_SEX = {"f": "female", "female": "female", "m": "male", "male": "male"}
_ALL_COLUMNS = [c.name for c in vital_columns() + static_columns()]


class EventError(ValueError):
    pass


@dataclass
class EncounterState:
    encounter_id: str
    hospital_id: str
    age: float
    sex: str
    ward: str
    department: str
    admission_time: datetime
    buffer: list = field(default_factory=list)  # Observation, time ordered
    above: bool = False
    flags: dict = field(default_factory=lambda: {ews.MEWS: False, ews.NEWS2: False})
    last_alert: dict = field(default_factory=dict)  # dedup key -> event time
    latest: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def as_encounter(self, anchor):
        return Encounter(self.encounter_id, self.hospital_id, self.age, self.sex, self.ward,
                         self.department, self.admission_time, anchor, False,
                         tuple(self.buffer))


@dataclass
class AlertEvent:
    encounter_id: str
    wall_time: str
    event_time: str
    ml_score: float
    threshold: float
    mews_total: int | None
    mews_flag: bool
    news2_total: int | None
    news2_flag: bool
    triggers: list
    explanation: dict
    dedup_key: str

    def to_dict(self):
        return {
            "encounter_id": self.encounter_id, "wall_time": self.wall_time,
            "event_time": self.event_time, "ml_score": self.ml_score,
            "threshold": self.threshold,
            "mews": {"total": self.mews_total, "flag": self.mews_flag},
            "news2": {"total": self.news2_total, "flag": self.news2_flag},
            "triggers": list(self.triggers), "explanation": self.explanation,
            "dedup_key": self.dedup_key,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _iso(ts):
    return ts.strftime("%Y-%m-%dT%H:%M")


def live_window(state, anchor, max_fill=2):
    """The five-slot window of ``state`` ending at ``anchor`` (gap 0)."""
    grid = TimeGrid(anchor, LIVE_STEP, LIVE_GAP)
    window, _ = make_window(state.as_encounter(anchor), grid, max_fill)
    return window


def live_row(model, window):
    """Feature row for ``model`` from a live window; empty cells take model medians."""
    encoders = Encoders.from_dict(model.encoders) if model.encoders else None
    if encoders is None:
        raise ValueError("model file carries no category encoders")
    full = window_row(window, encoders)
    pos = {name: i for i, name in enumerate(_ALL_COLUMNS)}
    row = full[[pos[c.name] for c in model.columns]]
    missing = np.isnan(row)
    row[missing] = np.asarray(model.medians, dtype=float)[missing]
    return row


def protocol_scores(window):
    """(MEWS result or None, NEWS2 result or None) at the latest slot."""
    vitals = window.vitals_at(N_SLOTS - 1)
    out = []
    for protocol in ews.PROTOCOLS:
        try:
            out.append(ews.score(protocol, vitals))
        except ews.ScoringError:
            out.append(None)
    return tuple(out)


class StateStore:
    """Per-encounter state; updates to one encounter are serialised by its lock."""

    def __init__(self, model, threshold=None, cooldown=DEFAULT_COOLDOWN, clock=None,
                 top_k=3):
        self.model = model
        self.threshold = float(model.threshold if threshold is None else threshold)
        self.cooldown = cooldown
        self.clock = clock  # None: report event time as wall time (replay)
        self.top_k = top_k
        self._states = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._states)

    def get(self, encounter_id):
        return self._states.get(encounter_id)

    def register(self, event):
        try:
            eid = str(event["encounter_id"]).strip()
            sex = _SEX.get(str(event["sex"]).strip().lower())
            if sex is None or sex not in SEX_CODES:
                raise EventError(f"unknown sex {event['sex']!r}")
            state = EncounterState(
                eid, str(event.get("hospital_id", "")), float(event["age"]), sex,
                str(event["ward"]), str(event["department"]),
                parse_timestamp(str(event["admission_time"])),
            )
        except KeyError as exc:
            raise EventError(f"registration missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise EventError(f"bad registration: {exc}") from None
        if not eid:
            raise EventError("empty encounter id")
        with self._lock:
            if eid in self._states:
                raise EventError(f"encounter {eid!r} already registered")
            self._states[eid] = state
        return state

    def _parse_observations(self, event):
        try:
            eid = str(event["encounter_id"]).strip()
            ts = parse_timestamp(str(event["ts"]))
            if "vitals" in event:
                if not isinstance(event["vitals"], dict) or not event["vitals"]:
                    raise EventError("vitals must be a non-empty object")
                items = list(event["vitals"].items())
            else:
                items = [(event["measure"], event["value"])]
            obs = [Observation(eid, ts, VitalKind.parse(str(m)), float(v)) for m, v in items]
        except KeyError as exc:
            raise EventError(f"observation missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, EventError):
                raise
            raise EventError(f"bad observation: {exc}") from None
        if not all(np.isfinite(o.value) for o in obs):
            raise EventError("non-finite value")
        return obs

    def score_state(self, state, anchor):
        """(ml score, window, feature row, MEWS, NEWS2) for the buffer ending at ``anchor``."""
        window = live_window(state, anchor)
        row = live_row(self.model, window)
        score = float(self.model.score_array(row[None, :])[0])
        mews, news2 = protocol_scores(window)
        return score, window, row, mews, news2

    def ingest_event(self, event):
        """Apply one decoded event; returns an :class:`AlertEvent` or None.

        Raises :class:`EventError` for malformed events without touching state.
        """
        if not isinstance(event, dict):
            raise EventError("event must be a JSON object")
        if event.get("type") == "register":
            self.register(event)
            return None
        if event.get("type", "observation") != "observation":
            raise EventError(f"unknown event type {event.get('type')!r}")
        obs = self._parse_observations(event)
        eid = obs[0].encounter_id
        state = self._states.get(eid)
        if state is None:
            raise EventError(f"encounter {eid!r} not registered")
        with state.lock:
            return self._update(state, obs)

    def _update(self, state, obs):
        for ob in obs:
            insort(state.buffer, ob, key=lambda o: (o.timestamp, o.kind.value))
        newest = state.buffer[-1].timestamp
        horizon = newest - BUFFER_SPAN
        while state.buffer and state.buffer[0].timestamp < horizon:
            state.buffer.pop(0)
        anchor = newest
        score, _, row, mews, news2 = self.score_state(state, anchor)

        above = score > self.threshold
        flags = {ews.MEWS: bool(mews and mews.alert), ews.NEWS2: bool(news2 and news2.alert)}
        triggers = []
        if above and not state.above:
            triggers.append("ml")
        for protocol in ews.PROTOCOLS:
            if flags[protocol] and not state.flags[protocol]:
                triggers.append(protocol.lower())
        state.above = above
        state.flags = flags
        state.latest = {"time": _iso(anchor), "ml_score": score,
                        "mews": mews.total if mews else None,
                        "news2": news2.total if news2 else None,
                        "last_alert": state.latest["last_alert"] if state.latest else None}
        if not triggers:
            return None
        key = f"{state.encounter_id}:up"
        last = state.last_alert.get(key)
        if last is not None and anchor - last < self.cooldown:
            return None
        state.last_alert[key] = anchor
        state.latest["last_alert"] = _iso(anchor)
        expl = explain_alert(self.model, row, state.encounter_id, top_k=self.top_k)
        wall = _iso(anchor) if self.clock is None else _iso(self.clock())
        return AlertEvent(state.encounter_id, wall, _iso(anchor), score, self.threshold,
                          mews.total if mews else None, flags[ews.MEWS],
                          news2.total if news2 else None, flags[ews.NEWS2], triggers,
                          expl.to_dict(), key)

    def snapshot(self):
        """Point-in-time census of every encounter that has been scored."""
        with self._lock:
            states = sorted(self._states.values(), key=lambda s: s.encounter_id)
        for s in states:
            s.lock.acquire()
        try:
            census = {s.encounter_id: dict(s.latest) for s in states if s.latest is not None}
        finally:
            for s in states:
                s.lock.release()
        return {"encounters": census, "count": len(census)}


def process_line(store, line, lineno=0):
    """Decode and apply one NDJSON line -> (alert or None, error record or None)."""
    text = line.strip()
    if not text:
        return None, None
    try:
        event = json.loads(text)
        return store.ingest_event(event), None
    except json.JSONDecodeError as exc:
        return None, {"line": lineno, "error": f"invalid JSON: {exc.msg}", "raw": text}
    except EventError as exc:
        return None, {"line": lineno, "error": str(exc), "raw": text}


def replay(store, lines, alerts_out=None, errors_out=None):
    """Feed ``lines`` in order; returns the list of alerts emitted."""
    alerts = []
    for no, line in enumerate(lines, 1):
        alert, err = process_line(store, line, no)
        if err is not None and errors_out is not None:
            errors_out.write(json.dumps(err, sort_keys=True) + "\n")
        if alert is not None:
            alerts.append(alert)
            if alerts_out is not None:
                alerts_out.write(alert.to_json() + "\n")
                alerts_out.flush()
    return alerts


def _is_snapshot_request(text):
    try:
        event = json.loads(text)
    except json.JSONDecodeError:
        return False
    return isinstance(event, dict) and event.get("type") == "snapshot"


async def serve(store, host, port, alerts_out=sys.stdout, errors_out=sys.stderr, ready=None):
    """Accept NDJSON over TCP; each connection's lines are applied in order.

    A line ``{"type": "snapshot"}`` answers with the census on that connection.
    """

    async def handle(reader, writer):
        no = 0
        while True:
            raw = await reader.readline()
            if not raw:
                break
            no += 1
            text = raw.decode("utf-8", errors="replace")
            if _is_snapshot_request(text):
                writer.write((json.dumps(store.snapshot(), sort_keys=True) + "\n").encode())
                await writer.drain()
                continue
            alert, err = process_line(store, text, no)
            if err is not None:
                errors_out.write(json.dumps(err, sort_keys=True) + "\n")
                errors_out.flush()
            if alert is not None:
                alerts_out.write(alert.to_json() + "\n")
                alerts_out.flush()
        writer.close()

    server = await asyncio.start_server(handle, host, port)
    if ready is not None:
        ready(server)
    async with server:
        await server.serve_forever()


def _address(text):
    host, _, port = text.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}") from None


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ews-alertd", description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True, help="model file written by ews-bench train")
    parser.add_argument("--listen", type=_address, help="HOST:PORT to accept events on")
    parser.add_argument("--replay", help="NDJSON event log to replay ('-' for standard input)")
    parser.add_argument("--threshold", type=float, help="override the model's alert threshold")
    parser.add_argument("--cooldown-hours", type=float, default=6.0)
    parser.add_argument("--snapshot", action="store_true",
                        help="print the census to standard error after a replay")
    args = parser.parse_args(argv)
    try:
        model = load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load model: {exc}", file=sys.stderr)
        return 1
    cooldown = timedelta(hours=args.cooldown_hours)
    if args.listen:
        store = StateStore(model, args.threshold, cooldown,
                           clock=lambda: datetime.now(timezone.utc).replace(tzinfo=None))
        try:
            asyncio.run(serve(store, *args.listen))
        except KeyboardInterrupt:
            pass
        return 0
    store = StateStore(model, args.threshold, cooldown)
    if args.replay and args.replay != "-":
        with open(args.replay, encoding="utf-8") as fh:
            replay(store, fh, sys.stdout, sys.stderr)
    else:
        replay(store, sys.stdin, sys.stdout, sys.stderr)
    if args.snapshot:
        print(json.dumps(store.snapshot(), sort_keys=True), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
