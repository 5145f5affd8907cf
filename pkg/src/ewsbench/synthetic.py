"""Deterministic synthetic ward cohort in the two-table input format.

Used by the tests and as a stand-in when the public sample is not on disk.
Deaths follow a logistic risk in age, ward, department and hospital. Dying
patients drift away from their baseline vitals over the final days of the
stay, while a share of survivors carry chronically abnormal baselines, so a
single-timestamp protocol sees many false alarms that history can resolve.
"""
from datetime import datetime, timedelta

import numpy as np

from .ingest import Encounter, Observation, VitalKind

HOSPITAL_SHARES = {"H1": 0.136, "H2": 0.232, "H3": 0.141, "H4": 0.163, "H5": 0.054,
                   "H6": 0.274}
WARDS = {"W1": 0.0, "W2": 0.2, "W3": -0.3, "W4": 0.5, "W5": 0.9, "W6": -0.6}
DEPARTMENTS = {"clinical": 0.3, "surgical": -0.4, "oncology": 0.8, "pediatrics": -1.0,
               "obstetrics": -1.5}

# baseline mean, between-patient sd, measurement noise sd, drift at full deterioration
VITAL_MODEL = {
    VitalKind.HEART_RATE: (80.0, 9.0, 5.0, 38.0),
    VitalKind.SYSTOLIC_BP: (124.0, 12.0, 7.0, -38.0),
    VitalKind.DIASTOLIC_BP: (76.0, 8.0, 5.0, -20.0),
    VitalKind.RESPIRATORY_RATE: (17.0, 1.8, 1.2, 9.0),
    VitalKind.OXYGEN_SATURATION: (96.8, 1.2, 0.8, -7.0),
    VitalKind.TEMPERATURE: (36.7, 0.3, 0.25, 1.3),
    VitalKind.BLOOD_GLUCOSE: (115.0, 25.0, 12.0, 45.0),
}
# chronic abnormal baselines seen in survivors (offset added to the baseline)
CHRONIC = {
    VitalKind.HEART_RATE: 28.0,
    VitalKind.SYSTOLIC_BP: -30.0,
    VitalKind.RESPIRATORY_RATE: 7.0,
    VitalKind.OXYGEN_SATURATION: -5.0,
    VitalKind.TEMPERATURE: 1.2,
}
# share of dying patients whose drift runs the other way (hypothermia, bradycardia)
REVERSED_DRIFT = {VitalKind.TEMPERATURE: 0.35, VitalKind.HEART_RATE: 0.2}
MEASURE_PROB = {VitalKind.BLOOD_GLUCOSE: 0.45, VitalKind.DIASTOLIC_BP: 0.85}


def _clip(kind, v):
    if kind is VitalKind.OXYGEN_SATURATION:
        return min(v, 100.0)
    return v


def generate_cohort(n_encounters=4000, seed=0, start=datetime(2019, 1, 1),
                    base_logit=-4.1, outlier_rate=0.002, chronic_rate=0.45,
                    episode_rate=0.35, severity=(0.2, 0.9), hospitals=None):
    """Return a list of :class:`Encounter` with observations attached.

    ``severity`` bounds the uniform deterioration level reached at the
    outcome by dying patients; ``chronic_rate`` and ``episode_rate`` set the
    share of survivors with abnormal baselines or transient episodes.
    """
    rng = np.random.default_rng(seed)
    shares = HOSPITAL_SHARES if hospitals is None else hospitals
    h_names = list(shares)
    h_p = np.array([shares[h] for h in h_names])
    h_p = h_p / h_p.sum()
    h_effect = {h: e for h, e in zip(h_names, rng.normal(0.0, 0.25, len(h_names)))}
    wards = list(WARDS)
    depts = list(DEPARTMENTS)

    encounters = []
    for e in range(n_encounters):
        hosp = h_names[rng.choice(len(h_names), p=h_p)]
        dept = depts[rng.choice(len(depts), p=[0.35, 0.25, 0.2, 0.1, 0.1])]
        ward = wards[rng.integers(len(wards))]
        if dept == "pediatrics":
            age = float(rng.integers(0, 18))
        elif dept == "obstetrics":
            age = float(rng.integers(16, 45))
        else:
            age = float(np.clip(rng.normal(58, 18), 18, 100).round())
        sex = "female" if (dept == "obstetrics" or rng.random() < 0.55) else "male"
        frailty = rng.normal(0.0, 0.6)
        logit = (base_logit + 0.045 * (age - 50) + WARDS[ward] + DEPARTMENTS[dept]
                 + h_effect[hosp] + frailty)
        died = bool(rng.random() < 1.0 / (1.0 + np.exp(-logit)))

        los_h = float(np.exp(rng.normal(np.log(70 if died else 60), 0.75)))
        los_h = min(max(los_h, 8.0), 24 * 40)
        admission = start + timedelta(minutes=int(rng.integers(0, 365 * 24 * 60)))
        outcome = admission + timedelta(minutes=int(los_h * 60))

        onset = float(rng.uniform(30, 90)) if died else 0.0
        sev = float(rng.uniform(*severity)) if died else 0.0
        baseline = {k: rng.normal(m, sd) for k, (m, sd, _, _) in VITAL_MODEL.items()}
        sign = {k: (-1.0 if died and rng.random() < REVERSED_DRIFT.get(k, 0.0) else 1.0)
                for k in VITAL_MODEL}
        if not died and rng.random() < chronic_rate:
            chronic_kinds = list(CHRONIC)
            for k in rng.choice(len(chronic_kinds), size=rng.integers(1, 3), replace=False):
                kind = chronic_kinds[k]
                baseline[kind] += CHRONIC[kind] * rng.uniform(0.7, 1.2)
        # non-fatal transient episodes in survivors
        episode = None
        if not died and rng.random() < episode_rate:
            episode = (float(rng.uniform(0, los_h)), float(rng.uniform(6, 18)),
                       float(rng.uniform(0.3, 0.8)))

        eid = f"E{e:06d}"
        obs = []
        t = float(rng.uniform(0, 3))
        while t <= los_h:
            ts = admission + timedelta(minutes=int(t * 60))
            before = los_h - t
            level = sev * min(1.0, max(0.0, (onset - before) / onset)) if died else 0.0
            if episode is not None and episode[0] <= t <= episode[0] + episode[1]:
                level = max(level, episode[2])
            for kind, (_, _, noise, drift) in VITAL_MODEL.items():
                if rng.random() > MEASURE_PROB.get(kind, 0.9):
                    continue
                v = baseline[kind] + sign[kind] * drift * level + rng.normal(0.0, noise)
                v = _clip(kind, v)
                if kind is VitalKind.TEMPERATURE:
                    v = round(v, 1)
                else:
                    v = float(round(v))
                if rng.random() < outlier_rate:
                    v = v * 10.0
                obs.append(Observation(eid, ts, kind, float(v)))
            t += float(rng.uniform(4.5, 7.5))
        encounters.append(Encounter(eid, hosp, age, sex, ward, dept, admission.replace(second=0),
                                    outcome.replace(second=0), died, tuple(obs)))
    return encounters


def event_stream(encounters, max_events=None):
    """Registration and observation events for ``encounters`` in time order.

    Each encounter is registered at its admission time; observations follow
    at their own timestamps. Ties keep registration first, then encounter
    order. Returns a list of dicts ready for NDJSON encoding.
    """
    keyed = []
    for i, enc in enumerate(encounters):
        keyed.append(((enc.admission_time, 0, i, 0), {
            "type": "register", "encounter_id": enc.encounter_id,
            "hospital_id": enc.hospital_id, "age": enc.age, "sex": enc.sex,
            "ward": enc.ward, "department": enc.department,
            "admission_time": enc.admission_time.strftime("%Y-%m-%dT%H:%M"),
        }))
        for j, ob in enumerate(enc.observations):
            keyed.append(((ob.timestamp, 1, i, j), {
                "encounter_id": ob.encounter_id,
                "ts": ob.timestamp.strftime("%Y-%m-%dT%H:%M"),
                "measure": ob.kind.value, "value": ob.value,
            }))
    keyed.sort(key=lambda kv: kv[0])
    events = [e for _, e in keyed]
    return events if max_events is None else events[:max_events]
