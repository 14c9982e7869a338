#!/usr/bin/env python3
"""Generate the bundled demo data deterministically.

Outputs (committed to the repo):
  data/logs/phlebotomy_demo.xes   17-case training log (10 basic, 4 with a
                                  contamination disturbance, 3 two-patient),
                                  hand-hygiene durations crafted so their
                                  mean is exactly 20 s
  data/energy/appliances.jsonl    vendor-format smart-plug rows, 2500 Wh
                                  on-state + off-state rows to exclude
  data/energy/hvac.jsonl          generic rows, 4100 Wh on-state + excluded
  data/energy/stays.json          the stay window covering those streams
  data/surveys/checkin_surveys.csv  122 synthetic guest surveys
  data/schemas/*.json             the built-in device schemas, as JSON
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from susbp.eventlog import Event, EventLog, Trace, write_xes  # noqa: E402
from susbp.sensors.schemas import _DEFAULT_SCHEMAS  # noqa: E402
from susbp.timeutil import format_rfc3339_ms, parse_rfc3339_ms  # noqa: E402

SEQUENCE = [
    "Welcome donor and review eligibility",
    "Verify identity and consent",
    "Hand hygiene",
    "Assess donor and check vitals",
    "Apply tourniquet and select vein",
    "Hand hygiene",
    "Disinfect puncture site",
    "Perform venipuncture",
    "Collect blood samples",
    "Remove needle and apply bandage",
    "Hand hygiene",
    "Label samples and dispose sharps",
    "Review donor condition",
    "Hand hygiene",
    "Complete documentation",
]

STEP_DURATIONS_S = {
    "Welcome donor and review eligibility": 40,
    "Verify identity and consent": 35,
    "Assess donor and check vitals": 50,
    "Apply tourniquet and select vein": 30,
    "Disinfect puncture site": 25,
    "Perform venipuncture": 45,
    "Collect blood samples": 120,
    "Remove needle and apply bandage": 30,
    "Label samples and dispose sharps": 40,
    "Review donor condition": 35,
    "Complete documentation": 60,
}

SCENARIOS = [
    "basic", "basic", "disturbance", "basic", "two-patients",
    "basic", "disturbance", "basic", "basic", "two-patients",
    "basic", "disturbance", "basic", "basic", "two-patients",
    "basic", "disturbance",
]

GAP_S = 5


def hygiene_durations() -> list[int]:
    """84 durations (one per hygiene instance in the log) with an exact
    mean of 20 s: 10*4 basic + 4*5 disturbance + 3*8 two-patient."""
    cycle = [14, 18, 20, 22, 26]
    durations = [cycle[i % 5] for i in range(84)]
    durations[80] = 20  # lift one low value so the total is exactly 84 * 20
    assert sum(durations) == 84 * 20
    return durations


def case_plan(scenario: str) -> list[str]:
    if scenario == "two-patients":
        return SEQUENCE + SEQUENCE
    if scenario == "disturbance":
        cut = SEQUENCE.index("Perform venipuncture")
        return SEQUENCE[:cut] + ["Contamination", "Hand hygiene"] + SEQUENCE[cut:]
    return list(SEQUENCE)


def build_log() -> EventLog:
    day1 = parse_rfc3339_ms("2024-06-18T09:00:00Z")
    day2 = parse_rfc3339_ms("2024-06-19T09:00:00Z")
    hh = iter(hygiene_durations())

    traces = []
    for i, scenario in enumerate(SCENARIOS):
        base = day1 if i < 9 else day2
        cursor = base + (i % 9) * 30 * 60 * 1000
        events = []
        for activity in case_plan(scenario):
            if activity == "Contamination":
                cursor += 3000
                events.append(Event("Contamination", cursor, "complete"))
                cursor += 2000
                continue
            duration = next(hh) if activity == "Hand hygiene" else STEP_DURATIONS_S[activity]
            events.append(Event(activity, cursor, "start"))
            cursor += duration * 1000
            events.append(Event(activity, cursor, "complete"))
            cursor += GAP_S * 1000
        traces.append(
            Trace(
                case_id=f"case-{i + 1:02d}",
                events=tuple(events),
                attributes={"scenario": scenario},
            )
        )
    remaining = list(hh)
    assert not remaining, f"{len(remaining)} hygiene durations left over"
    return EventLog(traces=tuple(traces))


def build_energy() -> tuple[str, str, list[dict]]:
    """Appliance plug at 500 W for 5 h on (20 x 125 Wh intervals) then an
    off hour that must be excluded; HVAC at 820 W for the same 5 h."""
    t0 = parse_rfc3339_ms("2024-07-01T10:00:00Z")
    quarter = 15 * 60 * 1000

    plug_rows = []
    for k in range(0, 29):  # 10:00 .. 17:00
        ts = t0 + k * quarter
        on = k <= 20  # state flips to off at 15:00
        plug_rows.append(
            {
                "device_name": "plug-room-1",
                "timestamp": format_rfc3339_ms(ts),
                "instantaneous_power_w": 500.0 if on else 120.0,
                "device_temperature_c": 31.5,
                "device_state": "on" if on else "off",
                "created_at": format_rfc3339_ms(ts + 250),
                "energy_wh": 0.0 if k == 0 else (125.0 if on else 30.0),
            }
        )

    hvac_rows = []
    for k in range(0, 29):
        ts = format_rfc3339_ms(t0 + k * quarter)
        on = k <= 20
        hvac_rows.append(
            {
                "device_id": "hvac-room-1",
                "timestamp": ts,
                "channel": "device_state",
                "value": on,
                "unit": "on/off",
            }
        )
        hvac_rows.append(
            {
                "device_id": "hvac-room-1",
                "timestamp": ts,
                "channel": "energy_wh",
                "value": 0.0 if k == 0 else (205.0 if on else 45.0),
                "unit": "Wh",
            }
        )

    stays = [
        {
            "start": "2024-07-01T10:00:00Z",
            "end": "2024-07-01T17:00:00Z",
            "n_guests": 2,
            "n_days": 1,
        }
    ]
    plug_text = "\n".join(json.dumps(r) for r in plug_rows) + "\n"
    hvac_text = "\n".join(json.dumps(r) for r in hvac_rows) + "\n"
    return plug_text, hvac_text, stays


def build_surveys() -> str:
    """122 synthetic check-in surveys whose normalized means land on the
    reference aggregates (S'=0.4, F'~0.385, P'~0.375 -> index 0.46)."""
    satisfaction = [3, 4, 5, 4]  # mean 4.0 -> normalized 0.4
    perceived = [3, 4, 4, 4]  # mean 3.75 -> normalized 0.375
    frictions = [0] * 40 + [1] * 40 + [2] * 25 + [3] * 17  # F' = 47/122
    lines = ["case_id,S,F,P"]
    for i in range(122):
        lines.append(
            f"stay-{i + 1:03d},{satisfaction[i % 4]},{frictions[i]},{perceived[i % 4]}"
        )
    return "\n".join(lines) + "\n"


def dump_schemas(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, schema in _DEFAULT_SCHEMAS.items():
        doc = {
            "id": schema.id,
            "device_kind": schema.device_kind,
            "channels": [
                {
                    "name": c.name,
                    "unit": c.unit,
                    "value_type": c.value_type,
                    **({"aggregation": c.aggregation} if c.aggregation else {}),
                }
                for c in schema.channels.values()
            ],
        }
        (out_dir / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")


def main() -> None:
    logs = ROOT / "data" / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    (logs / "phlebotomy_demo.xes").write_text(write_xes(build_log()))

    energy = ROOT / "data" / "energy"
    energy.mkdir(parents=True, exist_ok=True)
    plug_text, hvac_text, stays = build_energy()
    (energy / "appliances.jsonl").write_text(plug_text)
    (energy / "hvac.jsonl").write_text(hvac_text)
    (energy / "stays.json").write_text(json.dumps(stays, indent=2) + "\n")

    surveys = ROOT / "data" / "surveys"
    surveys.mkdir(parents=True, exist_ok=True)
    (surveys / "checkin_surveys.csv").write_text(build_surveys())

    dump_schemas(ROOT / "data" / "schemas")
    print("demo data written under", ROOT / "data")


if __name__ == "__main__":
    main()
