#!/usr/bin/env python3
"""Record a replay session into a snapshot fixture for the dashboard tests.

Feeds a scripted scenario (three episodes, the second with calibration
drift, so one NegativeAmount flag) through the live monitor and captures
snapshots at the interesting moments: session start, 12 s into the first
episode (the duration-gauge reference point), each episode completion, and
the final state.  The expected session totals are computed here from the
monitor's own episode list so the dashboard tests can check against them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from susbp.eventlog import NormativeSpec  # noqa: E402
from susbp.monitor import LiveMonitor, SessionConfig, parse_feed_line  # noqa: E402
from susbp.simulate import (  # noqa: E402
    CalibrationJump,
    EpisodeScript,
    ScenarioScript,
    generate,
)

SCRIPT = ScenarioScript(
    episodes=(
        EpisodeScript(start_offset_s=25.0, duration_s=35.0, dispensed_g=3.4, case_ref="run-1"),
        EpisodeScript(start_offset_s=90.0, duration_s=20.0, dispensed_g=0.5, case_ref="run-2"),
        EpisodeScript(
            start_offset_s=150.0, duration_s=32.0, dispensed_g=3.9,
            press_profile="triple", case_ref="run-3",
        ),
    ),
    calibration_jumps=(CalibrationJump(at_offset_s=100.0, delta_g=2.0),),
    sample_period_s=0.1,
    noise_std_g=0.0,
    step_events=(
        (5.0, "Welcome donor and review eligibility"),
        (15.0, "Verify identity and consent"),
        (62.0, "Hand hygiene"),
    ),
)


def main() -> None:
    spec = NormativeSpec.from_json(
        json.loads((ROOT / "data" / "normative" / "phlebotomy_spec.json").read_text())
    )
    config = SessionConfig(normative=spec, bottle_capacity_g=400.0, session_id="fixture-1")
    engine = LiveMonitor(config)
    sim = generate(SCRIPT)

    first_start_ms = sim.truth_episodes[0].start_ms
    capture_at = first_start_ms + 12_000  # running_duration_s == 12.0 moment

    snapshots = [engine.snapshot()]
    completed_seen = 0
    captured_mid = False
    for line in sim.to_jsonl().splitlines():
        engine._apply(parse_feed_line(line))
        if not captured_mid and engine.state().last_update_ms == capture_at:
            snapshots.append(engine.snapshot())
            captured_mid = engine.snapshot()["running_duration_s"] == 12.0
        completed = len(engine.completed_episodes)
        if completed != completed_seen:
            completed_seen = completed
            snapshots.append(engine.snapshot())
    engine.finish()
    final_state = engine.snapshot()
    snapshots.append(final_state)

    episodes = engine.completed_episodes
    clean = [e for e in episodes if "NegativeAmount" not in e.quality]
    fixture = {
        "snapshots": snapshots,
        "final_state": final_state,
        "expected": {
            "episode_count": len(episodes),
            "flagged_count": len(episodes) - len(clean),
            "session_ml_total": sum(e.amount_ml for e in clean),
            "density_g_per_ml": config.detection.density_g_per_ml,
            "mid_episode_duration_s": 12.0,
            "duration_gauge_fraction": 12.0 / config.thresholds.min_duration_s,
        },
    }
    assert captured_mid, "fixture must include the 12 s mid-episode snapshot"
    assert fixture["expected"]["flagged_count"] == 1

    out = ROOT / "frontend" / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    (out / "session.json").write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {out / 'session.json'} with {len(snapshots)} snapshots")


if __name__ == "__main__":
    main()
