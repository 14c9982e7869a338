"""Shared fixtures: bundled data paths and the detection oracle suite."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from susbp.eventlog import NormativeSpec, parse_xes
from susbp.metamodel import load_model
from susbp.sensors.detect import DetectionParams
from susbp.simulate import CalibrationJump, EpisodeScript, ScenarioScript

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def hotel_model_text() -> str:
    return (DATA / "models" / "hotel.json").read_text()


@pytest.fixture(scope="session")
def hotel_model(hotel_model_text):
    return load_model(hotel_model_text)


@pytest.fixture(scope="session")
def phlebotomy_model():
    return load_model((DATA / "models" / "phlebotomy.json").read_text())


@pytest.fixture(scope="session")
def hotel_bpmn_text() -> str:
    return (DATA / "bpmn" / "hotel_stay.bpmn").read_text()


@pytest.fixture(scope="session")
def blood_bpmn_text() -> str:
    return (DATA / "bpmn" / "blood_donation.bpmn").read_text()


@pytest.fixture(scope="session")
def demo_log():
    return parse_xes((DATA / "logs" / "phlebotomy_demo.xes").read_text())


@pytest.fixture(scope="session")
def normative_spec() -> NormativeSpec:
    return NormativeSpec.from_json(
        json.loads((DATA / "normative" / "phlebotomy_spec.json").read_text())
    )


# ---------------------------------------------------------------------------
# detection oracle suite: 50 frozen scripts, 1-20 episodes, noise up to 1 g.
# Sampling rates and settle windows scale with the noise level, as a real
# deployment would configure them; thresholds stay at the defaults.


def _tier(noise: float) -> dict:
    if noise <= 0.3:
        return dict(sample_period_s=0.02, settle_window_s=4.0, idle_gap_s=8.0, max_episodes=20)
    if noise <= 0.7:
        return dict(sample_period_s=0.01, settle_window_s=6.0, idle_gap_s=8.0, max_episodes=12)
    return dict(sample_period_s=0.01, settle_window_s=12.0, idle_gap_s=14.0, max_episodes=6)


def build_oracle_scripts(count: int = 50) -> list[tuple[ScenarioScript, DetectionParams]]:
    rng = random.Random(20240618)
    suite = []
    for k in range(count):
        if k < 30:
            noise = rng.uniform(0.0, 0.3)
        elif k < 42:
            noise = rng.uniform(0.3, 0.7)
        else:
            noise = rng.uniform(0.7, 1.0)
        tier = _tier(noise)
        params = DetectionParams(
            settle_window_s=tier["settle_window_s"],
            idle_gap_s=tier["idle_gap_s"],
            settle_tolerance_g=max(0.5, 4.0 * noise),
        )
        n_episodes = rng.randint(1, tier["max_episodes"])
        lead = tier["settle_window_s"] + tier["idle_gap_s"] + 4.0
        cursor = lead
        episodes = []
        jumps = []
        drift_script = k % 7 == 3
        for e in range(n_episodes):
            duration = rng.uniform(10.0, 16.0)
            profile = rng.choice(["single", "double", "triple"])
            dispensed = rng.uniform(2.5, 5.2)
            if drift_script and e == n_episodes // 2:
                # calibration drift large enough to push the amount negative
                jumps.append(
                    CalibrationJump(at_offset_s=cursor + duration / 2, delta_g=dispensed + 2.0)
                )
            episodes.append(
                EpisodeScript(
                    start_offset_s=round(cursor, 2),
                    duration_s=round(duration, 2),
                    dispensed_g=round(dispensed, 3),
                    press_profile=profile,
                    case_ref=f"case-{e + 1}",
                )
            )
            cursor += duration + tier["idle_gap_s"] + tier["settle_window_s"] + 2.0
        script = ScenarioScript(
            episodes=tuple(episodes),
            baseline_g=rng.uniform(420.0, 560.0),
            noise_std_g=noise,
            sample_period_s=tier["sample_period_s"],
            distance_period_s=0.1,
            seed=rng.randrange(2**31),
            tail_s=tier["settle_window_s"] + 8.0,
            calibration_jumps=tuple(jumps),
        )
        suite.append((script, params))
    return suite
