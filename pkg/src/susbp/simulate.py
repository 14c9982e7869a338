"""Synthetic hygiene-scenario generator with exact ground truth.

Produces the scale/distance/motion/button streams a monitored hygiene
station would emit: a settled baseline, press-force spikes on the sanitizer
bottle, a step down by the dispensed weight at each press release, the
performer's distance trajectory, plus optional calibration jumps (drift),
post-episode oscillation, refills, and step events.  The scripted episodes
are the ground truth the detectors must recover, so the emitted truth file
is the test oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .sensors.detect import HygieneEpisode
from .sensors.schemas import TimeSeries
from .timeutil import format_rfc3339_ms, parse_rfc3339_ms

TRUTH_SCHEMA = "susbp.truth/1"

#: press onset offsets (s) relative to the episode start
PRESS_PROFILES = {
    "single": (0.0,),
    "double": (0.0, 2.5),
    "triple": (0.0, 2.5, 5.0),
}


class ScriptError(DomainError):
    pass


@dataclass(frozen=True)
class EpisodeScript:
    start_offset_s: float
    duration_s: float
    dispensed_g: float
    press_profile: str = "double"
    case_ref: Optional[str] = None


@dataclass(frozen=True)
class CalibrationJump:
    at_offset_s: float
    delta_g: float


@dataclass(frozen=True)
class ScenarioScript:
    episodes: tuple[EpisodeScript, ...]
    baseline_g: float = 500.0
    noise_std_g: float = 0.0
    sample_period_s: float = 0.05
    distance_period_s: float = 0.1
    start_time: str = "2024-06-18T09:00:00Z"
    seed: int = 7
    present_distance_mm: float = 400.0
    away_distance_mm: float = 2000.0
    distance_noise_mm: float = 10.0
    approach_lead_s: float = 3.0
    tail_s: float = 25.0
    press_force_g: float = 350.0
    press_hold_s: float = 0.8
    density_g_per_ml: float = 0.85
    calibration_jumps: tuple[CalibrationJump, ...] = ()
    oscillate_after_episode: Optional[int] = None  # episode index; runs to end of data
    oscillation_amplitude_g: float = 2.0
    oscillation_period_s: float = 1.0
    step_events: tuple[tuple[float, str], ...] = ()  # (offset_s, step name)
    refills: tuple[tuple[float, float], ...] = ()  # (offset_s, level_g)

    def validate(self) -> None:
        if self.sample_period_s <= 0 or self.distance_period_s <= 0:
            raise ScriptError("sample periods must be positive")
        if self.press_hold_s <= self.sample_period_s:
            raise ScriptError("press_hold_s must exceed sample_period_s")
        previous_end = None
        for i, ep in enumerate(self.episodes):
            if ep.dispensed_g < 0:
                raise ScriptError(f"episode {i}: dispensed_g must be >= 0")
            if ep.press_profile not in PRESS_PROFILES:
                raise ScriptError(f"episode {i}: unknown press profile {ep.press_profile!r}")
            press_span = PRESS_PROFILES[ep.press_profile][-1] + self.press_hold_s
            if ep.duration_s <= press_span + 1.0:
                raise ScriptError(f"episode {i}: duration too short for its presses")
            start = ep.start_offset_s
            if previous_end is not None and start - self.approach_lead_s <= previous_end:
                raise ScriptError(f"episode {i}: overlaps the previous episode")
            previous_end = start + ep.duration_s
        spans = [(e.start_offset_s, e.start_offset_s + e.duration_s) for e in self.episodes]
        for jump in self.calibration_jumps:
            if not any(a + 1.0 <= jump.at_offset_s <= b - 1.0 for a, b in spans):
                raise ScriptError(
                    f"calibration jump at {jump.at_offset_s}s must fall inside an episode"
                )
        for offset, _level in self.refills:
            if any(a - 30.0 <= offset <= b + 30.0 for a, b in spans):
                raise ScriptError(f"refill at {offset}s too close to an episode")
        if self.oscillate_after_episode is not None and not (
            0 <= self.oscillate_after_episode < len(self.episodes)
        ):
            raise ScriptError("oscillate_after_episode out of range")

    def to_json(self) -> dict:
        return {
            "start_time": self.start_time,
            "baseline_g": self.baseline_g,
            "noise_std_g": self.noise_std_g,
            "sample_period_s": self.sample_period_s,
            "distance_period_s": self.distance_period_s,
            "seed": self.seed,
            "present_distance_mm": self.present_distance_mm,
            "away_distance_mm": self.away_distance_mm,
            "distance_noise_mm": self.distance_noise_mm,
            "approach_lead_s": self.approach_lead_s,
            "tail_s": self.tail_s,
            "press_force_g": self.press_force_g,
            "press_hold_s": self.press_hold_s,
            "density_g_per_ml": self.density_g_per_ml,
            "episodes": [
                {
                    "start_offset_s": e.start_offset_s,
                    "duration_s": e.duration_s,
                    "dispensed_g": e.dispensed_g,
                    "press_profile": e.press_profile,
                    "case_ref": e.case_ref,
                }
                for e in self.episodes
            ],
            "calibration_jumps": [
                {"at_offset_s": j.at_offset_s, "delta_g": j.delta_g}
                for j in self.calibration_jumps
            ],
            "oscillate_after_episode": self.oscillate_after_episode,
            "oscillation_amplitude_g": self.oscillation_amplitude_g,
            "oscillation_period_s": self.oscillation_period_s,
            "step_events": [{"at_offset_s": o, "step": s} for o, s in self.step_events],
            "refills": [{"at_offset_s": o, "level_g": g} for o, g in self.refills],
        }

    @classmethod
    def from_json(cls, obj) -> "ScenarioScript":
        if isinstance(obj, str):
            obj = json.loads(obj)
        known = {
            "baseline_g",
            "noise_std_g",
            "sample_period_s",
            "distance_period_s",
            "start_time",
            "seed",
            "present_distance_mm",
            "away_distance_mm",
            "distance_noise_mm",
            "approach_lead_s",
            "tail_s",
            "press_force_g",
            "press_hold_s",
            "density_g_per_ml",
            "oscillate_after_episode",
            "oscillation_amplitude_g",
            "oscillation_period_s",
        }
        kwargs = {k: v for k, v in obj.items() if k in known}
        script = cls(
            episodes=tuple(
                EpisodeScript(
                    start_offset_s=float(e["start_offset_s"]),
                    duration_s=float(e["duration_s"]),
                    dispensed_g=float(e["dispensed_g"]),
                    press_profile=e.get("press_profile", "double"),
                    case_ref=e.get("case_ref"),
                )
                for e in obj.get("episodes", [])
            ),
            calibration_jumps=tuple(
                CalibrationJump(float(j["at_offset_s"]), float(j["delta_g"]))
                for j in obj.get("calibration_jumps", [])
            ),
            step_events=tuple(
                (float(s["at_offset_s"]), str(s["step"])) for s in obj.get("step_events", [])
            ),
            refills=tuple(
                (float(r["at_offset_s"]), float(r["level_g"])) for r in obj.get("refills", [])
            ),
            **kwargs,
        )
        script.validate()
        return script


@dataclass
class Simulation:
    scale: TimeSeries
    distance: TimeSeries
    motion: TimeSeries
    button: TimeSeries
    events: list[tuple[int, dict]]
    truth_episodes: list[HygieneEpisode]
    final_level_g: float
    script: ScenarioScript

    def to_jsonl(self) -> str:
        """Merged reading/event stream, ordered by time with the scale first
        on timestamp ties (the order consumers must process)."""
        records: list[tuple[int, int, dict]] = []

        def series_records(series: TimeSeries, priority: int, unit: str):
            for ts, value in zip(series.timestamps, series.values):
                records.append(
                    (
                        ts,
                        priority,
                        {
                            "device_id": series.device_id,
                            "timestamp": format_rfc3339_ms(ts),
                            "channel": series.channel,
                            "value": value,
                            "unit": unit,
                        },
                    )
                )

        series_records(self.scale, 0, "g")
        series_records(self.distance, 1, "mm")
        series_records(self.motion, 2, "bool")
        series_records(self.button, 3, "bool")
        for ts, event in self.events:
            records.append((ts, 4, dict(event, timestamp=format_rfc3339_ms(ts))))
        records.sort(key=lambda r: (r[0], r[1]))
        return "\n".join(json.dumps(obj) for _, _, obj in records) + "\n"

    def truth_json(self) -> dict:
        return {
            "schema": TRUTH_SCHEMA,
            "baseline_g": self.script.baseline_g,
            "noise_std_g": self.script.noise_std_g,
            "sample_period_s": self.script.sample_period_s,
            "distance_period_s": self.script.distance_period_s,
            "final_level_g": self.final_level_g,
            "episodes": [e.to_json() for e in self.truth_episodes],
        }


def _grid(t0: int, end_ms: int, period_ms: int) -> np.ndarray:
    count = int((end_ms - t0) // period_ms) + 1
    return t0 + np.arange(count, dtype=np.int64) * period_ms


def generate(script: ScenarioScript) -> Simulation:
    """Render a script into sensor series, a feed stream, and ground truth."""
    script.validate()
    rng = np.random.default_rng(script.seed)
    t0 = parse_rfc3339_ms(script.start_time)

    if script.episodes:
        last_end = max(e.start_offset_s + e.duration_s for e in script.episodes)
    else:
        last_end = 0.0
    end_ms = t0 + round((last_end + script.tail_s) * 1000)

    # piecewise-constant bottle level: dispense steps, drift jumps, refills
    level_breaks: list[tuple[int, float]] = []
    level = script.baseline_g
    changes: list[tuple[int, str, float]] = []
    for ep in script.episodes:
        onsets = PRESS_PROFILES[ep.press_profile]
        share = ep.dispensed_g / len(onsets)
        for onset in onsets:
            at = t0 + round((ep.start_offset_s + onset + script.press_hold_s) * 1000)
            changes.append((at, "delta", -share))
    for jump in script.calibration_jumps:
        changes.append((t0 + round(jump.at_offset_s * 1000), "delta", jump.delta_g))
    for offset, to_level in script.refills:
        changes.append((t0 + round(offset * 1000), "set", to_level))
    changes.sort(key=lambda c: c[0])
    for at, kind, value in changes:
        level = value if kind == "set" else level + value
        level_breaks.append((at, level))
    final_level = level

    break_times = np.array([t0 - 1] + [t for t, _ in level_breaks], dtype=np.int64)
    break_levels = np.array([script.baseline_g] + [lv for _, lv in level_breaks])

    period_ms = round(script.sample_period_s * 1000)
    t_scale = _grid(t0, end_ms, period_ms)
    levels = break_levels[np.searchsorted(break_times, t_scale, side="right") - 1]
    values = levels.copy()

    hold_ms = round(script.press_hold_s * 1000)
    for ep in script.episodes:
        for onset in PRESS_PROFILES[ep.press_profile]:
            press_at = t0 + round((ep.start_offset_s + onset) * 1000)
            lo = np.searchsorted(t_scale, press_at, side="left")
            hi = np.searchsorted(t_scale, press_at + hold_ms, side="left")
            values[lo:hi] += script.press_force_g

    if script.oscillate_after_episode is not None:
        ep = script.episodes[script.oscillate_after_episode]
        osc_start = t0 + round((ep.start_offset_s + ep.duration_s) * 1000)
        mask = t_scale >= osc_start
        phase = (t_scale[mask] - osc_start) / (script.oscillation_period_s * 1000)
        values[mask] += script.oscillation_amplitude_g * np.sin(2 * np.pi * phase)

    if script.noise_std_g > 0:
        values = values + rng.normal(0.0, script.noise_std_g, len(values))

    scale = TimeSeries("scale-1", "weight_g", "g", t_scale.tolist(), values.tolist())

    # distance: away except while the performer is at the station
    d_period_ms = round(script.distance_period_s * 1000)
    t_dist = _grid(t0, end_ms, d_period_ms)
    d_values = np.full(len(t_dist), script.away_distance_mm)
    for ep in script.episodes:
        come = t0 + round((ep.start_offset_s - script.approach_lead_s) * 1000)
        leave = t0 + round((ep.start_offset_s + ep.duration_s) * 1000)
        lo = np.searchsorted(t_dist, come, side="left")
        hi = np.searchsorted(t_dist, leave, side="left")
        d_values[lo:hi] = script.present_distance_mm
    if script.distance_noise_mm > 0:
        d_values = d_values + rng.uniform(
            -script.distance_noise_mm, script.distance_noise_mm, len(d_values)
        )
    distance = TimeSeries("dist-1", "distance_mm", "mm", t_dist.tolist(), d_values.tolist())

    # motion mirrors presence, emitted on transitions only
    motion = TimeSeries("motion-1", "motion", "bool")
    motion.append(int(t0), False)
    for ep in script.episodes:
        come = t0 + round((ep.start_offset_s - script.approach_lead_s) * 1000)
        leave = t0 + round((ep.start_offset_s + ep.duration_s) * 1000)
        motion.append(come, True)
        motion.append(leave, False)

    # button edges at episode boundaries (manual activity tracking)
    button = TimeSeries("button-1", "button_pressed", "bool")
    for ep in script.episodes:
        button.append(t0 + round(ep.start_offset_s * 1000), True)
        button.append(t0 + round((ep.start_offset_s + ep.duration_s) * 1000), False)

    events: list[tuple[int, dict]] = []
    for offset, step in script.step_events:
        events.append((t0 + round(offset * 1000), {"event": "step_complete", "step": step}))
    for offset, _level_g in script.refills:
        events.append((t0 + round(offset * 1000), {"event": "refill"}))
    events.sort(key=lambda e: e[0])

    truth = _truth_episodes(script, t0, t_scale, t_dist, break_times, break_levels)
    return Simulation(
        scale=scale,
        distance=distance,
        motion=motion,
        button=button,
        events=events,
        truth_episodes=truth,
        final_level_g=final_level,
        script=script,
    )


def _truth_episodes(
    script: ScenarioScript,
    t0: int,
    t_scale: np.ndarray,
    t_dist: np.ndarray,
    break_times: np.ndarray,
    break_levels: np.ndarray,
) -> list[HygieneEpisode]:
    def level_at(ms: int) -> float:
        return float(break_levels[np.searchsorted(break_times, ms, side="right") - 1])

    episodes = []
    for index, ep in enumerate(script.episodes):
        onset_ms = t0 + round(ep.start_offset_s * 1000)
        leave_ms = t0 + round((ep.start_offset_s + ep.duration_s) * 1000)
        # detectors see grid samples, so truth boundaries snap to the grids
        start = int(t_scale[np.searchsorted(t_scale, onset_ms, side="left")])
        end = int(t_dist[np.searchsorted(t_dist, leave_ms, side="left")])
        amount = level_at(onset_ms - 1) - level_at(leave_ms + 1)
        flags = set()
        if amount < 0:
            flags.add("NegativeAmount")
        if script.oscillate_after_episode == index:
            flags.add("NoSettle")
        episodes.append(
            HygieneEpisode(
                start_ms=start,
                end_ms=end,
                amount_g=amount,
                amount_ml=amount / script.density_g_per_ml,
                quality=frozenset(flags),
                case_ref=ep.case_ref,
            )
        )
    return episodes
