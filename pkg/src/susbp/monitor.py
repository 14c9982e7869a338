"""Live session state over a sensor feed: incremental hand-hygiene episode
detection, procedure step tracking, bottle fill level, and snapshots.

The episode state machine applies the same definitions as the batch
detector in susbp.sensors.detect, one reading at a time; equivalence of the
two on recorded streams is a tested property.  A single logical writer
feeds readings in order; snapshots are immutable copies and may be taken
from any thread.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass
from statistics import median
from typing import Callable, Iterable, Optional, Union

from .errors import DomainError, UnitError
from .eventlog import Event, EventLog, NormativeSpec, Trace, write_xes
from .indicators import ComplianceThresholds
from .sensors.detect import (
    FLAG_NEGATIVE,
    FLAG_NO_SETTLE,
    FLAG_SENSOR_GAP,
    DetectionParams,
    HygieneEpisode,
)
from .sensors.schemas import Reading
from .timeutil import format_rfc3339_ms, parse_rfc3339_ms

SNAPSHOT_SCHEMA = "susbp.live/1"
REFILL_JUMP_G = 20.0
PROVISIONAL_WINDOW_S = 1.0


class FeedLineError(DomainError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    normative: Optional[NormativeSpec] = None
    detection: DetectionParams = DetectionParams()
    thresholds: ComplianceThresholds = ComplianceThresholds()
    bottle_capacity_g: float = 500.0
    replay_speed: float = 1.0
    session_id: str = "session-1"
    scale_channel: str = "weight_g"
    distance_channel: str = "distance_mm"

    def __post_init__(self):
        if self.bottle_capacity_g <= 0:
            raise ValueError("bottle_capacity_g must be > 0")
        if self.replay_speed <= 0:
            raise ValueError("replay_speed must be > 0")

    @classmethod
    def from_json(cls, obj) -> "SessionConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            normative=NormativeSpec.from_json(obj["normative"]) if obj.get("normative") else None,
            detection=DetectionParams.from_json(obj.get("detection", {})),
            thresholds=ComplianceThresholds(
                amount_ml_range=tuple(obj.get("amount_ml_range", (3.0, 5.0))),
                min_duration_s=obj.get("min_duration_s", 30.0),
            ),
            bottle_capacity_g=obj.get("bottle_capacity_g", 500.0),
            replay_speed=obj.get("replay_speed", 1.0),
            session_id=obj.get("session_id", "session-1"),
            scale_channel=obj.get("scale_channel", "weight_g"),
            distance_channel=obj.get("distance_channel", "distance_mm"),
        )


@dataclass(frozen=True)
class LiveState:
    session_id: str
    seq: int
    steps: tuple[str, ...]
    current_step_index: int
    current_step_name: Optional[str]
    episode_active: bool
    running_duration_s: float
    running_amount_g: float
    fill_level_fraction: float
    completed_episodes: tuple[HygieneEpisode, ...]
    targets: dict
    density_g_per_ml: float
    last_update_ms: Optional[int]
    refill_count: int

    def to_json(self) -> dict:
        return {
            "schema": SNAPSHOT_SCHEMA,
            "session_id": self.session_id,
            "seq": self.seq,
            "steps": list(self.steps),
            "current_step": {
                "index": self.current_step_index,
                "name": self.current_step_name,
            },
            "episode_active": self.episode_active,
            "running_duration_s": self.running_duration_s,
            "running_amount_g": self.running_amount_g,
            "running_amount_ml": self.running_amount_g / self.density_g_per_ml,
            "fill_level_fraction": self.fill_level_fraction,
            "completed_episodes": [e.to_json() for e in self.completed_episodes],
            "targets": self.targets,
            "density_g_per_ml": self.density_g_per_ml,
            "last_update": (
                format_rfc3339_ms(self.last_update_ms)
                if self.last_update_ms is not None
                else None
            ),
            "refill_count": self.refill_count,
        }


def parse_feed_line(line: str) -> Union[Reading, dict]:
    """One feed line: a reading object or an event record."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FeedLineError(f"malformed feed line: {exc}") from exc
    if not isinstance(obj, dict):
        raise FeedLineError("feed line must be a JSON object")
    if "event" in obj:
        if "timestamp" not in obj:
            raise FeedLineError("event record without timestamp")
        return obj
    for key in ("device_id", "timestamp", "channel", "value"):
        if key not in obj:
            raise FeedLineError(f"reading without {key!r}")
    return Reading(
        device_id=str(obj["device_id"]),
        timestamp_ms=parse_rfc3339_ms(str(obj["timestamp"])),
        channel=str(obj["channel"]),
        value=obj["value"],
        unit=str(obj.get("unit", "") or ""),
    )


class LiveMonitor:
    """Incremental session engine.  Not thread-safe for feeding; snapshot()
    may be called concurrently with feeding (it copies under a lock)."""

    _SETTLING, _QUIET, _ACTIVE, _PENDING = range(4)

    def __init__(self, config: SessionConfig):
        self.config = config
        p = config.detection
        self._window_ms = p.settle_window_s * 1000
        self._idle_ms = p.idle_gap_s * 1000
        self._hold_ms = p.leave_hold_s * 1000
        self._horizon_ms = self._window_ms + self._hold_ms + 2000

        self._lock = threading.Lock()
        self.seq = 0
        self._last_update: Optional[int] = None
        self._state = self._SETTLING
        self._settle_buf: deque[tuple[int, float]] = deque()
        self._recent: deque[tuple[int, float]] = deque()
        self._level: Optional[float] = None
        self._quiet_since: Optional[int] = None
        self._episode_start: Optional[int] = None
        self._pre_level: Optional[float] = None
        self._leave_candidate: Optional[int] = None
        self._episode_end: Optional[int] = None
        self._pending_buf: deque[tuple[int, float]] = deque()
        self._episode_gap = False
        self._completed: list[HygieneEpisode] = []
        self._step_index = 0
        self._fill_anchor: Optional[float] = None
        self._fill_fraction = 1.0
        self._refill_requested = False
        self._refill_count = 0
        self._last_value: Optional[float] = None
        self._running_amount = 0.0
        self._finished = False

    # -- feeding ------------------------------------------------------------

    def feed_reading(self, reading: Union[Reading, dict]) -> LiveState:
        self._apply(reading)
        return self.state()

    def _apply(self, reading: Union[Reading, dict]) -> None:
        with self._lock:
            if isinstance(reading, dict):
                self._apply_event(reading)
            else:
                self._apply_reading(reading)
            self.seq += 1

    def _apply_event(self, event: dict) -> None:
        ts = parse_rfc3339_ms(str(event["timestamp"]))
        self._last_update = ts
        kind = event.get("event")
        if kind == "step_complete":
            self._advance_step(str(event.get("step", "")))
        elif kind == "refill":
            # re-baseline: detection and fill anchor restart from fresh data
            self._refill_requested = True
            self._refill_count += 1
            if self._state in (self._QUIET, self._SETTLING):
                self._state = self._SETTLING
                self._settle_buf.clear()

    def _advance_step(self, step: str) -> None:
        spec = self.config.normative
        if spec is None or not spec.sequence:
            return
        seq = spec.sequence
        try:
            found = seq.index(step, min(self._step_index, len(seq) - 1))
        except ValueError:
            try:
                found = seq.index(step)
            except ValueError:
                return  # unknown step name: ignored
        self._step_index = min(found + 1, len(seq))

    def _apply_reading(self, reading: Reading) -> None:
        t = reading.timestamp_ms
        self._last_update = t
        channel = reading.channel
        if channel == self.config.scale_channel:
            if reading.unit and reading.unit != "g":
                raise UnitError(f"scale channel must be in g, got {reading.unit!r}")
            self._scale_sample(t, float(reading.value))
        elif channel == self.config.distance_channel:
            if reading.unit and reading.unit != "mm":
                raise UnitError(f"distance channel must be in mm, got {reading.unit!r}")
            self._distance_sample(t, float(reading.value))
        # other channels (motion, buttons, plugs) update last_update only

    # -- episode state machine (mirrors the batch definitions) --------------

    def _scale_sample(self, t: int, v: float) -> None:
        self._last_value = v
        self._recent.append((t, v))
        horizon = t - self._horizon_ms
        while self._recent and self._recent[0][0] < horizon:
            self._recent.popleft()

        if self._state == self._SETTLING:
            if self._quiet_since is None:
                self._quiet_since = t
            self._settle_buf.append((t, v))
            settled = self._try_settle(self._settle_buf)
            if settled is None:
                return
            level, boundary = settled
            self._adopt_level(level)
            self._state = self._QUIET
            if t <= boundary:
                return  # this sample was part of the settled window
            # fall through: the sample lies past the window, peak-check it

        if self._state == self._QUIET:
            delta = self.config.detection.min_peak_delta_g
            if v - self._level >= delta and t - self._quiet_since >= self._idle_ms:
                self._episode_start = t
                self._pre_level = self._pre_window_level(t)
                self._leave_candidate = None
                self._state = self._ACTIVE
            elif abs(v - self._level) >= delta:
                self._quiet_since = t
            return

        if self._state == self._PENDING:
            self._pending_buf.append((t, v))
            settled = self._try_settle(self._pending_buf)
            if settled is not None:
                level, boundary = settled
                self._finalize_episode(level)
                if t > boundary:
                    self._scale_sample_requeue(t, v)

    def _scale_sample_requeue(self, t: int, v: float) -> None:
        # re-run quiet-state checks for a sample that fell past the window
        delta = self.config.detection.min_peak_delta_g
        if v - self._level >= delta and t - self._quiet_since >= self._idle_ms:
            self._episode_start = t
            self._pre_level = self._pre_window_level(t)
            self._leave_candidate = None
            self._state = self._ACTIVE
        elif abs(v - self._level) >= delta:
            self._quiet_since = t

    def _try_settle(self, buf: deque) -> Optional[tuple[float, int]]:
        """First settled window in the buffer; returns (median, window end
        time) and trims the buffer head on failed candidates."""
        tol2 = 2 * self.config.detection.settle_tolerance_g
        while buf:
            head_t = buf[0][0]
            boundary = head_t + self._window_ms
            if buf[-1][0] < boundary:
                return None  # window not yet full
            window = [val for ts, val in buf if ts <= boundary]
            if max(window) - min(window) <= tol2:
                return median(window), boundary
            buf.popleft()
        return None

    def _pre_window_level(self, start: int) -> float:
        window = [v for ts, v in self._recent if start - self._window_ms <= ts < start]
        if window:
            return median(window)
        before = [v for ts, v in self._recent if ts < start]
        self._episode_gap = True
        return before[-1] if before else self._recent[0][1]

    def _distance_sample(self, t: int, d: float) -> None:
        if self._state != self._ACTIVE:
            return
        if d > self.config.detection.leave_distance_mm:
            if self._leave_candidate is None:
                self._leave_candidate = t
            elif t - self._leave_candidate >= self._hold_ms:
                self._end_episode(self._leave_candidate, gap=False)
        else:
            self._leave_candidate = None

    def _end_episode(self, end: int, gap: bool) -> None:
        self._episode_end = end
        self._episode_gap = self._episode_gap or gap
        self._pending_buf = deque(
            (ts, v) for ts, v in self._recent if ts >= end
        )
        self._state = self._PENDING
        settled = self._try_settle(self._pending_buf)
        if settled is not None:
            self._finalize_episode(settled[0])

    def _finalize_episode(self, post_level: float, no_settle: bool = False) -> None:
        amount = self._pre_level - post_level
        flags = set()
        if amount < 0:
            flags.add(FLAG_NEGATIVE)
        if no_settle:
            flags.add(FLAG_NO_SETTLE)
        if self._episode_gap:
            flags.add(FLAG_SENSOR_GAP)
        density = self.config.detection.density_g_per_ml
        self._completed.append(
            HygieneEpisode(
                start_ms=self._episode_start,
                end_ms=self._episode_end,
                amount_g=amount,
                amount_ml=amount / density,
                quality=frozenset(flags),
                case_ref=None,
            )
        )
        self._adopt_level(post_level)
        self._quiet_since = self._episode_end
        self._episode_start = None
        self._episode_end = None
        self._pre_level = None
        self._episode_gap = False
        self._pending_buf.clear()
        self._state = self._QUIET

    def _adopt_level(self, level: float) -> None:
        previous = self._level
        self._level = level
        if self._fill_anchor is None or self._refill_requested:
            self._fill_anchor = level
            self._refill_requested = False
            self._fill_fraction = 1.0
        elif previous is not None and level - previous >= REFILL_JUMP_G:
            # undeclared refill: baseline jumped up; re-anchor and mark it
            self._refill_count += 1
            self._fill_anchor = level
            self._fill_fraction = 1.0
        consumed = self._fill_anchor - level
        fraction = max(0.0, min(1.0, 1.0 - consumed / self.config.bottle_capacity_g))
        self._fill_fraction = min(self._fill_fraction, fraction)

    def finish(self) -> None:
        """End of feed: close any episode still open (data gap semantics,
        matching what the batch detector does at end of series)."""
        with self._lock:
            if self._finished:
                return
            self._finished = True
            if self._state == self._ACTIVE and self._recent:
                end = (
                    self._leave_candidate
                    if self._leave_candidate is not None
                    else self._recent[-1][0]
                )
                self._episode_gap = True
                self._episode_end = end
                self._pending_buf = deque((ts, v) for ts, v in self._recent if ts >= end)
                settled = self._try_settle(self._pending_buf)
                if settled is not None:
                    self._finalize_episode(settled[0])
                else:
                    self._finalize_episode(self._last_value, no_settle=True)
            elif self._state == self._PENDING:
                self._finalize_episode(self._last_value, no_settle=True)
            self.seq += 1

    # -- state views ---------------------------------------------------------

    def _provisional_amount(self) -> float:
        if self._state != self._ACTIVE or self._pre_level is None or not self._recent:
            return 0.0
        last_t = self._recent[-1][0]
        window = [v for ts, v in self._recent if ts >= last_t - PROVISIONAL_WINDOW_S * 1000]
        if not window or max(window) - min(window) > 2 * self.config.detection.settle_tolerance_g:
            return max(0.0, self._running_amount)
        return max(self._running_amount, self._pre_level - sum(window) / len(window))

    def state(self) -> LiveState:
        with self._lock:
            active = self._state == self._ACTIVE
            running = self._provisional_amount() if active else 0.0
            self._running_amount = running if active else 0.0
            duration = 0.0
            if active and self._last_update is not None:
                duration = max(0.0, (self._last_update - self._episode_start) / 1000)
            spec = self.config.normative
            step_name = None
            if spec and self._step_index < len(spec.sequence):
                step_name = spec.sequence[self._step_index]
            lo, hi = self.config.thresholds.amount_ml_range
            return LiveState(
                session_id=self.config.session_id,
                seq=self.seq,
                steps=tuple(spec.sequence) if spec else (),
                current_step_index=self._step_index,
                current_step_name=step_name,
                episode_active=active,
                running_duration_s=duration,
                running_amount_g=running,
                fill_level_fraction=self._fill_fraction,
                completed_episodes=tuple(self._completed),
                targets={
                    "min_duration_s": self.config.thresholds.min_duration_s,
                    "amount_ml_range": [lo, hi],
                },
                density_g_per_ml=self.config.detection.density_g_per_ml,
                last_update_ms=self._last_update,
                refill_count=self._refill_count,
            )

    def snapshot(self) -> dict:
        return self.state().to_json()

    @property
    def completed_episodes(self) -> list[HygieneEpisode]:
        with self._lock:
            return list(self._completed)

    # -- replay ---------------------------------------------------------------

    def replay(
        self,
        lines: Iterable[str],
        speed: Optional[float] = None,
        on_error: Optional[Callable[[str, Exception], None]] = None,
        on_change: Optional[Callable[[], None]] = None,
        sleep=time.sleep,
        clock=time.monotonic,
    ) -> int:
        """Feed a recorded stream, pacing by reading timestamps divided by
        the speed factor; sleeps only when ahead of schedule, so processing
        lag is absorbed instead of accumulating.  Returns the error count."""
        speed = speed if speed is not None else self.config.replay_speed
        wall_start = clock()
        stream_start: Optional[int] = None
        errors = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            try:
                item = parse_feed_line(line)
                ts = item["timestamp"] if isinstance(item, dict) else item.timestamp_ms
                if isinstance(ts, str):
                    ts = parse_rfc3339_ms(ts)
                if stream_start is None:
                    stream_start = ts
                ahead = (ts - stream_start) / 1000 / speed - (clock() - wall_start)
                if ahead > 0.001:
                    sleep(ahead)
                self._apply(item)
            except Exception as exc:
                errors += 1
                if on_error:
                    on_error(line, exc)
                continue
            if on_change:
                on_change()
        self.finish()
        if on_change:
            on_change()
        return errors

    # -- exports ----------------------------------------------------------------

    def episodes_to_log(self) -> EventLog:
        """Completed episodes as one XES trace of start/complete events."""
        events = []
        for ep in self.completed_episodes:
            attrs = {
                "amount_g": ep.amount_g,
                "amount_ml": ep.amount_ml,
                "quality": ",".join(sorted(ep.quality)),
            }
            events.append(Event("Hand hygiene", ep.start_ms, "start", dict(attrs)))
            events.append(Event("Hand hygiene", ep.end_ms, "complete", dict(attrs)))
        events.sort(key=lambda e: e.timestamp_ms)
        trace = Trace(case_id=self.config.session_id, events=tuple(events))
        return EventLog(traces=(trace,))

    def episodes_xes(self) -> str:
        return write_xes(self.episodes_to_log())

    def episodes_csv(self) -> str:
        lines = ["start,end,duration_s,amount_g,amount_ml,quality,case_ref"]
        for ep in self.completed_episodes:
            lines.append(
                f"{format_rfc3339_ms(ep.start_ms)},{format_rfc3339_ms(ep.end_ms)},"
                f"{ep.duration_s:.3f},{ep.amount_g:.3f},{ep.amount_ml:.3f},"
                f"\"{';'.join(sorted(ep.quality))}\",{ep.case_ref or ''}"
            )
        return "\n".join(lines) + "\n"
