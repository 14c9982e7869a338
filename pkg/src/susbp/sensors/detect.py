"""Hand-hygiene episode detection from a scale series (grams) and a
distance series (millimeters).

An episode starts at the first sample where the scale exceeds the settled
pre-episode baseline by at least min_peak_delta_g after idle_gap_s of quiet;
it ends at the first distance sample above leave_distance_mm that stays
above the threshold for leave_hold_s (the performer left the hygiene area).
The dispensed amount is the difference of settled-window medians before the
start and after the end, so press-force spikes never enter the estimate.

This is the batch reference implementation; susbp.monitor mirrors the same
definitions incrementally and the two are tested against each other.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError, UnitError
from ..timeutil import format_rfc3339_ms, parse_rfc3339_ms
from .schemas import TimeSeries

FLAG_NEGATIVE = "NegativeAmount"
FLAG_NO_SETTLE = "NoSettle"
FLAG_SENSOR_GAP = "SensorGap"


class EmptySeries(DomainError):
    pass


class OutOfRange(DomainError):
    pass


@dataclass(frozen=True)
class DetectionParams:
    min_peak_delta_g: float = 50.0
    idle_gap_s: float = 10.0
    settle_window_s: float = 3.0
    settle_tolerance_g: float = 0.5
    leave_distance_mm: float = 1500.0
    leave_hold_s: float = 2.0
    density_g_per_ml: float = 0.85

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, obj) -> "DetectionParams":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(**obj)


@dataclass(frozen=True)
class HygieneEpisode:
    start_ms: int
    end_ms: int
    amount_g: float
    amount_ml: float
    quality: frozenset[str] = frozenset()
    case_ref: Optional[str] = None

    @property
    def duration_s(self) -> float:
        return (self.end_ms - self.start_ms) / 1000

    def to_json(self) -> dict:
        return {
            "start": format_rfc3339_ms(self.start_ms),
            "end": format_rfc3339_ms(self.end_ms),
            "duration_s": self.duration_s,
            "amount_g": self.amount_g,
            "amount_ml": self.amount_ml,
            "quality": sorted(self.quality),
            "case_ref": self.case_ref,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HygieneEpisode":
        return cls(
            start_ms=parse_rfc3339_ms(obj["start"]),
            end_ms=parse_rfc3339_ms(obj["end"]),
            amount_g=float(obj["amount_g"]),
            amount_ml=float(obj["amount_ml"]),
            quality=frozenset(obj.get("quality", ())),
            case_ref=obj.get("case_ref"),
        )


def _find_settled_window(
    ts: np.ndarray, vs: np.ndarray, from_ms: float, window_ms: float, tol_g: float
) -> Optional[tuple[float, int]]:
    """First window [t_k, t_k + window_ms] starting at a sample with
    t_k >= from_ms whose values stay within 2*tol_g peak-to-peak; returns
    (median, index past the window) or None if no window ever fills/quiets."""
    n = len(ts)
    k = int(np.searchsorted(ts, from_ms, side="left"))
    while k < n:
        hi = ts[k] + window_ms
        if ts[-1] < hi:
            return None
        j = int(np.searchsorted(ts, hi, side="right"))
        window = vs[k:j]
        if float(window.max()) - float(window.min()) <= 2 * tol_g:
            return float(np.median(window)), j
        k += 1
    return None


def _require_series(series: TimeSeries, unit: str, name: str) -> tuple[np.ndarray, np.ndarray]:
    if len(series) == 0:
        raise EmptySeries(f"{name} series is empty")
    if series.unit and series.unit != unit:
        raise UnitError(f"{name} series must be in {unit}, got {series.unit!r}")
    return (
        np.asarray(series.timestamps, dtype=np.int64),
        np.asarray(series.values, dtype=np.float64),
    )


def dispense_amount(
    scale: TimeSeries,
    episode_bounds: tuple[int, int],
    params: DetectionParams = DetectionParams(),
) -> tuple[float, frozenset[str]]:
    amount, flags, _, _ = _dispense_detail(
        *_require_series(scale, "g", "scale"), episode_bounds, params
    )
    return amount, flags


def _dispense_detail(
    ts: np.ndarray,
    vs: np.ndarray,
    bounds: tuple[int, int],
    params: DetectionParams,
) -> tuple[float, frozenset[str], float, int]:
    """(amount_g, flags, post_level, index past the post window).

    amount = median over the settle window ending at the episode start minus
    the median over the first settled window after the episode end.
    """
    start, end = bounds
    if start < ts[0] or end > ts[-1] or end <= start:
        raise OutOfRange(
            f"episode bounds [{start}, {end}] outside series range [{ts[0]}, {ts[-1]}]"
        )
    window_ms = params.settle_window_s * 1000
    flags: set[str] = set()

    lo = int(np.searchsorted(ts, start - window_ms, side="left"))
    hi = int(np.searchsorted(ts, start, side="left"))  # excludes the start sample
    pre = vs[lo:hi]
    if len(pre) == 0:
        flags.add(FLAG_SENSOR_GAP)
        pre_level = float(vs[max(0, hi - 1)])
    else:
        pre_level = float(np.median(pre))

    settled = _find_settled_window(ts, vs, end, window_ms, params.settle_tolerance_g)
    if settled is None:
        flags.add(FLAG_NO_SETTLE)
        post_level, next_index = float(vs[-1]), len(ts)
    else:
        post_level, next_index = settled

    amount = pre_level - post_level
    if amount < 0:
        flags.add(FLAG_NEGATIVE)
    return amount, frozenset(flags), post_level, next_index


def detect_hygiene_episodes(
    scale: TimeSeries,
    distance: TimeSeries,
    params: DetectionParams = DetectionParams(),
) -> list[HygieneEpisode]:
    """Batch detection; episodes are non-overlapping and chronological."""
    ts, vs = _require_series(scale, "g", "scale")
    td, vd = _require_series(distance, "mm", "distance")
    t_list = ts.tolist()
    v_list = vs.tolist()
    d_times = td.tolist()
    d_values = vd.tolist()

    window_ms = params.settle_window_s * 1000
    idle_ms = params.idle_gap_s * 1000
    hold_ms = params.leave_hold_s * 1000

    episodes: list[HygieneEpisode] = []

    settled = _find_settled_window(ts, vs, ts[0], window_ms, params.settle_tolerance_g)
    if settled is None:
        return []  # never settles: no baseline to measure against
    level, i = settled
    quiet_since = t_list[0]

    n = len(t_list)
    while i < n:
        v = v_list[i]
        t = t_list[i]
        if v - level >= params.min_peak_delta_g and t - quiet_since >= idle_ms:
            start = t
            end, gap = _find_leave(
                d_times, d_values, start, params.leave_distance_mm, hold_ms
            )
            if end is None or end <= start:
                end, gap = t_list[-1], True
            amount, flags, post_level, next_i = _dispense_detail(
                ts, vs, (start, end), params
            )
            if gap:
                flags = flags | {FLAG_SENSOR_GAP}
            episodes.append(
                HygieneEpisode(
                    start_ms=start,
                    end_ms=end,
                    amount_g=amount,
                    amount_ml=amount / params.density_g_per_ml,
                    quality=flags,
                )
            )
            level = post_level
            quiet_since = end
            i = max(next_i, int(np.searchsorted(ts, end, side="right")))
            continue
        if abs(v - level) >= params.min_peak_delta_g:
            # excursion without the required quiet lead-in: not an episode
            quiet_since = t
        i += 1

    return episodes


def _find_leave(
    d_times: list, d_values: list, start: int, leave_mm: float, hold_ms: float
) -> tuple[Optional[int], bool]:
    """First distance sample > leave_mm at/after start that stays above the
    threshold for hold_ms; returns (end, sensor_gap)."""
    candidate: Optional[int] = None
    j = bisect_left(d_times, start)
    while j < len(d_times):
        if d_values[j] > leave_mm:
            if candidate is None:
                candidate = d_times[j]
            elif d_times[j] - candidate >= hold_ms:
                return candidate, False
        else:
            candidate = None
        j += 1
    if candidate is not None:
        # data ended while the hold was still running
        return candidate, True
    return None, False
