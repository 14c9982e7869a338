"""Energy aggregation over smart-plug and HVAC series.

Sources, in order of preference per device group:
  - "energy_wh" (interval): each sample is the Wh consumed since the
    previous one; samples are summed while the device is on.
  - "energy_total_wh" (cumulative): positive increments between consecutive
    in-window samples are summed while the device is on.
  - "instantaneous_power_w": trapezoidal integration over on-state periods.

On-state comes from the group's "device_state" channel as a step function
(a group without one counts as always on).
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Optional

from ..errors import DomainError, UnitError
from .schemas import TimeSeries

WH_PER_KWH = 1000.0
MS_PER_HOUR = 3_600_000.0


class EmptyWindow(DomainError):
    pass


@dataclass(frozen=True)
class Stay:
    start_ms: int
    end_ms: int
    n_guests: int = 1
    n_days: int = 1

    def __post_init__(self):
        if self.end_ms <= self.start_ms:
            raise ValueError("stay window must have end > start")
        if self.n_guests < 1 or self.n_days < 1:
            raise ValueError("stays require n_guests >= 1 and n_days >= 1")


@dataclass(frozen=True)
class StayEnergy:
    window: tuple[int, int]
    appliances_kwh: float
    hvac_kwh: float
    n_guests: int
    n_days: int


@dataclass(frozen=True)
class EnergySummary:
    e_appliances_kwh: float
    e_hvac_kwh: float
    appliances_kwh_per_guest_day: float
    hvac_kwh_per_guest_day: float
    per_stay: tuple[StayEnergy, ...] = ()

    def to_json(self) -> dict:
        return {
            "e_appliances_kwh": self.e_appliances_kwh,
            "e_hvac_kwh": self.e_hvac_kwh,
            "appliances_kwh_per_guest_day": self.appliances_kwh_per_guest_day,
            "hvac_kwh_per_guest_day": self.hvac_kwh_per_guest_day,
            "per_stay": [
                {
                    "window": list(s.window),
                    "appliances_kwh": s.appliances_kwh,
                    "hvac_kwh": s.hvac_kwh,
                    "n_guests": s.n_guests,
                    "n_days": s.n_days,
                }
                for s in self.per_stay
            ],
        }


def _on_intervals(state: Optional[TimeSeries], window: tuple[int, int]) -> list[tuple[int, int]]:
    """On-state periods clipped to the window; no state channel = always on.
    Before its first sample the device is assumed to hold that first state."""
    lo, hi = window
    if state is None or len(state) == 0:
        return [(lo, hi)]
    intervals = []
    current_on = bool(state.values[0])
    current_start = min(lo, state.timestamps[0])
    for ts, value in zip(state.timestamps, state.values):
        value = bool(value)
        if value == current_on:
            continue
        if current_on:
            intervals.append((current_start, ts))
        current_on = value
        current_start = ts
    if current_on:
        intervals.append((current_start, hi if hi > current_start else current_start))
    return [
        (max(a, lo), min(b, hi)) for a, b in intervals if max(a, lo) < min(b, hi)
    ]


def _state_at(state: Optional[TimeSeries], ts: int) -> bool:
    if state is None or len(state) == 0:
        return True
    i = bisect_right(state.timestamps, ts) - 1
    return bool(state.values[max(i, 0)])


def _check_unit(series: TimeSeries, unit: str) -> None:
    if series.unit and series.unit != unit:
        raise UnitError(
            f"channel {series.channel!r} must be in {unit}, got {series.unit!r}"
        )


def _group_wh(group: dict[str, TimeSeries], window: tuple[int, int]) -> float:
    """Wh consumed by one device group inside the window, on-state only."""
    if not group:
        return 0.0
    lo, hi = window
    if not any(
        bisect_right(s.timestamps, hi) - bisect_left(s.timestamps, lo)
        for s in group.values()
    ):
        raise EmptyWindow(f"no samples in window [{lo}, {hi}]")
    state = group.get("device_state")

    if "energy_wh" in group:
        series = group["energy_wh"]
        _check_unit(series, "Wh")
        i, j = bisect_left(series.timestamps, lo), bisect_right(series.timestamps, hi)
        return math.fsum(
            series.values[k]
            for k in range(i, j)
            if _state_at(state, series.timestamps[k])
        )

    if "energy_total_wh" in group:
        series = group["energy_total_wh"]
        _check_unit(series, "Wh")
        i, j = bisect_left(series.timestamps, lo), bisect_right(series.timestamps, hi)
        total = 0.0
        for k in range(i + 1, j):
            delta = series.values[k] - series.values[k - 1]
            if delta > 0 and _state_at(state, series.timestamps[k - 1]):
                total += delta
        return total

    if "instantaneous_power_w" in group:
        series = group["instantaneous_power_w"]
        _check_unit(series, "W")
        return _integrate_power(series, _on_intervals(state, window))

    raise UnitError(
        "device group has no energy_wh, energy_total_wh, or instantaneous_power_w channel"
    )


def _integrate_power(power: TimeSeries, intervals: list[tuple[int, int]]) -> float:
    """Trapezoidal Wh over the given on-intervals, interpolating at clips."""
    ts, vs = power.timestamps, power.values
    total = 0.0
    for lo, hi in intervals:
        for k in range(len(ts) - 1):
            t1, t2 = ts[k], ts[k + 1]
            if t2 <= lo or t1 >= hi:
                continue
            a, b = max(t1, lo), min(t2, hi)
            if b <= a:
                continue
            span = t2 - t1
            pa = vs[k] + (vs[k + 1] - vs[k]) * (a - t1) / span
            pb = vs[k] + (vs[k + 1] - vs[k]) * (b - t1) / span
            total += (pa + pb) / 2 * (b - a) / MS_PER_HOUR
    return total


def energy_summary(
    plug: dict[str, TimeSeries],
    hvac: dict[str, TimeSeries],
    stays: list[Stay],
) -> EnergySummary:
    """Per-stay and per-guest-day energy figures (kWh = Wh / 1000)."""
    per_stay = []
    for stay in stays:
        window = (stay.start_ms, stay.end_ms)
        per_stay.append(
            StayEnergy(
                window=window,
                appliances_kwh=_group_wh(plug, window) / WH_PER_KWH,
                hvac_kwh=_group_wh(hvac, window) / WH_PER_KWH,
                n_guests=stay.n_guests,
                n_days=stay.n_days,
            )
        )
    guest_days = sum(s.n_guests * s.n_days for s in per_stay)
    e_app = math.fsum(s.appliances_kwh for s in per_stay)
    e_hvac = math.fsum(s.hvac_kwh for s in per_stay)
    return EnergySummary(
        e_appliances_kwh=e_app,
        e_hvac_kwh=e_hvac,
        appliances_kwh_per_guest_day=e_app / guest_days if guest_days else 0.0,
        hvac_kwh_per_guest_day=e_hvac / guest_days if guest_days else 0.0,
        per_stay=tuple(per_stay),
    )
