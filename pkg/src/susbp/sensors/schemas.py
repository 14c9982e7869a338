"""Device schemas and reading ingestion.

Two line formats are accepted: CSV with header
``device_id,timestamp,channel,value,unit`` and newline-delimited JSON with
the same keys.  Smart-plug JSONL rows may instead use the vendor field
names (device_name, timestamp, instantaneous_power_w, device_temperature_c,
device_state, created_at, optionally energy_wh); one such row expands into
one reading per numeric/boolean channel.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Literal, Optional, Union

from ..errors import DomainError
from ..timeutil import parse_rfc3339_ms

ValueType = Literal["number", "boolean", "string"]


class SchemaMismatch(DomainError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        at = f"line {line}: " if line is not None else ""
        super().__init__(f"{at}{message}")


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    unit: str = ""
    value_type: ValueType = "number"
    aggregation: Optional[Literal["interval", "cumulative"]] = None  # energy channels


@dataclass(frozen=True)
class DeviceSchema:
    id: str
    device_kind: Literal["SmartPlug", "Scale", "Distance", "Motion", "Button", "HvacController"]
    channels: dict[str, ChannelSpec]

    def __post_init__(self):
        if self.device_kind == "SmartPlug":
            required = {
                "device_name",
                "timestamp",
                "instantaneous_power_w",
                "device_temperature_c",
                "device_state",
                "created_at",
            }
            missing = required - self.channels.keys()
            if missing:
                raise SchemaMismatch(
                    f"smart-plug schema must declare channels {sorted(missing)}"
                )


def _channels(*specs: ChannelSpec) -> dict[str, ChannelSpec]:
    return {s.name: s for s in specs}


_DEFAULT_SCHEMAS = {
    "smart_plug": DeviceSchema(
        id="smart_plug",
        device_kind="SmartPlug",
        channels=_channels(
            ChannelSpec("device_name", "", "string"),
            ChannelSpec("timestamp", "", "string"),
            ChannelSpec("instantaneous_power_w", "W", "number"),
            ChannelSpec("device_temperature_c", "degC", "number"),
            ChannelSpec("device_state", "on/off", "boolean"),
            ChannelSpec("created_at", "", "string"),
            ChannelSpec("energy_wh", "Wh", "number", aggregation="interval"),
        ),
    ),
    "scale": DeviceSchema(
        id="scale",
        device_kind="Scale",
        channels=_channels(ChannelSpec("weight_g", "g", "number")),
    ),
    "distance": DeviceSchema(
        id="distance",
        device_kind="Distance",
        channels=_channels(ChannelSpec("distance_mm", "mm", "number")),
    ),
    "motion": DeviceSchema(
        id="motion",
        device_kind="Motion",
        channels=_channels(ChannelSpec("motion", "bool", "boolean")),
    ),
    "button": DeviceSchema(
        id="button",
        device_kind="Button",
        channels=_channels(ChannelSpec("button_pressed", "bool", "boolean")),
    ),
    "hvac_controller": DeviceSchema(
        id="hvac_controller",
        device_kind="HvacController",
        channels=_channels(
            ChannelSpec("device_state", "on/off", "boolean"),
            ChannelSpec("instantaneous_power_w", "W", "number"),
            ChannelSpec("energy_wh", "Wh", "number", aggregation="interval"),
            ChannelSpec("target_temperature_c", "degC", "number"),
        ),
    ),
    # the combined hygiene-station feed: scale + distance + motion + button
    "hygiene_station": DeviceSchema(
        id="hygiene_station",
        device_kind="Scale",
        channels=_channels(
            ChannelSpec("weight_g", "g", "number"),
            ChannelSpec("distance_mm", "mm", "number"),
            ChannelSpec("motion", "bool", "boolean"),
            ChannelSpec("button_pressed", "bool", "boolean"),
        ),
    ),
}


def default_schema(kind: str) -> DeviceSchema:
    """Built-in schema for a device kind key (e.g. "smart_plug", "scale")."""
    if kind not in _DEFAULT_SCHEMAS:
        raise SchemaMismatch(f"no default schema named {kind!r}")
    return _DEFAULT_SCHEMAS[kind]


def load_schema_json(text: str) -> DeviceSchema:
    obj = json.loads(text)
    return DeviceSchema(
        id=obj["id"],
        device_kind=obj["device_kind"],
        channels={
            c["name"]: ChannelSpec(
                name=c["name"],
                unit=c.get("unit", ""),
                value_type=c.get("value_type", "number"),
                aggregation=c.get("aggregation"),
            )
            for c in obj["channels"]
        },
    )


@dataclass(frozen=True)
class Reading:
    device_id: str
    timestamp_ms: int
    channel: str
    value: Union[float, bool]
    unit: str = ""


@dataclass
class TimeSeries:
    """Strictly increasing timestamps; duplicate timestamps collapse
    last-writer-wins and the collapse is counted."""

    device_id: str
    channel: str
    unit: str = ""
    timestamps: list[int] = field(default_factory=list)
    values: list = field(default_factory=list)
    collapsed_count: int = 0

    def __len__(self) -> int:
        return len(self.timestamps)

    def append(self, timestamp_ms: int, value) -> None:
        if self.timestamps and timestamp_ms <= self.timestamps[-1]:
            if timestamp_ms == self.timestamps[-1]:
                self.values[-1] = value
                self.collapsed_count += 1
                return
            raise ValueError("append() requires non-decreasing timestamps; sort first")
        self.timestamps.append(timestamp_ms)
        self.values.append(value)


_TRUE = {"true", "on", "1", "yes"}
_FALSE = {"false", "off", "0", "no"}


def _coerce(value, spec: ChannelSpec, line: int):
    if spec.value_type == "boolean":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise SchemaMismatch(f"channel {spec.name!r} expects a boolean, got {value!r}", line)
    if spec.value_type == "number":
        try:
            return float(value)
        except (TypeError, ValueError):
            raise SchemaMismatch(
                f"channel {spec.name!r} expects a number, got {value!r}", line
            ) from None
    return str(value)


_PLUG_FIELDS = ("instantaneous_power_w", "device_temperature_c", "device_state", "energy_wh")


def parse_record(obj: dict, schema: DeviceSchema, line: int) -> list[Reading]:
    """Validate one decoded record against the schema; vendor-format smart
    plug rows expand into several readings."""
    if "device_name" in obj and "channel" not in obj:
        if schema.device_kind != "SmartPlug":
            raise SchemaMismatch("vendor smart-plug record against a non-plug schema", line)
        ts = parse_rfc3339_ms(str(obj.get("timestamp", "")), line)
        readings = []
        for name in _PLUG_FIELDS:
            if name not in obj:
                continue
            spec = schema.channels[name]
            readings.append(
                Reading(
                    device_id=str(obj["device_name"]),
                    timestamp_ms=ts,
                    channel=name,
                    value=_coerce(obj[name], spec, line),
                    unit=spec.unit,
                )
            )
        if not readings:
            raise SchemaMismatch("smart-plug record carries no channel values", line)
        return readings

    for key in ("device_id", "timestamp", "channel", "value"):
        if key not in obj or obj[key] in (None, ""):
            raise SchemaMismatch(f"record missing {key!r}", line)
    channel = str(obj["channel"])
    if channel not in schema.channels:
        raise SchemaMismatch(
            f"channel {channel!r} not declared by schema {schema.id!r}", line
        )
    spec = schema.channels[channel]
    unit = str(obj.get("unit", "") or "")
    if unit and unit != spec.unit:
        raise SchemaMismatch(
            f"unit {unit!r} does not match schema unit {spec.unit!r} "
            f"for channel {channel!r}",
            line,
        )
    return [
        Reading(
            device_id=str(obj["device_id"]),
            timestamp_ms=parse_rfc3339_ms(str(obj["timestamp"]), line),
            channel=channel,
            value=_coerce(obj["value"], spec, line),
            unit=spec.unit,
        )
    ]


def ingest(
    stream: Union[str, IO[str], Iterable[str]],
    schema: DeviceSchema,
    fmt: Optional[Literal["csv", "jsonl"]] = None,
) -> dict[str, TimeSeries]:
    """Read a CSV/JSONL stream into per-channel time series.

    Timestamps are sorted, duplicates collapsed last-writer-wins (counted on
    the series); any record failing schema validation raises with its line
    number.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = list(stream)
    if fmt is None:
        first = next((ln for ln in lines if ln.strip()), "")
        fmt = "jsonl" if first.lstrip().startswith("{") else "csv"

    staged: dict[str, list[tuple[int, object, str, str]]] = {}

    def stage(reading: Reading) -> None:
        staged.setdefault(reading.channel, []).append(
            (reading.timestamp_ms, reading.value, reading.device_id, reading.unit)
        )

    if fmt == "csv":
        reader = csv.DictReader(lines)
        for line_no, row in enumerate(reader, start=2):
            if row.get("device_id") is None:
                raise SchemaMismatch("short CSV row", line_no)
            for reading in parse_record(row, schema, line_no):
                stage(reading)
    else:
        for line_no, raw in enumerate(lines, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaMismatch(f"malformed JSON record: {exc}", line_no) from exc
            if "event" in obj:
                continue  # feed event records (step_complete, refill) are not readings
            for reading in parse_record(obj, schema, line_no):
                stage(reading)

    out: dict[str, TimeSeries] = {}
    for channel, rows in staged.items():
        rows.sort(key=lambda r: r[0])
        series = TimeSeries(device_id=rows[0][2], channel=channel, unit=rows[0][3])
        for ts, value, _device, _unit in rows:
            series.append(ts, value)
        out[channel] = series
    return out
