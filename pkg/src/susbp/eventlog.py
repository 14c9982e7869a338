"""XES event logs: parsing/writing, activity statistics, and conformance
checking against a normative activity sequence with hand-hygiene rules.

Timestamps are epoch milliseconds (UTC); durations are reported in seconds.
Start/complete events are paired FIFO per (case, activity); unpaired events
are surfaced, never guessed.
"""

from __future__ import annotations

import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from statistics import median
from typing import Iterable, Literal, Optional, Union
from xml.sax.saxutils import quoteattr

from .errors import DomainError, XmlError
from .timeutil import format_rfc3339_ms, parse_rfc3339_ms

AttrValue = Union[str, int, float, bool]


class MissingTimestamp(DomainError):
    pass


class MissingActivityName(DomainError):
    pass


class SpecError(DomainError):
    pass


@dataclass(frozen=True)
class Event:
    activity: str
    timestamp_ms: int
    lifecycle: str = "complete"
    attributes: dict[str, AttrValue] = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]
    attributes: dict[str, AttrValue] = field(default_factory=dict)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]

    def activities(self) -> set[str]:
        return {e.activity for t in self.traces for e in t.events}


# ---------------------------------------------------------------------------
# XES parse / write

_XES_TYPES = {"string", "int", "float", "boolean", "date"}


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_attr(el: ET.Element) -> Optional[tuple[str, AttrValue]]:
    tag = _localname(el.tag)
    if tag not in _XES_TYPES:
        return None
    key = el.get("key", "")
    raw = el.get("value", "")
    if tag == "int":
        return key, int(raw)
    if tag == "float":
        return key, float(raw)
    if tag == "boolean":
        return key, raw.strip().lower() == "true"
    # non-timestamp dates are kept as their string form
    return key, raw


def parse_xes(xml_text: str) -> EventLog:
    """Parse an XES document; events are sorted stably by timestamp within
    each trace, traces stay in file order."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlError(f"malformed XES XML: {exc}") from exc
    if _localname(root.tag) != "log":
        raise XmlError(f"expected <log> root, found <{_localname(root.tag)}>")

    traces = []
    for index, trace_el in enumerate(el for el in root if _localname(el.tag) == "trace"):
        attrs: dict[str, AttrValue] = {}
        events = []
        for child in trace_el:
            if _localname(child.tag) == "event":
                events.append(_parse_event(child))
            else:
                parsed = _parse_attr(child)
                if parsed:
                    attrs[parsed[0]] = parsed[1]
        case_id = str(attrs.pop("concept:name", f"trace-{index + 1}"))
        events.sort(key=lambda e: e.timestamp_ms)  # stable
        traces.append(Trace(case_id=case_id, events=tuple(events), attributes=attrs))
    return EventLog(traces=tuple(traces))


def _parse_event(el: ET.Element) -> Event:
    attrs: dict[str, AttrValue] = {}
    timestamp_ms: Optional[int] = None
    for child in el:
        tag = _localname(child.tag)
        key = child.get("key", "")
        if key == "time:timestamp":
            if tag != "date":
                raise XmlError(f"time:timestamp must be a date attribute, got <{tag}>")
            timestamp_ms = parse_rfc3339_ms(child.get("value", ""))
            continue
        parsed = _parse_attr(child)
        if parsed:
            attrs[parsed[0]] = parsed[1]
    if "concept:name" not in attrs:
        raise MissingActivityName("event without concept:name")
    if timestamp_ms is None:
        raise MissingTimestamp("event without time:timestamp")
    activity = str(attrs.pop("concept:name"))
    lifecycle = str(attrs.pop("lifecycle:transition", "complete")).lower()
    return Event(activity, timestamp_ms, lifecycle, attrs)


def _attr_xml(key: str, value: AttrValue, indent: str) -> str:
    if isinstance(value, bool):
        tag, rendered = "boolean", "true" if value else "false"
    elif isinstance(value, int):
        tag, rendered = "int", str(value)
    elif isinstance(value, float):
        tag, rendered = "float", repr(value)
    else:
        tag, rendered = "string", str(value)
    return f"{indent}<{tag} key={quoteattr(key)} value={quoteattr(rendered)}/>"


def write_xes(log: EventLog) -> str:
    """Serialize a log; parse_xes(write_xes(log)) == log on supported
    attribute types (string, int, float, boolean)."""
    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    out.write('<log xes.version="1.0" xmlns="http://www.xes-standard.org/">\n')
    for trace in log.traces:
        out.write("  <trace>\n")
        out.write(_attr_xml("concept:name", trace.case_id, "    ") + "\n")
        for key in sorted(trace.attributes):
            out.write(_attr_xml(key, trace.attributes[key], "    ") + "\n")
        for event in trace.events:
            out.write("    <event>\n")
            out.write(_attr_xml("concept:name", event.activity, "      ") + "\n")
            out.write(_attr_xml("lifecycle:transition", event.lifecycle, "      ") + "\n")
            out.write(
                f'      <date key="time:timestamp" '
                f"value={quoteattr(format_rfc3339_ms(event.timestamp_ms))}/>\n"
            )
            for key in sorted(event.attributes):
                out.write(_attr_xml(key, event.attributes[key], "      ") + "\n")
            out.write("    </event>\n")
        out.write("  </trace>\n")
    out.write("</log>\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# activity instances and statistics


@dataclass(frozen=True)
class Instance:
    activity: str
    start_ms: int
    complete_ms: int

    @property
    def duration_ms(self) -> int:
        return self.complete_ms - self.start_ms


def _pair_events(trace: Trace, activity: str) -> tuple[list[Instance], int, int]:
    """FIFO pairing of start/complete events; returns (instances,
    unpaired_starts, unpaired_completes)."""
    queue: list[int] = []
    instances = []
    unpaired_completes = 0
    for event in trace.events:
        if event.activity != activity:
            continue
        if event.lifecycle == "start":
            queue.append(event.timestamp_ms)
        elif event.lifecycle == "complete":
            if queue:
                instances.append(Instance(activity, queue.pop(0), event.timestamp_ms))
            else:
                unpaired_completes += 1
    return instances, len(queue), unpaired_completes


@dataclass(frozen=True)
class ActivityStats:
    activity: str
    instance_count: int
    min_s: Optional[float] = None
    max_s: Optional[float] = None
    mean_s: Optional[float] = None
    median_s: Optional[float] = None
    per_case_counts: dict[str, int] = field(default_factory=dict)
    unpaired_starts: int = 0
    unpaired_completes: int = 0


def activity_stats(log: EventLog, activity: str) -> ActivityStats:
    """Duration statistics over FIFO-paired instances of one activity.

    Unpaired starts/completes are counted separately and excluded from the
    duration statistics.
    """
    durations_ms: list[int] = []
    per_case: dict[str, int] = {}
    unpaired_starts = unpaired_completes = 0
    for trace in log.traces:
        instances, starts, completes = _pair_events(trace, activity)
        unpaired_starts += starts
        unpaired_completes += completes
        if instances:
            per_case[trace.case_id] = len(instances)
            durations_ms.extend(i.duration_ms for i in instances)
    if not durations_ms:
        return ActivityStats(
            activity,
            0,
            per_case_counts=per_case,
            unpaired_starts=unpaired_starts,
            unpaired_completes=unpaired_completes,
        )
    return ActivityStats(
        activity=activity,
        instance_count=len(durations_ms),
        min_s=min(durations_ms) / 1000,
        max_s=max(durations_ms) / 1000,
        mean_s=math.fsum(durations_ms) / len(durations_ms) / 1000,
        median_s=median(durations_ms) / 1000,
        per_case_counts=per_case,
        unpaired_starts=unpaired_starts,
        unpaired_completes=unpaired_completes,
    )


def stats_csv(stats: Iterable[ActivityStats]) -> str:
    """CSV export: activity,count,min_s,max_s,mean_s,median_s (3 decimals)."""
    lines = ["activity,count,min_s,max_s,mean_s,median_s"]
    for s in stats:
        if s.instance_count:
            lines.append(
                f'"{s.activity}",{s.instance_count},'
                f"{s.min_s:.3f},{s.max_s:.3f},{s.mean_s:.3f},{s.median_s:.3f}"
            )
        else:
            lines.append(f'"{s.activity}",0,,,,')
    return "\n".join(lines) + "\n"


def directly_follows(log: EventLog) -> dict[tuple[str, str], int]:
    """Directly-follows counts over chronologically ordered activity
    instances, exported for external flow visualization."""
    counts: dict[tuple[str, str], int] = {}
    for trace in log.traces:
        instances = _trace_instances(trace)
        for a, b in zip(instances, instances[1:]):
            key = (a.activity, b.activity)
            counts[key] = counts.get(key, 0) + 1
    return counts


def dfg_csv(counts: dict[tuple[str, str], int]) -> str:
    lines = ["from,to,count"]
    for (a, b), n in sorted(counts.items()):
        lines.append(f'"{a}","{b}",{n}')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# conformance checking


@dataclass(frozen=True)
class PositionRule:
    """Hygiene required immediately before/after every occurrence of an
    activity (no other patient-contact activity in between)."""

    where: Literal["before", "after"]
    activity: str


@dataclass(frozen=True)
class ResponseRule:
    """After every occurrence of a trigger event class, hygiene is required
    before the next patient-contact activity."""

    trigger: str


Rule = Union[PositionRule, ResponseRule]


@dataclass(frozen=True)
class NormativeSpec:
    sequence: tuple[str, ...]
    hygiene_activity: str = "Hand hygiene"
    contact_class: frozenset[str] = frozenset()
    external_events: frozenset[str] = frozenset()
    rules: tuple[Rule, ...] = ()

    def validate(self) -> None:
        known = set(self.sequence) | self.external_events
        for member in sorted(self.contact_class):
            if member not in self.sequence:
                raise SpecError(f"contact-class activity {member!r} not in sequence")
        for rule in self.rules:
            name = rule.activity if isinstance(rule, PositionRule) else rule.trigger
            if name not in known:
                raise SpecError(
                    f"rule references {name!r}, which is neither in the sequence "
                    "nor a declared external event class"
                )

    def to_json(self) -> dict:
        rules = []
        for rule in self.rules:
            if isinstance(rule, PositionRule):
                rules.append({"kind": "position", "where": rule.where, "activity": rule.activity})
            else:
                rules.append({"kind": "response", "after": rule.trigger})
        return {
            "sequence": list(self.sequence),
            "hygiene_activity": self.hygiene_activity,
            "contact_class": sorted(self.contact_class),
            "external_events": sorted(self.external_events),
            "rules": rules,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NormativeSpec":
        rules: list[Rule] = []
        for raw in obj.get("rules", []):
            if raw.get("kind") == "position":
                where = raw.get("where")
                if where not in ("before", "after"):
                    raise SpecError(f"position rule where must be before/after, got {where!r}")
                rules.append(PositionRule(where, raw["activity"]))
            elif raw.get("kind") == "response":
                rules.append(ResponseRule(raw["after"]))
            else:
                raise SpecError(f"unknown rule kind {raw.get('kind')!r}")
        spec = cls(
            sequence=tuple(obj["sequence"]),
            hygiene_activity=obj.get("hygiene_activity", "Hand hygiene"),
            contact_class=frozenset(obj.get("contact_class", ())),
            external_events=frozenset(obj.get("external_events", ())),
            rules=tuple(rules),
        )
        spec.validate()
        return spec


@dataclass(frozen=True)
class Deviation:
    kind: Literal["MissingHygiene", "OutOfOrder", "UnknownActivity"]
    position: int  # chronological instance index within the case
    detail: str


@dataclass(frozen=True)
class ConformanceResult:
    per_case: dict[str, tuple[Deviation, ...]]
    conforming_case_fraction: float

    def deviation_count(self) -> int:
        return sum(len(d) for d in self.per_case.values())


def _trace_instances(trace: Trace) -> list[Instance]:
    """Chronological activity instances of a trace.

    Activities that use start events in this trace contribute only their
    FIFO-paired instances (an orphaned event is not a valid execution);
    complete-only activities contribute one instant instance per event.
    """
    instances: list[Instance] = []
    for activity in {e.activity for e in trace.events}:
        lifecycles = {e.lifecycle for e in trace.events if e.activity == activity}
        if "start" in lifecycles:
            paired, _, _ = _pair_events(trace, activity)
            instances.extend(paired)
        else:
            instances.extend(
                Instance(activity, e.timestamp_ms, e.timestamp_ms)
                for e in trace.events
                if e.activity == activity and e.lifecycle == "complete"
            )
    instances.sort(key=lambda i: (i.start_ms, i.complete_ms, i.activity))
    return instances


def _check_case(instances: list[Instance], spec: NormativeSpec) -> list[Deviation]:
    deviations: list[Deviation] = []
    hygiene = [i for i in instances if i.activity == spec.hygiene_activity]
    contacts = [
        (pos, i) for pos, i in enumerate(instances) if i.activity in spec.contact_class
    ]
    alphabet = set(spec.sequence) | spec.external_events | {spec.hygiene_activity}

    for pos, inst in enumerate(instances):
        if inst.activity not in alphabet:
            deviations.append(
                Deviation("UnknownActivity", pos, f"unexpected activity {inst.activity!r}")
            )

    # order check over the normative sequence; hygiene occurrences are exempt
    # (their required placement is governed by the rules below) and a jump
    # back to the first step starts a new pass (repeated procedures)
    align_seq = [s for s in spec.sequence if s != spec.hygiene_activity]
    pointer = 0
    for pos, inst in enumerate(instances):
        name = inst.activity
        if name == spec.hygiene_activity or name not in set(align_seq):
            continue
        try:
            pointer = align_seq.index(name, pointer) + 1
        except ValueError:
            if align_seq and name == align_seq[0] and pointer == len(align_seq):
                pointer = 1  # full pass completed: the procedure restarts
            else:
                deviations.append(
                    Deviation(
                        "OutOfOrder",
                        pos,
                        f"{name!r} observed after its position in the normative sequence",
                    )
                )

    def contact_between(lo: int, hi: int, exclude: Instance) -> bool:
        return any(c.start_ms > lo and c.start_ms < hi and c is not exclude for _, c in contacts)

    for rule in spec.rules:
        if isinstance(rule, PositionRule):
            for pos, inst in enumerate(instances):
                if inst.activity != rule.activity:
                    continue
                if rule.where == "before":
                    ok = any(
                        h.complete_ms <= inst.start_ms
                        and not contact_between(h.complete_ms, inst.start_ms, inst)
                        for h in hygiene
                    )
                else:
                    ok = any(
                        h.start_ms >= inst.complete_ms
                        and not contact_between(inst.complete_ms, h.start_ms, inst)
                        for h in hygiene
                    )
                if not ok:
                    deviations.append(
                        Deviation(
                            "MissingHygiene",
                            pos,
                            f"no hygiene immediately {rule.where} {rule.activity!r}",
                        )
                    )
        else:
            for pos, inst in enumerate(instances):
                if inst.activity != rule.trigger:
                    continue
                following = [c for _, c in contacts if c.start_ms > inst.complete_ms]
                if not following:
                    continue
                next_contact = min(following, key=lambda c: c.start_ms)
                ok = any(
                    h.start_ms >= inst.complete_ms and h.complete_ms <= next_contact.start_ms
                    for h in hygiene
                )
                if not ok:
                    deviations.append(
                        Deviation(
                            "MissingHygiene",
                            pos,
                            f"no hygiene between {rule.trigger!r} and next contact "
                            f"{next_contact.activity!r}",
                        )
                    )

    deviations.sort(key=lambda d: (d.position, d.kind, d.detail))
    return deviations


def conformance_check(log: EventLog, spec: NormativeSpec) -> ConformanceResult:
    """Evaluate every rule for every case; a case conforms when it has zero
    deviations.  Results are ordered by case id."""
    spec.validate()
    per_case: dict[str, tuple[Deviation, ...]] = {}
    for trace in sorted(log.traces, key=lambda t: t.case_id):
        per_case[trace.case_id] = tuple(_check_case(_trace_instances(trace), spec))
    total = len(per_case)
    conforming = sum(1 for d in per_case.values() if not d)
    return ConformanceResult(
        per_case=per_case,
        conforming_case_fraction=(conforming / total) if total else 1.0,
    )


def delete_event(log: EventLog, case_id: str, event_index: int) -> EventLog:
    """Copy of the log with one event removed from one trace (test helper
    for deletion-sensitivity checks)."""
    traces = []
    for trace in log.traces:
        if trace.case_id == case_id:
            events = trace.events[:event_index] + trace.events[event_index + 1 :]
            traces.append(replace(trace, events=events))
        else:
            traces.append(trace)
    return EventLog(traces=tuple(traces))
