"""Sustainability-aware, IoT-enhanced BP model: goals, values, indicators,
measurements, regulations, activities, impacts, stakeholders, devices, and
process fragments, with referential-integrity validation and link queries.

Serialized as JSON (see model.schema.json at the repo root); ids are opaque,
case-sensitive strings.  Models are immutable after loading and safe to
share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from . import formula
from .bpmn import Fragment
from .errors import DomainError, UnknownIdError
from .indicators import BUILTIN_MEASUREMENTS, ClassificationBand, bands_overlap


class Dimension(Enum):
    INDIVIDUAL = "Individual"
    SOCIAL = "Social"
    ECONOMIC = "Economic"
    TECHNICAL = "Technical"
    ENVIRONMENTAL = "Environmental"


class IndicatorKind(Enum):
    QUANTITATIVE = "Quantitative"
    QUALITATIVE = "Qualitative"


class ActivityKind(Enum):
    BUSINESS = "Business"
    SUSTAINABLE = "Sustainable"


class DeviceKind(Enum):
    SENSOR = "Sensor"
    ACTUATOR = "Actuator"
    COMPOSITE = "Composite"


class ImpactDirection(Enum):
    DIRECT = "Direct"
    INDIRECT = "Indirect"


class ContributionSign(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class ModelSyntaxError(DomainError):
    """The document is not well-formed JSON or misses required structure."""


class ModelValidationError(DomainError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        summary = "; ".join(f"{v.subject}: {v.rule}" for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"{len(violations)} violation(s): {summary}{more}")


@dataclass(frozen=True)
class Violation:
    subject: str
    rule: str


@dataclass(frozen=True)
class Goal:
    id: str
    description: str
    dimensions: frozenset[Dimension]


@dataclass(frozen=True)
class Value:
    id: str
    name: str
    dimensions: frozenset[Dimension]
    regulation_refs: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Indicator:
    id: str
    name: str
    kind: IndicatorKind
    value_refs: frozenset[str]
    measurement_refs: frozenset[str]
    bands: tuple[ClassificationBand, ...] = ()
    unit: str = ""


@dataclass(frozen=True)
class Measurement:
    id: str
    formula: str  # DSL source, or a name in BUILTIN_MEASUREMENTS
    data_source_refs: frozenset[str] = frozenset()
    observation_period_required: bool = False


@dataclass(frozen=True)
class Regulation:
    id: str
    name: str
    citation: str = ""


@dataclass(frozen=True)
class Activity:
    id: str
    name: str
    kind: ActivityKind
    implemented_by: frozenset[str] = frozenset()  # fragment ids
    influences: frozenset[str] = frozenset()  # indicator ids
    contributes_to: frozenset[tuple[str, ContributionSign]] = frozenset()


@dataclass(frozen=True)
class Impact:
    id: str
    description: str
    caused_by: str  # activity id
    direction: ImpactDirection


@dataclass(frozen=True)
class Stakeholder:
    id: str
    name: str
    role: str = ""


@dataclass(frozen=True)
class IoTDeviceDescriptor:
    id: str
    name: str
    kind: DeviceKind
    schema_ref: str = ""
    measures: frozenset[str] = frozenset()  # measurement ids
    performs: frozenset[str] = frozenset()  # BPMN task ids


@dataclass(frozen=True)
class SustainabilityModel:
    id: str
    goals: dict[str, Goal] = field(default_factory=dict)
    values: dict[str, Value] = field(default_factory=dict)
    indicators: dict[str, Indicator] = field(default_factory=dict)
    measurements: dict[str, Measurement] = field(default_factory=dict)
    regulations: dict[str, Regulation] = field(default_factory=dict)
    activities: dict[str, Activity] = field(default_factory=dict)
    impacts: dict[str, Impact] = field(default_factory=dict)
    stakeholders: dict[str, Stakeholder] = field(default_factory=dict)
    devices: dict[str, IoTDeviceDescriptor] = field(default_factory=dict)
    fragments: dict[str, Fragment] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# decoding / encoding


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise ModelSyntaxError(f"{context}: missing required key {key!r}")
    return obj[key]


def _enum(cls, raw: str, context: str):
    try:
        return cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in cls)
        raise ModelSyntaxError(f"{context}: {raw!r} is not one of {allowed}") from None


def _dimensions(raw: Iterable[str], context: str) -> frozenset[Dimension]:
    return frozenset(_enum(Dimension, d, context) for d in raw)


def _band(obj: dict, context: str) -> ClassificationBand:
    def bound(key: str, sign: float) -> float:
        raw = obj.get(key)
        if raw is None or raw in ("-inf", "inf", "+inf"):
            return sign * float("inf")
        return float(raw)

    return ClassificationBand(
        label=_require(obj, "label", context),
        lower=bound("lower", -1.0),
        upper=bound("upper", 1.0),
        lower_inclusive=bool(obj.get("lower_inclusive", True)),
        upper_inclusive=bool(obj.get("upper_inclusive", True)),
    )


def _band_json(band: ClassificationBand) -> dict:
    def bound(value: float) -> object:
        if value == float("inf"):
            return "inf"
        if value == float("-inf"):
            return "-inf"
        return value

    return {
        "label": band.label,
        "lower": bound(band.lower),
        "upper": bound(band.upper),
        "lower_inclusive": band.lower_inclusive,
        "upper_inclusive": band.upper_inclusive,
    }


def _decode(doc: dict) -> SustainabilityModel:
    if not isinstance(doc, dict):
        raise ModelSyntaxError("top level must be a JSON object")

    def collect(key: str, build) -> dict:
        out = {}
        for i, raw in enumerate(doc.get(key, [])):
            context = f"{key}[{i}]"
            if not isinstance(raw, dict):
                raise ModelSyntaxError(f"{context}: must be an object")
            item = build(raw, context)
            if item.id in out:
                raise ModelSyntaxError(f"{context}: duplicate id {item.id!r}")
            out[item.id] = item
        return out

    goals = collect(
        "goals",
        lambda o, c: Goal(
            id=_require(o, "id", c),
            description=o.get("description", ""),
            dimensions=_dimensions(o.get("dimensions", []), c),
        ),
    )
    values = collect(
        "values",
        lambda o, c: Value(
            id=_require(o, "id", c),
            name=o.get("name", ""),
            dimensions=_dimensions(o.get("dimensions", []), c),
            regulation_refs=frozenset(o.get("regulations", [])),
        ),
    )
    indicators = collect(
        "indicators",
        lambda o, c: Indicator(
            id=_require(o, "id", c),
            name=o.get("name", ""),
            kind=_enum(IndicatorKind, o.get("kind", "Quantitative"), c),
            value_refs=frozenset(o.get("values", [])),
            measurement_refs=frozenset(o.get("measurements", [])),
            bands=tuple(_band(b, c) for b in o.get("bands", [])),
            unit=o.get("unit", ""),
        ),
    )
    measurements = collect(
        "measurements",
        lambda o, c: Measurement(
            id=_require(o, "id", c),
            formula=_require(o, "formula", c),
            data_source_refs=frozenset(o.get("data_sources", [])),
            observation_period_required=bool(o.get("observation_period_required", False)),
        ),
    )
    regulations = collect(
        "regulations",
        lambda o, c: Regulation(
            id=_require(o, "id", c), name=o.get("name", ""), citation=o.get("citation", "")
        ),
    )
    activities = collect(
        "activities",
        lambda o, c: Activity(
            id=_require(o, "id", c),
            name=o.get("name", ""),
            kind=_enum(ActivityKind, _require(o, "kind", c), c),
            implemented_by=frozenset(o.get("implemented_by", [])),
            influences=frozenset(o.get("influences", [])),
            contributes_to=frozenset(
                (
                    _require(e, "value", f"{c}.contributes_to"),
                    _enum(ContributionSign, _require(e, "sign", f"{c}.contributes_to"), c),
                )
                for e in o.get("contributes_to", [])
            ),
        ),
    )
    impacts = collect(
        "impacts",
        lambda o, c: Impact(
            id=_require(o, "id", c),
            description=o.get("description", ""),
            caused_by=_require(o, "caused_by", c),
            direction=_enum(ImpactDirection, o.get("direction", "Direct"), c),
        ),
    )
    stakeholders = collect(
        "stakeholders",
        lambda o, c: Stakeholder(
            id=_require(o, "id", c), name=o.get("name", ""), role=o.get("role", "")
        ),
    )
    devices = collect(
        "devices",
        lambda o, c: IoTDeviceDescriptor(
            id=_require(o, "id", c),
            name=o.get("name", ""),
            kind=_enum(DeviceKind, _require(o, "kind", c), c),
            schema_ref=o.get("schema", ""),
            measures=frozenset(o.get("measures", [])),
            performs=frozenset(o.get("performs", [])),
        ),
    )
    fragments = collect(
        "fragments",
        lambda o, c: Fragment(
            id=_require(o, "id", c),
            process_ref=_require(o, "process", c),
            node_ids=frozenset(_require(o, "nodes", c)),
            value_refs=frozenset(o.get("values", [])),
        ),
    )

    return SustainabilityModel(
        id=doc.get("id", "model"),
        goals=goals,
        values=values,
        indicators=indicators,
        measurements=measurements,
        regulations=regulations,
        activities=activities,
        impacts=impacts,
        stakeholders=stakeholders,
        devices=devices,
        fragments=fragments,
    )


def save_model(model: SustainabilityModel) -> str:
    """Serialize a model to canonical JSON (sorted ids, stable bytes)."""
    doc = {
        "id": model.id,
        "goals": [
            {
                "id": g.id,
                "description": g.description,
                "dimensions": sorted(d.value for d in g.dimensions),
            }
            for g in _sorted(model.goals)
        ],
        "values": [
            {
                "id": v.id,
                "name": v.name,
                "dimensions": sorted(d.value for d in v.dimensions),
                "regulations": sorted(v.regulation_refs),
            }
            for v in _sorted(model.values)
        ],
        "indicators": [
            {
                "id": i.id,
                "name": i.name,
                "kind": i.kind.value,
                "values": sorted(i.value_refs),
                "measurements": sorted(i.measurement_refs),
                "bands": [_band_json(b) for b in i.bands],
                "unit": i.unit,
            }
            for i in _sorted(model.indicators)
        ],
        "measurements": [
            {
                "id": m.id,
                "formula": m.formula,
                "data_sources": sorted(m.data_source_refs),
                "observation_period_required": m.observation_period_required,
            }
            for m in _sorted(model.measurements)
        ],
        "regulations": [
            {"id": r.id, "name": r.name, "citation": r.citation}
            for r in _sorted(model.regulations)
        ],
        "activities": [
            {
                "id": a.id,
                "name": a.name,
                "kind": a.kind.value,
                "implemented_by": sorted(a.implemented_by),
                "influences": sorted(a.influences),
                "contributes_to": [
                    {"value": value_id, "sign": sign.value}
                    for value_id, sign in sorted(
                        a.contributes_to, key=lambda c: (c[0], c[1].value)
                    )
                ],
            }
            for a in _sorted(model.activities)
        ],
        "impacts": [
            {
                "id": i.id,
                "description": i.description,
                "caused_by": i.caused_by,
                "direction": i.direction.value,
            }
            for i in _sorted(model.impacts)
        ],
        "stakeholders": [
            {"id": s.id, "name": s.name, "role": s.role} for s in _sorted(model.stakeholders)
        ],
        "devices": [
            {
                "id": d.id,
                "name": d.name,
                "kind": d.kind.value,
                "schema": d.schema_ref,
                "measures": sorted(d.measures),
                "performs": sorted(d.performs),
            }
            for d in _sorted(model.devices)
        ],
        "fragments": [f.to_json() for f in _sorted(model.fragments)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _sorted(collection: dict):
    return [collection[k] for k in sorted(collection)]


# ---------------------------------------------------------------------------
# validation


def validate_model(model: SustainabilityModel) -> list[Violation]:
    """All invariant and referential-integrity checks; violations are data,
    an empty list means the model is consistent."""
    out: list[Violation] = []

    def check(condition: bool, subject: str, rule: str):
        if not condition:
            out.append(Violation(subject, rule))

    for goal in model.goals.values():
        check(bool(goal.dimensions), goal.id, "goal requires >=1 dimension")
    for value in model.values.values():
        check(bool(value.dimensions), value.id, "value requires >=1 dimension")
        for ref in sorted(value.regulation_refs):
            check(ref in model.regulations, value.id, f"dangling regulation_ref {ref!r}")

    referenced_measurements: set[str] = set()
    for ind in model.indicators.values():
        check(bool(ind.measurement_refs), ind.id, "indicator requires >=1 measurement")
        check(bool(ind.value_refs), ind.id, "indicator requires >=1 value")
        for ref in sorted(ind.measurement_refs):
            if ref in model.measurements:
                referenced_measurements.add(ref)
            else:
                out.append(Violation(ind.id, f"dangling measurement_ref {ref!r}"))
        for ref in sorted(ind.value_refs):
            check(ref in model.values, ind.id, f"dangling value_ref {ref!r}")
        for i, a in enumerate(ind.bands):
            for b in ind.bands[i + 1 :]:
                check(
                    not bands_overlap(a, b),
                    ind.id,
                    f"bands overlap: {a.label!r} and {b.label!r}",
                )

    for m in model.measurements.values():
        check(
            m.id in referenced_measurements,
            m.id,
            "measurement not referenced by any indicator",
        )
        if m.formula not in BUILTIN_MEASUREMENTS:
            try:
                formula.parse_formula(m.formula)
            except formula.ParseError as exc:
                out.append(
                    Violation(m.id, f"formula neither parses nor names a builtin: {exc}")
                )

    for act in model.activities.values():
        if act.kind is ActivityKind.BUSINESS:
            check(
                bool(act.implemented_by),
                act.id,
                "business activity requires >=1 fragment",
            )
        for ref in sorted(act.implemented_by):
            check(ref in model.fragments, act.id, f"dangling fragment ref {ref!r}")
        for ref in sorted(act.influences):
            check(ref in model.indicators, act.id, f"dangling indicator ref {ref!r}")
        for value_id in sorted({value_id for value_id, _ in act.contributes_to}):
            check(value_id in model.values, act.id, f"dangling value ref {value_id!r}")

    for imp in model.impacts.values():
        check(
            imp.caused_by in model.activities,
            imp.id,
            f"dangling activity ref {imp.caused_by!r}",
        )

    for dev in model.devices.values():
        if dev.kind is DeviceKind.SENSOR:
            check(not dev.performs, dev.id, "sensor cannot perform tasks")
        if dev.kind is DeviceKind.ACTUATOR:
            check(not dev.measures, dev.id, "actuator cannot derive measurements")
        for ref in sorted(dev.measures):
            check(ref in model.measurements, dev.id, f"dangling measurement_ref {ref!r}")

    for frag in model.fragments.values():
        check(bool(frag.node_ids), frag.id, "fragment requires >=1 node")
        for ref in sorted(frag.value_refs):
            check(ref in model.values, frag.id, f"dangling value ref {ref!r}")

    return out


def load_model(document: str) -> SustainabilityModel:
    """Parse and validate a model JSON document.

    Raises ModelSyntaxError on malformed JSON/structure and
    ModelValidationError (carrying the violation list) on inconsistency.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"malformed JSON: {exc}") from exc
    model = _decode(doc)
    violations = validate_model(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def load_model_file(path) -> SustainabilityModel:
    with open(path, encoding="utf-8") as handle:
        return load_model(handle.read())


# ---------------------------------------------------------------------------
# link queries


def indicators_for_value(model: SustainabilityModel, value_id: str) -> list[str]:
    if value_id not in model.values:
        raise UnknownIdError(f"unknown value id {value_id!r}")
    return sorted(i.id for i in model.indicators.values() if value_id in i.value_refs)


def fragments_for_value(model: SustainabilityModel, value_id: str) -> list[str]:
    if value_id not in model.values:
        raise UnknownIdError(f"unknown value id {value_id!r}")
    return sorted(f.id for f in model.fragments.values() if value_id in f.value_refs)


def devices_for_measurement(model: SustainabilityModel, measurement_id: str) -> list[str]:
    if measurement_id not in model.measurements:
        raise UnknownIdError(f"unknown measurement id {measurement_id!r}")
    return sorted(d.id for d in model.devices.values() if measurement_id in d.measures)


def activities_influencing(model: SustainabilityModel, indicator_id: str) -> list[str]:
    if indicator_id not in model.indicators:
        raise UnknownIdError(f"unknown indicator id {indicator_id!r}")
    return sorted(a.id for a in model.activities.values() if indicator_id in a.influences)


LINK_QUERIES = {
    "indicators_for_value": indicators_for_value,
    "fragments_for_value": fragments_for_value,
    "devices_for_measurement": devices_for_measurement,
    "activities_influencing": activities_influencing,
}


def query_links(model: SustainabilityModel, query: str, ref: str) -> list[str]:
    """Dispatch one of the named association queries; ids sorted."""
    if query not in LINK_QUERIES:
        raise UnknownIdError(
            f"unknown query {query!r}; expected one of {sorted(LINK_QUERIES)}"
        )
    return LINK_QUERIES[query](model, ref)
