"""Sustainability indicators: classification bands, the check-in fluency
index, the per-day carbon footprint index, and hand-hygiene compliance
statistics.

The two composite indices are implemented twice on purpose: as hard-coded
arithmetic here and as formulas for the DSL in :mod:`susbp.formula`; tests
assert both routes agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import median
from typing import Iterable, Literal, Optional, Sequence

from .errors import DomainError

UNCLASSIFIED = "Unclassified"

#: names a Measurement may use instead of a formula
BUILTIN_MEASUREMENTS = frozenset({"mcfi", "cfid", "hygiene_compliance"})

MCFI_FORMULA = "(s_bar + (1 - f_bar) + p_bar) / 3"
CFID_FORMULA = "((e_app * ef) + (e_hvac * ef) + em) / (n * d)"


class NoData(DomainError):
    pass


class InvalidInputs(DomainError):
    pass


# ---------------------------------------------------------------------------
# classification bands


@dataclass(frozen=True)
class ClassificationBand:
    """Half-open or closed interval with a display label; ±inf allowed."""

    label: str
    lower: float
    upper: float
    lower_inclusive: bool = True
    upper_inclusive: bool = True

    def __post_init__(self):
        if self.lower > self.upper:
            raise InvalidInputs(f"band {self.label!r}: lower > upper")
        if self.lower == self.upper and not (self.lower_inclusive and self.upper_inclusive):
            raise InvalidInputs(f"band {self.label!r}: degenerate band must be closed")

    def contains(self, value: float) -> bool:
        above = value > self.lower or (self.lower_inclusive and value == self.lower)
        below = value < self.upper or (self.upper_inclusive and value == self.upper)
        return above and below

    def distance(self, value: float) -> float:
        if self.contains(value):
            return 0.0
        if value < self.lower or (value == self.lower and not self.lower_inclusive):
            return self.lower - value
        return value - self.upper


def bands_overlap(a: ClassificationBand, b: ClassificationBand) -> bool:
    # intersection bounds; at equal endpoints the exclusive side wins
    lo, lo_excl = max((a.lower, not a.lower_inclusive), (b.lower, not b.lower_inclusive))
    hi, hi_incl = min((a.upper, a.upper_inclusive), (b.upper, b.upper_inclusive))
    if lo < hi:
        return True
    return lo == hi and not lo_excl and hi_incl


INF = math.inf

#: check-in fluency bands; the published ranges leave gaps, kept verbatim
MCFI_BANDS = (
    ClassificationBand("poor: requires immediate action", -INF, 0.25, False, True),
    ClassificationBand("moderate: requires review", 0.26, 0.5),
    ClassificationBand("acceptable", 0.6, 0.75),
    ClassificationBand("excellent", 0.76, 1.0),
)

#: carbon-footprint-per-day bands (kg CO2e per guest per day)
CFID_BANDS = (
    ClassificationBand("excellent", 0.0, 2.2),
    ClassificationBand("acceptable", 2.21, 3.5),
    ClassificationBand("moderate: requires review", 3.51, 6.0),
    ClassificationBand("poor: requires immediate action", 6.0, INF, False, False),
)

Policy = Literal["strict", "nearest"]


def classify(
    value: float,
    bands: Sequence[ClassificationBand],
    policy: Policy = "strict",
) -> str:
    """Map a value to a band label.

    "strict" returns the unique containing band or UNCLASSIFIED (the
    published ranges have gaps); "nearest" snaps gap values to the band
    with the closest boundary, ties going to the lower band.
    """
    containing = [b for b in bands if b.contains(value)]
    if containing:
        return containing[0].label
    if policy == "strict" or not bands:
        return UNCLASSIFIED
    # distances rounded so float noise cannot hide a tie (ties -> lower band)
    return min(bands, key=lambda b: (round(b.distance(value), 9), b.lower, b.upper)).label


# ---------------------------------------------------------------------------
# indicator values


@dataclass(frozen=True)
class IndicatorValue:
    indicator_ref: str
    value: float
    unit: str
    observation_period: Optional[tuple[str, str]] = None
    band_label: str = UNCLASSIFIED
    provenance: tuple[str, ...] = ()

    def display(self, decimals: int) -> str:
        return f"{self.value:.{decimals}f}"

    def to_json(self) -> dict:
        return {
            "indicator": self.indicator_ref,
            "value": self.value,
            "unit": self.unit,
            "observation_period": list(self.observation_period) if self.observation_period else None,
            "band": self.band_label,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IndicatorValue":
        period = obj.get("observation_period")
        return cls(
            indicator_ref=obj["indicator"],
            value=float(obj["value"]),
            unit=obj.get("unit", ""),
            observation_period=tuple(period) if period else None,
            band_label=obj.get("band", UNCLASSIFIED),
            provenance=tuple(obj.get("provenance", ())),
        )


# ---------------------------------------------------------------------------
# MCFI (manual check-in fluency index)


@dataclass(frozen=True)
class SurveyResponse:
    """One guest survey row: satisfaction 0-10, friction count, perceived time 0-10."""

    case_ref: str
    satisfaction: float
    frictions: int
    perceived_time: float

    def __post_init__(self):
        if not 0 <= self.satisfaction <= 10:
            raise InvalidInputs(f"satisfaction out of [0,10]: {self.satisfaction}")
        if not 0 <= self.perceived_time <= 10:
            raise InvalidInputs(f"perceived time out of [0,10]: {self.perceived_time}")
        if self.frictions < 0:
            raise InvalidInputs(f"negative friction count: {self.frictions}")


@dataclass(frozen=True)
class McfiAggregates:
    s_bar: float
    f_bar: float
    p_bar: float
    f_max: int
    n_surveys: int


def mcfi_aggregates(surveys: Sequence[SurveyResponse]) -> McfiAggregates:
    if not surveys:
        raise NoData("no survey responses in period")
    f_max = max(s.frictions for s in surveys)
    s_bar = math.fsum(s.satisfaction / 10 for s in surveys) / len(surveys)
    p_bar = math.fsum(s.perceived_time / 10 for s in surveys) / len(surveys)
    # friction-free periods have no reference maximum; define the mean as 0
    f_bar = (
        math.fsum(s.frictions / f_max for s in surveys) / len(surveys) if f_max > 0 else 0.0
    )
    return McfiAggregates(s_bar, f_bar, p_bar, f_max, len(surveys))


def mcfi_from_aggregates(
    agg: McfiAggregates, period: Optional[tuple[str, str]] = None
) -> IndicatorValue:
    value = (agg.s_bar + (1 - agg.f_bar) + agg.p_bar) / 3
    return IndicatorValue(
        indicator_ref="MCFI",
        value=value,
        unit="",
        observation_period=period,
        band_label=classify(value, MCFI_BANDS),
        provenance=(
            f"s_bar={agg.s_bar!r}",
            f"f_bar={agg.f_bar!r}",
            f"p_bar={agg.p_bar!r}",
            f"f_max={agg.f_max}",
            f"n_surveys={agg.n_surveys}",
        ),
    )


def compute_mcfi(
    surveys: Sequence[SurveyResponse], period: Optional[tuple[str, str]] = None
) -> IndicatorValue:
    """Fluency index in [0,1] from normalized survey means."""
    return mcfi_from_aggregates(mcfi_aggregates(surveys), period)


# ---------------------------------------------------------------------------
# CFID (carbon footprint index per day)


@dataclass(frozen=True)
class CfidInputs:
    e_appliances_kwh: float
    e_hvac_kwh: float
    ef_energy_kgco2e_per_kwh: float
    em_material_kgco2e: float
    n_guests: int = 1
    n_days: int = 1

    def __post_init__(self):
        for name in ("e_appliances_kwh", "e_hvac_kwh", "ef_energy_kgco2e_per_kwh", "em_material_kgco2e"):
            if getattr(self, name) < 0:
                raise InvalidInputs(f"{name} must be >= 0")


CfidMode = Literal["per-stay", "aggregate-average"]


def compute_cfid(
    inputs: CfidInputs,
    mode: CfidMode = "aggregate-average",
    period: Optional[tuple[str, str]] = None,
) -> IndicatorValue:
    """kg CO2e per guest per day.

    "per-stay" divides by the stay's actual guests x days; "aggregate-average"
    expects energies and material emissions already averaged per guest-day
    and divides by 1.
    """
    if mode == "per-stay":
        if inputs.n_guests < 1 or inputs.n_days < 1:
            raise InvalidInputs("per-stay mode requires n_guests >= 1 and n_days >= 1")
        divisor = inputs.n_guests * inputs.n_days
    else:
        divisor = 1
    ef = inputs.ef_energy_kgco2e_per_kwh
    value = (
        (inputs.e_appliances_kwh * ef) + (inputs.e_hvac_kwh * ef) + inputs.em_material_kgco2e
    ) / divisor
    return IndicatorValue(
        indicator_ref="CFID",
        value=value,
        unit="kg CO2e/guest-day",
        observation_period=period,
        band_label=classify(value, CFID_BANDS),
        provenance=(
            f"mode={mode}",
            f"e_appliances_kwh={inputs.e_appliances_kwh!r}",
            f"e_hvac_kwh={inputs.e_hvac_kwh!r}",
            f"ef={ef!r}",
            f"em={inputs.em_material_kgco2e!r}",
            f"n_guests={inputs.n_guests}",
            f"n_days={inputs.n_days}",
        ),
    )


def em_material_average(cards_replaced: int, total_stays: int, kg_per_card: float) -> float:
    """Average key-card replacement emissions per stay (kg CO2e)."""
    if total_stays <= 0:
        raise InvalidInputs("total_stays must be > 0")
    if cards_replaced < 0 or kg_per_card < 0:
        raise InvalidInputs("cards_replaced and kg_per_card must be >= 0")
    return (cards_replaced * kg_per_card) / total_stays


# ---------------------------------------------------------------------------
# hand-hygiene compliance


@dataclass(frozen=True)
class ComplianceThresholds:
    """WHO-recommended sanitizer amount range (ml) and minimum duration (s)."""

    amount_ml_range: tuple[float, float] = (3.0, 5.0)
    min_duration_s: float = 30.0

    def __post_init__(self):
        lo, hi = self.amount_ml_range
        if not lo < hi:
            raise InvalidInputs("amount_ml_range lower bound must be < upper bound")


@dataclass(frozen=True)
class ComplianceStats:
    group: str
    episode_count: int
    amount_ml: Optional[dict] = None  # min/max/mean/median over non-flagged episodes
    duration_s: Optional[dict] = None
    fraction_amount_in_range: Optional[float] = None
    fraction_duration_met: Optional[float] = None
    negative_amount_count: int = 0

    def to_json(self) -> dict:
        return {
            "group": self.group,
            "episode_count": self.episode_count,
            "amount_ml": self.amount_ml,
            "duration_s": self.duration_s,
            "fraction_amount_in_range": self.fraction_amount_in_range,
            "fraction_duration_met": self.fraction_duration_met,
            "negative_amount_count": self.negative_amount_count,
        }


def _stats(values: Sequence[float]) -> Optional[dict]:
    if not values:
        return None
    return {
        "min": min(values),
        "max": max(values),
        "mean": math.fsum(values) / len(values),
        "median": median(values),
    }


GroupBy = Literal["case", "activity", "scenario"]


def hygiene_compliance(
    episodes: Iterable,
    thresholds: ComplianceThresholds = ComplianceThresholds(),
    group_by: GroupBy = "activity",
    scenario_labels: Optional[dict[str, str]] = None,
) -> list[ComplianceStats]:
    """Per-group compliance statistics over detected hygiene episodes.

    "activity" treats every episode as one observation in a single group;
    "case" groups by episode case_ref; "scenario" maps case_ref through
    scenario_labels.  Episodes flagged NegativeAmount are excluded from
    amount statistics and fractions but stay in counts.
    """
    groups: dict[str, list] = {}
    for ep in episodes:
        if group_by == "activity":
            key = "all"
        elif group_by == "case":
            key = ep.case_ref or "unassigned"
        else:
            key = (scenario_labels or {}).get(ep.case_ref, "unlabeled")
        groups.setdefault(key, []).append(ep)

    lo, hi = thresholds.amount_ml_range
    out = []
    for key in sorted(groups):
        eps = groups[key]
        clean = [ep for ep in eps if "NegativeAmount" not in ep.quality]
        amounts = [ep.amount_ml for ep in clean]
        durations = [ep.duration_s for ep in eps]
        out.append(
            ComplianceStats(
                group=key,
                episode_count=len(eps),
                amount_ml=_stats(amounts),
                duration_s=_stats(durations),
                fraction_amount_in_range=(
                    sum(1 for a in amounts if lo <= a <= hi) / len(amounts) if amounts else None
                ),
                fraction_duration_met=(
                    sum(1 for ep in eps if ep.duration_s >= thresholds.min_duration_s) / len(eps)
                    if eps
                    else None
                ),
                negative_amount_count=len(eps) - len(clean),
            )
        )
    return out
