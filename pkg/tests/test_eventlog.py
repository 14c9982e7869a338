import pytest
from hypothesis import given, settings, strategies as st

from susbp.errors import XmlError
from susbp.eventlog import (
    Event,
    EventLog,
    MissingActivityName,
    MissingTimestamp,
    NormativeSpec,
    PositionRule,
    ResponseRule,
    SpecError,
    Trace,
    activity_stats,
    conformance_check,
    delete_event,
    dfg_csv,
    directly_follows,
    parse_xes,
    stats_csv,
    write_xes,
)

T0 = 1_718_700_000_000


def _log(*traces):
    return EventLog(traces=tuple(traces))


def _trace(case, pairs, attrs=None):
    """pairs: (activity, start_offset_s, duration_s) or (activity, offset_s)
    for instant complete-only events."""
    events = []
    for pair in pairs:
        if len(pair) == 3:
            activity, start, duration = pair
            events.append(Event(activity, T0 + int(start * 1000), "start"))
            events.append(Event(activity, T0 + int((start + duration) * 1000), "complete"))
        else:
            activity, at = pair
            events.append(Event(activity, T0 + int(at * 1000), "complete"))
    events.sort(key=lambda e: e.timestamp_ms)
    return Trace(case_id=case, events=tuple(events), attributes=attrs or {})


SIMPLE_XES = """<?xml version="1.0"?>
<log xmlns="http://www.xes-standard.org/">
 <trace>
  <string key="concept:name" value="case-1"/>
  <event>
   <string key="concept:name" value="Hand hygiene"/>
   <string key="lifecycle:transition" value="start"/>
   <date key="time:timestamp" value="2024-06-18T09:00:00.000+00:00"/>
  </event>
  <event>
   <string key="concept:name" value="Hand hygiene"/>
   <string key="lifecycle:transition" value="complete"/>
   <date key="time:timestamp" value="2024-06-18T09:00:20.000+00:00"/>
  </event>
 </trace>
</log>
"""


def test_parse_simple_log():
    log = parse_xes(SIMPLE_XES)
    assert len(log.traces) == 1
    trace = log.traces[0]
    assert trace.case_id == "case-1"
    assert len(trace.events) == 2
    assert trace.events[0].lifecycle == "start"


def test_missing_timestamp():
    broken = SIMPLE_XES.replace(
        '<date key="time:timestamp" value="2024-06-18T09:00:00.000+00:00"/>', ""
    )
    with pytest.raises(MissingTimestamp):
        parse_xes(broken)


def test_missing_activity_name():
    broken = SIMPLE_XES.replace('<string key="concept:name" value="Hand hygiene"/>', "")
    with pytest.raises(MissingActivityName):
        parse_xes(broken)


def test_malformed_xml():
    with pytest.raises(XmlError):
        parse_xes("<log><trace>")


def test_lifecycle_defaults_to_complete():
    xml = SIMPLE_XES.replace('<string key="lifecycle:transition" value="start"/>', "")
    log = parse_xes(xml)
    assert log.traces[0].events[0].lifecycle == "complete"


def test_events_sorted_within_trace():
    xml = """<log><trace><string key="concept:name" value="c"/>
      <event><string key="concept:name" value="B"/>
        <date key="time:timestamp" value="2024-01-01T00:00:02Z"/></event>
      <event><string key="concept:name" value="A"/>
        <date key="time:timestamp" value="2024-01-01T00:00:01Z"/></event>
    </trace></log>"""
    log = parse_xes(xml)
    assert [e.activity for e in log.traces[0].events] == ["A", "B"]


def test_demo_log_has_17_traces(demo_log):
    assert len(demo_log.traces) == 17
    assert {t.attributes["scenario"] for t in demo_log.traces} == {
        "basic",
        "disturbance",
        "two-patients",
    }


# ---------------------------------------------------------------------------
# write_xes round-trips


def test_write_empty_log():
    text = write_xes(_log())
    assert parse_xes(text) == _log()


def test_single_trace_roundtrip():
    log = _log(_trace("c1", [("Hand hygiene", 0, 20)], attrs={"scenario": "basic"}))
    assert parse_xes(write_xes(log)) == log


def test_extra_attributes_preserved():
    trace = Trace(
        case_id="c1",
        events=(
            Event(
                "Hand hygiene",
                T0,
                "complete",
                {"amount_ml": 4.0, "ok": True, "press_count": 2, "operator": "s1"},
            ),
        ),
        attributes={"scenario": "basic", "day": 2},
    )
    log = _log(trace)
    assert parse_xes(write_xes(log)) == log


# control characters are not representable in XML 1.0, so the supported
# attribute domain excludes them
_attr_value = st.one_of(
    st.text(
        alphabet=st.characters(codec="utf-8", exclude_categories=("Cc", "Cs")),
        max_size=12,
    ),
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=32).map(float),
    st.booleans(),
)

_event = st.builds(
    Event,
    activity=st.sampled_from(["A", "B", "Hand hygiene", "C check"]),
    timestamp_ms=st.integers(T0, T0 + 10**7),
    lifecycle=st.sampled_from(["start", "complete"]),
    attributes=st.dictionaries(
        st.sampled_from(["amount", "note", "count", "flagged"]), _attr_value, max_size=3
    ),
)


@st.composite
def _random_log(draw, max_traces=4, max_events=8):
    traces = []
    for i in range(draw(st.integers(0, max_traces))):
        events = sorted(
            draw(st.lists(_event, max_size=max_events)), key=lambda e: e.timestamp_ms
        )
        traces.append(
            Trace(
                case_id=f"case-{i}",
                events=tuple(events),
                attributes=draw(
                    st.dictionaries(st.sampled_from(["scenario", "day"]), _attr_value, max_size=2)
                ),
            )
        )
    return EventLog(traces=tuple(traces))


@settings(max_examples=60)
@given(_random_log())
def test_roundtrip_random_logs(log):
    assert parse_xes(write_xes(log)) == log


# ---------------------------------------------------------------------------
# activity statistics


def test_single_instance_stats():
    log = _log(_trace("c1", [("Hand hygiene", 0, 20)]))
    stats = activity_stats(log, "Hand hygiene")
    assert stats.instance_count == 1
    assert stats.min_s == stats.max_s == stats.mean_s == stats.median_s == 20.0


def test_crafted_log_mean_20s():
    durations = [18, 22, 19, 21, 20, 20, 17, 23, 20, 20]
    pairs = [("Hand hygiene", i * 60, d) for i, d in enumerate(durations)]
    stats = activity_stats(_log(_trace("c1", pairs)), "Hand hygiene")
    assert stats.instance_count == 10
    assert stats.mean_s == pytest.approx(20.0)


def test_duration_quartet():
    pairs = [("X", i * 200, d) for i, d in enumerate([10, 20, 30, 100])]
    stats = activity_stats(_log(_trace("c1", pairs)), "X")
    assert stats.mean_s == pytest.approx(40.0)
    assert stats.median_s == pytest.approx(25.0)
    assert stats.min_s == 10.0 and stats.max_s == 100.0


def test_absent_activity_empty_stats():
    stats = activity_stats(_log(_trace("c1", [("A", 0, 5)])), "Z")
    assert stats.instance_count == 0
    assert stats.min_s is None


def test_unpaired_events_counted_not_guessed():
    events = (
        Event("A", T0, "start"),
        Event("A", T0 + 1000, "complete"),
        Event("A", T0 + 2000, "start"),  # never completes
        Event("A", T0 + 3000, "complete"),  # pairs FIFO with the 2s start
        Event("A", T0 + 4000, "complete"),  # orphan complete
    )
    stats = activity_stats(_log(Trace("c1", events)), "A")
    assert stats.instance_count == 2
    assert stats.unpaired_starts == 0
    assert stats.unpaired_completes == 1


def test_per_case_counts(demo_log):
    stats = activity_stats(demo_log, "Hand hygiene")
    by_scenario = {t.case_id: t.attributes["scenario"] for t in demo_log.traces}
    for case, count in stats.per_case_counts.items():
        expected = {"basic": 4, "disturbance": 5, "two-patients": 8}[by_scenario[case]]
        assert count == expected


def _brute_force_stats(log, activity):
    """Independent O(n^2) pairing: each complete claims the earliest
    unclaimed start before it."""
    durations = []
    for trace in log.traces:
        events = [e for e in trace.events if e.activity == activity]
        claimed = set()
        for i, complete in enumerate(events):
            if complete.lifecycle != "complete":
                continue
            for j, start in enumerate(events[:i]):
                if (
                    j not in claimed
                    and start.lifecycle == "start"
                    and start.timestamp_ms <= complete.timestamp_ms
                ):
                    claimed.add(j)
                    durations.append((complete.timestamp_ms - start.timestamp_ms) / 1000)
                    break
    return durations


@settings(max_examples=50)
@given(_random_log(max_traces=3, max_events=12))
def test_stats_match_bruteforce_oracle(log):
    for activity in {"A", "Hand hygiene"}:
        stats = activity_stats(log, activity)
        oracle = _brute_force_stats(log, activity)
        assert stats.instance_count == len(oracle)
        if oracle:
            assert stats.mean_s == pytest.approx(sum(oracle) / len(oracle))
            assert stats.min_s == pytest.approx(min(oracle))
            assert stats.max_s == pytest.approx(max(oracle))


def test_stats_csv_format():
    log = _log(_trace("c1", [("Hand hygiene", 0, 20)]))
    text = stats_csv([activity_stats(log, "Hand hygiene")])
    lines = text.strip().splitlines()
    assert lines[0] == "activity,count,min_s,max_s,mean_s,median_s"
    assert lines[1] == '"Hand hygiene",1,20.000,20.000,20.000,20.000'


def test_directly_follows_counts():
    log = _log(_trace("c1", [("A", 0, 5), ("B", 10, 5), ("A", 20, 5), ("B", 30, 5)]))
    counts = directly_follows(log)
    assert counts[("A", "B")] == 2
    assert counts[("B", "A")] == 1
    assert "from,to,count" in dfg_csv(counts)


# ---------------------------------------------------------------------------
# conformance


def _spec(**overrides):
    base = dict(
        sequence=("Prepare", "Hand hygiene", "Treat", "Hand hygiene", "Document"),
        hygiene_activity="Hand hygiene",
        contact_class=frozenset({"Treat"}),
        external_events=frozenset({"Contamination"}),
        rules=(
            PositionRule("before", "Treat"),
            PositionRule("after", "Treat"),
            ResponseRule("Contamination"),
        ),
    )
    base.update(overrides)
    return NormativeSpec(**base)


def _conforming_trace(case="c1"):
    return _trace(
        case,
        [
            ("Prepare", 0, 30),
            ("Hand hygiene", 40, 25),
            ("Treat", 70, 60),
            ("Hand hygiene", 140, 25),
            ("Document", 170, 30),
        ],
    )


def test_conforming_trace_zero_deviations():
    result = conformance_check(_log(_conforming_trace()), _spec())
    assert result.per_case["c1"] == ()
    assert result.conforming_case_fraction == 1.0


def test_missing_hygiene_before_contact():
    trace = _trace("c1", [("Prepare", 0, 30), ("Treat", 70, 60), ("Hand hygiene", 140, 25), ("Document", 170, 30)])
    result = conformance_check(_log(trace), _spec())
    kinds = [d.kind for d in result.per_case["c1"]]
    assert "MissingHygiene" in kinds
    assert result.conforming_case_fraction == 0.0


def test_contamination_without_hygiene_before_next_contact():
    trace = _trace(
        "c1",
        [
            ("Prepare", 0, 30),
            ("Hand hygiene", 40, 25),
            ("Contamination", 68),
            ("Treat", 70, 60),
            ("Hand hygiene", 140, 25),
            ("Document", 170, 30),
        ],
    )
    result = conformance_check(_log(trace), _spec())
    deviations = result.per_case["c1"]
    assert any(d.kind == "MissingHygiene" and "Contamination" in d.detail for d in deviations)


def test_contamination_with_recovery_hygiene_conforms():
    trace = _trace(
        "c1",
        [
            ("Prepare", 0, 30),
            ("Hand hygiene", 40, 25),
            ("Contamination", 66),
            ("Hand hygiene", 67, 2),
            ("Treat", 70, 60),
            ("Hand hygiene", 140, 25),
            ("Document", 170, 30),
        ],
    )
    result = conformance_check(_log(trace), _spec())
    assert result.per_case["c1"] == ()


def test_out_of_order_detected():
    trace = _trace(
        "c1",
        [
            ("Treat", 0, 60),
            ("Hand hygiene", 0, 2),
            ("Hand hygiene", 65, 25),
            ("Prepare", 100, 30),  # Prepare after Treat: out of order
            ("Document", 140, 30),
        ],
    )
    result = conformance_check(_log(trace), _spec())
    assert any(d.kind == "OutOfOrder" for d in result.per_case["c1"])


def test_unknown_activity_detected():
    trace = _trace("c1", [("Prepare", 0, 30), ("Sing opera", 40, 10)])
    result = conformance_check(_log(trace), _spec())
    assert any(d.kind == "UnknownActivity" for d in result.per_case["c1"])


def test_spec_error_for_unknown_rule_activity():
    with pytest.raises(SpecError):
        conformance_check(
            _log(_conforming_trace()),
            _spec(rules=(PositionRule("before", "Levitate"),)),
        )


def test_repeated_sequence_is_a_new_pass():
    events = []
    for base in (0, 300):
        events.extend(
            [
                ("Prepare", base + 0, 30),
                ("Hand hygiene", base + 40, 25),
                ("Treat", base + 70, 60),
                ("Hand hygiene", base + 140, 25),
                ("Document", base + 170, 30),
            ]
        )
    result = conformance_check(_log(_trace("c1", events)), _spec())
    assert result.per_case["c1"] == ()


def test_fraction_counts_cases():
    good = _conforming_trace("good")
    bad = _trace("bad", [("Prepare", 0, 30), ("Treat", 40, 60)])
    result = conformance_check(_log(good, bad), _spec())
    assert result.conforming_case_fraction == pytest.approx(0.5)


def test_deleting_hygiene_never_decreases_deviations(demo_log, normative_spec):
    baseline = conformance_check(demo_log, normative_spec)
    trace = demo_log.traces[0]
    for idx, event in enumerate(trace.events):
        if event.activity != "Hand hygiene":
            continue
        mutated = delete_event(demo_log, trace.case_id, idx)
        result = conformance_check(mutated, normative_spec)
        assert len(result.per_case[trace.case_id]) >= len(
            baseline.per_case[trace.case_id]
        )


def test_demo_log_full_conformance(demo_log, normative_spec):
    result = conformance_check(demo_log, normative_spec)
    assert result.conforming_case_fraction == 1.0
    assert result.deviation_count() == 0
