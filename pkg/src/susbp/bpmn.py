"""Pragmatic BPMN 2.0 XML subset: flow-node graph, lanes, and
sustainability-relevant fragments (connected node sets tagged with values).

Only the node kinds in NodeKind are supported; anything else inside the
process element is rejected rather than silently dropped.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional
from xml.sax.saxutils import escape, quoteattr

from .errors import DomainError, XmlError

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"


class UnsupportedElement(DomainError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"unsupported BPMN element: {kind}")


class DanglingFlow(DomainError):
    pass


class InvalidProcess(DomainError):
    pass


class UnknownNode(DomainError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DisconnectedFragment(DomainError):
    def __init__(self, components: list[set[str]]):
        self.components = components
        parts = "; ".join("{" + ", ".join(sorted(c)) + "}" for c in components)
        super().__init__(f"selected nodes form {len(components)} components: {parts}")


class NodeKind(Enum):
    START_EVENT = "StartEvent"
    END_EVENT = "EndEvent"
    INTERMEDIATE_EVENT = "IntermediateEvent"
    TASK = "Task"
    USER_TASK = "UserTask"
    MANUAL_TASK = "ManualTask"
    SERVICE_TASK = "ServiceTask"
    EXCLUSIVE_GATEWAY = "ExclusiveGateway"
    PARALLEL_GATEWAY = "ParallelGateway"


_TAG_KINDS = {
    "startEvent": NodeKind.START_EVENT,
    "endEvent": NodeKind.END_EVENT,
    "intermediateThrowEvent": NodeKind.INTERMEDIATE_EVENT,
    "intermediateCatchEvent": NodeKind.INTERMEDIATE_EVENT,
    "task": NodeKind.TASK,
    "userTask": NodeKind.USER_TASK,
    "manualTask": NodeKind.MANUAL_TASK,
    "serviceTask": NodeKind.SERVICE_TASK,
    "exclusiveGateway": NodeKind.EXCLUSIVE_GATEWAY,
    "parallelGateway": NodeKind.PARALLEL_GATEWAY,
}

_KIND_TAGS = {
    kind: tag for tag, kind in _TAG_KINDS.items() if tag != "intermediateCatchEvent"
}

# non-flow children that carry no graph structure we need
_IGNORED_TAGS = {"documentation", "extensionElements", "incoming", "outgoing"}


@dataclass(frozen=True)
class FlowNode:
    id: str
    name: str
    kind: NodeKind


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class Fragment:
    """Connected subset of a process's flow nodes, tagged with value ids."""

    id: str
    process_ref: str
    node_ids: frozenset[str]
    value_refs: frozenset[str]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "process": self.process_ref,
            "nodes": sorted(self.node_ids),
            "values": sorted(self.value_refs),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Fragment":
        return cls(
            id=obj["id"],
            process_ref=obj["process"],
            node_ids=frozenset(obj["nodes"]),
            value_refs=frozenset(obj.get("values", ())),
        )


@dataclass(frozen=True)
class ProcessModel:
    id: str
    nodes: dict[str, FlowNode]
    flows: tuple[SequenceFlow, ...]
    lanes: Optional[dict[str, frozenset[str]]] = None

    def neighbors(self) -> dict[str, set[str]]:
        """Undirected adjacency over sequence flows."""
        adj: dict[str, set[str]] = {node_id: set() for node_id in self.nodes}
        for flow in self.flows:
            adj[flow.source].add(flow.target)
            adj[flow.target].add(flow.source)
        return adj


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_bpmn(xml_text: str) -> ProcessModel:
    """Parse one BPMN process element into a flow graph."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlError(f"malformed BPMN XML: {exc}") from exc

    processes = [el for el in root.iter() if _localname(el.tag) == "process"]
    if _localname(root.tag) == "process":
        processes = [root]
    if len(processes) != 1:
        raise XmlError(f"expected exactly one process element, found {len(processes)}")
    proc = processes[0]

    nodes: dict[str, FlowNode] = {}
    flows: list[SequenceFlow] = []
    lanes: dict[str, frozenset[str]] = {}

    for el in proc:
        tag = _localname(el.tag)
        if tag in _TAG_KINDS:
            node_id = el.get("id")
            if not node_id:
                raise XmlError(f"{tag} element without id")
            nodes[node_id] = FlowNode(node_id, el.get("name", ""), _TAG_KINDS[tag])
        elif tag == "sequenceFlow":
            flows.append(
                SequenceFlow(el.get("id", ""), el.get("sourceRef", ""), el.get("targetRef", ""))
            )
        elif tag == "laneSet":
            for lane in el:
                if _localname(lane.tag) != "lane":
                    continue
                refs = frozenset(
                    (child.text or "").strip()
                    for child in lane
                    if _localname(child.tag) == "flowNodeRef"
                )
                lanes[lane.get("id", lane.get("name", ""))] = refs
        elif tag in _IGNORED_TAGS:
            continue
        else:
            raise UnsupportedElement(tag)

    for flow in flows:
        if flow.source not in nodes or flow.target not in nodes:
            raise DanglingFlow(
                f"flow {flow.id!r} references missing node "
                f"({flow.source!r} -> {flow.target!r})"
            )
    kinds = [n.kind for n in nodes.values()]
    if NodeKind.START_EVENT not in kinds:
        raise InvalidProcess("process has no start event")
    if NodeKind.END_EVENT not in kinds:
        raise InvalidProcess("process has no end event")

    return ProcessModel(
        id=proc.get("id", "process"),
        nodes=nodes,
        flows=tuple(flows),
        lanes=lanes or None,
    )


def write_bpmn(model: ProcessModel) -> str:
    """Serialize the node/flow graph back to BPMN XML (no layout)."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<definitions xmlns="{BPMN_NS}" id="defs-{model.id}" targetNamespace="urn:susbp">',
        f'  <process id={quoteattr(model.id)} isExecutable="false">',
    ]
    if model.lanes:
        lines.append('    <laneSet id="lanes">')
        for lane_id, refs in model.lanes.items():
            lines.append(f"      <lane id={quoteattr(lane_id)}>")
            for ref in sorted(refs):
                lines.append(f"        <flowNodeRef>{escape(ref)}</flowNodeRef>")
            lines.append("      </lane>")
        lines.append("    </laneSet>")
    for node in model.nodes.values():
        tag = _KIND_TAGS[node.kind]
        lines.append(f"    <{tag} id={quoteattr(node.id)} name={quoteattr(node.name)}/>")
    for flow in model.flows:
        lines.append(
            f"    <sequenceFlow id={quoteattr(flow.id)} "
            f"sourceRef={quoteattr(flow.source)} targetRef={quoteattr(flow.target)}/>"
        )
    lines.append("  </process>")
    lines.append("</definitions>")
    return "\n".join(lines) + "\n"


def _components(node_ids: set[str], adjacency: dict[str, set[str]]) -> list[set[str]]:
    remaining = set(node_ids)
    components = []
    while remaining:
        seed = next(iter(remaining))
        seen = {seed}
        stack = [seed]
        while stack:
            for neighbor in adjacency[stack.pop()] & remaining:
                if neighbor not in seen:
                    seen.add(neighbor)
                    stack.append(neighbor)
        components.append(seen)
        remaining -= seen
    return sorted(components, key=lambda c: sorted(c)[0])


def extract_fragment(
    model: ProcessModel,
    node_ids: Iterable[str],
    value_refs: Iterable[str] = (),
    fragment_id: Optional[str] = None,
) -> Fragment:
    """Build a fragment from a node selection; the selection must induce a
    connected subgraph, ignoring flow direction."""
    selection = set(node_ids)
    if not selection:
        raise UnknownNode("empty node selection")
    unknown = selection - model.nodes.keys()
    if unknown:
        raise UnknownNode(f"unknown nodes: {', '.join(sorted(unknown))}")
    components = _components(selection, model.neighbors())
    if len(components) > 1:
        raise DisconnectedFragment(components)
    if fragment_id is None:
        digest = hashlib.sha1(
            (model.id + ":" + ",".join(sorted(selection))).encode()
        ).hexdigest()[:8]
        fragment_id = f"frag-{digest}"
    return Fragment(
        id=fragment_id,
        process_ref=model.id,
        node_ids=frozenset(selection),
        value_refs=frozenset(value_refs),
    )


def _normalize_name(name: str) -> str:
    return " ".join(name.split())


def hygiene_fragments(
    model: ProcessModel,
    activity_name: str,
    value_refs: Iterable[str] = (),
    id_prefix: str = "hh-frag-",
) -> list[Fragment]:
    """One single-node fragment per node named activity_name (whitespace
    normalized, case preserved), in document order."""
    wanted = _normalize_name(activity_name)
    fragments = []
    for node in model.nodes.values():
        if _normalize_name(node.name) == wanted:
            fragments.append(
                extract_fragment(
                    model,
                    {node.id},
                    value_refs,
                    fragment_id=f"{id_prefix}{len(fragments) + 1}",
                )
            )
    return fragments
