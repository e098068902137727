"""Theoretical multiply-accumulate accounting over a network graph.

Only convolution and dense nodes cost anything (1 MAC = 1 FLOP, no factor
of two); element-wise additions, batch norm, pooling and activations are
free. That convention is what published compression tables use for their
"FLOPs" columns.

Pruned counts use exact (unfloored) channel scaling: a prunable node at
rate P keeps out_channels*(1-P) effective output channels, and a node fed
directly by another conv/dense sees that producer's effective channel
count on its input side. Inputs sourced from an `add` node (a shortcut
join) always carry the full channel count: the identity branch is never
pruned, so the join restores all channels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import GraphValidation

_NODE_KINDS = ("conv2d", "dense", "add")


@dataclass(frozen=True)
class GraphNode:
    name: str
    kind: str
    out_channels: int
    in_channels: int
    kernel: int
    out_h: int
    out_w: int
    inputs: tuple[str, ...]
    prunable: bool


@dataclass(frozen=True)
class GraphSpec:
    """Topologically ordered network description."""

    nodes: tuple[GraphNode, ...]

    def node(self, name: str) -> GraphNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


@dataclass(frozen=True)
class PruneRates:
    """Per-node pruning rates; non-prunable nodes are pinned at 0."""

    rates: dict[str, float]

    def rate(self, name: str) -> float:
        return self.rates.get(name, 0.0)


@dataclass
class FlopsReport:
    baseline: dict[str, float]
    pruned: dict[str, float]
    baseline_total: float = field(init=False)
    pruned_total: float = field(init=False)
    reduction_percent: float = field(init=False)

    def __post_init__(self):
        self.baseline_total = float(sum(self.baseline.values()))
        self.pruned_total = float(sum(self.pruned.values()))
        if self.baseline_total == 0.0:
            self.reduction_percent = 0.0
        else:
            self.reduction_percent = 100.0 * (1.0 - self.pruned_total / self.baseline_total)

    def to_dict(self) -> dict:
        return {
            "baseline": {"per_node": self.baseline, "total": self.baseline_total},
            "pruned": {"per_node": self.pruned, "total": self.pruned_total},
            "reduction_percent": self.reduction_percent,
        }


def validate_graph(g: GraphSpec) -> None:
    """Raise GraphValidation on any structural violation."""
    seen: dict[str, GraphNode] = {}
    for node in g.nodes:
        if node.kind not in _NODE_KINDS:
            raise GraphValidation(f"node {node.name!r}: unknown kind {node.kind!r}")
        if node.name in seen:
            raise GraphValidation(f"duplicate node name {node.name!r}")
        for dim in (node.out_channels, node.in_channels, node.kernel, node.out_h, node.out_w):
            if not isinstance(dim, int) or dim < 1:
                raise GraphValidation(f"node {node.name!r}: dimensions must be positive integers")
        for ref in node.inputs:
            if ref not in seen:
                raise GraphValidation(
                    f"node {node.name!r}: input {ref!r} does not reference an earlier node"
                )
        if node.kind == "add":
            if len(node.inputs) != 2:
                raise GraphValidation(f"add node {node.name!r} must have exactly 2 inputs")
            a, b = (seen[r] for r in node.inputs)
            if a.out_channels != b.out_channels or a.out_channels != node.out_channels:
                raise GraphValidation(
                    f"add node {node.name!r}: input channel counts "
                    f"{a.out_channels}/{b.out_channels} must equal out_channels {node.out_channels}"
                )
            if node.prunable:
                raise GraphValidation(f"add node {node.name!r} cannot be prunable")
        else:
            if len(node.inputs) > 1:
                raise GraphValidation(f"node {node.name!r}: conv/dense nodes take at most 1 input")
            if node.inputs:
                producer = seen[node.inputs[0]]
                if producer.out_channels != node.in_channels:
                    raise GraphValidation(
                        f"node {node.name!r}: in_channels {node.in_channels} != "
                        f"producer {producer.name!r} out_channels {producer.out_channels}"
                    )
        seen[node.name] = node


def uniform_rates(g: GraphSpec, rate: float) -> PruneRates:
    """One rate for every prunable node, 0 elsewhere."""
    if not 0.0 <= rate < 1.0:
        raise GraphValidation(f"rate {rate} outside [0, 1)")
    return PruneRates({n.name: (rate if n.prunable else 0.0) for n in g.nodes})


def _validate_rates(g: GraphSpec, rates: PruneRates) -> None:
    names = {n.name for n in g.nodes}
    for name, p in rates.rates.items():
        if name not in names:
            raise GraphValidation(f"rate given for unknown node {name!r}")
        if not 0.0 <= p < 1.0:
            raise GraphValidation(f"node {name!r}: rate {p} outside [0, 1)")
    for node in g.nodes:
        if not node.prunable and rates.rate(node.name) != 0.0:
            raise GraphValidation(f"node {node.name!r} is not prunable but has rate > 0")


def _baseline_macs(node: GraphNode) -> float:
    if node.kind == "conv2d":
        return float(node.out_channels * node.in_channels * node.kernel ** 2 * node.out_h * node.out_w)
    if node.kind == "dense":
        return float(node.out_channels * node.in_channels)
    return 0.0


def flops_baseline(g: GraphSpec) -> FlopsReport:
    """MAC counts of the unpruned graph (pruned fields mirror baseline)."""
    validate_graph(g)
    base = {n.name: _baseline_macs(n) for n in g.nodes}
    return FlopsReport(baseline=base, pruned=dict(base))


def flops_pruned(g: GraphSpec, rates: PruneRates) -> FlopsReport:
    """MAC counts after pruning each node at its rate."""
    validate_graph(g)
    _validate_rates(g, rates)
    by_name = {n.name: n for n in g.nodes}

    def kept_out(node: GraphNode) -> float:
        return node.out_channels * (1.0 - rates.rate(node.name))

    base: dict[str, float] = {}
    pruned: dict[str, float] = {}
    for node in g.nodes:
        base[node.name] = _baseline_macs(node)
        if node.kind == "add":
            pruned[node.name] = 0.0
            continue
        if node.inputs and by_name[node.inputs[0]].kind != "add":
            eff_in = kept_out(by_name[node.inputs[0]])
        else:
            eff_in = float(node.in_channels)
        if node.kind == "conv2d":
            pruned[node.name] = kept_out(node) * eff_in * node.kernel ** 2 * node.out_h * node.out_w
        else:
            pruned[node.name] = kept_out(node) * eff_in
    return FlopsReport(baseline=base, pruned=pruned)


def graph_from_dict(payload: dict) -> GraphSpec:
    """Build and validate a GraphSpec from its JSON object form."""
    if not isinstance(payload, dict) or "nodes" not in payload:
        raise GraphValidation("graph JSON must be an object with a 'nodes' list")
    nodes = []
    for entry in payload["nodes"]:
        try:
            nodes.append(
                GraphNode(
                    name=entry["name"],
                    kind=entry["kind"],
                    out_channels=entry["out_channels"],
                    in_channels=entry["in_channels"],
                    kernel=entry["kernel"],
                    out_h=entry["out_h"],
                    out_w=entry["out_w"],
                    inputs=tuple(entry.get("inputs", ())),
                    prunable=bool(entry.get("prunable", False)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise GraphValidation(f"malformed node entry {entry!r}: {exc}") from exc
    g = GraphSpec(nodes=tuple(nodes))
    validate_graph(g)
    return g


def graph_to_dict(g: GraphSpec) -> dict:
    return {
        "nodes": [
            {
                "name": n.name,
                "kind": n.kind,
                "out_channels": n.out_channels,
                "in_channels": n.in_channels,
                "kernel": n.kernel,
                "out_h": n.out_h,
                "out_w": n.out_w,
                "inputs": list(n.inputs),
                "prunable": n.prunable,
            }
            for n in g.nodes
        ]
    }


def load_graph(path) -> GraphSpec:
    """Read a GraphSpec from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphValidation(f"{path}: {exc}") from exc
    return graph_from_dict(payload)
