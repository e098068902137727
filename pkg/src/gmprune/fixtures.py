"""Seeded fixtures: random weight bundles and the ResNet-20 CIFAR graph.

Everything here is generated, so CI and the examples need no external data.
The ResNet-20 description follows the standard CIFAR variant: a 3x3 stem,
three stages of three two-conv residual blocks at 16/32/64 channels on
32x32/16x16/8x8 maps, 1x1 projection convolutions on the two downsampling
shortcuts, and a 10-way dense head. Projection shortcuts and the classifier
are not prunable; every other weighted layer is.
"""

from __future__ import annotations

import numpy as np

from .flops import GraphNode, GraphSpec, validate_graph
from .model_io import ModelBundle, make_bundle

DEFAULT_BUNDLE_LAYERS = [
    ("conv1", "conv2d", 8, 3, 3),
    ("conv2", "conv2d", 8, 8, 3),
    ("fc", "dense", 4, 8, 1),
]


def random_bundle(seed: int, specs=None) -> ModelBundle:
    """Random float32 bundle (standard normal weights) for tests and demos."""
    specs = DEFAULT_BUNDLE_LAYERS if specs is None else specs
    rng = np.random.default_rng(seed)
    tensors = {
        name: rng.standard_normal((out, inp * k * k)).astype(np.float32)
        for name, kind, out, inp, k in specs
    }
    return make_bundle(list(specs), tensors)


def collinear_bundle() -> ModelBundle:
    """One layer whose three 1-D filters sit at 0, 1, 2: the middle filter
    minimizes the summed distance, so redundancy selection picks index 1."""
    return make_bundle(
        [("collinear", "conv2d", 3, 1, 1)],
        {"collinear": np.array([[0.0], [1.0], [2.0]], dtype=np.float32)},
    )


def build_resnet20_graph() -> GraphSpec:
    """ResNet-20 (CIFAR) as a GraphSpec; baseline cost is 40,813,184 MACs."""
    nodes: list[GraphNode] = [GraphNode("conv1", "conv2d", 16, 3, 3, 32, 32, (), True)]
    stage_channels = {1: 16, 2: 32, 3: 64}
    stage_size = {1: 32, 2: 16, 3: 8}
    shortcut = "conv1"
    in_channels = 16
    for stage in (1, 2, 3):
        channels = stage_channels[stage]
        size = stage_size[stage]
        for block in (1, 2, 3):
            prefix = f"s{stage}b{block}"
            nodes.append(
                GraphNode(f"{prefix}_conv1", "conv2d", channels, in_channels, 3, size, size,
                          (shortcut,), True)
            )
            nodes.append(
                GraphNode(f"{prefix}_conv2", "conv2d", channels, channels, 3, size, size,
                          (f"{prefix}_conv1",), True)
            )
            if block == 1 and stage > 1:
                nodes.append(
                    GraphNode(f"{prefix}_proj", "conv2d", channels, in_channels, 1, size, size,
                              (shortcut,), False)
                )
                identity = f"{prefix}_proj"
            else:
                identity = shortcut
            nodes.append(
                GraphNode(f"{prefix}_add", "add", channels, channels, 1, size, size,
                          (identity, f"{prefix}_conv2"), False)
            )
            shortcut = f"{prefix}_add"
            in_channels = channels
    nodes.append(GraphNode("fc", "dense", 10, 64, 1, 1, 1, (shortcut,), False))
    graph = GraphSpec(nodes=tuple(nodes))
    validate_graph(graph)
    return graph
