"""Soft-pruning schedule: train, select, zeroize, repeat.

Each pruning step selects floor(out_channels * rate) filters per layer by
the configured criterion over the layer's *current* weights and sets those
rows to exact zero. Zeroized filters stay trainable; selection is fresh on
every step and never consults earlier masks, so a filter that training has
pushed away from the redundant region escapes the mask again.

After the schedule, `extract_compact` physically removes the masked filters
(and the matching input channels of each successor) from a sequential chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import criteria
from .criteria import Criterion, DistanceKind
from .errors import MaskShapeMismatch, NonSequentialGraph, TrainerFailure
from .flops import GraphSpec, validate_graph
from .model_io import LayerSpec, ModelBundle, make_bundle


@dataclass(frozen=True)
class PruneConfig:
    """Schedule parameters: uniform rate, pruning interval (epochs between
    steps), selection criterion and, for Mix, the fraction of the budget
    handled by the (l2) norm stage."""

    rate: float
    epoch_max: int
    interval: int = 1
    criterion: Criterion = Criterion.GM
    distance: DistanceKind = DistanceKind.L2
    mix_norm_fraction: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"rate {self.rate} outside [0, 1)")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")
        if not 0.0 <= self.mix_norm_fraction <= 1.0:
            raise ValueError("mix_norm_fraction must lie in [0, 1]")
        if self.epoch_max < 0:
            raise ValueError("epoch_max must be >= 0")


@dataclass
class MaskState:
    """Per-layer sets of currently zeroized filter indices."""

    masks: dict[str, tuple[int, ...]]
    epoch: int = 0

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "masks": {k: list(v) for k, v in self.masks.items()}}


@dataclass(frozen=True)
class HistoryEntry:
    """One epoch of the schedule: loss, and when a pruning step ran, the
    new mask sizes plus churn (symmetric difference against the previous
    masks, per layer)."""

    epoch: int
    loss: float
    pruned: bool
    mask_sizes: dict[str, int] = field(default_factory=dict)
    churn: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"epoch": self.epoch, "loss": self.loss, "pruned": self.pruned}
        if self.pruned:
            out["mask_sizes"] = dict(self.mask_sizes)
            out["churn"] = dict(self.churn)
        return out


def prune_count(out_channels: int, rate: float) -> int:
    """floor(out_channels * rate) filters pruned per step."""
    return math.floor(out_channels * rate)


def _select(matrix: np.ndarray, count: int, cfg: PruneConfig) -> tuple[int, ...]:
    if cfg.criterion is Criterion.NORM_L1:
        return criteria.select_norm(matrix, count, "l1").indices
    if cfg.criterion is Criterion.NORM_L2:
        return criteria.select_norm(matrix, count, "l2").indices
    if cfg.criterion is Criterion.GM:
        return criteria.select_gm(matrix, count, cfg.distance, zero_cosine_fill=True).indices
    norm_count = math.floor(matrix.shape[0] * cfg.rate * cfg.mix_norm_fraction)
    return criteria.select_mix(
        matrix, norm_count, count - norm_count, "l2", cfg.distance, zero_cosine_fill=True
    ).indices


def prune_step(bundle: ModelBundle, cfg: PruneConfig, epoch: int = 0) -> tuple[ModelBundle, MaskState]:
    """Select and zeroize filters in every layer of `bundle` (in place).

    Returns the same bundle plus the fresh MaskState. Previously zeroized
    filters take part in selection with whatever weights they currently
    hold. Zero filters under cosine distance are assigned the maximal
    distance 2.0 instead of erroring, so a schedule cannot abort on its
    own output.
    """
    masks: dict[str, tuple[int, ...]] = {}
    for spec in bundle.layers:
        tensor = bundle.tensors[spec.name]
        count = prune_count(spec.out_channels, cfg.rate)
        selected = _select(tensor, count, cfg)
        if selected:
            tensor[list(selected)] = 0.0
        masks[spec.name] = selected
    return bundle, MaskState(masks=masks, epoch=epoch)


def run_schedule(bundle: ModelBundle, cfg: PruneConfig, trainer) -> tuple[ModelBundle, MaskState, list[HistoryEntry]]:
    """Run `trainer(bundle, epoch) -> loss` for epoch_max epochs, pruning
    after every `interval`-th epoch. Works on a copy of the input bundle.
    """
    work = bundle.copy()
    history: list[HistoryEntry] = []
    prev: dict[str, tuple[int, ...]] = {spec.name: () for spec in work.layers}
    state = MaskState(masks=dict(prev), epoch=0)
    for epoch in range(1, cfg.epoch_max + 1):
        try:
            loss = float(trainer(work, epoch))
        except Exception as exc:  # noqa: BLE001 - wrapped with epoch context
            raise TrainerFailure(epoch, exc) from exc
        if epoch % cfg.interval == 0:
            work, state = prune_step(work, cfg, epoch=epoch)
            churn = {
                name: len(set(prev[name]) ^ set(state.masks[name])) for name in state.masks
            }
            sizes = {name: len(idx) for name, idx in state.masks.items()}
            prev = dict(state.masks)
            history.append(HistoryEntry(epoch, loss, True, sizes, churn))
        else:
            history.append(HistoryEntry(epoch, loss, False))
    return work, state, history


def _require_chain(bundle: ModelBundle, graph: GraphSpec) -> None:
    validate_graph(graph)
    if any(node.kind == "add" for node in graph.nodes):
        raise NonSequentialGraph("compact extraction refuses shortcut topologies")
    names = [node.name for node in graph.nodes]
    for i, node in enumerate(graph.nodes):
        expected = () if i == 0 else (names[i - 1],)
        if node.inputs != expected:
            raise NonSequentialGraph(
                f"node {node.name!r}: inputs {node.inputs} do not form a chain"
            )
    if names != [spec.name for spec in bundle.layers]:
        raise MaskShapeMismatch(
            f"bundle layers {[s.name for s in bundle.layers]} do not match graph chain {names}"
        )


def extract_compact(bundle: ModelBundle, masks: MaskState, graph: GraphSpec) -> ModelBundle:
    """Physically remove masked filters from a sequential chain.

    Each layer loses its masked output rows; the successor loses the input
    channels (column blocks of width kernel**2) at the same positions.
    Surviving entries are copied bit-exactly.
    """
    _require_chain(bundle, graph)
    for name, idx in masks.masks.items():
        try:
            spec = bundle.layer(name)
        except KeyError as exc:
            raise MaskShapeMismatch(f"mask for unknown layer {name!r}") from exc
        if any(not 0 <= i < spec.out_channels for i in idx):
            raise MaskShapeMismatch(
                f"layer {name!r}: mask indices {sorted(idx)} outside [0, {spec.out_channels})"
            )

    specs: list[tuple[str, str, int, int, int]] = []
    tensors: dict[str, np.ndarray] = {}
    prev_kept: list[int] | None = None
    for spec in bundle.layers:
        masked = set(masks.masks.get(spec.name, ()))
        kept_rows = [i for i in range(spec.out_channels) if i not in masked]
        if not kept_rows:
            raise MaskShapeMismatch(f"layer {spec.name!r}: mask removes every filter")
        tensor = np.asarray(bundle.tensors[spec.name])[kept_rows]
        in_channels = spec.in_channels
        if prev_kept is not None:
            k2 = spec.kernel * spec.kernel
            tensor = tensor.reshape(len(kept_rows), spec.in_channels, k2)
            tensor = tensor[:, prev_kept, :].reshape(len(kept_rows), len(prev_kept) * k2)
            in_channels = len(prev_kept)
        specs.append((spec.name, spec.kind, len(kept_rows), in_channels, spec.kernel))
        tensors[spec.name] = tensor
        prev_kept = kept_rows
    return make_bundle(specs, tensors)
