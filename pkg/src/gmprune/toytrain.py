"""Desk-scale trainer: a tiny fixed CNN on a synthetic stripe dataset.

The network is conv(3->8, k3, pad 1) -> ReLU -> conv(8->8, k3, pad 1) ->
ReLU -> global mean pool -> dense(8->2), bias-free, trained with plain
mini-batch SGD on softmax cross-entropy. It exists so the pruning schedule
can run end to end in seconds and so forward/backward have an exact oracle.

Every random draw comes from a documented 64-bit linear congruential
generator (a = 6364136223846793005, c = 1442695040888963407, modulus 2^64)
feeding a Box-Muller transform, so datasets, initial weights and shuffle
orders are bit-identical across runs and implementations:

* uniform doubles: u = ((state >> 11) + 1) * 2^-53, in (0, 1];
* gaussians: z0 = sqrt(-2 ln u1) * cos(2 pi u2), z1 = ... * sin(...),
  consumed in order z0, z1;
* stream seeds: dataset Lcg(seed); weight init Lcg(seed + INIT_SALT);
  epoch shuffle Lcg(seed + epoch * SHUFFLE_SALT); all mod 2^64.

Class 0 images are horizontal stripes (+1/-1 alternating rows on all three
channels), class 1 vertical stripes, plus sigma = 0.3 Gaussian noise; labels
alternate 0,1,0,1,... so class balance is within one sample.

Training arithmetic is 64-bit; weights are cast to 32-bit only when written
into a ModelBundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _K
from .errors import CacheMismatch, ShapeMismatch
from .flops import GraphNode, GraphSpec
from .model_io import ModelBundle, make_bundle

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_MASK64 = (1 << 64) - 1

INIT_SALT = 0x9E3779B97F4A7C15
SHUFFLE_SALT = 0xBF58476D1CE4E5B9
EVAL_SEED_OFFSET = 1_000_003

IMAGE_SHAPE = (3, 8, 8)
NOISE_SIGMA = 0.3
BATCH_SIZE = 16


class Lcg:
    """The documented 64-bit LCG + Box-Muller gaussian source."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64
        self._spare: float | None = None

    def next_u64(self) -> int:
        self.state = (LCG_A * self.state + LCG_C) & _MASK64
        return self.state

    def next_unit(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53

    def next_gauss(self) -> float:
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        u1 = self.next_unit()
        u2 = self.next_unit()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def gauss_array(self, count: int) -> np.ndarray:
        return np.array([self.next_gauss() for _ in range(count)], dtype=np.float64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        order = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            order[i], order[j] = order[j], order[i]
        return order


@dataclass(frozen=True)
class SyntheticDataset:
    images: np.ndarray  # (n, 3, 8, 8) float64
    labels: np.ndarray  # (n,) int64
    seed: int


@dataclass
class ToyNet:
    """Fixed-architecture network; weights live in float64."""

    w1: np.ndarray  # (8, 3, 3, 3)
    w2: np.ndarray  # (8, 8, 3, 3)
    w3: np.ndarray  # (2, 8)

    @classmethod
    def init(cls, seed: int) -> "ToyNet":
        rng = Lcg((seed + INIT_SALT) & _MASK64)
        w1 = rng.gauss_array(8 * 3 * 3 * 3).reshape(8, 3, 3, 3) * math.sqrt(2.0 / 27.0)
        w2 = rng.gauss_array(8 * 8 * 3 * 3).reshape(8, 8, 3, 3) * math.sqrt(2.0 / 72.0)
        w3 = rng.gauss_array(2 * 8).reshape(2, 8) * math.sqrt(1.0 / 8.0)
        return cls(w1, w2, w3)

    def to_bundle(self) -> ModelBundle:
        return make_bundle(
            [("conv1", "conv2d", 8, 3, 3), ("conv2", "conv2d", 8, 8, 3), ("fc", "dense", 2, 8, 1)],
            {
                "conv1": self.w1.reshape(8, 27).astype(np.float32),
                "conv2": self.w2.reshape(8, 72).astype(np.float32),
                "fc": self.w3.astype(np.float32),
            },
        )

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "ToyNet":
        try:
            w1 = np.asarray(bundle.tensors["conv1"], dtype=np.float64).reshape(8, 3, 3, 3)
            w2 = np.asarray(bundle.tensors["conv2"], dtype=np.float64).reshape(8, 8, 3, 3)
            w3 = np.asarray(bundle.tensors["fc"], dtype=np.float64).reshape(2, 8)
        except (KeyError, ValueError) as exc:
            raise ShapeMismatch(f"bundle does not hold a toy network: {exc}") from exc
        return cls(w1, w2, w3)

    def write_to_bundle(self, bundle: ModelBundle) -> None:
        bundle.tensors["conv1"][...] = self.w1.reshape(8, 27).astype(np.float32)
        bundle.tensors["conv2"][...] = self.w2.reshape(8, 72).astype(np.float32)
        bundle.tensors["fc"][...] = self.w3.astype(np.float32)


@dataclass(frozen=True)
class Cache:
    """Forward intermediates needed by backward."""

    x: np.ndarray
    pre1: np.ndarray
    act1: np.ndarray
    pre2: np.ndarray
    act2: np.ndarray
    pooled: np.ndarray


@dataclass(frozen=True)
class Grads:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray


def _stripe(vertical: bool) -> np.ndarray:
    base = np.empty((8, 8), dtype=np.float64)
    for y in range(8):
        for x in range(8):
            parity = x % 2 if vertical else y % 2
            base[y, x] = 1.0 if parity == 0 else -1.0
    return base


def gen_dataset(seed: int, n: int) -> SyntheticDataset:
    """Deterministic stripe dataset; labels alternate 0,1,0,1,..."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = Lcg(seed)
    patterns = (_stripe(vertical=False), _stripe(vertical=True))
    images = np.empty((n, *IMAGE_SHAPE), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    per_image = IMAGE_SHAPE[0] * IMAGE_SHAPE[1] * IMAGE_SHAPE[2]
    for i in range(n):
        label = i % 2
        noise = rng.gauss_array(per_image).reshape(IMAGE_SHAPE)
        images[i] = patterns[label][None, :, :] + NOISE_SIGMA * noise
        labels[i] = label
    return SyntheticDataset(images=images, labels=labels, seed=seed)


def forward(net: ToyNet, batch: np.ndarray) -> tuple[np.ndarray, Cache]:
    """Logits plus the cache backward needs. Input must be (B, 3, 8, 8)."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != IMAGE_SHAPE:
        raise ShapeMismatch(f"expected (batch, 3, 8, 8), got {x.shape}")
    pre1 = _K.conv2d_forward(x, net.w1, 1)
    act1 = np.maximum(pre1, 0.0)
    pre2 = _K.conv2d_forward(act1, net.w2, 1)
    act2 = np.maximum(pre2, 0.0)
    pooled = act2.mean(axis=(2, 3))
    logits = pooled @ net.w3.T
    return logits, Cache(x, pre1, act1, pre2, act2, pooled)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and d loss / d logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = float(-np.log(probs[np.arange(n), labels]).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def backward(net: ToyNet, cache: Cache, labels: np.ndarray) -> Grads:
    """Gradients of the mean softmax cross-entropy for every parameter."""
    labels = np.asarray(labels)
    batch = cache.x.shape[0]
    if labels.shape != (batch,):
        raise CacheMismatch(f"labels shape {labels.shape} does not match batch {batch}")
    if cache.pre1.shape[1] != net.w1.shape[0] or cache.pre2.shape[1] != net.w2.shape[0]:
        raise CacheMismatch("cache does not belong to this network")
    logits = cache.pooled @ net.w3.T
    _, dlogits = softmax_cross_entropy(logits, labels)
    gw3 = dlogits.T @ cache.pooled
    dpooled = dlogits @ net.w3
    spatial = cache.act2.shape[2] * cache.act2.shape[3]
    dact2 = np.broadcast_to(
        (dpooled / spatial)[:, :, None, None], cache.act2.shape
    )
    dpre2 = np.where(cache.pre2 > 0.0, dact2, 0.0)
    dact1, gw2 = _K.conv2d_backward(cache.act1, net.w2, dpre2, 1)
    dpre1 = np.where(cache.pre1 > 0.0, dact1, 0.0)
    _, gw1 = _K.conv2d_backward(cache.x, net.w1, dpre1, 1)
    return Grads(w1=gw1, w2=gw2, w3=gw3)


def loss_on(net: ToyNet, images: np.ndarray, labels: np.ndarray) -> float:
    logits, _ = forward(net, images)
    loss, _ = softmax_cross_entropy(logits, labels)
    return loss


def train_epoch(net: ToyNet, data: SyntheticDataset, lr: float, epoch: int = 1) -> float:
    """One pass of mini-batch SGD (batch 16, shuffle keyed on (seed, epoch)).

    Mutates the network in place and returns the mean per-sample loss over
    the epoch (measured before each update).
    """
    if lr < 0:
        raise ValueError("lr must be >= 0")
    n = data.images.shape[0]
    rng = Lcg((data.seed + epoch * SHUFFLE_SALT) & _MASK64)
    order = rng.permutation(n)
    total = 0.0
    for start in range(0, n, BATCH_SIZE):
        chosen = order[start : start + BATCH_SIZE]
        images = data.images[chosen]
        labels = data.labels[chosen]
        logits, cache = forward(net, images)
        loss, _ = softmax_cross_entropy(logits, labels)
        grads = backward(net, cache, labels)
        net.w1 -= lr * grads.w1
        net.w2 -= lr * grads.w2
        net.w3 -= lr * grads.w3
        total += loss * len(chosen)
    return total / n


def evaluate(net: ToyNet, data: SyntheticDataset) -> float:
    """Argmax accuracy; logit ties resolve to class 0."""
    logits, _ = forward(net, data.images)
    predictions = np.argmax(logits, axis=1)
    return float((predictions == data.labels).mean())


def make_trainer(data: SyntheticDataset, lr: float):
    """Trainer callback for run_schedule: trains the bundle for one epoch."""

    def trainer(bundle: ModelBundle, epoch: int) -> float:
        net = ToyNet.from_bundle(bundle)
        loss = train_epoch(net, data, lr, epoch)
        net.write_to_bundle(bundle)
        return loss

    return trainer


def build_toy_graph() -> GraphSpec:
    """Sequential GraphSpec matching the toy bundle layout."""
    return GraphSpec(
        nodes=(
            GraphNode("conv1", "conv2d", 8, 3, 3, 8, 8, (), True),
            GraphNode("conv2", "conv2d", 8, 8, 3, 8, 8, ("conv1",), True),
            GraphNode("fc", "dense", 2, 8, 1, 1, 1, ("conv2",), False),
        )
    )


def forward_chain(bundle: ModelBundle, batch: np.ndarray) -> np.ndarray:
    """Forward pass through any sequential conv chain (optionally ending in
    a dense head): conv+ReLU per conv layer, then global mean pool, then the
    dense head if present. Used as the forward oracle for compact models.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeMismatch(f"expected a 4-D batch, got shape {x.shape}")
    layers = bundle.layers
    dense = layers[-1] if layers and layers[-1].kind == "dense" else None
    convs = layers[: (len(layers) - 1 if dense else len(layers))]
    for spec in convs:
        if spec.kind != "conv2d":
            raise ShapeMismatch(f"layer {spec.name!r}: chain conv layers must come first")
        w = np.asarray(bundle.tensors[spec.name], dtype=np.float64).reshape(
            spec.out_channels, spec.in_channels, spec.kernel, spec.kernel
        )
        if x.shape[1] != spec.in_channels:
            raise ShapeMismatch(
                f"layer {spec.name!r}: input has {x.shape[1]} channels, expected {spec.in_channels}"
            )
        x = np.maximum(_K.conv2d_forward(x, w, spec.kernel // 2), 0.0)
    pooled = x.mean(axis=(2, 3))
    if dense is None:
        return pooled
    w = np.asarray(bundle.tensors[dense.name], dtype=np.float64)
    if pooled.shape[1] != dense.in_channels:
        raise ShapeMismatch(
            f"layer {dense.name!r}: pooled features {pooled.shape[1]} != {dense.in_channels}"
        )
    return pooled @ w.T
