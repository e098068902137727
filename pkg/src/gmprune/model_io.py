"""Bit-exact load/save of the `GMPK1` weight container.

File layout:

    b"GMPK1\\n"  magic
    UTF-8 JSON manifest
    b"\\x00"     separator
    weight blob: one contiguous little-endian float32 region

Manifest schema::

    {"format_version": 1,
     "layers": [{"name": str, "kind": "conv2d"|"dense",
                 "out_channels": int, "in_channels": int, "kernel": int,
                 "blob_offset": int, "blob_len": int}, ...]}

Blob offsets are relative to the start of the blob region. Each layer's
tensor is stored row-major over (out_channel, in_channel, ky, kx), so every
filter is a contiguous row of length in_channels*kernel**2; in memory a layer
is a 2-D float32 matrix of shape (out_channels, in_channels*kernel**2).
Fully connected layers are stored as kernel=1 convolutions.

NaN/Inf are hard errors on both load and save: downstream distance math
would silently corrupt otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    IoFailure,
    MagicMismatch,
    ManifestParse,
    NonFiniteValue,
    TruncatedBlob,
)

MAGIC = b"GMPK1\n"
FORMAT_VERSION = 1
_KINDS = ("conv2d", "dense")
_ITEMSIZE = 4  # float32


@dataclass(frozen=True)
class LayerSpec:
    """Shape and blob location of one stored layer."""

    name: str
    kind: str
    out_channels: int
    in_channels: int
    kernel: int
    blob_offset: int
    blob_len: int

    @property
    def row_len(self) -> int:
        return self.in_channels * self.kernel * self.kernel

    @property
    def element_count(self) -> int:
        return self.out_channels * self.row_len


@dataclass
class ModelBundle:
    """Ordered layers plus their weight matrices (float32, one row per filter)."""

    layers: list[LayerSpec]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def layer(self, name: str) -> LayerSpec:
        for spec in self.layers:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def copy(self) -> "ModelBundle":
        """Deep copy with writable tensors (loaded bundles are read-only)."""
        tensors = {name: np.array(t, dtype=np.float32) for name, t in self.tensors.items()}
        return ModelBundle(list(self.layers), tensors, self.format_version)


def _validate_layer_fields(entry: dict, index: int) -> LayerSpec:
    required = ("name", "kind", "out_channels", "in_channels", "kernel", "blob_offset", "blob_len")
    for key in required:
        if key not in entry:
            raise ManifestParse(f"layer {index}: missing field {key!r}")
    name = entry["name"]
    if not isinstance(name, str) or not name:
        raise ManifestParse(f"layer {index}: name must be a non-empty string")
    kind = entry["kind"]
    if kind not in _KINDS:
        raise ManifestParse(f"layer {name!r}: unknown kind {kind!r}")
    for key in ("out_channels", "in_channels", "kernel"):
        value = entry[key]
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ManifestParse(f"layer {name!r}: {key} must be a positive integer")
    for key in ("blob_offset", "blob_len"):
        value = entry[key]
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ManifestParse(f"layer {name!r}: {key} must be a non-negative integer")
    if kind == "dense" and entry["kernel"] != 1:
        raise ManifestParse(f"layer {name!r}: dense layers must have kernel=1")
    spec = LayerSpec(
        name=name,
        kind=kind,
        out_channels=entry["out_channels"],
        in_channels=entry["in_channels"],
        kernel=entry["kernel"],
        blob_offset=entry["blob_offset"],
        blob_len=entry["blob_len"],
    )
    if spec.blob_len != spec.element_count * _ITEMSIZE:
        raise TruncatedBlob(
            f"layer {name!r}: blob_len {spec.blob_len} does not match shape "
            f"{spec.out_channels}x{spec.in_channels}x{spec.kernel}x{spec.kernel} "
            f"({spec.element_count * _ITEMSIZE} bytes)"
        )
    return spec


def validate_bundle(bundle: ModelBundle) -> None:
    """Raise a typed error if the bundle violates its invariants."""
    if bundle.format_version != FORMAT_VERSION:
        raise ManifestParse(f"unsupported format_version {bundle.format_version}")
    seen: set[str] = set()
    for spec in bundle.layers:
        if spec.name in seen:
            raise ManifestParse(f"duplicate layer name {spec.name!r}")
        seen.add(spec.name)
        if spec.kind not in _KINDS:
            raise ManifestParse(f"layer {spec.name!r}: unknown kind {spec.kind!r}")
        if spec.kind == "dense" and spec.kernel != 1:
            raise ManifestParse(f"layer {spec.name!r}: dense layers must have kernel=1")
        if spec.name not in bundle.tensors:
            raise ManifestParse(f"layer {spec.name!r}: tensor missing from bundle")
        tensor = bundle.tensors[spec.name]
        if tensor.shape != (spec.out_channels, spec.row_len):
            raise TruncatedBlob(
                f"layer {spec.name!r}: tensor shape {tensor.shape} does not match "
                f"({spec.out_channels}, {spec.row_len})"
            )
        finite = np.isfinite(tensor)
        if not finite.all():
            raise NonFiniteValue(spec.name, int(np.argmin(finite.ravel())))
    extra = set(bundle.tensors) - seen
    if extra:
        raise ManifestParse(f"tensors without layer entries: {sorted(extra)}")


def load_bundle(path) -> ModelBundle:
    """Read and validate a GMPK1 container. Loaded tensors are read-only."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise MagicMismatch(f"{path}: missing GMPK1 magic")
    sep = data.find(b"\x00", len(MAGIC))
    if sep < 0:
        raise ManifestParse(f"{path}: manifest separator not found")
    try:
        manifest = json.loads(data[len(MAGIC) : sep].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestParse(f"{path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ManifestParse(f"{path}: manifest must be a JSON object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ManifestParse(f"{path}: unsupported format_version {version!r}")
    entries = manifest.get("layers")
    if not isinstance(entries, list):
        raise ManifestParse(f"{path}: manifest field 'layers' must be a list")

    blob = data[sep + 1 :]
    layers: list[LayerSpec] = []
    names: set[str] = set()
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ManifestParse(f"{path}: layer {index} must be a JSON object")
        spec = _validate_layer_fields(entry, index)
        if spec.name in names:
            raise ManifestParse(f"{path}: duplicate layer name {spec.name!r}")
        names.add(spec.name)
        layers.append(spec)

    tensors: dict[str, np.ndarray] = {}
    for spec in layers:
        end = spec.blob_offset + spec.blob_len
        if end > len(blob):
            raise TruncatedBlob(
                f"layer {spec.name!r}: blob ends at {len(blob)} but manifest claims [{spec.blob_offset}, {end})"
            )
        flat = np.frombuffer(blob, dtype="<f4", count=spec.element_count, offset=spec.blob_offset)
        finite = np.isfinite(flat)
        if not finite.all():
            raise NonFiniteValue(spec.name, int(np.argmin(finite)))
        tensor = flat.reshape(spec.out_channels, spec.row_len).copy()
        tensor.flags.writeable = False
        tensors[spec.name] = tensor

    return ModelBundle(layers=layers, tensors=tensors, format_version=version)


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write a GMPK1 container; refuses invalid bundles before any bytes hit disk.

    Blobs are packed contiguously in layer order, so the output bytes are a
    pure function of the bundle contents.
    """
    validate_bundle(bundle)
    offset = 0
    packed: list[LayerSpec] = []
    chunks: list[bytes] = []
    for spec in bundle.layers:
        raw = np.ascontiguousarray(bundle.tensors[spec.name], dtype="<f4").tobytes()
        packed.append(replace(spec, blob_offset=offset, blob_len=len(raw)))
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": bundle.format_version,
        "layers": [
            {
                "name": spec.name,
                "kind": spec.kind,
                "out_channels": spec.out_channels,
                "in_channels": spec.in_channels,
                "kernel": spec.kernel,
                "blob_offset": spec.blob_offset,
                "blob_len": spec.blob_len,
            }
            for spec in packed
        ],
    }
    payload = MAGIC + json.dumps(manifest, separators=(",", ":")).encode("utf-8") + b"\x00" + b"".join(chunks)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def make_bundle(specs: list[tuple[str, str, int, int, int]], tensors: dict[str, np.ndarray]) -> ModelBundle:
    """Build a validated bundle from (name, kind, out, in, kernel) tuples."""
    layers = []
    offset = 0
    for name, kind, out_channels, in_channels, kernel in specs:
        count = out_channels * in_channels * kernel * kernel
        layers.append(
            LayerSpec(
                name=name,
                kind=kind,
                out_channels=out_channels,
                in_channels=in_channels,
                kernel=kernel,
                blob_offset=offset,
                blob_len=count * _ITEMSIZE,
            )
        )
        offset += count * _ITEMSIZE
    bundle = ModelBundle(
        layers=layers,
        tensors={name: np.ascontiguousarray(t, dtype=np.float32) for name, t in tensors.items()},
    )
    validate_bundle(bundle)
    return bundle


def bundles_equal(a: ModelBundle, b: ModelBundle) -> bool:
    """Element-exact equality: same layer shapes and bit-identical tensors.

    Blob offsets are storage details (recomputed on save) and are ignored.
    """
    if a.format_version != b.format_version:
        return False
    shape = lambda s: (s.name, s.kind, s.out_channels, s.in_channels, s.kernel)
    if [shape(s) for s in a.layers] != [shape(s) for s in b.layers]:
        return False
    if set(a.tensors) != set(b.tensors):
        return False
    return all(np.array_equal(a.tensors[name], b.tensors[name]) for name in a.tensors)
