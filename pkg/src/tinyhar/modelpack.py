"""Compact binary model container (.ispm) and footprint accounting.

Layout (little-endian throughout):

  header:  magic "ISPM" | version u8 | kind u8 (1=MLP, 2=Forest)
           | n_inputs u16 | n_classes u16 | manifest version u16
           | ma_width u8 | feature-mask bitset (78 bits in 10 bytes)
  payload: kind-specific (see _encode_mlp/_encode_forest)
  trailer: CRC-32 of header+payload, u32

Weights are 32-bit floats; tree nodes are fixed-width records with
forward-only child indices so a decoder can stream the array linearly.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    ModelTooLarge,
    StructuralInvariantViolated,
    UnsupportedVersion,
)
from .features import N_FEATURES, FeatureMask
from .gbdt import LEAF, Forest, Tree, TreeNode
from .mlp import MlpModel

Model = Union[MlpModel, Forest]

MAGIC = b"ISPM"
FORMAT_VERSION = 1
KIND_MLP = 1
KIND_FOREST = 2
MASK_BYTES = 10

NODE_INTERNAL = 0
NODE_LEAF = 1


def _mask_to_bytes(mask: FeatureMask) -> bytes:
    bits = bytearray(MASK_BYTES)
    for i in mask.kept:
        bits[i // 8] |= 1 << (i % 8)
    return bytes(bits)


def _mask_from_bytes(raw: bytes) -> FeatureMask:
    kept = tuple(
        i for i in range(N_FEATURES) if raw[i // 8] & (1 << (i % 8))
    )
    if not kept:
        raise StructuralInvariantViolated("empty feature mask")
    return FeatureMask(kept)


def _check_range(value: int, width: int, what: str) -> int:
    if not 0 <= value < (1 << width):
        raise ModelTooLarge(f"{what} {value} overflows u{width}")
    return value


def _encode_mlp(m: MlpModel) -> bytes:
    out = bytearray()
    out += struct.pack("<B", _check_range(len(m.dims), 8, "layer count"))
    for d in m.dims:
        out += struct.pack("<H", _check_range(d, 16, "layer width"))
    for W, b in zip(m.weights, m.biases):
        out += np.asarray(W, "<f4").tobytes()
        out += np.asarray(b, "<f4").tobytes()
    return bytes(out)


def _encode_forest(f: Forest) -> bytes:
    out = bytearray()
    out += struct.pack(
        "<Hff", _check_range(f.n_rounds, 16, "rounds"), f.shrinkage, f.base_score
    )
    for tree in f.trees:
        out += struct.pack("<H", _check_range(len(tree.nodes), 16, "node count"))
        for node in tree.nodes:
            if node.is_leaf:
                out += struct.pack("<Bf", NODE_LEAF, node.value)
            else:
                out += struct.pack(
                    "<BBfHH",
                    NODE_INTERNAL,
                    _check_range(node.feature, 8, "feature index"),
                    node.threshold,
                    _check_range(node.left, 16, "child index"),
                    _check_range(node.right, 16, "child index"),
                )
    return bytes(out)


def encode(model: Model) -> bytes:
    """Serialize a trained model to .ispm bytes."""
    kind = KIND_MLP if isinstance(model, MlpModel) else KIND_FOREST
    if kind == KIND_MLP:
        n_inputs, n_classes = model.dims[0], model.dims[-1]
        payload = _encode_mlp(model)
    else:
        n_inputs, n_classes = model.n_inputs, model.n_classes
        payload = _encode_forest(model)
    if n_inputs != len(model.feature_mask):
        raise StructuralInvariantViolated("input width != mask popcount")
    header = (
        MAGIC
        + struct.pack(
            "<BBHHHB",
            FORMAT_VERSION,
            kind,
            _check_range(n_inputs, 16, "n_inputs"),
            _check_range(n_classes, 16, "n_classes"),
            _check_range(model.manifest_version, 16, "manifest version"),
            _check_range(model.ma_width, 8, "ma_width"),
        )
        + _mask_to_bytes(model.feature_mask)
    )
    body = header + payload
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise ChecksumMismatch("truncated payload")
        vals = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return vals if len(vals) > 1 else vals[0]

    def take_floats(self, n: int) -> np.ndarray:
        size = 4 * n
        if self.pos + size > len(self.raw):
            raise ChecksumMismatch("truncated payload")
        out = np.frombuffer(self.raw, "<f4", n, self.pos).astype(float)
        self.pos += size
        return out


def _decode_mlp(r: _Reader, mask, manifest, ma_width) -> MlpModel:
    n_dims = r.take("<B")
    dims = tuple(r.take("<H") for _ in range(n_dims))
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise StructuralInvariantViolated("bad layer widths")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(r.take_floats(fan_in * fan_out).reshape(fan_out, fan_in))
        biases.append(r.take_floats(fan_out))
    return MlpModel(dims, weights, biases, mask, (), manifest, ma_width)


def _decode_forest(r: _Reader, mask, manifest, ma_width, n_classes) -> Forest:
    n_rounds, shrinkage, base = r.take("<Hff")
    trees = []
    for _ in range(n_rounds * n_classes):
        n_nodes = r.take("<H")
        if n_nodes < 1:
            raise StructuralInvariantViolated("empty tree")
        nodes = []
        for i in range(n_nodes):
            flag = r.take("<B")
            if flag == NODE_LEAF:
                nodes.append(TreeNode(LEAF, 0.0, 0, 0, r.take("<f")))
            elif flag == NODE_INTERNAL:
                feature, thr, left, right = r.take("<BfHH")
                if feature >= len(mask):
                    raise StructuralInvariantViolated("feature index out of range")
                if left <= i or right <= i or left >= n_nodes or right >= n_nodes:
                    raise StructuralInvariantViolated("child index not forward-only")
                nodes.append(TreeNode(feature, thr, left, right, 0.0))
            else:
                raise StructuralInvariantViolated(f"bad node flag {flag}")
        trees.append(Tree(nodes))
    return Forest(
        trees, n_classes, float(shrinkage), float(base), mask, (), [], manifest, ma_width
    )


def decode(raw: bytes) -> Model:
    """Parse .ispm bytes back into a model, validating every invariant."""
    if len(raw) < len(MAGIC) or raw[:4] != MAGIC:
        raise BadMagic("not an ISPM stream")
    if len(raw) < 4 + struct.calcsize("<BBHHHB") + MASK_BYTES + 4:
        raise UnsupportedVersion("stream too short for a v1 header")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise ChecksumMismatch("CRC-32 mismatch")
    r = _Reader(raw[:-4])
    r.pos = 4
    version, kind, n_inputs, n_classes, manifest, ma_width = r.take("<BBHHHB")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version}")
    mask = _mask_from_bytes(r.raw[r.pos : r.pos + MASK_BYTES])
    r.pos += MASK_BYTES
    if n_inputs != len(mask):
        raise StructuralInvariantViolated("n_inputs != mask popcount")
    if kind == KIND_MLP:
        model = _decode_mlp(r, mask, manifest, ma_width)
        if model.dims[0] != n_inputs or model.dims[-1] != n_classes:
            raise StructuralInvariantViolated("header/payload dim mismatch")
    elif kind == KIND_FOREST:
        model = _decode_forest(r, mask, manifest, ma_width, n_classes)
    else:
        raise StructuralInvariantViolated(f"unknown model kind {kind}")
    if r.pos != len(r.raw):
        raise StructuralInvariantViolated("trailing bytes after payload")
    return model


def payload_length(model: Model) -> int:
    if isinstance(model, MlpModel):
        return len(_encode_mlp(model))
    return len(_encode_forest(model))


# --------------------------------------------------------------------------
# Footprint accounting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AccountingModel:
    """Declared cost model used to audit a pack against device budgets."""

    window_len: int = 39
    scratch_bytes: int = 64
    code_overhead_bytes: int = 4096
    bytes_per_value: int = 4


@dataclass(frozen=True)
class FootprintReport:
    stack_bytes: int
    program_bytes: int
    data_bytes: int
    breakdown: Dict[str, int]


@dataclass(frozen=True)
class Budget:
    max_stack: int = 850
    max_program: int = 32768
    max_data: int = 8192

    def __post_init__(self):
        if min(self.max_stack, self.max_program, self.max_data) <= 0:
            raise ValueError("budgets must be positive")


def channels_used(mask: FeatureMask) -> int:
    return len({i // 13 for i in mask.kept})


def footprint(model: Model, accounting: AccountingModel = AccountingModel()) -> FootprintReport:
    """Static stack/program/data accounting for one inference pass."""
    bpv = accounting.bytes_per_value
    if isinstance(model, MlpModel):
        n_inputs = model.dims[0]
        working = 2 * max(model.dims) * bpv  # ping-pong activation buffers
    else:
        n_inputs = model.n_inputs
        working = model.n_classes * bpv  # per-class score accumulator
    breakdown = {
        "feature_buffer": n_inputs * bpv,
        "working_buffers": working,
        "scratch": accounting.scratch_bytes,
        "model_payload": payload_length(model),
        "code_overhead": accounting.code_overhead_bytes,
        "window_buffer": accounting.window_len * channels_used(model.feature_mask) * bpv,
    }
    stack = breakdown["feature_buffer"] + breakdown["working_buffers"] + breakdown["scratch"]
    program = breakdown["model_payload"] + breakdown["code_overhead"]
    data = breakdown["window_buffer"]
    return FootprintReport(stack, program, data, breakdown)


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    violations: Dict[str, int]  # budget name -> overage bytes


def audit(report: FootprintReport, budget: Budget = Budget()) -> AuditResult:
    violations = {}
    for name, used, limit in (
        ("stack", report.stack_bytes, budget.max_stack),
        ("program", report.program_bytes, budget.max_program),
        ("data", report.data_bytes, budget.max_data),
    ):
        if used > limit:
            violations[name] = used - limit
    return AuditResult(not violations, violations)


def describe(raw: bytes) -> str:
    """Human-readable dump of a pack's header and footprint breakdown."""
    model = decode(raw)
    kind = "MLP" if isinstance(model, MlpModel) else "Forest"
    report = footprint(model)
    lines = [
        f"kind: {kind}",
        f"format_version: {FORMAT_VERSION}",
        f"manifest_version: {model.manifest_version}",
        f"ma_width: {model.ma_width}",
        f"n_inputs: {len(model.feature_mask)}",
        f"n_classes: {model.dims[-1] if isinstance(model, MlpModel) else model.n_classes}",
        f"mask: {','.join(model.feature_mask.names)}",
        f"pack_bytes: {len(raw)}",
        "breakdown:",
    ]
    lines += [f"  {k}: {v}" for k, v in report.breakdown.items()]
    lines += [
        f"stack_bytes: {report.stack_bytes}",
        f"program_bytes: {report.program_bytes}",
        f"data_bytes: {report.data_bytes}",
    ]
    return "\n".join(lines) + "\n"
