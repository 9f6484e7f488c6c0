"""Multiplication-free execution of ternary networks, plus the model container.

Ternary vectors are stored as two bitsets (plus-mask, minus-mask) held in
arbitrary-precision Python ints; dot products reduce to four AND/popcount
pairs.  The deployment path therefore uses only integer add/sub/compare,
AND, and popcount.  An instrumented interpreter mirrors the same algorithm
through an op-counting ALU so tests can attest that zero multiplications
execute during inference.

The "TNN1" container is a little-endian sectioned binary format with a
trailing CRC32, shared by student models, teacher checkpoints and datasets.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

_TERNARY = (-1, 0, 1)


class PackedLengthError(ValueError):
    """Operands of a packed operation disagree on length."""


@dataclass(frozen=True)
class PackedTernaryVec:
    """Bit-packed ternary vector: bit j of plus/minus marks value +1/-1."""

    n: int
    plus: int
    minus: int

    def __post_init__(self):
        if self.plus & self.minus:
            raise ValueError("a position cannot be both +1 and -1")
        if self.n >= 0 and (self.plus >> self.n or self.minus >> self.n):
            raise ValueError("mask bits set beyond the vector length")

    def nnz(self) -> int:
        return (self.plus | self.minus).bit_count()


def _bits_to_int(bits: np.ndarray) -> int:
    if bits.size == 0:
        return 0
    packed = np.packbits(bits.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _int_to_bits(value: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    raw = value.to_bytes((n + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n]


def pack(values) -> PackedTernaryVec:
    """Pack a ternary sequence into plus/minus bitsets."""
    v = np.asarray(values)
    if v.size and not np.isin(v, _TERNARY).all():
        bad = v[~np.isin(v, _TERNARY)][0]
        raise ValueError(f"value {bad} is outside the ternary alphabet {{-1, 0, 1}}")
    v = v.astype(np.int8)
    return PackedTernaryVec(n=int(v.size), plus=_bits_to_int(v == 1), minus=_bits_to_int(v == -1))


def unpack(p: PackedTernaryVec) -> np.ndarray:
    out = _int_to_bits(p.plus, p.n).astype(np.int8)
    out -= _int_to_bits(p.minus, p.n).astype(np.int8)
    return out


def ternary_dot(w: PackedTernaryVec, x: PackedTernaryVec) -> int:
    """Integer dot product of two packed ternary vectors, no multiplications."""
    if w.n != x.n:
        raise PackedLengthError(f"length mismatch: {w.n} vs {x.n}")
    return (
        (w.plus & x.plus).bit_count()
        + (w.minus & x.minus).bit_count()
        - (w.plus & x.minus).bit_count()
        - (w.minus & x.plus).bit_count()
    )


def step_activation(y: int, b_lo: int, b_hi: int) -> int:
    """Two-threshold step: strictly below b_lo fires -1, strictly above b_hi fires +1."""
    if b_lo > b_hi:
        raise ValueError(f"thresholds out of order: {b_lo} > {b_hi}")
    if y < b_lo:
        return -1
    if y > b_hi:
        return 1
    return 0


@dataclass
class StudentLayer:
    """One ternary layer: packed weight rows plus integer step thresholds."""

    fan_in: int
    weights: list  # list[PackedTernaryVec], one per neuron
    b_lo: np.ndarray  # int32, per neuron
    b_hi: np.ndarray

    def __post_init__(self):
        self.b_lo = np.asarray(self.b_lo, dtype=np.int32)
        self.b_hi = np.asarray(self.b_hi, dtype=np.int32)
        if np.any(self.b_lo > self.b_hi):
            raise ValueError("every neuron needs b_lo <= b_hi")
        for w in self.weights:
            if w.n != self.fan_in:
                raise ValueError("weight length disagrees with fan_in")

    @property
    def fan_out(self) -> int:
        return len(self.weights)

    def dense_weights(self) -> np.ndarray:
        return np.stack([unpack(w) for w in self.weights]) if self.weights else np.zeros((0, self.fan_in), np.int8)


@dataclass
class TernaryMlp:
    """Fully ternary student network; the last layer is the classifier."""

    layers: list  # list[StudentLayer]
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def num_classes(self) -> int:
        return self.layers[-1].fan_out

    def layer_sizes(self) -> list:
        return [lay.fan_out for lay in self.layers]

    def sparsity(self) -> float:
        """Fraction of zero weights: 1 - popcount(masks) / total entries."""
        total = sum(lay.fan_in * lay.fan_out for lay in self.layers)
        nonzero = sum(w.nnz() for lay in self.layers for w in lay.weights)
        return 1.0 - nonzero / total if total else 0.0


class DimensionMismatchError(ValueError):
    pass


def infer(model: TernaryMlp, x: PackedTernaryVec) -> int:
    """Classify one packed input; argmax of the final-layer transfer values.

    Ties break toward the lowest class index.  The computation uses only
    integer add/sub/compare, AND and popcount.
    """
    if x.n != model.input_dim:
        raise DimensionMismatchError(f"input has {x.n} elements, model wants {model.input_dim}")
    a = x
    for lay in model.layers[:-1]:
        plus = 0
        minus = 0
        bit = 1
        for w, lo, hi in zip(lay.weights, lay.b_lo, lay.b_hi):
            y = ternary_dot(w, a)
            if y > hi:
                plus |= bit
            elif y < lo:
                minus |= bit
            bit <<= 1
        a = PackedTernaryVec(n=lay.fan_out, plus=plus, minus=minus)
    out = model.layers[-1]
    best = None
    best_k = 0
    for k, w in enumerate(out.weights):
        y = ternary_dot(w, a)
        if best is None or y > best:
            best = y
            best_k = k
    return best_k


def output_transfer(model: TernaryMlp, x: PackedTernaryVec) -> list:
    """Final-layer integer transfer values for one packed input."""
    a = x
    for lay in model.layers[:-1]:
        vals = [step_activation(ternary_dot(w, a), int(lo), int(hi)) for w, lo, hi in zip(lay.weights, lay.b_lo, lay.b_hi)]
        a = pack(vals)
    return [ternary_dot(w, a) for w in model.layers[-1].weights]


def forward_prefix(layers: list, inputs: np.ndarray) -> np.ndarray:
    """Ternary activations after a stack of student layers (vectorized, exact ints)."""
    a = np.ascontiguousarray(inputs, dtype=np.int32)
    for lay in layers:
        y = a @ lay.dense_weights().astype(np.int32).T
        a = (y > lay.b_hi[None, :]).astype(np.int32) - (y < lay.b_lo[None, :]).astype(np.int32)
    return a.astype(np.int8)


def batch_predict(model: TernaryMlp, inputs: np.ndarray) -> np.ndarray:
    """Vectorized batch classification; integer math, same semantics as infer."""
    a = np.ascontiguousarray(inputs, dtype=np.int32)
    if a.ndim != 2 or a.shape[1] != model.input_dim:
        raise DimensionMismatchError(f"inputs shape {a.shape} does not match input_dim {model.input_dim}")
    a = forward_prefix(model.layers[:-1], a).astype(np.int32)
    y = a @ model.layers[-1].dense_weights().astype(np.int32).T
    return y.argmax(axis=1).astype(np.int32)


def predict_naive(model: TernaryMlp, x) -> int:
    """Per-element multiply-accumulate reference engine (scalar loops)."""
    a = [int(v) for v in x]
    if len(a) != model.input_dim:
        raise DimensionMismatchError("input length does not match the model")
    for lay in model.layers[:-1]:
        dense = lay.dense_weights()
        nxt = []
        for j in range(lay.fan_out):
            y = 0
            row = dense[j]
            for k in range(lay.fan_in):
                y += int(row[k]) * a[k]
            nxt.append(step_activation(y, int(lay.b_lo[j]), int(lay.b_hi[j])))
        a = nxt
    out = model.layers[-1]
    dense = out.dense_weights()
    best = None
    best_k = 0
    for j in range(out.fan_out):
        y = 0
        row = dense[j]
        for k in range(out.fan_in):
            y += int(row[k]) * a[k]
        if best is None or y > best:
            best = y
            best_k = j
    return best_k


# ---------------------------------------------------------------------------
# Instrumented interpreter: same algorithm as infer(), but every arithmetic
# step goes through an ALU that records op counts.  The ALU has no multiply,
# so the recorded trace is a proof that none executed.
# ---------------------------------------------------------------------------

class OpCounter:
    """Counting ALU with integer add/sub/compare/AND/popcount/shift only."""

    def __init__(self):
        self.counts = {"add": 0, "sub": 0, "cmp": 0, "and": 0, "popcount": 0, "shift": 0, "mul": 0}

    def add(self, a, b):
        self.counts["add"] += 1
        return a + b

    def sub(self, a, b):
        self.counts["sub"] += 1
        return a - b

    def gt(self, a, b):
        self.counts["cmp"] += 1
        return a > b

    def lt(self, a, b):
        self.counts["cmp"] += 1
        return a < b

    def and_(self, a, b):
        self.counts["and"] += 1
        return a & b

    def popcount(self, a):
        self.counts["popcount"] += 1
        return a.bit_count()

    def shl1(self, a):
        self.counts["shift"] += 1
        return a << 1

    def total(self) -> int:
        return sum(self.counts.values())


def infer_instrumented(model: TernaryMlp, x: PackedTernaryVec, alu: OpCounter) -> int:
    if x.n != model.input_dim:
        raise DimensionMismatchError(f"input has {x.n} elements, model wants {model.input_dim}")

    def dot(w, a):
        pp = alu.popcount(alu.and_(w.plus, a.plus))
        mm = alu.popcount(alu.and_(w.minus, a.minus))
        pm = alu.popcount(alu.and_(w.plus, a.minus))
        mp = alu.popcount(alu.and_(w.minus, a.plus))
        return alu.sub(alu.sub(alu.add(pp, mm), pm), mp)

    a = x
    for lay in model.layers[:-1]:
        plus = 0
        minus = 0
        bit = 1
        for w, lo, hi in zip(lay.weights, lay.b_lo, lay.b_hi):
            y = dot(w, a)
            if alu.gt(y, int(hi)):
                plus = alu.add(plus, bit)
            elif alu.lt(y, int(lo)):
                minus = alu.add(minus, bit)
            bit = alu.shl1(bit)
        a = PackedTernaryVec(n=lay.fan_out, plus=plus, minus=minus)
    best = None
    best_k = 0
    for k, w in enumerate(model.layers[-1].weights):
        y = dot(w, a)
        if best is None or alu.gt(y, best):
            best = y
            best_k = k
    return best_k


# ---------------------------------------------------------------------------
# TNN1 container.
#
# Layout, all little-endian:
#   bytes 0..3   magic "TNN1"
#   u32          format version (1)
#   u32          section count
#   per section: u16 name length | name utf-8 | u64 offset | u64 length
#   payload blobs at the recorded offsets
#   final u32    CRC32 of every preceding byte
# ---------------------------------------------------------------------------

MAGIC = b"TNN1"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    """Base error for malformed TNN1 files."""


class BadMagicError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


def write_container(path, sections: dict) -> None:
    """Write named byte sections; iteration order of `sections` is preserved."""
    names = list(sections)
    header = bytearray()
    header += MAGIC
    header += struct.pack("<II", FORMAT_VERSION, len(names))
    table_size = sum(2 + len(n.encode()) + 16 for n in names)
    offset = len(header) + table_size
    body = bytearray()
    for n in names:
        blob = sections[n]
        enc = n.encode()
        header += struct.pack("<H", len(enc)) + enc + struct.pack("<QQ", offset, len(blob))
        body += blob
        offset += len(blob)
    payload = bytes(header) + bytes(body)
    with open(path, "wb") as f:
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))


def read_container(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise TruncatedError(f"{path}: file too short to be a TNN1 container")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    payload, crc = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: checksum mismatch")
    version, count = struct.unpack_from("<II", payload, 4)
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported format version {version}")
    pos = 12
    sections = {}
    entries = []
    for _ in range(count):
        if pos + 2 > len(payload):
            raise TruncatedError(f"{path}: section table truncated")
        (name_len,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        name = payload[pos : pos + name_len].decode()
        pos += name_len
        if pos + 16 > len(payload):
            raise TruncatedError(f"{path}: section table truncated")
        off, length = struct.unpack_from("<QQ", payload, pos)
        pos += 16
        entries.append((name, off, length))
    for name, off, length in entries:
        if off + length > len(payload):
            raise TruncatedError(f"{path}: section {name!r} extends past end of file")
        sections[name] = payload[off : off + length]
    return sections


def _meta_bytes(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()


def save_model(model: TernaryMlp, path) -> None:
    """Serialize a student network; byte output is a pure function of the model."""
    meta = dict(model.meta)
    meta["kind"] = "ternary_mlp"
    meta["input_dim"] = model.input_dim
    meta["layer_sizes"] = model.layer_sizes()
    sections = {"meta": _meta_bytes(meta)}
    for i, lay in enumerate(model.layers):
        nbytes = (lay.fan_in + 7) // 8
        plus = b"".join(w.plus.to_bytes(nbytes, "little") for w in lay.weights)
        minus = b"".join(w.minus.to_bytes(nbytes, "little") for w in lay.weights)
        sections[f"L{i}.plus"] = plus
        sections[f"L{i}.minus"] = minus
        sections[f"L{i}.blo"] = lay.b_lo.astype("<i4").tobytes()
        sections[f"L{i}.bhi"] = lay.b_hi.astype("<i4").tobytes()
    write_container(path, sections)


def load_model(path) -> TernaryMlp:
    sections = read_container(path)
    try:
        meta = json.loads(sections["meta"])
    except KeyError:
        raise ContainerError(f"{path}: missing meta section") from None
    if meta.get("kind") != "ternary_mlp":
        raise ContainerError(f"{path}: container holds {meta.get('kind')!r}, not a ternary model")
    dims = [meta["input_dim"]] + list(meta["layer_sizes"])
    layers = []
    for i in range(len(meta["layer_sizes"])):
        fan_in, fan_out = dims[i], dims[i + 1]
        nbytes = (fan_in + 7) // 8
        plus_raw = sections[f"L{i}.plus"]
        minus_raw = sections[f"L{i}.minus"]
        if len(plus_raw) != fan_out * nbytes or len(minus_raw) != fan_out * nbytes:
            raise TruncatedError(f"{path}: layer {i} mask data has the wrong size")
        weights = [
            PackedTernaryVec(
                n=fan_in,
                plus=int.from_bytes(plus_raw[j * nbytes : (j + 1) * nbytes], "little"),
                minus=int.from_bytes(minus_raw[j * nbytes : (j + 1) * nbytes], "little"),
            )
            for j in range(fan_out)
        ]
        b_lo = np.frombuffer(sections[f"L{i}.blo"], dtype="<i4")
        b_hi = np.frombuffer(sections[f"L{i}.bhi"], dtype="<i4")
        layers.append(StudentLayer(fan_in=fan_in, weights=weights, b_lo=b_lo.copy(), b_hi=b_hi.copy()))
    return TernaryMlp(layers=layers, meta=meta)


def save_dataset(ds, path) -> None:
    from ternnet.data import Dataset  # local import to avoid a cycle

    assert isinstance(ds, Dataset)
    meta = {
        "kind": "dataset",
        "num_classes": int(ds.num_classes),
        "n": len(ds),
        "input_dim": int(ds.input_dim),
    }
    write_container(
        path,
        {
            "meta": _meta_bytes(meta),
            "inputs": ds.inputs.astype("<i1").tobytes(),
            "labels": ds.labels.astype("<i4").tobytes(),
        },
    )


def load_dataset(path):
    from ternnet.data import Dataset

    sections = read_container(path)
    meta = json.loads(sections["meta"])
    if meta.get("kind") != "dataset":
        raise ContainerError(f"{path}: container holds {meta.get('kind')!r}, not a dataset")
    inputs = np.frombuffer(sections["inputs"], dtype="<i1").reshape(meta["n"], meta["input_dim"])
    labels = np.frombuffer(sections["labels"], dtype="<i4")
    return Dataset(inputs.copy(), labels.copy(), meta["num_classes"])
