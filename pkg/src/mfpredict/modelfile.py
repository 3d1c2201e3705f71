"""Binary container for :class:`ImputationModel`.

Layout (all integers and floats little-endian)::

    magic      8 bytes  b"MFPMODEL"
    version    u32
    body_len   u64
    body       body_len bytes
    crc32      u32      CRC-32 of body

    body:
      meta_len u32, meta  UTF-8 JSON (schema, init values, sequence, n_iter,
                          total_iterations, config, error trace)
      n_steps  u32
      per step: iteration u32, position u32, target u32, n_pred u32,
                predictors i32[n_pred], has_forest u8,
                [forest_len u64, forest block]

    forest block:
      mode u8 (0 regression, 1 probability), n_classes u32, n_features u32,
      num_trees u32, n_nodes u64, n_train u64,
      num_trees u32, mtry u32, min_node_size u32, max_depth u32, seed u64,
      is_cat u8[p], n_levels i64[p], majority i64[p], seen u64[p],
      offsets i64[T+1], feature i32[N], threshold f64[N], cat_mask u64[N],
      left i32[N], right i32[N], value f64[N * n_classes]

In-bag records are not stored, so a loaded model replays but cannot report
out-of-bag predictions.
"""

from __future__ import annotations

import io
import json
import struct
import zlib

import numpy as np

from .errors import ModelFormatError
from .forest import PROBABILITY, REGRESSION, Forest, ForestParams
from .tabular import kind_from_json

MAGIC = b"MFPMODEL"
VERSION = 1

_MODES = {REGRESSION: 0, PROBABILITY: 1}


def _arr(buf: io.BytesIO, a, dtype: str) -> None:
    buf.write(np.ascontiguousarray(a, dtype=dtype).tobytes())


def _encode_forest(f: Forest) -> bytes:
    buf = io.BytesIO()
    p = f.params
    buf.write(struct.pack(
        "<BIIIQQ", _MODES[f.mode], f.n_classes, f.n_features, f.num_trees, f.n_nodes, f.n_train
    ))
    buf.write(struct.pack("<IIIIQ", p.num_trees, p.mtry, p.min_node_size, p.max_depth, p.seed))
    _arr(buf, f.is_cat, "<u1")
    _arr(buf, f.n_levels, "<i8")
    _arr(buf, f.majority, "<i8")
    _arr(buf, f.seen, "<u8")
    _arr(buf, f.offsets, "<i8")
    _arr(buf, f.feature, "<i4")
    _arr(buf, f.threshold, "<f8")
    _arr(buf, f.cat_mask, "<u8")
    _arr(buf, f.left, "<i4")
    _arr(buf, f.right, "<i4")
    _arr(buf, f.value, "<f8")
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(dt.newbyteorder("="))


def _decode_forest(r: _Reader) -> Forest:
    mode_code, R, p, T, N, n_train = r.unpack("<BIIIQQ")
    modes = {v: k for k, v in _MODES.items()}
    if mode_code not in modes:
        raise ModelFormatError(f"unknown forest mode {mode_code}")
    nt, mtry, mns, depth, seed = r.unpack("<IIIIQ")
    params = ForestParams(nt, mtry, mns, depth, seed)
    is_cat = r.array("<u1", p).astype(bool)
    n_levels = r.array("<i8", p)
    majority = r.array("<i8", p)
    seen = r.array("<u8", p)
    offsets = r.array("<i8", T + 1)
    if offsets[-1] != N:
        raise ModelFormatError("inconsistent forest block")
    feature = r.array("<i4", N)
    threshold = r.array("<f8", N)
    cat_mask = r.array("<u8", N)
    left = r.array("<i4", N)
    right = r.array("<i4", N)
    value = r.array("<f8", N * R).reshape(N, R)
    return Forest(
        modes[mode_code], R, is_cat, n_levels, majority, seen, params,
        offsets, feature, threshold, cat_mask, left, right, value, n_train,
    )


def dumps(model) -> bytes:
    meta = {
        "schema": [{"name": n, **k.to_json()} for n, k in model.schema],
        "init_values": model.init_values,
        "sequence": [int(j) for j in model.sequence],
        "n_iter": model.n_iter,
        "total_iterations": model.total_iterations,
        "config": model.config,
        "trace": model.trace.to_json(),
    }
    body = io.BytesIO()
    raw = json.dumps(meta, sort_keys=True, allow_nan=False).encode("utf-8")
    body.write(struct.pack("<I", len(raw)))
    body.write(raw)
    body.write(struct.pack("<I", len(model.steps)))
    for s in model.steps:
        body.write(struct.pack("<IIII", s.iteration, s.position, s.target, len(s.predictors)))
        _arr(body, s.predictors, "<i4")
        if s.forest is None:
            body.write(b"\x00")
        else:
            block = _encode_forest(s.forest)
            body.write(b"\x01" + struct.pack("<Q", len(block)) + block)
    payload = body.getvalue()
    return (
        MAGIC
        + struct.pack("<IQ", VERSION, len(payload))
        + payload
        + struct.pack("<I", zlib.crc32(payload))
    )


def loads(data: bytes):
    from .imputer import ErrorTrace, ImputationModel, StepModel

    if len(data) < 8 or data[:8] != MAGIC:
        raise ModelFormatError("not a model file (bad magic header)")
    r = _Reader(data)
    r.take(8)
    (version,) = r.unpack("<I")
    if version > VERSION:
        raise ModelFormatError(
            f"model file format version {version} is newer than supported version {VERSION}"
        )
    if version < 1:
        raise ModelFormatError(f"invalid model format version {version}")
    (length,) = r.unpack("<Q")
    payload = r.take(length)
    (crc,) = r.unpack("<I")
    if zlib.crc32(payload) != crc:
        raise ModelFormatError("model file is corrupt (checksum mismatch)")
    if r.pos != len(data):
        raise ModelFormatError("trailing bytes after model body")

    b = _Reader(payload)
    (meta_len,) = b.unpack("<I")
    try:
        meta = json.loads(b.take(meta_len).decode("utf-8"))
    except ValueError as e:
        raise ModelFormatError(f"unreadable model metadata: {e}") from None
    (n_steps,) = b.unpack("<I")
    steps = []
    for _ in range(n_steps):
        it, pos, target, n_pred = b.unpack("<IIII")
        preds = b.array("<i4", n_pred).astype(np.int64)
        (flag,) = b.unpack("<B")
        forest = None
        if flag:
            (flen,) = b.unpack("<Q")
            start = b.pos
            forest = _decode_forest(b)
            if b.pos - start != flen:
                raise ModelFormatError("forest block length mismatch")
        steps.append(StepModel(it, pos, target, preds, forest))
    if b.pos != len(payload):
        raise ModelFormatError("unexpected bytes at end of model body")
    schema = [(c["name"], kind_from_json(c)) for c in meta["schema"]]
    return ImputationModel(
        schema=schema,
        init_values=meta["init_values"],
        sequence=meta["sequence"],
        n_iter=meta["n_iter"],
        total_iterations=meta["total_iterations"],
        steps=steps,
        trace=ErrorTrace.from_json(meta["trace"]),
        config=meta["config"],
    )


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
