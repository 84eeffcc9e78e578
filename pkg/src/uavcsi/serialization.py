"""Versioned binary container and the trained-model bundle.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON
header (schema version, kind, free-form metadata, tensor manifest), then
the raw tensor bytes in manifest order.  Tensors are stored little-endian:
float64, complex128 (f64 pairs), or int64.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ShapeError
from .transmit import CompressionMatrix

MAGIC = b"UAVCSIC1"
SCHEMA_VERSION = 1
_DTYPES = {"<f8", "<c16", "<i8"}


def _canon_dtype(arr: np.ndarray) -> str:
    if np.issubdtype(arr.dtype, np.complexfloating):
        return "<c16"
    if np.issubdtype(arr.dtype, np.floating):
        return "<f8"
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        return "<i8"
    raise FormatError(f"unsupported tensor dtype {arr.dtype}")


def write_container(path, kind: str, meta: dict, tensors: dict) -> None:
    manifest = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = _canon_dtype(arr)
        blob = np.ascontiguousarray(arr.astype(dt)).tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": dt})
        blobs.append(blob)
    header = json.dumps({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "meta": meta,
        "tensors": manifest,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path, expect_kind: str | None = None):
    """Return (meta, tensors) after validating magic, version and sizes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 or raw[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a container file")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    off = len(MAGIC) + 4
    if off + hlen > len(raw):
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(
            f"{path}: schema version {header.get('schema_version')} "
            f"not supported (want {SCHEMA_VERSION})")
    if expect_kind is not None and header.get("kind") != expect_kind:
        raise FormatError(
            f"{path}: kind {header.get('kind')!r}, expected {expect_kind!r}")
    off += hlen
    tensors = {}
    for ent in header["tensors"]:
        dt = ent["dtype"]
        if dt not in _DTYPES:
            raise FormatError(f"{path}: unsupported dtype {dt!r}")
        shape = tuple(ent["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * np.dtype(dt).itemsize
        if off + nbytes > len(raw):
            raise FormatError(f"{path}: truncated tensor {ent['name']!r}")
        tensors[ent["name"]] = np.frombuffer(
            raw, dtype=dt, count=int(np.prod(shape, dtype=np.int64)),
            offset=off).reshape(shape).copy()
        off += nbytes
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    return header["meta"], tensors


# ---------------------------------------------------------------------------
# trained-model bundle

@dataclass
class ModelParams:
    """All receiver-side state shared between training and evaluation."""

    n: int
    la: int
    m: int
    phi: CompressionMatrix
    q_seed: int = 0
    sennet: dict | None = None      # best-validation weights
    aidnet: dict | None = None
    recnet: dict | None = None
    finals: dict = field(default_factory=dict)   # net name -> final weights
    norms: dict = field(default_factory=dict)    # input-normalization choices
    schema_version: int = SCHEMA_VERSION


def _expected_shapes(n: int, la: int) -> dict:
    from .nnet import make_aidnet, make_recnet, make_sennet
    rng = np.random.default_rng(0)
    return {
        "sennet": {k: v.shape for k, v in make_sennet(la, n).init_params(rng).items()},
        "aidnet": {k: v.shape for k, v in make_aidnet(n).init_params(rng).items()},
        "recnet": {k: v.shape for k, v in make_recnet(la, n).init_params(rng).items()},
    }


def save_model(path, mp: ModelParams, extra_meta: dict | None = None) -> None:
    meta = {"n": mp.n, "la": mp.la, "m": mp.m,
            "phi_seed": mp.phi.seed, "q_seed": mp.q_seed,
            "norms": mp.norms}
    if extra_meta:
        meta.update(extra_meta)
    tensors = {"phi": mp.phi.phi}
    for net in ("sennet", "aidnet", "recnet"):
        weights = getattr(mp, net)
        if weights is not None:
            for k, v in weights.items():
                tensors[f"{net}.best.{k}"] = v
        if net in mp.finals:
            for k, v in mp.finals[net].items():
                tensors[f"{net}.final.{k}"] = v
    write_container(path, "model", meta, tensors)


def load_model(path, expect_n: int | None = None,
               expect_la: int | None = None) -> ModelParams:
    meta, tensors = read_container(path, expect_kind="model")
    n, la, m = int(meta["n"]), int(meta["la"]), int(meta["m"])
    if expect_n is not None and n != expect_n:
        raise ShapeError(f"model built for N={n}, config wants N={expect_n}")
    if expect_la is not None and la != expect_la:
        raise ShapeError(f"model built for La={la}, config wants La={expect_la}")
    expected = _expected_shapes(n, la)
    nets = {"sennet": None, "aidnet": None, "recnet": None}
    finals: dict = {}
    for name, arr in tensors.items():
        if name == "phi":
            continue
        net, stage, key = name.split(".", 2)
        want = expected[net].get(key)
        if want is None or tuple(arr.shape) != tuple(want):
            raise ShapeError(f"tensor {name}: shape {arr.shape}, expected {want}")
        if stage == "best":
            if nets[net] is None:
                nets[net] = {}
            nets[net][key] = arr
        else:
            finals.setdefault(net, {})[key] = arr
    phi = tensors["phi"]
    if phi.shape != (la * n, n):
        raise ShapeError(f"phi shape {phi.shape}, expected {(la * n, n)}")
    return ModelParams(
        n=n, la=la, m=m,
        phi=CompressionMatrix(phi=phi, seed=int(meta["phi_seed"])),
        q_seed=int(meta.get("q_seed", 0)),
        sennet=nets["sennet"], aidnet=nets["aidnet"], recnet=nets["recnet"],
        finals=finals, norms=dict(meta.get("norms", {})))
