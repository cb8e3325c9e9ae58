"""Binary checkpoint container shared by predictor and classifier.

Layout (all integers little-endian)::

    8 bytes   magic b"IMCKPT\\x00\\x01"
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header: schema, version, kind, config, byte_order,
              dtype, tensors [{name, shape, offset, length}], meta
    ...       float64 little-endian payload; tensor offsets count entries
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError
from .params import Weights

MAGIC = b"IMCKPT\x00\x01"
VERSION = 1
SCHEMAS = {"predictor": "intentmotion-predictor", "classifier": "intentmotion-classifier"}


class CheckpointConfigError(CheckpointError, ConfigError):
    """Stored config disagrees with the expected one; ``field`` names the key."""

    def __init__(self, message, field=None):
        CheckpointError.__init__(self, message, field)


def _config_types():
    from .classifier import ClassifierConfig
    from .predictor import PredictorConfig
    return {"predictor": PredictorConfig, "classifier": ClassifierConfig}


def _specs(kind, cfg):
    from .classifier import classifier_specs
    from .predictor import predictor_specs
    return predictor_specs(cfg) if kind == "predictor" else classifier_specs(cfg)


def save_checkpoint(weights, path, extra=None, meta=None):
    """Write ``weights`` (plus optional extra named tensors) atomically."""
    tensors = [(name, arr) for name, arr in weights.items()]
    for name, arr in (extra or {}).items():
        tensors.append((f"extra/{name}", np.asarray(arr, dtype=np.float64)))
    entries, offset = [], 0
    for name, arr in tensors:
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "length": arr.size})
        offset += arr.size
    header = {
        "schema": SCHEMAS[weights.kind], "version": VERSION, "kind": weights.kind,
        "config": weights.config.to_mapping(), "byte_order": "little", "dtype": "float64",
        "tensors": entries, "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True).encode()
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in tensors)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC + struct.pack("<Q", len(head)) + head + payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_checkpoint(path, expected_config=None, kind=None):
    """Return ``(weights, extra, meta)``.

    Raises :class:`CheckpointError` on a damaged file and
    :class:`CheckpointConfigError` when ``kind`` or ``expected_config``
    disagree with what is stored.
    """
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)", field="magic")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + hlen:
        raise CheckpointError(f"{path}: truncated header", field="header")
    try:
        header = json.loads(data[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})", field="header") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}",
                              field="version")
    stored_kind = header.get("kind")
    if stored_kind not in SCHEMAS or header.get("schema") != SCHEMAS[stored_kind]:
        raise CheckpointError(f"{path}: unknown schema {header.get('schema')!r}", field="schema")
    if kind is not None and stored_kind != kind:
        raise CheckpointConfigError(f"{path}: holds a {stored_kind}, expected {kind}", field="kind")
    cfg_type = _config_types()[stored_kind]
    try:
        cfg = cfg_type(**header["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: bad config ({exc})", field="config") from exc
    if expected_config is not None:
        for key, want in expected_config.to_mapping().items():
            got = header["config"].get(key)
            if got != want:
                raise CheckpointConfigError(
                    f"{path}: config field {key!r} is {got!r}, expected {want!r}", field=key)

    body = data[16 + hlen:]
    total = sum(e["length"] for e in header["tensors"])
    if len(body) != 8 * total:
        raise CheckpointError(f"{path}: payload has {len(body)} bytes, expected {8 * total}",
                              field="payload")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    specs = _specs(stored_kind, cfg)
    tensors = {e["name"]: flat[e["offset"]:e["offset"] + e["length"]].reshape(e["shape"])
               for e in header["tensors"]}
    weights = Weights(stored_kind, cfg, specs)
    for name, shape in specs:
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name!r}", field=name)
        if tuple(tensors[name].shape) != tuple(shape):
            raise CheckpointError(f"{path}: tensor {name!r} has shape {tensors[name].shape}",
                                  field=name)
        weights[name] = tensors[name]
    extra = {k[len("extra/"):]: v.copy() for k, v in tensors.items() if k.startswith("extra/")}
    return weights, extra, header.get("meta", {})


def load_checkpoint(path, expected_config=None, kind=None):
    return read_checkpoint(path, expected_config, kind)[0]
