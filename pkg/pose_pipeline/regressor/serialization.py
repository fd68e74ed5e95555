import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from pose_pipeline.constants import MODEL_FORMAT_VERSION, MODEL_MAGIC
from pose_pipeline.errors import (
    ChecksumError,
    DimensionMismatchError,
    FormatVersionError,
    SchemaError,
)
from pose_pipeline.regressor.residual_regressor import (
    NormalizationStats,
    RegressorConfig,
    ResidualRegressor,
)
from pose_pipeline.skeleton import SkeletonModel

# magic, header length
_PREAMBLE = struct.Struct("<8sQ")
_STATS_FIELDS = ("input_mean", "input_std", "target_mean", "target_std")


def _tensors(regressor: ResidualRegressor) -> Dict[str, np.ndarray]:
    network = regressor.network
    tensors = {f"param.{name}": p.value for name, p in network.named_parameters()}
    tensors.update({f"buffer.{name}": b for name, b in network.named_buffers()})
    return tensors


def save_model(regressor: ResidualRegressor, path: Union[str, Path]) -> str:
    """Write the model container and return its content checksum.

    Layout: magic, uint64 header length, JSON header, then little-endian
    float64 tensor blocks in header index order.
    """
    tensors = _tensors(regressor)
    blocks = b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in tensors.values())
    checksum = hashlib.sha256(blocks).hexdigest()
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": regressor.config.model_dump(mode="json"),
        "skeleton_checksum": regressor.skeleton_checksum,
        "normalization": {
            name: getattr(regressor.stats, name).tolist() for name in _STATS_FIELDS
        },
        "tensors": [{"name": name, "shape": list(t.shape)} for name, t in tensors.items()],
        "content_sha256": checksum,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MODEL_MAGIC, len(header_bytes)))
        f.write(header_bytes)
        f.write(blocks)
    return checksum


def load_model(
    path: Union[str, Path], skeleton: Optional[SkeletonModel] = None
) -> ResidualRegressor:
    data = Path(path).read_bytes()
    if len(data) < _PREAMBLE.size:
        raise SchemaError(f"Model file {path} is truncated")
    magic, header_len = _PREAMBLE.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise SchemaError(f"{path} is not a regressor model file")
    header_end = _PREAMBLE.size + header_len
    if len(data) < header_end:
        raise SchemaError(f"Model file {path} is truncated inside its header")
    try:
        header = json.loads(data[_PREAMBLE.size : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"Model header of {path} is corrupt: {e}") from e

    if header.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatVersionError(
            f"Model format version {header.get('format_version')} != {MODEL_FORMAT_VERSION}"
        )
    try:
        config = RegressorConfig.model_validate(header["config"])
    except (KeyError, ValidationError) as e:
        raise SchemaError(f"Model config in {path} is invalid: {e}") from e

    if skeleton is not None:
        if skeleton.num_landmarks != config.num_landmarks:
            raise DimensionMismatchError(
                f"Model was trained for {config.num_landmarks} landmarks, "
                f"skeleton has {skeleton.num_landmarks}"
            )
        if header["skeleton_checksum"] != skeleton.checksum:
            raise ChecksumError("Model was trained for a different skeleton")

    index: List[dict] = header["tensors"]
    blocks = data[header_end:]
    expected = sum(8 * int(np.prod(entry["shape"], dtype=np.int64)) for entry in index)
    if len(blocks) != expected:
        raise SchemaError(f"Model file {path} is truncated: {len(blocks)} of {expected} bytes")
    if hashlib.sha256(blocks).hexdigest() != header["content_sha256"]:
        raise ChecksumError(f"Parameter checksum mismatch in {path}")

    stats = NormalizationStats(
        **{name: np.asarray(header["normalization"][name], dtype=np.float64) for name in _STATS_FIELDS}
    )
    regressor = ResidualRegressor(config, stats, skeleton_checksum=header["skeleton_checksum"])
    params = dict(regressor.network.named_parameters())
    offset = 0
    for entry in index:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(blocks, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        kind, _, name = entry["name"].partition(".")
        if kind == "param" and name in params and params[name].shape == shape:
            params[name].value[...] = values
        elif kind == "buffer":
            try:
                regressor.network.set_buffer(name, values)
            except (KeyError, ValueError) as e:
                raise SchemaError(f"Unexpected buffer {name} in {path}") from e
        else:
            raise SchemaError(f"Unexpected tensor {entry['name']} {shape} in {path}")
    regressor.network.eval()
    return regressor
