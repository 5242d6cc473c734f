"""
Model checkpoints.

Layout: the 8-byte magic :data:`MAGIC`; a little-endian header of format
version (uint16), payload length (uint64) and CRC-32 of the payload (uint32);
then a msgpack payload holding the flat model configuration and the list of
:code:`[name, array]` tensor entries, with arrays stored as little-endian
float32.

"""

from __future__ import annotations

import logging
import struct
import zlib
from pathlib import Path
from typing import Any

import msgpack  # type: ignore
import msgpack_numpy  # type: ignore
import numpy as np

from .. import VERSION, CheckpointError, ConfigError, DimensionError  # noqa: TID252
from ..model import ModelConfig  # noqa: TID252
from ..model.network import DpsnnModel  # noqa: TID252

__version__ = VERSION

logger = logging.getLogger(__name__)

MAGIC = b"DPSNNCKP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<HQI")


def dumps(_model: DpsnnModel, /) -> bytes:
    """Serialize a model; parameters are rounded to float32."""
    _payload = msgpack.packb(
        {
            "config": _model.config.to_flat(),
            "tensors": [[_k, _v.astype("<f4")] for _k, _v in _model.params.items()],
        },
        default=msgpack_numpy.encode,
        use_bin_type=True,
    )
    return MAGIC + _HEADER.pack(FORMAT_VERSION, len(_payload), zlib.crc32(_payload)) + _payload


def loads(_blob: bytes, /) -> DpsnnModel:
    """Deserialize a model, with float64 parameters

    Raises
    ------
    CheckpointError
        On a foreign, corrupt, truncated or version-mismatched blob, or tensors
        that do not match the stored configuration.

    """
    _n_head = len(MAGIC) + _HEADER.size
    if len(_blob) < _n_head or _blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("Not a model checkpoint.")
    _version, _length, _crc = _HEADER.unpack_from(_blob, len(MAGIC))
    if _version != FORMAT_VERSION:
        raise CheckpointError(
            f"Checkpoint format version {_version} is not supported; expected {FORMAT_VERSION}."
        )
    _payload = _blob[_n_head:]
    if len(_payload) != _length:
        raise CheckpointError(
            f"Checkpoint payload is {len(_payload)} bytes, header says {_length}; "
            "the file is truncated or padded."
        )
    if zlib.crc32(_payload) != _crc:
        raise CheckpointError("Checkpoint payload fails its CRC-32 check.")

    try:
        _obj: dict[str, Any] = msgpack.unpackb(
            _payload, object_hook=msgpack_numpy.decode, raw=False
        )
        _config = ModelConfig.from_flat(_obj["config"])
        _tensors = {str(_k): np.asarray(_v, dtype=np.float64) for _k, _v in _obj["tensors"]}
        return DpsnnModel(_config, _tensors)
    except (ConfigError, DimensionError) as _err:
        raise CheckpointError(f"Checkpoint does not describe a valid model: {_err}") from _err
    except (KeyError, TypeError, ValueError, msgpack.UnpackException) as _err:
        raise CheckpointError(f"Malformed checkpoint payload: {_err}") from _err


def save_checkpoint(_model: DpsnnModel, _path: Path | str, /) -> None:
    """Write a checkpoint, replacing any existing file atomically."""
    _path = Path(_path)
    _tmp = _path.with_name(f".{_path.name}.tmp")
    try:
        _tmp.write_bytes(dumps(_model))
        _tmp.replace(_path)
    finally:
        _tmp.unlink(missing_ok=True)
    logger.info("Saved checkpoint to %s", _path)


def load_checkpoint(_path: Path | str, /) -> DpsnnModel:
    """Read a checkpoint; see :func:`loads`."""
    return loads(Path(_path).read_bytes())
