#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created the .smp sample container: magic, length-prefixed JSON header, raw float32 tensors
# - Header keys are written in a fixed order so identical samples give identical bytes
# - Added corruption checks reporting the failing byte offset
# - Added per-split index.json read/write
# - A malformed index.json is a DatasetError
#

"""Binary container for preprocessed samples.

Layout::

    b"STRKSEG1"                      8-byte magic
    uint32 little-endian             header length N
    N bytes UTF-8 JSON header        {case_id, center_slice, S, shapes, dtype, order}
    raw little-endian float32 data   dwi_stack, adc_stack, target (row-major)
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import DatasetError, SampleFormatError
from .records import SampleRecord
from .volume_io import atomic_write_bytes

PathLike = Union[str, Path]

MAGIC = b"STRKSEG1"
SAMPLE_SUFFIX = ".smp"
INDEX_NAME = "index.json"
_LENGTH = struct.Struct("<I")
_DTYPE = np.dtype("<f4")
_TENSORS = ("dwi_stack", "adc_stack", "target")


def sample_filename(record: SampleRecord) -> str:
    """``<case_id>_<center_slice>.smp``"""
    return f"{record.name}{SAMPLE_SUFFIX}"


def encode_sample(record: SampleRecord) -> bytes:
    """Serialize a record into container bytes."""
    tensors = [np.ascontiguousarray(getattr(record, name), dtype=_DTYPE) for name in _TENSORS]
    header = {
        "case_id": record.case_id,
        "center_slice": int(record.center_slice),
        "S": record.slices_per_modality,
        "shapes": {name: list(t.shape) for name, t in zip(_TENSORS, tensors)},
        "dtype": "float32",
        "order": "row-major",
    }
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return b"".join([MAGIC, _LENGTH.pack(len(header_bytes)), header_bytes] + [t.tobytes(order="C") for t in tensors])


def _parse_header(payload: bytes) -> Tuple[Dict[str, Any], int]:
    if len(payload) < len(MAGIC) or payload[: len(MAGIC)] != MAGIC:
        raise SampleFormatError("bad magic, not a strokeseg sample file", 0)
    offset = len(MAGIC)
    if len(payload) < offset + _LENGTH.size:
        raise SampleFormatError("truncated header length", offset)
    (length,) = _LENGTH.unpack_from(payload, offset)
    offset += _LENGTH.size
    if len(payload) < offset + length:
        raise SampleFormatError(f"truncated header, expected {length} bytes", offset)
    try:
        header = json.loads(payload[offset : offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SampleFormatError(f"corrupted header: {e}", offset) from e
    if not isinstance(header, dict):
        raise SampleFormatError("header must be a JSON object", offset)
    missing = [k for k in ("case_id", "center_slice", "S", "shapes", "dtype", "order") if k not in header]
    if missing:
        raise SampleFormatError(f"header misses key(s) {missing}", offset)
    if header["dtype"] != "float32" or header["order"] != "row-major":
        raise SampleFormatError(f"unsupported dtype/order {header['dtype']}/{header['order']}", offset)
    return header, offset + length


def decode_sample(payload: bytes) -> SampleRecord:
    """Parse container bytes back into a SampleRecord."""
    header, offset = _parse_header(payload)
    shapes = header["shapes"]
    s = int(header["S"])
    expected_stack = None
    tensors = {}
    for name in _TENSORS:
        if name not in shapes:
            raise SampleFormatError(f"header has no shape for {name}", len(MAGIC) + _LENGTH.size)
        shape = tuple(int(d) for d in shapes[name])
        if name != "target":
            if len(shape) != 3 or shape[2] != s:
                raise SampleFormatError(f"{name} shape {shape} does not match S={s}", offset)
            expected_stack = expected_stack or shape
            if shape != expected_stack:
                raise SampleFormatError(f"{name} shape {shape} differs from {expected_stack}", offset)
        elif expected_stack is not None and shape != expected_stack[:2]:
            raise SampleFormatError(f"target shape {shape} does not match stack plane {expected_stack[:2]}", offset)
        nbytes = int(np.prod(shape)) * _DTYPE.itemsize
        if len(payload) < offset + nbytes:
            raise SampleFormatError(f"truncated {name} data, expected {nbytes} bytes", offset)
        tensors[name] = np.frombuffer(payload, dtype=_DTYPE, count=int(np.prod(shape)), offset=offset).reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(payload):
        raise SampleFormatError(f"{len(payload) - offset} trailing bytes after tensor data", offset)
    return SampleRecord(
        case_id=str(header["case_id"]),
        center_slice=int(header["center_slice"]),
        dwi_stack=tensors["dwi_stack"],
        adc_stack=tensors["adc_stack"],
        target=tensors["target"],
    )


def write_sample(record: SampleRecord, path: PathLike) -> Path:
    """Write a record atomically. ``path`` may be a directory or a file path."""
    path = Path(path)
    if path.is_dir():
        path = path / sample_filename(record)
    return atomic_write_bytes(path, encode_sample(record))


def read_sample(path: PathLike) -> SampleRecord:
    """Read a record written by write_sample."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"sample file not found: {path}")
    return decode_sample(path.read_bytes())


def write_index(split_dir: PathLike, split: str, sample_files: Sequence[str]) -> Path:
    """Write ``index.json`` listing the sample files of one split in order."""
    payload = json.dumps({"split": split, "samples": list(sample_files)}, indent=2) + "\n"
    return atomic_write_bytes(Path(split_dir) / INDEX_NAME, payload.encode("utf-8"))


def read_index(split_dir: PathLike) -> List[Path]:
    """Return the sample file paths listed in a split's index, in index order."""
    split_dir = Path(split_dir)
    index_path = split_dir / INDEX_NAME
    if not index_path.is_file():
        raise FileNotFoundError(f"sample index not found: {index_path}")
    try:
        data = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"{index_path} is not valid JSON: {e}") from e
    names = data.get("samples") if isinstance(data, dict) else None
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise DatasetError(f"{index_path} must hold a \"samples\" list of file names")
    return [split_dir / name for name in names]


__all__ = [
    "MAGIC",
    "encode_sample",
    "decode_sample",
    "write_sample",
    "read_sample",
    "write_index",
    "read_index",
    "sample_filename",
    "INDEX_NAME",
]
