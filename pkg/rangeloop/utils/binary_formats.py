"""
Binärformate
RLW1 (Checkpoint), RIM1 (Range-Bild), RLD1 (Deskriptor-Datenbank). Alle Zahlen little-endian,
Header-Ganzzahlen als uint64 (RIM1: uint32), Nutzdaten als float32.
"""
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..models.range_image import RangeImage
from ..models.tensor import Tensor
from ..schemas.projection_schema import ProjectionParams

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"RLW1"
RANGE_IMAGE_MAGIC = b"RIM1"
DESCRIPTOR_DB_MAGIC = b"RLD1"

_U32 = np.dtype("<u4")
_U64 = np.dtype("<u8")
_F32 = np.dtype("<f4")
_F64 = np.dtype("<f8")

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Datei hat falsche Magic-Bytes oder ist abgeschnitten"""


class _Reader:
    """Cursor über einen Byte-Puffer mit Offset-genauen Fehlermeldungen"""

    def __init__(self, payload: bytes, path: PathLike):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if end > len(self.payload):
            raise FormatError(
                f"{self.path}: truncated at byte offset {len(self.payload)}, expected {count} bytes at offset {self.offset}"
            )
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def array(self, dtype: np.dtype, count: int) -> np.ndarray:
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype, count=count)

    def u64(self) -> int:
        return int(self.array(_U64, 1)[0])

    def u32(self) -> int:
        return int(self.array(_U32, 1)[0])

    def magic(self, expected: bytes) -> None:
        found = self.take(len(expected))
        if found != expected:
            raise FormatError(f"{self.path}: bad magic {found!r}, expected {expected!r}")

    def at_end(self) -> bool:
        return self.offset == len(self.payload)

    def finish(self) -> None:
        if self.offset != len(self.payload):
            raise FormatError(f"{self.path}: {len(self.payload) - self.offset} trailing bytes at offset {self.offset}")


def _u64(value: int) -> bytes:
    return np.array([value], dtype=_U64).tobytes()


def _u32(value: int) -> bytes:
    return np.array([value], dtype=_U32).tobytes()


# ---------------------------------------------------------------------------
# RLW1: Checkpoint

def save_checkpoint(path: PathLike, weights: Mapping[str, Union[Tensor, np.ndarray]]) -> None:
    """
    Schreibt alle Parameter: Magic, dann pro Parameter
    (Namenslänge, Name UTF-8, Rang, Dimensionen, float32-Werte) bis zum Dateiende.
    """
    chunks = [CHECKPOINT_MAGIC]
    for name in sorted(weights):
        value = weights[name]
        array = value.data if isinstance(value, Tensor) else np.asarray(value)
        encoded = name.encode("utf-8")
        chunks += [_u64(len(encoded)), encoded, _u64(array.ndim)]
        chunks += [_u64(dim) for dim in array.shape]
        chunks.append(np.ascontiguousarray(array, dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(chunks))
    logger.debug(f"Checkpoint gespeichert: {path} ({len(weights)} Parameter)")


def load_checkpoint(path: PathLike) -> Dict[str, Tensor]:
    """
    Lädt einen RLW1-Checkpoint als trainierbare Tensoren.

    Raises:
        FormatError: Falsche Magic-Bytes, abgeschnittene Datei, doppelte Namen
    """
    reader = _Reader(Path(path).read_bytes(), path)
    reader.magic(CHECKPOINT_MAGIC)
    weights: Dict[str, Tensor] = {}
    while not reader.at_end():
        name = reader.take(reader.u64()).decode("utf-8")
        rank = reader.u64()
        shape = tuple(reader.u64() for _ in range(rank))
        values = reader.array(_F32, int(np.prod(shape, dtype=np.int64)))
        if name in weights:
            raise FormatError(f"{path}: parameter {name} stored twice")
        weights[name] = Tensor(values.reshape(shape), requires_grad=True, name=name)
    return weights


# ---------------------------------------------------------------------------
# RIM1: Range-Bild

def save_range_image(path: PathLike, image: RangeImage) -> None:
    """Magic, h, w (uint32), f_up, f_down (float64), dann h*w float32 row-major."""
    params = image.params
    header = [RANGE_IMAGE_MAGIC, _u32(params.h), _u32(params.w),
              np.array([params.f_up, params.f_down], dtype=_F64).tobytes()]
    Path(path).write_bytes(b"".join(header) + np.ascontiguousarray(image.pixels, dtype=_F32).tobytes())


def load_range_image(path: PathLike, min_range: Optional[float] = None) -> RangeImage:
    """
    Lädt ein RIM1-Bild. min_range steht nicht in der Datei und kommt aus dem Aufrufer
    (Default: settings.MIN_RANGE).
    """
    reader = _Reader(Path(path).read_bytes(), path)
    reader.magic(RANGE_IMAGE_MAGIC)
    h, w = reader.u32(), reader.u32()
    f_up, f_down = (float(v) for v in reader.array(_F64, 2))
    pixels = reader.array(_F32, h * w).reshape(h, w)
    reader.finish()
    extra = {} if min_range is None else {"min_range": min_range}
    params = ProjectionParams(w=w, h=h, f_up=f_up, f_down=f_down, **extra)
    return RangeImage(params=params, pixels=pixels.copy())


# ---------------------------------------------------------------------------
# RLD1: Deskriptor-Datenbank

def save_descriptor_db(path: PathLike, scan_ids, descriptors: np.ndarray) -> None:
    """Magic, Anzahl, Dimension (uint64), dann pro Eintrag scan_id (uint64) + dim float32."""
    descriptors = np.asarray(descriptors)
    ids = np.asarray(list(scan_ids), dtype=np.int64)
    if descriptors.ndim != 2 or descriptors.shape[0] != ids.shape[0]:
        raise ValueError(f"descriptor db needs [N, D] descriptors for {ids.shape[0]} ids, got {descriptors.shape}")
    if np.any(ids < 0):
        raise ValueError("scan ids must be non-negative")
    count, dim = descriptors.shape
    record = np.dtype([("scan_id", _U64), ("values", _F32, (dim,))])
    entries = np.empty(count, dtype=record)
    entries["scan_id"] = ids
    entries["values"] = descriptors
    Path(path).write_bytes(DESCRIPTOR_DB_MAGIC + _u64(count) + _u64(dim) + entries.tobytes())


def load_descriptor_db(path: PathLike) -> Tuple[List[int], np.ndarray]:
    """
    Returns:
        (scan_ids, Deskriptoren [N, D] als float32)
    """
    reader = _Reader(Path(path).read_bytes(), path)
    reader.magic(DESCRIPTOR_DB_MAGIC)
    count, dim = reader.u64(), reader.u64()
    record = np.dtype([("scan_id", _U64), ("values", _F32, (dim,))])
    entries = np.frombuffer(reader.take(record.itemsize * count), dtype=record, count=count)
    reader.finish()
    return [int(i) for i in entries["scan_id"]], np.array(entries["values"], dtype=np.float32).reshape(count, dim)
