"""
KITTI-Konventionen
velodyne/*.bin: float32-Quadrupel (x, y, z, intensity) little-endian.
poses.txt: pro Zeile 12 Zahlen, row-major 3x4 [R|t] (Sensor -> Welt).
"""
import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from ..models.pose import Pose, nearest_rotation, rotation_error
from ..models.range_image import PointCloud

logger = logging.getLogger(__name__)

POINT_RECORD_BYTES = 16
POSE_TOLERANCE = 1e-4
# Exakte Rotationen bleiben bitgleich, nur echte Abweichungen werden projiziert
_REPROJECT_ABOVE = 1e-12

PathLike = Union[str, Path]


def read_scan_bin(path: PathLike) -> PointCloud:
    """
    Liest einen Velodyne-Scan.

    Raises:
        ValueError: Wenn die Dateilänge kein Vielfaches von 16 Bytes ist (mit Byte-Offset)
    """
    payload = Path(path).read_bytes()
    remainder = len(payload) % POINT_RECORD_BYTES
    if remainder:
        offset = len(payload) - remainder
        raise ValueError(f"{path}: truncated point record at byte offset {offset} ({remainder} stray bytes)")
    data = np.frombuffer(payload, dtype="<f4").reshape(-1, 4)
    return PointCloud(points=data[:, :3].astype(np.float64), intensity=data[:, 3].copy())


def write_scan_bin(path: PathLike, cloud: PointCloud) -> None:
    data = np.zeros((len(cloud), 4), dtype="<f4")
    data[:, :3] = cloud.points
    if cloud.intensity is not None:
        data[:, 3] = cloud.intensity
    Path(path).write_bytes(data.tobytes())


def parse_pose_line(line: str, line_number: int = 1) -> Pose:
    values = line.split()
    if len(values) != 12:
        raise ValueError(f"line {line_number}: expected 12 numbers, got {len(values)}")
    try:
        matrix = np.array([float(v) for v in values]).reshape(3, 4)
    except ValueError:
        raise ValueError(f"line {line_number}: cannot parse pose numbers '{line.strip()}'")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"line {line_number}: pose contains non-finite values")

    rotation = matrix[:, :3]
    error = rotation_error(rotation)
    if error > POSE_TOLERANCE:
        raise ValueError(f"line {line_number}: rotation is not orthonormal (error {error:.2e})")
    if error > _REPROJECT_ABOVE:
        rotation = nearest_rotation(rotation)
    return Pose(rotation=rotation, translation=matrix[:, 3])


def read_poses(path: PathLike) -> List[Pose]:
    """
    Liest eine KITTI-Posendatei; leere Zeilen werden übersprungen.

    Raises:
        ValueError: Bei fehlerhafter Zeile (mit Zeilennummer)
    """
    poses = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if line.strip():
                poses.append(parse_pose_line(line, line_number))
    logger.debug(f"{len(poses)} Posen gelesen aus {path}")
    return poses


def write_poses(path: PathLike, poses: Sequence[Pose]) -> None:
    lines = []
    for pose in poses:
        matrix = np.hstack([pose.rotation, pose.translation.reshape(3, 1)])
        lines.append(" ".join("%.17g" % value for value in matrix.reshape(-1)))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
