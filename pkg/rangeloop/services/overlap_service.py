"""
Overlap-Labels für das Regressionstraining
Reprojiziert die Referenz-Punktwolke in den Query-Frame und vergleicht die Range-Bilder pixelweise.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import settings
from ..models.pose import Pose
from ..models.range_image import PointCloud, RangeImage
from ..schemas.label_schema import OverlapLabel
from ..schemas.projection_schema import ProjectionParams
from .projection_service import project_cloud

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 1.0  # Meter
DEFAULT_GATE_RADIUS = 50.0  # Meter
LOOP_THRESHOLD = 0.3


def reproject(ref_cloud: PointCloud, pose_q: Pose, pose_r: Pose, params: ProjectionParams) -> RangeImage:
    """
    Referenz-Scan im Query-Frame: T = pose_q^-1 * pose_r, dann project_cloud.

    Verwendet die Punktwolke selbst (keine Rückprojektion des Range-Bilds).
    """
    relative = pose_q.inverse() @ pose_r
    moved = PointCloud(points=relative.transform_points(ref_cloud.points), intensity=ref_cloud.intensity)
    image, _ = project_cloud(moved, params)
    return image


def _as_pixels(image: Union[RangeImage, np.ndarray]) -> np.ndarray:
    return image.pixels if isinstance(image, RangeImage) else np.asarray(image)


def overlap(query: Union[RangeImage, np.ndarray], reprojected: Union[RangeImage, np.ndarray],
            delta: float = DEFAULT_DELTA) -> float:
    """
    Overlap zweier Range-Bilder.

    Zähler: Pixel, die in BEIDEN Bildern gültig sind und deren Distanzen höchstens delta abweichen.
    Nenner: Minimum der beiden Anzahlen gültiger Pixel.

    Raises:
        ValueError: Bei unterschiedlichen Dimensionen oder wenn beide Bilder komplett ungültig sind
    """
    a = _as_pixels(query).astype(np.float64)
    b = _as_pixels(reprojected).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"overlap needs images of equal size, got {a.shape} and {b.shape}")
    valid_a = a > 0
    valid_b = b > 0
    count_a = int(np.count_nonzero(valid_a))
    count_b = int(np.count_nonzero(valid_b))
    if count_a == 0 and count_b == 0:
        raise ValueError("overlap undefined: both images have no valid pixel")
    denominator = min(count_a, count_b)
    if denominator == 0:
        return 0.0
    numerator = int(np.count_nonzero(valid_a & valid_b & (np.abs(a - b) <= delta)))
    return numerator / denominator


def is_loop_closure(value: float, threshold: float = LOOP_THRESHOLD) -> bool:
    """Positive Schleife genau dann, wenn overlap > threshold (Grenzwert selbst ist negativ)."""
    return value > threshold


def label_sequence(
    scans: Sequence[PointCloud],
    poses: Sequence[Pose],
    params: ProjectionParams,
    delta: float = DEFAULT_DELTA,
    gate_radius: float = DEFAULT_GATE_RADIUS,
    workers: Optional[int] = None,
) -> List[OverlapLabel]:
    """
    Overlap-Labels für alle geordneten Paare innerhalb des Gate-Radius.

    Paare außerhalb des Gates bekommen kein explizites Label (implizit Overlap 0).

    Args:
        scans: Punktwolken im jeweiligen Sensor-Frame
        poses: Sensor->Welt Posen, gleiche Länge wie scans
        params: Projektionsparameter
        delta: Toleranz in Metern
        gate_radius: Maximale Translationsdistanz eines Paars
        workers: Threads (Default: settings.WORKERS)

    Returns:
        Labels sortiert nach (query_id, reference_id)
    """
    if len(scans) != len(poses):
        raise ValueError(f"label_sequence: {len(scans)} scans but {len(poses)} poses")
    workers = workers or settings.WORKERS
    logger.info(f"🔄 Berechne Overlap-Labels für {len(scans)} Scans (gate {gate_radius} m, delta {delta} m)...")

    images = [project_cloud(scan, params)[0] for scan in scans]
    positions = np.array([pose.translation for pose in poses]).reshape(-1, 3)
    distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
    pairs: List[Tuple[int, int]] = [
        (i, j) for i in range(len(scans)) for j in range(len(scans)) if distances[i, j] <= gate_radius
    ]

    def _label(pair: Tuple[int, int]) -> OverlapLabel:
        i, j = pair
        if i == j:
            value = overlap(images[i], images[i], delta) if images[i].valid_count else 1.0
        else:
            reprojected = reproject(scans[j], poses[i], poses[j], params)
            if images[i].valid_count == 0 and reprojected.valid_count == 0:
                value = 0.0
            else:
                value = overlap(images[i], reprojected, delta)
        return OverlapLabel(query_id=i, reference_id=j, overlap=value)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(_label, pairs))
    else:
        labels = [_label(pair) for pair in pairs]

    positives = sum(1 for label in labels if is_loop_closure(label.overlap))
    logger.info(f"✅ {len(labels)} Labels erzeugt, davon {positives} mit Overlap > {LOOP_THRESHOLD}")
    return labels


def label_lookup(labels: Sequence[OverlapLabel]) -> Dict[Tuple[int, int], float]:
    return {(label.query_id, label.reference_id): label.overlap for label in labels}
