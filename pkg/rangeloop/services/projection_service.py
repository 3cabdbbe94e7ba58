"""
Range Image Encoder
Projiziert Punktwolken in gierwinkel-äquivariante Range-Bilder und erzeugt die zirkulär erweiterten Bilder
für die Circular Convolution.
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from ..models.range_image import PointCloud, RangeImage
from ..schemas.projection_schema import ProjectionParams, ProjectionStats

logger = logging.getLogger(__name__)


def project_point(p, params: ProjectionParams) -> Optional[Tuple[int, int, float]]:
    """
    Bildkoordinate eines einzelnen Punkts.

    Args:
        p: (x, y, z) in Metern
        params: Projektionsparameter

    Returns:
        (u, v, r) oder None, wenn der Punkt außerhalb des vertikalen Sichtfelds
        oder unter der Mindestdistanz liegt

    Raises:
        ValueError: Bei |p| = 0 (Elevation undefiniert) oder nicht-endlichen Koordinaten
    """
    x, y, z = (float(c) for c in p)
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise ValueError(f"point {p} has non-finite coordinates")
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise ValueError("point at the sensor origin has no defined elevation")
    if r < params.min_range:
        return None
    # atan2 statt arctan(y/x): volle 360° Azimut
    u = math.floor(params.w / 2 * (1.0 - math.atan2(y, x) / math.pi)) % params.w
    v = math.floor(params.h * (1.0 - (math.asin(z / r) + params.f_up) / params.f))
    if v < 0 or v >= params.h:
        return None
    return u, v, r


def project_cloud(cloud: PointCloud, params: ProjectionParams) -> Tuple[RangeImage, ProjectionStats]:
    """
    Projiziert eine Punktwolke in ein Range-Bild; pro Pixel gewinnt die kleinste Distanz.

    Verworfene Punkte (zu nah, außerhalb des Sichtfelds) werden nur gezählt.

    Returns:
        Tuple[RangeImage, ProjectionStats]
    """
    pixels = np.full((params.h, params.w), np.inf)
    stats = ProjectionStats(total=len(cloud))
    if len(cloud) == 0:
        logger.warning("⚠️ Leere Punktwolke - Range-Bild bleibt komplett ungültig")
        return RangeImage(params=params, pixels=np.zeros((params.h, params.w))), stats

    pts = cloud.points
    r = np.linalg.norm(pts, axis=1)
    near = r < params.min_range
    stats.below_min_range = int(np.count_nonzero(near))

    keep = ~near
    pts, r = pts[keep], r[keep]
    u = np.floor(params.w / 2 * (1.0 - np.arctan2(pts[:, 1], pts[:, 0]) / np.pi)).astype(np.int64) % params.w
    v = np.floor(params.h * (1.0 - (np.arcsin(np.clip(pts[:, 2] / r, -1.0, 1.0)) + params.f_up) / params.f)).astype(np.int64)
    inside = (v >= 0) & (v < params.h)
    stats.outside_fov = int(np.count_nonzero(~inside))
    stats.projected = int(np.count_nonzero(inside))

    # Pro Pixel das Minimum (vorderste Oberfläche verdeckt dahinterliegende)
    np.minimum.at(pixels, (v[inside], u[inside]), r[inside].astype(np.float32).astype(np.float64))
    pixels[np.isinf(pixels)] = 0.0
    return RangeImage(params=params, pixels=pixels), stats


def circular_padding(w: int, k_w: int, s_w: int) -> Tuple[int, int]:
    """
    Horizontale Padding-Breite für Circular Convolution.

    pad_w = max(K_w - S_w, 0) wenn w mod S_w = 0, sonst max(K_w - w mod S_w, 0);
    links floor(pad_w / 2), rechts der Rest.

    Returns:
        (pad_left, pad_right)
    """
    if k_w < 1 or s_w < 1:
        raise ValueError(f"kernel width and stride must be >= 1, got K_w={k_w}, S_w={s_w}")
    remainder = w % s_w
    pad_w = max(k_w - s_w, 0) if remainder == 0 else max(k_w - remainder, 0)
    left = pad_w // 2
    return left, pad_w - left


def _pixels(image: Union[RangeImage, np.ndarray]) -> np.ndarray:
    return image.pixels if isinstance(image, RangeImage) else np.asarray(image)


def circular_extend(image: Union[RangeImage, np.ndarray], k_w: int, s_w: int) -> np.ndarray:
    """
    Zirkulär erweitertes Bild R_circ = [R[:, w-left:] R R[:, :right]].

    Returns:
        Array der Breite w + pad_w
    """
    pixels = _pixels(image)
    w = pixels.shape[-1]
    left, right = circular_padding(w, k_w, s_w)
    columns = np.arange(-left, w + right) % w
    return pixels[..., columns]


def roll_columns(array: np.ndarray, k: int) -> np.ndarray:
    """Spalte j der Ausgabe = Spalte (j - k) mod w der Eingabe (letzte Achse)."""
    return np.roll(array, k, axis=-1)


def shift_columns(image: RangeImage, k: int) -> RangeImage:
    return image.with_pixels(roll_columns(image.pixels, k))


def rotate_cloud_yaw(cloud: PointCloud, angle: float) -> PointCloud:
    """Dreht die Punktwolke um die z-Achse (positiv = gegen den Uhrzeigersinn)."""
    c, s = math.cos(angle), math.sin(angle)
    rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return PointCloud(points=cloud.points @ rotation.T, intensity=cloud.intensity)
