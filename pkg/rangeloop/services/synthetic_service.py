"""
Synthetische Welt
Deterministische Szenen aus Boden, Boxen, Zylindern und Kugeln mit beweglichen Objekten pro Besuch.
Ein Strahl pro Pixel (Pixelmitte), daher reproduziert die Projektion der Punktwolke das Bild exakt.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..models.pose import Pose
from ..models.range_image import PointCloud, RangeImage
from ..models.world import Primitive, PrimitiveKind, SyntheticWorld
from ..schemas.projection_schema import ProjectionParams
from ..schemas.world_schema import WorldSpec

logger = logging.getLogger(__name__)

_EPS = 1e-9
_MAX_PLACEMENT_ATTEMPTS = 10000


def pixel_directions(params: ProjectionParams) -> np.ndarray:
    """
    Einheitsrichtungen im Sensor-Frame für jede Pixelmitte.

    Returns:
        Array [h, w, 3]
    """
    u = np.arange(params.w) + 0.5
    v = np.arange(params.h) + 0.5
    azimuth = np.pi * (1.0 - 2.0 * u / params.w)
    elevation = params.f * (1.0 - v / params.h) - params.f_up
    cos_e = np.cos(elevation)[:, None]
    return np.stack([
        cos_e * np.cos(azimuth)[None, :],
        cos_e * np.sin(azimuth)[None, :],
        np.broadcast_to(np.sin(elevation)[:, None], (params.h, params.w)),
    ], axis=-1)


def _nearest_positive(*candidates: np.ndarray) -> np.ndarray:
    stacked = np.stack([np.where(c > _EPS, c, np.inf) for c in candidates])
    return stacked.min(axis=0)


def _hit_plane(origin: np.ndarray, dirs: np.ndarray, z: float) -> np.ndarray:
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (z - origin[2]) / dz
    return np.where(np.abs(dz) > _EPS, np.where(t > _EPS, t, np.inf), np.inf)


def _hit_sphere(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    offset = origin - center
    b = dirs @ offset
    c = offset @ offset - radius * radius
    disc = b * b - c
    root = np.sqrt(np.maximum(disc, 0.0))
    t = _nearest_positive(-b - root, -b + root)
    return np.where(disc >= 0, t, np.inf)


def _hit_cylinder(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray,
                  radius: float, half_height: float) -> np.ndarray:
    ox, oy = origin[0] - center[0], origin[1] - center[1]
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    z_low, z_high = center[2] - half_height, center[2] + half_height

    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        sides = [(-b - root) / a, (-b + root) / a]
    side_hits = []
    for t in sides:
        z = origin[2] + t * dz
        ok = (disc >= 0) & (a > _EPS) & (z >= z_low) & (z <= z_high)
        side_hits.append(np.where(ok, t, np.inf))

    cap_hits = []
    for z_cap in (z_low, z_high):
        t = _hit_plane(origin, dirs, z_cap)
        with np.errstate(invalid="ignore"):
            px = ox + t * dx
            py = oy + t * dy
            ok = np.isfinite(t) & (px * px + py * py <= radius * radius)
        cap_hits.append(np.where(ok, t, np.inf))
    return _nearest_positive(*side_hits, *cap_hits)


def _hit_box(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray,
             half_extents: np.ndarray, yaw: float) -> np.ndarray:
    # Strahl in den Box-Frame drehen, dann Slab-Methode
    c, s = math.cos(yaw), math.sin(yaw)
    to_local = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    o = to_local @ (origin - center)
    d = dirs @ to_local.T

    t_near = np.full(d.shape[:-1], -np.inf)
    t_far = np.full(d.shape[:-1], np.inf)
    missed = np.zeros(d.shape[:-1], dtype=bool)
    for axis in range(3):
        da = d[..., axis]
        parallel = np.abs(da) <= _EPS
        missed |= parallel & (np.abs(o[axis]) > half_extents[axis])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half_extents[axis] - o[axis]) / da
            t2 = (half_extents[axis] - o[axis]) / da
        t_near = np.where(parallel, t_near, np.maximum(t_near, np.minimum(t1, t2)))
        t_far = np.where(parallel, t_far, np.minimum(t_far, np.maximum(t1, t2)))
    hit = ~missed & (t_far >= t_near)
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where(hit & (t > _EPS), t, np.inf)


def intersect_primitive(primitive: Primitive, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Strahlparameter des ersten Treffers (inf = kein Treffer), dirs als Einheitsvektoren [..., 3]"""
    center = np.asarray(primitive.center, dtype=np.float64)
    half = np.asarray(primitive.half_extents, dtype=np.float64)
    if primitive.kind == PrimitiveKind.SPHERE:
        return _hit_sphere(origin, dirs, center, float(half[0]))
    if primitive.kind == PrimitiveKind.CYLINDER:
        return _hit_cylinder(origin, dirs, center, float(half[0]), float(half[2]))
    return _hit_box(origin, dirs, center, half, primitive.yaw)


def _world_rays(pose: Pose, params: ProjectionParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    local = pixel_directions(params)
    return pose.translation, local @ pose.rotation.T, local


def synth_scan(world: SyntheticWorld, pose: Pose, params: ProjectionParams,
               visit_index: int = 0) -> Tuple[PointCloud, RangeImage]:
    """
    Raycasting eines Scans an einer beliebigen Pose.

    Bewegliche Objekte sind nur enthalten, wenn sie im Besuch visit_index vorhanden sind.
    Strahlen ohne Treffer (oder jenseits von max_range bzw. unter min_range) ergeben ungültige Pixel.

    Returns:
        (Punktwolke im Sensor-Frame, Range-Bild); project_cloud(Punktwolke) ergibt exakt das Bild
    """
    origin, dirs, local = _world_rays(pose, params)
    t = np.full((params.h, params.w), np.inf)
    if world.ground_z is not None:
        t = np.minimum(t, _hit_plane(origin, dirs, world.ground_z))
    for primitive in world.primitives:
        if primitive.present(visit_index):
            t = np.minimum(t, intersect_primitive(primitive, origin, dirs))

    valid = np.isfinite(t) & (t <= world.max_range)
    ranges = np.where(valid, t, 0.0).astype(np.float32)
    valid &= ranges >= params.min_range
    ranges[~valid] = 0.0

    points = local[valid] * ranges[valid].astype(np.float64)[:, None]
    cloud = PointCloud(points=points)
    return cloud, RangeImage(params=params, pixels=ranges)


def primitive_footprint(world: SyntheticWorld, index: int, pose: Pose, params: ProjectionParams) -> np.ndarray:
    """Pixelmaske aller Strahlen, die den Grundkörper treffen (ohne Verdeckung)"""
    origin, dirs, _ = _world_rays(pose, params)
    return np.isfinite(intersect_primitive(world.primitives[index], origin, dirs))


def _loop_pose(angle: float, radius: float, reverse: bool) -> Pose:
    heading = angle + math.pi / 2 + (math.pi if reverse else 0.0)
    return Pose.from_yaw(heading, (radius * math.cos(angle), radius * math.sin(angle), 0.0))


def _random_primitive(rng: np.random.Generator, spec: WorldSpec, movable: bool) -> Primitive:
    ground = spec.ground_z if spec.ground_z is not None else 0.0
    if movable:
        kind = PrimitiveKind.BOX
        half = (float(rng.uniform(1.6, 2.4)), float(rng.uniform(0.8, 1.0)), float(rng.uniform(0.6, 0.9)))
        lo, hi = spec.clearance, spec.clearance + 2.5
    else:
        kind = [PrimitiveKind.BOX, PrimitiveKind.CYLINDER, PrimitiveKind.SPHERE][int(rng.integers(3))]
        if kind == PrimitiveKind.BOX:
            half = tuple(float(x) for x in rng.uniform([0.5, 0.5, 1.0], [2.5, 2.5, 3.0]))
        elif kind == PrimitiveKind.CYLINDER:
            r = float(rng.uniform(0.3, 1.0))
            half = (r, r, float(rng.uniform(1.0, 3.0)))
        else:
            r = float(rng.uniform(0.6, 1.5))
            half = (r, r, r)
        lo, hi = spec.clearance, spec.extent

    # Mindestabstand zur Kreisbahn: Größe + Korridor
    reach = math.hypot(half[0], half[1])
    for _ in range(_MAX_PLACEMENT_ATTEMPTS):
        xy = rng.uniform(-spec.extent, spec.extent, size=2)
        gap = abs(float(np.hypot(*xy)) - spec.loop_radius) - reach
        if lo <= gap <= hi:
            break
    else:
        raise ValueError(
            f"cannot place a {kind.value} with clearance {spec.clearance} m inside extent {spec.extent} m "
            f"around a loop of radius {spec.loop_radius} m"
        )

    presence: List[bool] = []
    if movable:
        state = bool(rng.integers(2))
        for _ in range(spec.visit_count):
            presence.append(state)
            state = not state

    return Primitive(
        kind=kind,
        center=(float(xy[0]), float(xy[1]), ground + half[2]),
        half_extents=half,
        yaw=float(rng.uniform(-math.pi, math.pi)) if kind == PrimitiveKind.BOX else 0.0,
        movable=movable,
        presence=presence,
    )


def generate_world(spec: Optional[WorldSpec] = None) -> SyntheticWorld:
    """
    Erzeugt eine Welt deterministisch aus dem Seed.

    Die Trajektorie ist ein Kreis mit poses_per_loop Posen; jede weitere Runde besucht dieselben
    Positionen erneut (optional mit umgekehrter Fahrtrichtung).
    """
    spec = spec or WorldSpec()
    rng = np.random.default_rng(spec.seed)
    primitives = [_random_primitive(rng, spec, movable=False) for _ in range(spec.static_count)]
    primitives += [_random_primitive(rng, spec, movable=True) for _ in range(spec.movable_count)]

    trajectory, visits, revisit_of = [], [], []
    for visit in range(spec.visit_count):
        reverse = spec.reverse_revisit and visit > 0
        for step in range(spec.poses_per_loop):
            angle = 2.0 * math.pi * step / spec.poses_per_loop
            trajectory.append(_loop_pose(angle, spec.loop_radius, reverse))
            visits.append(visit)
            revisit_of.append(step if visit > 0 else None)

    logger.info(
        f"✅ Welt erzeugt: {spec.static_count} statische + {spec.movable_count} bewegliche Objekte, "
        f"{len(trajectory)} Posen in {spec.visit_count} Runden (seed {spec.seed})"
    )
    return SyntheticWorld(
        primitives=primitives,
        ground_z=spec.ground_z,
        max_range=spec.max_range,
        trajectory=trajectory,
        visits=visits,
        revisit_of=revisit_of,
        seed=spec.seed,
    )


def synth_sequence(world: SyntheticWorld, params: ProjectionParams) -> Tuple[List[PointCloud], List[RangeImage]]:
    """Scans für alle Posen der Trajektorie, jeweils mit dem Besuchsindex der Pose"""
    scans, images = [], []
    for pose, visit in zip(world.trajectory, world.visits):
        cloud, image = synth_scan(world, pose, params, visit)
        scans.append(cloud)
        images.append(image)
    logger.info(f"📊 {len(scans)} synthetische Scans erzeugt ({params.h}x{params.w})")
    return scans, images
