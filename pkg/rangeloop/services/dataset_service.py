"""
Datensatz-Verzeichnisse
Gleiches Layout für echte und synthetische Daten:
    velodyne/NNNNNN.bin, poses.txt, visits.txt (scan_id visit_index revisit_of), labels.txt,
    range_images/NNNNNN.rim, world.cfg (nur synthetische Sequenzen)
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import settings
from ..models.pose import Pose
from ..models.range_image import PointCloud, RangeImage
from ..schemas.label_schema import OverlapLabel
from ..schemas.projection_schema import ProjectionParams
from ..schemas.world_schema import WorldSpec
from ..utils.binary_formats import load_range_image, save_range_image
from ..utils.keyvalue import read_key_values, write_key_values
from ..utils.kitti_io import read_poses, read_scan_bin, write_poses, write_scan_bin
from ..utils.label_file import read_labels, write_labels
from .projection_service import project_cloud

logger = logging.getLogger(__name__)

VELODYNE_DIR = "velodyne"
RANGE_IMAGE_DIR = "range_images"
POSES_FILE = "poses.txt"
VISITS_FILE = "visits.txt"
LABELS_FILE = "labels.txt"
WORLD_FILE = "world.cfg"

PathLike = Union[str, Path]


class ScanSequence(BaseModel):
    """Geladene Sequenz: Scans, Bilder und Posen mit gleicher Indexierung (Index = scan_id)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scans: List[PointCloud] = Field(default_factory=list)
    images: List[RangeImage]
    poses: List[Pose]
    visits: List[int] = Field(default_factory=list)
    revisit_of: List[Optional[int]] = Field(default_factory=list)
    labels: Optional[List[OverlapLabel]] = None

    @model_validator(mode="after")
    def validate_lengths(self):
        n = len(self.images)
        if len(self.poses) != n:
            raise ValueError(f"sequence has {n} images but {len(self.poses)} poses")
        if self.scans and len(self.scans) != n:
            raise ValueError(f"sequence has {n} images but {len(self.scans)} scans")
        if not self.visits:
            self.visits = [0] * n
            self.revisit_of = [None] * n
        if len(self.visits) != n or len(self.revisit_of) != n:
            raise ValueError("visits.txt must list every scan exactly once")
        return self

    def __len__(self) -> int:
        return len(self.images)

    def ids_for_visit(self, visit: int) -> List[int]:
        return [i for i, v in enumerate(self.visits) if v == visit]

    def revisit_ids(self) -> List[int]:
        return [i for i, v in enumerate(self.visits) if v > 0]


def scan_name(scan_id: int, suffix: str) -> str:
    return f"{scan_id:06d}{suffix}"


def read_visits(path: PathLike, count: int) -> Tuple[List[int], List[Optional[int]]]:
    visits: List[int] = [0] * count
    revisit_of: List[Optional[int]] = [None] * count
    seen = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path} line {line_number}: expected 'scan_id visit_index revisit_of'")
            scan_id, visit, origin = (int(p) for p in parts)
            if not 0 <= scan_id < count or scan_id in seen:
                raise ValueError(f"{path} line {line_number}: invalid or duplicate scan id {scan_id}")
            seen.add(scan_id)
            visits[scan_id] = visit
            revisit_of[scan_id] = origin if origin >= 0 else None
    if len(seen) != count:
        raise ValueError(f"{path}: lists {len(seen)} of {count} scans")
    return visits, revisit_of


def write_visits(path: PathLike, visits: Sequence[int], revisit_of: Sequence[Optional[int]]) -> None:
    lines = ["# scan_id visit_index revisit_of"]
    lines += [f"{i} {v} {-1 if r is None else r}" for i, (v, r) in enumerate(zip(visits, revisit_of))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_world(out_dir: PathLike, spec: WorldSpec) -> Path:
    """Schreibt die Welt-Parameter als world.cfg; mit demselben Seed entsteht dieselbe Welt."""
    path = Path(out_dir) / WORLD_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    write_key_values(path, spec.to_key_values(), header="synthetic world spec")
    return path


def read_world_spec(path: PathLike) -> WorldSpec:
    """
    Raises:
        ValueError: Fehlerhafte Zeile oder ungültiger Wert
    """
    return WorldSpec.from_key_values(read_key_values(path))


def write_sequence(
    out_dir: PathLike,
    scans: Sequence[PointCloud],
    poses: Sequence[Pose],
    images: Optional[Sequence[RangeImage]] = None,
    visits: Optional[Sequence[int]] = None,
    revisit_of: Optional[Sequence[Optional[int]]] = None,
    labels: Optional[Sequence[OverlapLabel]] = None,
) -> Path:
    """Schreibt eine Sequenz im Verzeichnis-Layout; optionale Teile werden nur geschrieben, wenn vorhanden."""
    out_dir = Path(out_dir)
    if len(scans) != len(poses):
        raise ValueError(f"{len(scans)} scans but {len(poses)} poses")
    velodyne = out_dir / VELODYNE_DIR
    velodyne.mkdir(parents=True, exist_ok=True)
    for scan_id, cloud in enumerate(scans):
        write_scan_bin(velodyne / scan_name(scan_id, ".bin"), cloud)
    write_poses(out_dir / POSES_FILE, poses)
    if images is not None:
        image_dir = out_dir / RANGE_IMAGE_DIR
        image_dir.mkdir(parents=True, exist_ok=True)
        for scan_id, image in enumerate(images):
            save_range_image(image_dir / scan_name(scan_id, ".rim"), image)
    if visits is not None:
        write_visits(out_dir / VISITS_FILE, visits, revisit_of or [None] * len(visits))
    if labels is not None:
        write_labels(out_dir / LABELS_FILE, labels)
    logger.info(f"✅ Sequenz mit {len(scans)} Scans geschrieben nach {out_dir}")
    return out_dir


def load_sequence(data_dir: PathLike, params: Optional[ProjectionParams] = None,
                  with_scans: bool = True, workers: Optional[int] = None) -> ScanSequence:
    """
    Lädt eine Sequenz.

    Range-Bilder kommen aus range_images/, falls vorhanden und params passt (oder params fehlt);
    sonst werden die Scans mit params projiziert.

    Raises:
        ValueError: Fehlende Dateien, inkonsistente Anzahlen oder fehlende Projektionsparameter
    """
    data_dir = Path(data_dir)
    poses = read_poses(data_dir / POSES_FILE)
    velodyne = data_dir / VELODYNE_DIR
    image_dir = data_dir / RANGE_IMAGE_DIR
    workers = workers or settings.WORKERS

    bins = sorted(velodyne.glob("*.bin")) if velodyne.is_dir() else []
    if bins and len(bins) != len(poses):
        raise ValueError(f"{data_dir}: {len(bins)} scans but {len(poses)} poses")

    scans: List[PointCloud] = []
    if bins and (with_scans or not image_dir.is_dir()):
        scans = [read_scan_bin(path) for path in bins]

    images: List[RangeImage] = []
    if image_dir.is_dir():
        min_range = params.min_range if params is not None else None
        images = [load_range_image(image_dir / scan_name(i, ".rim"), min_range) for i in range(len(poses))]
        if params is not None and images and images[0].params != params:
            logger.warning("⚠️ Gespeicherte Range-Bilder passen nicht zu den Projektionsparametern, projiziere neu")
            images = []
    if not images:
        if params is None:
            raise ValueError(f"{data_dir}: no stored range images and no projection parameters given")
        if not scans and bins:
            scans = [read_scan_bin(path) for path in bins]
        if not scans:
            raise ValueError(f"{data_dir}: neither range images nor velodyne scans found")

        def _project(cloud: PointCloud) -> RangeImage:
            return project_cloud(cloud, params)[0]

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                images = list(pool.map(_project, scans))
        else:
            images = [_project(cloud) for cloud in scans]

    visits: List[int] = []
    revisit_of: List[Optional[int]] = []
    if (data_dir / VISITS_FILE).exists():
        visits, revisit_of = read_visits(data_dir / VISITS_FILE, len(poses))
    labels = read_labels(data_dir / LABELS_FILE) if (data_dir / LABELS_FILE).exists() else None

    logger.info(f"📊 Sequenz geladen: {len(images)} Scans aus {data_dir}")
    return ScanSequence(scans=scans, images=images, poses=poses, visits=visits,
                        revisit_of=revisit_of, labels=labels)
