import argparse
import logging
from pathlib import Path

from ..services.dataset_service import RANGE_IMAGE_DIR, VELODYNE_DIR, scan_name
from ..services.projection_service import project_cloud
from ..utils.binary_formats import save_range_image
from ..utils.kitti_io import read_scan_bin
from .common import CommandResult, InputError, RunContext, add_shared_flags, profile_config, reading_inputs

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("project", help="project velodyne scans into range images (.rim)")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scan", type=Path, action="append", help="velodyne .bin file (repeatable)")
    source.add_argument("--data", type=Path, help="dataset directory with velodyne/")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    out_dir = ctx.require_out()
    params = ctx.profile.projection
    if args.data is not None:
        scans = sorted((args.data / VELODYNE_DIR).glob("*.bin"))
        if not scans:
            raise InputError(f"{args.data}: no velodyne/*.bin scans found")
        targets = [Path(RANGE_IMAGE_DIR) / scan_name(i, ".rim") for i in range(len(scans))]
        (out_dir / RANGE_IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    else:
        scans = list(args.scan)
        targets = [Path(scan.stem + ".rim") for scan in scans]

    outputs = []
    for scan_path, target in zip(scans, targets):
        with reading_inputs():
            cloud = read_scan_bin(scan_path)
        image, stats = project_cloud(cloud, params)
        save_range_image(out_dir / target, image)
        outputs.append(str(target))
        print(f"{scan_path.name} projected {stats.projected} of {stats.total} points "
              f"(below_min_range {stats.below_min_range}, outside_fov {stats.outside_fov}, valid_pixels {image.valid_count})")
    logger.info(f"✅ {len(outputs)} Range-Bilder geschrieben nach {out_dir}")
    return CommandResult(outputs=outputs, config={"projection": profile_config(ctx.profile)["projection"]})
