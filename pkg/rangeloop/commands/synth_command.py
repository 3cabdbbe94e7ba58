import argparse
import logging

from ..services.dataset_service import (
    LABELS_FILE, POSES_FILE, RANGE_IMAGE_DIR, VELODYNE_DIR, VISITS_FILE, WORLD_FILE, scan_name, write_sequence,
    write_world,
)
from ..services.overlap_service import DEFAULT_DELTA, DEFAULT_GATE_RADIUS, label_sequence
from ..services.synthetic_service import generate_world, synth_sequence
from .common import CommandResult, RunContext, add_shared_flags, profile_config

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="generate a deterministic synthetic world and its scans")
    parser.add_argument("--with-labels", action="store_true", help="also compute overlap labels")
    parser.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    parser.add_argument("--gate-radius", type=float, default=DEFAULT_GATE_RADIUS)
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    out_dir = ctx.require_out()
    params = ctx.profile.projection
    world = generate_world(ctx.profile.world)
    scans, images = synth_sequence(world, params)

    labels = None
    if args.with_labels:
        labels = label_sequence(scans, world.trajectory, params, delta=args.delta,
                                gate_radius=args.gate_radius, workers=ctx.workers)
    write_sequence(out_dir, scans, world.trajectory, images=images, visits=world.visits,
                   revisit_of=world.revisit_of, labels=labels)
    write_world(out_dir, ctx.profile.world)

    outputs = [WORLD_FILE, POSES_FILE, VISITS_FILE]
    outputs += [f"{VELODYNE_DIR}/{scan_name(i, '.bin')}" for i in range(len(scans))]
    outputs += [f"{RANGE_IMAGE_DIR}/{scan_name(i, '.rim')}" for i in range(len(images))]
    if labels is not None:
        outputs.append(LABELS_FILE)
    print(f"scans {len(scans)} visits {max(world.visits) + 1} primitives {len(world.primitives)} written to {out_dir}")

    config = profile_config(ctx.profile)
    return CommandResult(outputs=outputs, config={"projection": config["projection"], "world": config["world"]})
