import argparse
import logging
from pathlib import Path

from ..services.dataset_service import LABELS_FILE, load_sequence
from ..services.overlap_service import DEFAULT_DELTA, DEFAULT_GATE_RADIUS, label_sequence
from ..utils.label_file import write_labels
from .common import CommandResult, InputError, RunContext, add_shared_flags, profile_config, reading_inputs

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("label", help="compute overlap labels for all gated scan pairs")
    parser.add_argument("--data", type=Path, required=True, help="dataset directory (velodyne/ + poses.txt)")
    parser.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="range tolerance in meters (default: %(default)s)")
    parser.add_argument("--gate-radius", type=float, default=DEFAULT_GATE_RADIUS,
                        help="only label pairs closer than this (meters, default: %(default)s)")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    out_dir = ctx.require_out()
    with reading_inputs():
        sequence = load_sequence(args.data, ctx.profile.projection, with_scans=True, workers=ctx.workers)
    if not sequence.scans:
        raise InputError(f"{args.data}: labeling needs velodyne scans")
    labels = label_sequence(sequence.scans, sequence.poses, ctx.profile.projection,
                            delta=args.delta, gate_radius=args.gate_radius, workers=ctx.workers)
    write_labels(out_dir / LABELS_FILE, labels)
    print(f"labels {len(labels)} written to {out_dir / LABELS_FILE}")
    config = {
        "projection": profile_config(ctx.profile)["projection"],
        "label": {"delta": repr(args.delta), "gate_radius": repr(args.gate_radius)},
    }
    return CommandResult(outputs=[LABELS_FILE], config=config)
