import argparse
import logging
from pathlib import Path

from ..models.descriptor_index import DescriptorIndex
from ..services.dataset_service import load_sequence
from ..services.network_service import extract_descriptors
from .common import CommandResult, InputError, RunContext, add_shared_flags, load_model, reading_inputs

logger = logging.getLogger(__name__)

DESCRIPTOR_DB_FILE = "descriptors.rld"


def register(subparsers) -> None:
    parser = subparsers.add_parser("index", help="extract descriptors and write a descriptor database (.rld)")
    parser.add_argument("--data", type=Path, required=True, help="dataset directory")
    parser.add_argument("--weights", type=Path, default=None, help="checkpoint (.rlw); random weights if omitted")
    parser.add_argument("--model-config", type=Path, default=None, help="model.cfg (default: next to the checkpoint)")
    parser.add_argument("--visit", type=int, default=None, help="only index scans of this visit")
    parser.add_argument("--name", default=DESCRIPTOR_DB_FILE, help="output file name (default: %(default)s)")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    out_dir = ctx.require_out()
    cfg, weights = load_model(ctx, args.weights, args.model_config)
    with reading_inputs():
        sequence = load_sequence(args.data, ctx.profile.projection, with_scans=False, workers=ctx.workers)
    scan_ids = list(range(len(sequence))) if args.visit is None else sequence.ids_for_visit(args.visit)
    if not scan_ids:
        raise InputError(f"no scans for visit {args.visit}")

    descriptors = extract_descriptors([sequence.images[i] for i in scan_ids], cfg, weights, workers=ctx.workers)
    index = DescriptorIndex(scan_ids, descriptors)
    index.save(out_dir / args.name)
    print(f"descriptors {len(index)} dim {index.dimension} written to {out_dir / args.name}")
    return CommandResult(outputs=[args.name], config={"model": cfg.to_key_values()})
