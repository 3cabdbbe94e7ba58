import argparse
import logging
from pathlib import Path
from typing import List

import numpy as np

from ..models.conv import PadKind
from ..models.range_image import RangeImage
from ..schemas.projection_schema import ProjectionParams
from ..services.dataset_service import load_sequence
from ..services.equivariance_service import equicheck
from ..utils.binary_formats import load_range_image
from ..utils.reports import render_equicheck_report, write_equicheck_csv
from .common import (
    CommandResult, InputError, RunContext, add_shared_flags, load_model, parse_int_list, reading_inputs,
)

logger = logging.getLogger(__name__)

REPORT_FILE = "equicheck_report.txt"
TABLE_FILE = "equicheck.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "equicheck",
        help="compare shifted outputs with outputs of shifted range images (yaw equivariance)",
    )
    parser.add_argument("--mode", choices=[k.value for k in PadKind], default=PadKind.CIRCULAR.value,
                        help="horizontal padding; 'zero' is the negative control (default: %(default)s)")
    parser.add_argument("--weights", type=Path, default=None, help="checkpoint; random weights if omitted")
    parser.add_argument("--model-config", type=Path, default=None)
    parser.add_argument("--image", type=Path, action="append", default=None, help="range image (.rim), repeatable")
    parser.add_argument("--data", type=Path, default=None, help="dataset directory (uses its first --images scans)")
    parser.add_argument("--images", type=int, default=2, help="number of images (default: %(default)s)")
    parser.add_argument("--shifts", default=None, help="comma-separated column shifts (default: 0,1,5,w/2,w-1)")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle, default_precision="float64")


def random_images(params: ProjectionParams, count: int, rng: np.random.Generator) -> List[RangeImage]:
    """Zufällige Range-Bilder mit etwa 10 % ungültigen Pixeln"""
    images = []
    for _ in range(count):
        pixels = rng.uniform(0.5, 50.0, size=(params.h, params.w))
        pixels[rng.random(size=pixels.shape) < 0.1] = 0.0
        images.append(RangeImage(params=params, pixels=pixels))
    return images


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    if args.images < 1:
        raise InputError("--images must be >= 1")
    cfg, weights = load_model(ctx, args.weights, args.model_config)
    cfg = cfg.model_copy(update={"padding": PadKind(args.mode)})

    if args.image:
        with reading_inputs():
            images = [load_range_image(path, ctx.profile.projection.min_range) for path in args.image]
    elif args.data is not None:
        with reading_inputs():
            images = load_sequence(args.data, ctx.profile.projection, with_scans=False).images[:args.images]
    else:
        images = random_images(ctx.profile.projection, args.images, np.random.default_rng([ctx.seed, 2]))

    report = equicheck(images, cfg, weights, parse_int_list(args.shifts))
    text = render_equicheck_report(report)
    print(text, end="")

    outputs = []
    if ctx.out_dir is not None:
        out_dir = ctx.require_out()
        (out_dir / REPORT_FILE).write_text(text, encoding="utf-8")
        write_equicheck_csv(out_dir / TABLE_FILE, report)
        outputs = [REPORT_FILE, TABLE_FILE]
    if not report.as_expected:
        raise RuntimeError(report.verdict)
    return CommandResult(outputs=outputs, config={"model": cfg.to_key_values(),
                                                  "equicheck": {"mode": args.mode, "shifts": args.shifts or "default"}})
