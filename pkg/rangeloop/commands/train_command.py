import argparse
import logging
from pathlib import Path

from ..schemas.train_schema import TrainConfig
from ..services.dataset_service import LABELS_FILE, load_sequence
from ..services.training_service import dataset_from_sequence, fit
from ..utils.binary_formats import save_checkpoint
from ..utils.keyvalue import write_key_values
from ..utils.label_file import read_labels
from .common import (
    MODEL_CONFIG_FILE, TRAIN_CONFIG_FILE, CommandResult, InputError, RunContext, add_shared_flags, profile_config,
    reading_inputs,
)

logger = logging.getLogger(__name__)

WEIGHTS_FILE = "weights.rlw"
METRICS_FILE = "metrics.txt"


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train the descriptor network by overlap regression")
    parser.add_argument("--data", type=Path, required=True, help="dataset directory with range images and labels")
    parser.add_argument("--labels", type=Path, default=None, help="label file (default: DATA/labels.txt)")
    parser.add_argument("--epochs", type=int, default=None, help="override the profile's epoch count")
    parser.add_argument("--train-visit", type=int, default=0,
                        help="train only on scans of this visit; -1 uses every scan (default: %(default)s)")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    out_dir = ctx.require_out()
    model_cfg = ctx.profile.network
    train_cfg = ctx.profile.train
    label_path = args.labels or args.data / LABELS_FILE
    if not label_path.exists():
        raise InputError(f"{label_path} not found, run 'label' (or 'synth --with-labels') first")
    with reading_inputs():
        if args.epochs is not None:
            train_cfg = TrainConfig(**{**train_cfg.model_dump(), "epochs": args.epochs})
        labels = read_labels(label_path)
        sequence = load_sequence(args.data, ctx.profile.projection, with_scans=False, workers=ctx.workers)
        train_visit = None if args.train_visit < 0 else args.train_visit
        dataset = dataset_from_sequence(sequence.images, labels, sequence.visits, train_visit)

    write_key_values(out_dir / MODEL_CONFIG_FILE, model_cfg.to_key_values(), header="model config")
    write_key_values(out_dir / TRAIN_CONFIG_FILE, train_cfg.to_key_values(), header="training config")
    result = fit(dataset, model_cfg, train_cfg, out_dir=out_dir)
    save_checkpoint(out_dir / WEIGHTS_FILE, result.weights)

    print(f"epochs {train_cfg.epochs} initial_loss {result.losses[0]:.6f} final_loss {result.losses[-1]:.6f}")
    outputs = [MODEL_CONFIG_FILE, TRAIN_CONFIG_FILE, METRICS_FILE, WEIGHTS_FILE]
    outputs += [str(path.relative_to(out_dir)) for path in result.checkpoints]
    config = profile_config(ctx.profile)
    config["train"] = train_cfg.to_key_values()
    return CommandResult(outputs=outputs, config={k: config[k] for k in ("projection", "model", "train")})
