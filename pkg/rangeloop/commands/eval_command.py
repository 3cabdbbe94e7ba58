import argparse
import logging
from pathlib import Path

from ..models.descriptor_index import DescriptorIndex
from ..schemas.retrieval_schema import EvalProtocol, PositiveRule
from ..services.dataset_service import LABELS_FILE, load_sequence
from ..services.retrieval_service import evaluate, evaluate_sequence, ground_truth_for
from ..utils.kitti_io import read_poses
from ..utils.label_file import read_labels
from ..utils.reports import render_eval_report, write_eval_csv
from .common import CommandResult, InputError, RunContext, add_shared_flags, load_model, reading_inputs

logger = logging.getLogger(__name__)

REPORT_FILE = "eval_report.txt"
TABLE_FILE = "eval_metrics.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "eval",
        help="Recall@1, Recall@1%% and AR@k, either from descriptor databases or from a dataset + weights",
    )
    parser.add_argument("--data", type=Path, default=None, help="dataset directory (extracts descriptors)")
    parser.add_argument("--weights", type=Path, default=None, help="checkpoint (.rlw) used with --data")
    parser.add_argument("--model-config", type=Path, default=None)
    parser.add_argument("--index", type=Path, default=None, help="database descriptors (.rld)")
    parser.add_argument("--queries", type=Path, default=None, help="query descriptors (.rld)")
    parser.add_argument("--labels", type=Path, default=None, help="overlap label file for the overlap rule")
    parser.add_argument("--poses", type=Path, default=None, help="poses.txt (scan_id = line) for the distance rule")
    parser.add_argument("--rule", choices=[r.value for r in PositiveRule], default=None,
                        help="positive rule (default: overlap if --labels is given, else the profile's rule)")
    parser.add_argument("--threshold", type=float, default=None)
    parser.add_argument("--radius", type=float, default=None)
    parser.add_argument("--exclusion-window", type=int, default=None)
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def _protocol(args: argparse.Namespace, ctx: RunContext) -> EvalProtocol:
    overrides = {
        "rule": args.rule or (PositiveRule.OVERLAP.value if args.labels is not None else None),
        "threshold": args.threshold,
        "radius": args.radius,
        "exclusion_window": args.exclusion_window,
    }
    data = ctx.profile.protocol.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    return EvalProtocol(**data)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    with reading_inputs():
        protocol = _protocol(args, ctx)
        labels = read_labels(args.labels) if args.labels is not None else None

    if args.index is not None or args.queries is not None:
        if args.index is None or args.queries is None:
            raise InputError("--index and --queries must be given together")
        with reading_inputs():
            index = DescriptorIndex.load(args.index)
            queries = DescriptorIndex.load(args.queries)
            poses = read_poses(args.poses) if args.poses is not None else None
            if queries.dimension != index.dimension:
                raise InputError(f"query descriptors have dimension {queries.dimension}, index has {index.dimension}")
            query_ids = [int(i) for i in queries.scan_ids]
            truth = ground_truth_for(protocol, query_ids, [int(i) for i in index.scan_ids], poses, labels)
        report = evaluate(query_ids, queries.descriptors, index, truth, protocol)
    elif args.data is not None:
        cfg, weights = load_model(ctx, args.weights, args.model_config)
        with reading_inputs():
            sequence = load_sequence(args.data, ctx.profile.projection, with_scans=False, workers=ctx.workers)
        if labels is None and protocol.rule == PositiveRule.OVERLAP:
            labels = sequence.labels
            if labels is None:
                raise InputError(f"overlap rule needs labels, none found in {args.data / LABELS_FILE}")
        report = evaluate_sequence(sequence.images, sequence.visits, cfg, weights, protocol,
                                   poses=sequence.poses, labels=labels)
    else:
        raise InputError("eval needs either --data or --index/--queries")

    text = render_eval_report(report, protocol)
    print(text, end="")
    outputs = []
    if ctx.out_dir is not None:
        out_dir = ctx.require_out()
        (out_dir / REPORT_FILE).write_text(text, encoding="utf-8")
        write_eval_csv(out_dir / TABLE_FILE, report)
        outputs = [REPORT_FILE, TABLE_FILE]
    config = {"eval": {k: str(v.value if hasattr(v, "value") else v) for k, v in protocol.model_dump().items()}}
    return CommandResult(outputs=outputs, config=config)
