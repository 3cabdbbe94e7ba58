import argparse
import csv
import logging
from pathlib import Path

from ..models.descriptor_index import DescriptorIndex
from ..services.retrieval_service import exclusion_for
from .common import CommandResult, InputError, RunContext, add_shared_flags, reading_inputs

logger = logging.getLogger(__name__)

RESULTS_FILE = "query_results.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("query", help="rank database entries for each query descriptor")
    parser.add_argument("--index", type=Path, required=True, help="database descriptors (.rld)")
    parser.add_argument("--queries", type=Path, required=True, help="query descriptors (.rld)")
    parser.add_argument("--top-k", type=int, default=5, help="results per query (default: %(default)s)")
    parser.add_argument("--exclusion-window", type=int, default=None,
                        help="exclude ids with |id - query_id| <= window (default: profile)")
    add_shared_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, ctx: RunContext) -> CommandResult:
    with reading_inputs():
        index = DescriptorIndex.load(args.index)
        queries = DescriptorIndex.load(args.queries)
    if queries.dimension != index.dimension:
        raise InputError(f"query descriptors have dimension {queries.dimension}, index has {index.dimension}")
    window = ctx.profile.protocol.exclusion_window if args.exclusion_window is None else args.exclusion_window

    rows = []
    for query_id, d_q in zip(queries.scan_ids, queries.descriptors):
        ranking = index.query(d_q, exclusion_for(int(query_id), index, window), top_k=args.top_k)
        for rank, (scan_id, similarity) in enumerate(ranking, start=1):
            rows.append((int(query_id), rank, scan_id, similarity))
            print(f"{int(query_id)} {rank} {scan_id} {similarity:.6f}")

    outputs = []
    if ctx.out_dir is not None:
        out_dir = ctx.require_out()
        with open(out_dir / RESULTS_FILE, "w", newline="", encoding="utf-8") as handle_csv:
            writer = csv.writer(handle_csv)
            writer.writerow(["query_id", "rank", "scan_id", "similarity"])
            writer.writerows((q, r, s, repr(sim)) for q, r, s, sim in rows)
        outputs.append(RESULTS_FILE)
    logger.info(f"✅ {len(queries)} Queries beantwortet (top {args.top_k}, exclusion window {window})")
    return CommandResult(outputs=outputs, config={"query": {"top_k": str(args.top_k), "exclusion_window": str(window)}})
