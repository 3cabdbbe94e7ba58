"""
Place Recognition Evaluation
Sucht für jede Query den ähnlichsten Deskriptor in der Datenbank und berechnet Recall@1, Recall@1% und AR@k.
"""
import logging
import math
import time
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from ..models.descriptor_index import DescriptorIndex
from ..models.pose import Pose
from ..models.range_image import RangeImage
from ..schemas.label_schema import OverlapLabel
from ..schemas.model_schema import ModelConfig
from ..schemas.retrieval_schema import EvalProtocol, EvalReport, PositiveRule
from .network_service import Weights, extract_descriptors

logger = logging.getLogger(__name__)

GroundTruth = Dict[int, Set[int]]


def positives_from_labels(labels: Sequence[OverlapLabel], threshold: float = 0.3) -> GroundTruth:
    """Query-ID -> Referenz-IDs mit Overlap > threshold"""
    positives: GroundTruth = {}
    for label in labels:
        positives.setdefault(label.query_id, set())
        if label.overlap > threshold:
            positives[label.query_id].add(label.reference_id)
    return positives


def positives_from_poses(query_poses: Mapping[int, Pose], database_poses: Mapping[int, Pose],
                         radius: float = 4.0) -> GroundTruth:
    """Query-ID -> Datenbank-IDs mit Positionsabstand < radius"""
    db_ids = sorted(database_poses)
    if not db_ids:
        return {qid: set() for qid in query_poses}
    positions = np.array([database_poses[i].translation for i in db_ids])
    positives: GroundTruth = {}
    for qid, pose in query_poses.items():
        distances = np.linalg.norm(positions - pose.translation, axis=1)
        positives[qid] = {db_ids[i] for i in np.flatnonzero(distances < radius)}
    return positives


def exclusion_for(query_id: int, index: DescriptorIndex, window: int) -> Set[int]:
    """Alle Index-IDs im zeitlichen Fenster |id - query_id| <= window"""
    ids = index.scan_ids
    return {int(i) for i in ids[np.abs(ids - query_id) <= window]}


def evaluate(
    query_ids: Sequence[int],
    query_descriptors: np.ndarray,
    index: DescriptorIndex,
    ground_truth: Mapping[int, Set[int]],
    protocol: Optional[EvalProtocol] = None,
) -> EvalReport:
    """
    Bewertet alle Queries gegen den Index.

    Gezählt werden nur Queries, die nach dem Ausschluss mindestens einen echten Positiven im Index haben.
    Recall@1% nutzt die besten ceil(N / 100) Kandidaten, N = Indexgröße nach Ausschluss.

    Raises:
        ValueError: Ground Truth fehlt für eine Query, oder keine Query hat einen Positiven
    """
    protocol = protocol or EvalProtocol()
    query_descriptors = np.asarray(query_descriptors)
    if query_descriptors.ndim != 2 or query_descriptors.shape[0] != len(query_ids):
        raise ValueError(f"{len(query_ids)} query ids for descriptor matrix of shape {query_descriptors.shape}")
    missing = [qid for qid in query_ids if qid not in ground_truth]
    if missing:
        raise ValueError(f"ground truth does not cover queries {missing[:5]}")

    hits_1 = hits_pct = evaluated = 0
    hits_k = {k: 0 for k in protocol.ks}
    search_seconds = 0.0

    for qid, d_q in zip(query_ids, query_descriptors):
        excluded = exclusion_for(qid, index, protocol.exclusion_window)
        positives = {i for i in ground_truth[qid] if i not in excluded and i in index}
        if not positives:
            continue
        started = time.perf_counter()
        ranking = [scan_id for scan_id, _ in index.query(d_q, excluded)]
        search_seconds += time.perf_counter() - started

        evaluated += 1
        top_pct = max(1, math.ceil(len(ranking) / 100))
        hits_1 += ranking[0] in positives
        hits_pct += any(scan_id in positives for scan_id in ranking[:top_pct])
        for k in protocol.ks:
            hits_k[k] += any(scan_id in positives for scan_id in ranking[:k])

    if evaluated == 0:
        raise ValueError("no query has a true positive in the database, recall is undefined")

    report = EvalReport(
        queries_total=len(query_ids),
        queries_evaluated=evaluated,
        database_size=len(index),
        recall_at_1=hits_1 / evaluated,
        recall_at_1pct=hits_pct / evaluated,
        ar_at_k={k: hits_k[k] / evaluated for k in protocol.ks},
        search_ms_per_query=search_seconds * 1000.0 / evaluated,
    )
    logger.info(
        f"📊 Evaluation: {evaluated}/{len(query_ids)} Queries mit Positiven, "
        f"Recall@1 {report.recall_at_1:.4f}, Recall@1% {report.recall_at_1pct:.4f}"
    )
    return report


def split_database_queries(visits: Sequence[int]) -> Tuple[List[int], List[int]]:
    """
    Datenbank = erster Besuch, Queries = alle Revisits.
    Ohne Revisits ist jeder Scan zugleich Query und Datenbankeintrag (zeitlicher Ausschluss greift).
    """
    database = [i for i, visit in enumerate(visits) if visit == 0]
    queries = [i for i, visit in enumerate(visits) if visit > 0]
    if not queries:
        return list(range(len(visits))), list(range(len(visits)))
    return database, queries


def ground_truth_for(protocol: EvalProtocol, query_ids: Sequence[int], database_ids: Sequence[int],
                     poses: Optional[Sequence[Pose]] = None,
                     labels: Optional[Sequence[OverlapLabel]] = None) -> GroundTruth:
    """
    Raises:
        ValueError: Wenn die Regel Daten braucht, die fehlen
    """
    if protocol.rule == PositiveRule.DISTANCE:
        if poses is None:
            raise ValueError("distance rule needs poses")
        return positives_from_poses({i: poses[i] for i in query_ids}, {i: poses[i] for i in database_ids},
                                    protocol.radius)
    if labels is None:
        raise ValueError("overlap rule needs an overlap label file")
    positives = positives_from_labels(labels, protocol.threshold)
    return {qid: positives.get(qid, set()) for qid in query_ids}


def evaluate_sequence(
    images: Sequence[RangeImage],
    visits: Sequence[int],
    cfg: ModelConfig,
    weights: Weights,
    protocol: EvalProtocol,
    poses: Optional[Sequence[Pose]] = None,
    labels: Optional[Sequence[OverlapLabel]] = None,
) -> EvalReport:
    """Deskriptoren extrahieren, Datenbank aus dem ersten Besuch bauen und Revisits auswerten."""
    database_ids, query_ids = split_database_queries(visits)
    descriptors = extract_descriptors(images, cfg, weights)
    index = DescriptorIndex(database_ids, descriptors[database_ids])
    truth = ground_truth_for(protocol, query_ids, database_ids, poses, labels)
    return evaluate(query_ids, descriptors[query_ids], index, truth, protocol)
