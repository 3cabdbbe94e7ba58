"""
Overlap-Regressionstraining
Ähnlichkeit (cos + 1) / 2 wird auf den Overlap regressiert; Batches sind dichte n_q × n_r Gitter,
Optimierung mit Adam bei konstanter Lernrate.
"""
import logging
import math
import queue
import threading
from contextlib import closing
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..models.range_image import RangeImage
from ..models.tensor import Tensor, backward, l2norm, matmul, transpose, zero_grad
from ..schemas.label_schema import OverlapLabel
from ..schemas.model_schema import ModelConfig
from ..schemas.train_schema import LossKind, TrainConfig
from ..utils.binary_formats import save_checkpoint
from .network_service import Weights, descriptor, init_weights

logger = logging.getLogger(__name__)

_PREFETCH_POLL_SECONDS = 0.05


class TrainingDivergedError(RuntimeError):
    """NaN oder Inf in Loss oder Gradienten; Training wird nie stillschweigend fortgesetzt."""

    def __init__(self, message: str, parameters: Sequence[str] = ()):
        super().__init__(message)
        self.parameters = list(parameters)


def similarity(d_q, d_r) -> float:
    """
    Ähnlichkeit zweier Deskriptoren: (cos(D_q, D_r) + 1) / 2, auf [0, 1] begrenzt.

    Raises:
        ValueError: Bei unterschiedlichen Dimensionen oder Null-Deskriptor
    """
    a = np.asarray(d_q, dtype=np.float64).reshape(-1)
    b = np.asarray(d_r, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"descriptor dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ValueError("similarity undefined for a zero-norm descriptor")
    cosine = float(np.dot(a, b) / (norm_a * norm_b))
    return min(max((cosine + 1.0) / 2.0, 0.0), 1.0)


def similarity_matrix(d_q: Tensor, d_r: Tensor) -> Tensor:
    """Differenzierbare Ähnlichkeit aller Paare: [n_q, D] x [n_r, D] -> [n_q, n_r]"""
    cosine = matmul(l2norm(d_q, axis=1), transpose(l2norm(d_r, axis=1), (1, 0)))
    return (cosine + 1.0) * 0.5


def pair_loss(similarities: Tensor, targets, kind: LossKind = LossKind.L1) -> Tensor:
    """Summe über alle Paare von |Sim - Over| (bzw. (Sim - Over)^2)."""
    diff = similarities - Tensor(targets)
    per_pair = diff.abs() if LossKind(kind) == LossKind.L1 else diff.square()
    return per_pair.sum()


class Batch(BaseModel):
    """n_q Queries, n_r Referenzen und das volle Zielgitter"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    query_ids: List[int]
    reference_ids: List[int]
    queries: np.ndarray = Field(..., description="[n_q, 1, H, W]")
    references: np.ndarray = Field(..., description="[n_r, 1, H, W]")
    targets: np.ndarray = Field(..., description="[n_q, n_r] overlap targets in [0, 1]")


class TrainingDataset:
    """
    Range-Bilder plus Overlap-Labels.

    Args:
        images: Bild pro Scan-ID (Index = ID)
        labels: Overlap-Labels (fehlendes Paar = Overlap 0)
        scan_ids: Scans, aus denen gezogen werden darf (Default: alle)
    """

    def __init__(self, images: Sequence[RangeImage], labels: Sequence[OverlapLabel],
                 scan_ids: Optional[Sequence[int]] = None):
        if not images:
            raise ValueError("training dataset has no images")
        shapes = {image.pixels.shape for image in images}
        if len(shapes) != 1:
            raise ValueError(f"all training images must share dimensions, got {sorted(shapes)}")
        self.images = list(images)
        self.scan_ids = sorted(set(range(len(images)) if scan_ids is None else scan_ids))
        if not self.scan_ids or self.scan_ids[0] < 0 or self.scan_ids[-1] >= len(images):
            raise ValueError("scan_ids must be a nonempty subset of the image indices")

        eligible = set(self.scan_ids)
        self.lookup: Dict[Tuple[int, int], float] = {}
        self.neighbors: Dict[int, List[int]] = {i: [] for i in self.scan_ids}
        for label in labels:
            q, r = label.query_id, label.reference_id
            if q not in eligible or r not in eligible:
                continue
            self.lookup[(q, r)] = label.overlap
            if q != r:
                self.neighbors[q].append(r)
        for ids in self.neighbors.values():
            ids.sort()

    def __len__(self) -> int:
        return len(self.scan_ids)

    def target(self, query_id: int, reference_id: int) -> float:
        if query_id == reference_id:
            return self.lookup.get((query_id, reference_id), 1.0)
        return self.lookup.get((query_id, reference_id), 0.0)

    def stack(self, ids: Sequence[int]) -> np.ndarray:
        return np.stack([self.images[i].pixels for i in ids])[:, None]


def sample_batch(dataset: TrainingDataset, rng: np.random.Generator, cfg: TrainConfig) -> Batch:
    """
    Zieht n_q Queries gleichverteilt und n_r Referenzen aus Gate-Nachbarn bzw. zufälligen Scans.

    Raises:
        ValueError: Wenn der Datensatz keine Labels enthält
    """
    if not dataset.lookup:
        raise ValueError("cannot sample a batch: dataset has no overlap labels")
    pool_ids = dataset.scan_ids
    query_ids = [pool_ids[i] for i in rng.integers(0, len(pool_ids), size=cfg.n_q)]
    reference_ids = []
    for slot in range(cfg.n_r):
        neighbors = dataset.neighbors[query_ids[slot % cfg.n_q]]
        if neighbors and rng.random() < cfg.neighbor_fraction:
            reference_ids.append(neighbors[int(rng.integers(0, len(neighbors)))])
        else:
            reference_ids.append(pool_ids[int(rng.integers(0, len(pool_ids)))])
    targets = np.array([[dataset.target(q, r) for r in reference_ids] for q in query_ids])
    return Batch(
        query_ids=[int(i) for i in query_ids],
        reference_ids=[int(i) for i in reference_ids],
        queries=dataset.stack(query_ids),
        references=dataset.stack(reference_ids),
        targets=targets,
    )


def loss(batch: Batch, cfg: ModelConfig, weights: Weights, kind: LossKind = LossKind.L1) -> Tensor:
    d_q = descriptor(batch.queries, cfg, weights)
    d_r = descriptor(batch.references, cfg, weights)
    return pair_loss(similarity_matrix(d_q, d_r), batch.targets, kind)


class AdamState:
    """Erstes und zweites Moment pro Parameter plus Schrittzähler"""

    def __init__(self, weights: Weights):
        self.step = 0
        self.m = {name: np.zeros_like(w.data) for name, w in weights.items()}
        self.v = {name: np.zeros_like(w.data) for name, w in weights.items()}


def adam_step(weights: Weights, grads: Dict[str, Optional[np.ndarray]], state: AdamState,
              cfg: TrainConfig) -> Tuple[Weights, AdamState]:
    """
    Ein Adam-Update mit Bias-Korrektur, in place auf den Gewichten.

    Fehlende Gradienten (Parameter nicht im Graph) zählen als 0.

    Raises:
        ValueError: Wenn Moment- und Gewichtsformen nicht passen
        TrainingDivergedError: Bei NaN/Inf im Gradienten (Gewichte bleiben unverändert)
    """
    bad = [name for name, g in grads.items() if g is not None and not np.all(np.isfinite(g))]
    if bad:
        raise TrainingDivergedError(f"non-finite gradient in {', '.join(sorted(bad))} at step {state.step + 1}", bad)

    state.step += 1
    correction1 = 1.0 - cfg.beta1 ** state.step
    correction2 = 1.0 - cfg.beta2 ** state.step
    for name, weight in weights.items():
        if state.m[name].shape != weight.data.shape:
            raise ValueError(f"Adam state for {name} has shape {state.m[name].shape}, weight has {weight.data.shape}")
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(weight.data)
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        weight.data = (weight.data - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(weight.data.dtype)
    return weights, state


class FitResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    weights: Dict[str, Tensor]
    losses: List[float] = Field(default_factory=list, description="Mean loss per epoch, index 0 = initial weights")
    checkpoints: List[Path] = Field(default_factory=list)
    params_with_gradient: Set[str] = Field(default_factory=set)


def _batch_stream(dataset: TrainingDataset, rng: np.random.Generator, cfg: TrainConfig,
                  count: int) -> Iterator[Batch]:
    if cfg.prefetch == 0:
        for _ in range(count):
            yield sample_batch(dataset, rng, cfg)
        return

    # Nur der Producer-Thread benutzt den RNG, die Reihenfolge bleibt deterministisch
    buffer: "queue.Queue" = queue.Queue(maxsize=cfg.prefetch)
    stop = threading.Event()

    def _offer(item) -> bool:
        while not stop.is_set():
            try:
                buffer.put(item, timeout=_PREFETCH_POLL_SECONDS)
                return True
            except queue.Full:
                continue
        return False

    def _produce():
        try:
            for _ in range(count):
                if not _offer(sample_batch(dataset, rng, cfg)):
                    return
        except Exception as exc:
            _offer(exc)

    producer = threading.Thread(target=_produce, daemon=True)
    producer.start()
    try:
        for _ in range(count):
            item = buffer.get()
            if isinstance(item, Exception):
                raise item
            yield item
    finally:
        # Abbruch beim Consumer: Producer freigeben, bevor auf ihn gewartet wird
        stop.set()
        while True:
            try:
                buffer.get_nowait()
            except queue.Empty:
                break
        producer.join()


def _checked_loss(value: Tensor, epoch: int) -> float:
    scalar = value.item()
    if not math.isfinite(scalar):
        raise TrainingDivergedError(f"loss became {scalar} in epoch {epoch}")
    return scalar


def fit(
    dataset: TrainingDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    out_dir: Optional[Path] = None,
    weights: Optional[Weights] = None,
) -> FitResult:
    """
    Trainiert das Netzwerk.

    Epoche 0 bewertet die Startgewichte ohne Update. Jede Epoche wird auf einem festen Satz
    Evaluations-Batches gemessen, damit die Kurve vergleichbar bleibt.

    Args:
        dataset: Bilder + Labels
        model_cfg: Netzwerk-Konfiguration
        train_cfg: Trainings-Konfiguration
        out_dir: Zielordner für metrics.txt und checkpoints/ (None = nichts schreiben)
        weights: Startgewichte (Default: init_weights(model_cfg))

    Returns:
        FitResult mit finalen Gewichten, Loss-Kurve und Checkpoint-Pfaden

    Raises:
        TrainingDivergedError: Bei NaN/Inf in Loss oder Gradienten
        OSError: Wenn Metriken oder Checkpoints nicht geschrieben werden können
    """
    weights = weights if weights is not None else init_weights(model_cfg)
    rng = np.random.default_rng(train_cfg.seed)
    batches_per_epoch = train_cfg.batches_per_epoch or max(1, math.ceil(len(dataset) / train_cfg.n_q))
    eval_rng = np.random.default_rng([train_cfg.seed, 1])
    eval_batches = [sample_batch(dataset, eval_rng, train_cfg) for _ in range(batches_per_epoch)]

    result = FitResult(weights=weights)
    metrics_file = None
    checkpoint_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        checkpoint_dir = out_dir / "checkpoints"
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        metrics_file = open(out_dir / "metrics.txt", "w", encoding="utf-8")

    def _evaluate(epoch: int) -> float:
        values = [_checked_loss(loss(batch, model_cfg, weights, train_cfg.loss), epoch) for batch in eval_batches]
        mean = float(np.mean(values))
        result.losses.append(mean)
        if metrics_file is not None:
            metrics_file.write(f"{epoch} {mean:.9g}\n")
            metrics_file.flush()
        return mean

    def _checkpoint(epoch: int) -> None:
        if checkpoint_dir is None:
            return
        path = checkpoint_dir / f"epoch_{epoch:04d}.rlw"
        save_checkpoint(path, weights)
        result.checkpoints.append(path)

    logger.info(
        f"🔄 Starte Training: {train_cfg.epochs} Epochen, {batches_per_epoch} Batches à "
        f"{train_cfg.n_q}x{train_cfg.n_r}, lr {train_cfg.lr}"
    )
    try:
        initial = _evaluate(0)
        logger.info(f"📊 Epoche 0: mittlerer Loss {initial:.6f}")
        _checkpoint(0)

        state = AdamState(weights)
        for epoch in range(1, train_cfg.epochs + 1):
            train_values = []
            with closing(_batch_stream(dataset, rng, train_cfg, batches_per_epoch)) as stream:
                for batch in stream:
                    zero_grad(weights.values())
                    value = loss(batch, model_cfg, weights, train_cfg.loss)
                    train_values.append(_checked_loss(value, epoch))
                    backward(value)
                    grads = {name: w.grad for name, w in weights.items()}
                    result.params_with_gradient.update(
                        name for name, g in grads.items() if g is not None and np.any(g != 0)
                    )
                    adam_step(weights, grads, state, train_cfg)

            mean = _evaluate(epoch)
            logger.info(f"📊 Epoche {epoch}: Trainings-Loss {np.mean(train_values):.6f}, Eval-Loss {mean:.6f}")
            if epoch % train_cfg.checkpoint_interval == 0 or epoch == train_cfg.epochs:
                _checkpoint(epoch)
    except TrainingDivergedError as exc:
        logger.error(f"❌ Training abgebrochen: {exc}")
        raise
    finally:
        if metrics_file is not None:
            metrics_file.close()

    zero_grad(weights.values())
    logger.info(f"✅ Training fertig: Loss {result.losses[0]:.6f} -> {result.losses[-1]:.6f}")
    return result


def dataset_from_sequence(images: Sequence[RangeImage], labels: Sequence[OverlapLabel],
                          visits: Optional[Sequence[int]] = None, train_visit: Optional[int] = 0) -> TrainingDataset:
    """
    Trainingsdatensatz aus einer Sequenz; mit train_visit nur die Scans dieses Besuchs
    (Revisits bleiben als Evaluations-Queries ungesehen).
    """
    if visits is None or train_visit is None:
        return TrainingDataset(images, labels)
    scan_ids = [i for i, visit in enumerate(visits) if visit == train_visit]
    if not scan_ids:
        raise ValueError(f"no scans recorded for visit {train_visit}")
    return TrainingDataset(images, labels, scan_ids)
