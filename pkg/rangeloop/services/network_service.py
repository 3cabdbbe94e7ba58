"""
Deskriptor-Netzwerk
Circular Convolution Module -> Range Transformer Module (Kanal- und Raum-Attention) -> NetVLAD -> MLP.
Gewichte liegen in einem Dict name -> Tensor, alle Stufen sind reine Funktionen (Gewichte, Eingabe).
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import get_dtype, settings
from ..models.conv import PadKind, PadMode, conv1d, conv2d
from ..models.range_image import RangeImage
from ..models.tensor import Tensor, concat, l2norm, matmul, pool, relu, sigmoid, softmax, transpose
from ..schemas.model_schema import CcmConfig, HeadConfig, ModelConfig, RtmConfig
from .projection_service import circular_padding

logger = logging.getLogger(__name__)

Weights = Dict[str, Tensor]
ImageInput = Union[RangeImage, Sequence[RangeImage], np.ndarray, Tensor]


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_weights(cfg: ModelConfig, seed: Optional[int] = None) -> Weights:
    """
    Initialisiert alle Parameter deterministisch aus dem Seed.

    Faltungen und MLP: uniform in ±sqrt(6/(fan_in+fan_out)), Biases 0.
    NetVLAD-Zentren und Zuordnungsgewichte: Standardnormal / sqrt(C).
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    weights: Weights = {}

    c_in = cfg.ccm.in_channels
    for index, layer in enumerate(cfg.ccm.layers):
        area = layer.kernel_h * layer.kernel_w
        shape = (layer.out_channels, c_in, layer.kernel_h, layer.kernel_w)
        weights[f"ccm.{index}.weight"] = _glorot(rng, shape, c_in * area, layer.out_channels * area)
        weights[f"ccm.{index}.bias"] = np.zeros(layer.out_channels)
        c_in = layer.out_channels

    if cfg.use_rtm:
        k_c, k_s = cfg.rtm.k_c, cfg.rtm.k_s
        weights["rtm.channel.weight"] = _glorot(rng, (1, 1, k_c), k_c, k_c)
        weights["rtm.channel.bias"] = np.zeros(1)
        weights["rtm.spatial.weight"] = _glorot(rng, (1, 2, 1, k_s), 2 * k_s, k_s)
        weights["rtm.spatial.bias"] = np.zeros(1)

    clusters, dim = cfg.head.clusters, cfg.head.descriptor_dim
    weights["vlad.centers"] = rng.standard_normal((clusters, c_in)) / np.sqrt(c_in)
    weights["vlad.assign.weight"] = rng.standard_normal((clusters, c_in)) / np.sqrt(c_in)
    weights["vlad.assign.bias"] = np.zeros(clusters)
    weights["mlp.weight"] = _glorot(rng, (clusters * c_in, dim), clusters * c_in, dim)
    weights["mlp.bias"] = np.zeros(dim)

    return {name: Tensor(value, requires_grad=True, name=name) for name, value in weights.items()}


def images_to_tensor(images: ImageInput) -> Tensor:
    """RangeImage, Liste von RangeImages oder Array -> Tensor [N, 1, H, W]"""
    if isinstance(images, Tensor):
        data = images
        return data if data.ndim == 4 else data.reshape((1,) * (4 - data.ndim) + data.shape)
    if isinstance(images, RangeImage):
        array = images.pixels[None, None]
    elif isinstance(images, np.ndarray):
        array = images.reshape((1,) * (4 - images.ndim) + images.shape) if images.ndim < 4 else images
    else:
        array = np.stack([image.pixels for image in images])[:, None]
    return Tensor(array.astype(get_dtype()))


def _layer_pad(width: int, layer, padding: PadKind) -> PadMode:
    left, right = circular_padding(width, layer.kernel_w, layer.stride_w)
    if padding == PadKind.CIRCULAR:
        return PadMode.circular(left + right, vertical=layer.vpad)
    return PadMode.zero(left, right, vertical=layer.vpad)


def ccm_forward(
    images: ImageInput,
    cfg: CcmConfig,
    weights: Weights,
    padding: PadKind = PadKind.CIRCULAR,
    collect: Optional[List[Tensor]] = None,
) -> Tensor:
    """
    Circular Convolution Module: Faltung + ReLU pro Schicht, horizontal zirkulär gepaddet.

    Args:
        images: Eingabebilder
        cfg: Schichtplan
        weights: Parameter-Dict
        padding: CIRCULAR (Standard) oder ZERO (Kontrollgruppe)
        collect: Optional Liste, in die jede Schichtausgabe angehängt wird

    Returns:
        Feature-Map [N, C, 1, W]

    Raises:
        ValueError: Wenn Bildhöhe und Schichtplan nicht zusammenpassen (mit Schichtindex)
    """
    x = images_to_tensor(images)
    height, width = x.shape[2], x.shape[3]
    if x.shape[1] != cfg.in_channels:
        raise ValueError(f"layer 0: expected {cfg.in_channels} input channels, got {x.shape[1]}")

    for index, layer in enumerate(cfg.layers):
        out_height = (height + 2 * layer.vpad - layer.kernel_h) // layer.stride_h + 1
        if height % layer.stride_h != 0 or out_height != height // layer.stride_h:
            raise ValueError(
                f"layer {index}: input height {height} does not fit kernel {layer.kernel_h}x{layer.kernel_w} "
                f"with stride {layer.stride_h} (schedule expects image height {cfg.height})"
            )
        x = relu(conv2d(
            x,
            weights[f"ccm.{index}.weight"],
            weights[f"ccm.{index}.bias"],
            (layer.stride_h, layer.stride_w),
            _layer_pad(width, layer, padding),
        ))
        height = out_height
        if collect is not None:
            collect.append(x)

    if height != 1:
        raise ValueError(
            f"layer {len(cfg.layers) - 1}: output height is {height}, expected 1 (schedule expects image height {cfg.height})"
        )
    return x


def channel_attention(features: Tensor, cfg: RtmConfig, weights: Weights) -> Tensor:
    """Gewichte pro Kanal: globales Average-Pooling, 1D-Faltung (zirkulär über Kanäle), Sigmoid -> [N, C, 1, 1]"""
    n, c = features.shape[0], features.shape[1]
    if c < cfg.k_c:
        raise ValueError(f"channel attention needs at least k_c={cfg.k_c} channels, got {c}")
    pooled = pool(features, "mean", axes=(2, 3)).reshape(n, 1, c)
    scores = conv1d(pooled, weights["rtm.channel.weight"], weights["rtm.channel.bias"], circular=True)
    return sigmoid(scores).reshape(n, c, 1, 1)


def spatial_attention(features: Tensor, cfg: RtmConfig, weights: Weights,
                      padding: PadKind = PadKind.CIRCULAR) -> Tensor:
    """Gewichte pro Spalte: Mean- und Max-Pooling über Kanäle, 1×k_s Faltung, Sigmoid -> [N, 1, 1, W]"""
    stacked = concat([pool(features, "mean", axes=1), pool(features, "max", axes=1)], axis=1)
    if padding == PadKind.CIRCULAR:
        pad = PadMode.circular(cfg.k_s - 1)
    else:
        pad = PadMode.zero(cfg.k_s // 2)
    scores = conv2d(stacked, weights["rtm.spatial.weight"], weights["rtm.spatial.bias"], (1, 1), pad)
    return sigmoid(scores)


def rtm_forward(features: Tensor, cfg: RtmConfig, weights: Weights, padding: PadKind = PadKind.CIRCULAR) -> Tensor:
    # Kanal-Attention zuerst, dann Raum-Attention auf der umgewichteten Map
    reweighted = features * channel_attention(features, cfg, weights)
    return reweighted * spatial_attention(reweighted, cfg, weights, padding)


def netvlad(features: Tensor, head: HeadConfig, weights: Weights) -> Tensor:
    """
    NetVLAD über die W Spalten als lokale Features der Dimension C.

    Soft-Assignment per Softmax über K Cluster, Residuen-Aggregation, Intra-Normalisierung
    pro Cluster, danach globale L2-Normalisierung.

    Returns:
        Tensor [N, K*C]
    """
    n, c, _, w = features.shape
    clusters = head.clusters
    local = features.reshape(n, c, w).transpose(0, 2, 1)  # [N, W, C]
    logits = matmul(local, transpose(weights["vlad.assign.weight"], (1, 0))) + weights["vlad.assign.bias"]
    assignment = softmax(logits, axis=2)  # [N, W, K]
    aggregated = matmul(assignment.transpose(0, 2, 1), local)  # [N, K, C]
    mass = assignment.sum(axis=1).reshape(n, clusters, 1)
    residuals = aggregated - mass * weights["vlad.centers"]
    intra = l2norm(residuals, axis=2)
    return l2norm(intra.reshape(n, clusters * c), axis=1)


def forward_stages(images: ImageInput, cfg: ModelConfig, weights: Weights,
                   collect: Optional[List[Tensor]] = None) -> Dict[str, Tensor]:
    """Alle Zwischenstufen (ccm, rtm, vlad, descriptor) für Diagnose und Äquivarianz-Checks."""
    ccm = ccm_forward(images, cfg.ccm, weights, cfg.padding, collect)
    rtm = rtm_forward(ccm, cfg.rtm, weights, cfg.padding) if cfg.use_rtm else ccm
    vlad = netvlad(rtm, cfg.head, weights)
    descriptor_out = matmul(vlad, weights["mlp.weight"]) + weights["mlp.bias"]
    return {"ccm": ccm, "rtm": rtm, "vlad": vlad, "descriptor": descriptor_out}


def descriptor(images: ImageInput, cfg: ModelConfig, weights: Weights) -> Tensor:
    """
    Globaler Deskriptor D = MLP(NetVLAD(RTM(CCM(R)))).

    Returns:
        Tensor [N, D]; bei einem einzelnen RangeImage [D]
    """
    out = forward_stages(images, cfg, weights)["descriptor"]
    if isinstance(images, RangeImage):
        return out.reshape(out.shape[1])
    return out


def extract_descriptors(
    images: Sequence[RangeImage],
    cfg: ModelConfig,
    weights: Weights,
    batch_size: int = 32,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    Deskriptoren für viele Bilder, batchweise und optional parallel (Forward ist rein).

    Returns:
        Array [N, D] im aktiven dtype
    """
    if not images:
        raise ValueError("extract_descriptors needs at least one image")
    workers = workers or settings.WORKERS
    chunks = [list(images[i:i + batch_size]) for i in range(0, len(images), batch_size)]
    started = time.perf_counter()

    def _run(chunk):
        return descriptor(chunk, cfg, weights).data

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(_run, chunks))
    else:
        parts = [_run(chunk) for chunk in chunks]

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    logger.info(f"📊 {len(images)} Deskriptoren extrahiert ({elapsed_ms / len(images):.2f} ms pro Scan)")
    return np.concatenate(parts, axis=0)


def check_weights(cfg: ModelConfig, weights: Weights) -> None:
    """
    Prüft, ob ein geladener Checkpoint zur Konfiguration passt.

    Raises:
        ValueError: Fehlende, überzählige oder falsch geformte Parameter
    """
    expected = {name: tensor.shape for name, tensor in init_weights(cfg, seed=0).items()}
    missing = sorted(set(expected) - set(weights))
    extra = sorted(set(weights) - set(expected))
    if missing or extra:
        raise ValueError(f"checkpoint does not match model config (missing {missing}, unexpected {extra})")
    for name, shape in expected.items():
        if weights[name].shape != shape:
            raise ValueError(f"parameter {name} has shape {weights[name].shape}, model config expects {shape}")
