"""
Finite-Differenzen-Checks für jeden differenzierbaren Kernel und den vollständigen Regressions-Loss.
20 zufällige Instanzen pro Op, relativer Fehler <= 1e-4 bei Schrittweite 1e-6 (float64).
"""
import numpy as np
import pytest

from rangeloop.models.conv import PadMode, conv1d, conv2d
from rangeloop.models.range_image import RangeImage
from rangeloop.models.tensor import (
    Tensor, concat, l2norm, matmul, pool, relu, reshape, sigmoid, softmax, square, tensor_abs, tensor_mean,
    tensor_sum, transpose,
)
from rangeloop.schemas.model_schema import CcmConfig, HeadConfig, ModelConfig, RtmConfig
from rangeloop.schemas.projection_schema import ProjectionParams
from rangeloop.schemas.train_schema import LossKind
from rangeloop.services.network_service import init_weights
from rangeloop.services.training_service import Batch, loss
from rangeloop.utils.gradcheck import gradcheck, max_gradcheck_error, relative_error

INSTANCES = 20
TOLERANCE = 1e-4


def _away_from_zero(rng, shape):
    # Knicke von relu/abs liegen bei 0
    return rng.uniform(0.05, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _param(rng, shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _weighted(out: Tensor, direction: np.ndarray) -> Tensor:
    # Zufällige Gewichtung, damit jede Ausgabe-Koordinate in den Skalar eingeht
    return (out * Tensor(direction)).sum()


OPS = {
    "add": lambda rng: _binary(rng, lambda a, b: a + b, (3, 4), (4,)),
    "sub": lambda rng: _binary(rng, lambda a, b: a - b, (3, 4), (3, 1)),
    "mul": lambda rng: _binary(rng, lambda a, b: a * b, (2, 3, 4), (1, 3, 1)),
    "matmul": lambda rng: _binary(rng, matmul, (2, 3, 4), (4, 5)),
    "relu": lambda rng: _unary(rng, relu, (4, 5), away=True),
    "sigmoid": lambda rng: _unary(rng, sigmoid, (4, 5)),
    "abs": lambda rng: _unary(rng, tensor_abs, (4, 5), away=True),
    "square": lambda rng: _unary(rng, square, (4, 5)),
    "reshape": lambda rng: _unary(rng, lambda a: reshape(a, (5, 4)), (4, 5)),
    "transpose": lambda rng: _unary(rng, lambda a: transpose(a, (2, 0, 1)), (2, 3, 4)),
    "sum": lambda rng: _unary(rng, lambda a: tensor_sum(a, axis=1, keepdims=True), (3, 4, 2)),
    "mean": lambda rng: _unary(rng, lambda a: tensor_mean(a, axis=(0, 2)), (3, 4, 2)),
    "max_pool": lambda rng: _unary(rng, lambda a: pool(a, "max", axes=1), (3, 6, 2)),
    "mean_pool": lambda rng: _unary(rng, lambda a: pool(a, "mean", axes=(2, 3)), (2, 3, 2, 5)),
    "softmax": lambda rng: _unary(rng, lambda a: softmax(a, axis=1), (3, 5)),
    "l2norm": lambda rng: _unary(rng, lambda a: l2norm(a, axis=1), (3, 5)),
    "concat": lambda rng: _binary(rng, lambda a, b: concat([a, b], axis=1), (2, 3), (2, 4)),
    "conv2d_circular": lambda rng: _conv(rng, PadMode.circular(4, vertical=2), (2, 1)),
    "conv2d_zero": lambda rng: _conv(rng, PadMode.zero(2, vertical=2), (2, 1)),
    "conv1d": lambda rng: _conv1d(rng),
}


def _unary(rng, op, shape, away=False):
    x = Tensor(_away_from_zero(rng, shape) if away else rng.standard_normal(shape), requires_grad=True)
    direction = rng.standard_normal(op(x).shape)
    return (lambda: _weighted(op(x), direction)), [x]


def _binary(rng, op, shape_a, shape_b):
    a, b = _param(rng, shape_a), _param(rng, shape_b)
    direction = rng.standard_normal(op(a, b).shape)
    return (lambda: _weighted(op(a, b), direction)), [a, b]


def _conv(rng, pad, stride):
    x, kernel, bias = _param(rng, (2, 2, 6, 7)), _param(rng, (3, 2, 5, 5)), _param(rng, (3,))
    direction = rng.standard_normal(conv2d(x, kernel, bias, stride, pad).shape)
    return (lambda: _weighted(conv2d(x, kernel, bias, stride, pad), direction)), [x, kernel, bias]


def _conv1d(rng):
    x, kernel, bias = _param(rng, (2, 1, 7)), _param(rng, (1, 1, 3)), _param(rng, (1,))
    direction = rng.standard_normal((2, 1, 7))
    return (lambda: _weighted(conv1d(x, kernel, bias, circular=True), direction)), [x, kernel, bias]


def test_relative_error_scale():
    assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


@pytest.mark.parametrize("name", sorted(OPS))
def test_primitive_gradients(name):
    rng = np.random.default_rng([11, sorted(OPS).index(name)])
    worst = 0.0
    for _ in range(INSTANCES):
        fn, inputs = OPS[name](rng)
        worst = max(worst, max_gradcheck_error(fn, inputs, eps=1e-6, max_coords=None))
    assert worst <= TOLERANCE


def _small_model(seed: int) -> ModelConfig:
    return ModelConfig(
        ccm=CcmConfig.for_height(4, [3, 4], [4]),
        rtm=RtmConfig(k_c=3, k_s=3),
        head=HeadConfig(clusters=2, descriptor_dim=6),
        seed=seed,
    )


def _small_batch(rng) -> Batch:
    # Verschiedene Query- und Referenzbilder, sonst sitzt |Sim - Over| im Knick bei Sim = Over = 1
    params = ProjectionParams.from_degrees(12, 4, 10.0, 10.0)
    pixels = rng.uniform(1.0, 20.0, size=(4, 1, 4, 12))
    pixels[rng.random(pixels.shape) < 0.15] = 0.0
    images = [RangeImage(params=params, pixels=p[0]).pixels[None] for p in pixels]
    return Batch(
        query_ids=[0, 1], reference_ids=[2, 3],
        queries=np.stack(images[:2]), references=np.stack(images[2:]),
        targets=rng.uniform(0.05, 0.95, size=(2, 2)),
    )


@pytest.mark.parametrize("kind", [LossKind.L1, LossKind.SQUARED])
def test_full_loss_gradient(kind):
    rng = np.random.default_rng(7 if kind == LossKind.L1 else 8)
    worst = 0.0
    for instance in range(INSTANCES):
        cfg = _small_model(instance)
        weights = init_weights(cfg)
        batch = _small_batch(rng)
        errors = gradcheck(lambda: loss(batch, cfg, weights, kind), list(weights.values()),
                           eps=1e-6, max_coords=8, rng=rng)
        assert set(errors) == set(weights)
        worst = max(worst, max(errors.values()))
    assert worst <= TOLERANCE
