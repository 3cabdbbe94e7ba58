"""Zentrale finite Differenzen als Orakel für die Backward-Kernel (nur im float64-Modus sinnvoll)."""
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..models.tensor import Tensor, backward, zero_grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||, 1e-8)"""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(diff / scale)


def numeric_gradient(fn: Callable[[], Tensor], tensor: Tensor, coords: np.ndarray, eps: float) -> np.ndarray:
    flat = tensor.data.reshape(-1)
    values = np.empty(len(coords))
    for slot, index in enumerate(coords):
        original = flat[index]
        flat[index] = original + eps
        plus = fn().item()
        flat[index] = original - eps
        minus = fn().item()
        flat[index] = original
        values[slot] = (plus - minus) / (2.0 * eps)
    return values


def gradcheck(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-6,
    max_coords: Optional[int] = 64,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Vergleicht Autodiff-Gradienten mit zentralen Differenzen.

    Args:
        fn: Baut den skalaren Ausgang aus den (in place veränderten) Eingaben neu auf
        inputs: Tensoren mit requires_grad
        eps: Schrittweite
        max_coords: Stichprobe an Koordinaten pro Eingabe (None = alle)
        rng: Zufallsquelle für die Stichprobe

    Returns:
        Relativer Fehler pro Eingabe (Schlüssel: name oder Position)
    """
    rng = rng or np.random.default_rng(0)
    zero_grad(inputs)
    backward(fn())
    errors: Dict[str, float] = {}
    for position, tensor in enumerate(inputs):
        size = tensor.data.size
        if max_coords is None or size <= max_coords:
            coords = np.arange(size)
        else:
            coords = np.sort(rng.choice(size, size=max_coords, replace=False))
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        analytic = grad.reshape(-1)[coords]
        numeric = numeric_gradient(fn, tensor, coords, eps)
        errors[tensor.name or str(position)] = relative_error(analytic, numeric)
    zero_grad(inputs)
    return errors


def max_gradcheck_error(fn: Callable[[], Tensor], inputs: Sequence[Tensor], **kwargs) -> float:
    return max(gradcheck(fn, inputs, **kwargs).values())
