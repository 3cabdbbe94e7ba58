"""
Faltungs-Kernel mit Padding pro Achse
Vertikal immer Zero-Padding (das Range-Bild ist vertikal nicht periodisch), horizontal Zero oder Circular.
Die Faltung läuft als expliziter Fenster-Gather (im2col); bei Circular-Padding werden Spalten modulo W gelesen.
"""
import enum
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .tensor import Tensor, _accumulate, _as_tensor, _result


class PadKind(str, enum.Enum):
    """Horizontaler Padding-Modus"""
    ZERO = "zero"
    CIRCULAR = "circular"


class PadMode(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertical: int = Field(0, ge=0, description="Zero rows added above and below")
    horizontal: PadKind = Field(PadKind.ZERO, description="Horizontal padding kind")
    left: int = Field(0, ge=0, description="Columns added on the left")
    right: int = Field(0, ge=0, description="Columns added on the right")

    @model_validator(mode="after")
    def validate_circular_split(self):
        # Circular: left = floor(pad_w / 2), right = pad_w - left
        if self.horizontal == PadKind.CIRCULAR and self.left != (self.left + self.right) // 2:
            raise ValueError(
                f"Circular padding must split as left=floor(pad_w/2), got left={self.left}, right={self.right}"
            )
        return self

    @property
    def pad_w(self) -> int:
        return self.left + self.right

    @classmethod
    def circular(cls, pad_w: int, vertical: int = 0) -> "PadMode":
        left = pad_w // 2
        return cls(vertical=vertical, horizontal=PadKind.CIRCULAR, left=left, right=pad_w - left)

    @classmethod
    def zero(cls, left: int, right: Optional[int] = None, vertical: int = 0) -> "PadMode":
        return cls(vertical=vertical, horizontal=PadKind.ZERO, left=left, right=left if right is None else right)


def _column_index(width: int, pad: PadMode) -> np.ndarray:
    return np.arange(-pad.left, width + pad.right) % width


def _pad_input(x: np.ndarray, pad: PadMode) -> np.ndarray:
    if pad.vertical:
        x = np.pad(x, ((0, 0), (0, 0), (pad.vertical, pad.vertical), (0, 0)))
    if pad.horizontal == PadKind.CIRCULAR:
        if pad.pad_w:
            x = x[..., _column_index(x.shape[-1], pad)]
    elif pad.pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (0, 0), (pad.left, pad.right)))
    return x


def _unpad_grad(grad_padded: np.ndarray, shape: Tuple[int, ...], pad: PadMode) -> np.ndarray:
    height, width = shape[2], shape[3]
    grad_padded = grad_padded[:, :, pad.vertical:pad.vertical + height, :]
    if pad.horizontal == PadKind.CIRCULAR:
        if not pad.pad_w:
            return grad_padded
        grad = np.zeros(shape, dtype=grad_padded.dtype)
        np.add.at(grad, (slice(None), slice(None), slice(None), _column_index(width, pad)), grad_padded)
        return grad
    return grad_padded[..., pad.left:pad.left + width]


def _contract(cols: np.ndarray, kernel_mat: np.ndarray) -> np.ndarray:
    """cols [N, P, K] mal kernel_mat^T [K, C_out]; jede Position P mit identischer Operationsfolge."""
    if kernel_mat.shape[0] > 1:
        return cols @ kernel_mat.T
    # Einzelner Ausgabekanal: direkte Akkumulation über die Taps statt Matrix-Vektor-Kernel
    out = cols[..., 0:1] * kernel_mat[0, 0]
    for tap in range(1, kernel_mat.shape[1]):
        out = out + cols[..., tap:tap + 1] * kernel_mat[0, tap]
    return out


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: Tuple[int, int] = (1, 1),
    pad: Optional[PadMode] = None,
) -> Tensor:
    """
    2D-Faltung (Kreuzkorrelation) über [C_in, H, W] oder [N, C_in, H, W].

    Args:
        x: Eingabe
        kernel: Gewichte [C_out, C_in, K_h, K_w]
        bias: Optional [C_out]
        stride: (s_h, s_w)
        pad: Padding pro Achse (Default: kein Padding)

    Returns:
        Tensor [C_out, H', W'] bzw. [N, C_out, H', W']
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    pad = pad or PadMode()
    if x.ndim == 3:
        out = conv2d(x.reshape((1,) + x.shape), kernel, bias, stride, pad)
        return out.reshape(out.shape[1:])
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"conv2d expects input [N,C,H,W] and kernel [C_out,C_in,K_h,K_w], got {x.shape} and {kernel.shape}")

    s_h, s_w = stride
    if s_h < 1 or s_w < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    n, c_in, height, width = x.shape
    c_out, k_in, k_h, k_w = kernel.shape
    if k_in != c_in:
        raise ValueError(f"conv2d channel mismatch: input has {c_in} channels, kernel expects {k_in}")
    if k_h > height + 2 * pad.vertical or k_w > width + pad.pad_w:
        raise ValueError(
            f"conv2d kernel {k_h}x{k_w} larger than padded input "
            f"{height + 2 * pad.vertical}x{width + pad.pad_w}"
        )
    if bias is not None and bias.shape != (c_out,):
        raise ValueError(f"conv2d bias must have shape ({c_out},), got {bias.shape}")

    padded = _pad_input(x.data, pad)
    windows = sliding_window_view(padded, (k_h, k_w), axis=(2, 3))[:, :, ::s_h, ::s_w]
    out_h, out_w = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, out_h * out_w, c_in * k_h * k_w)
    kernel_mat = kernel.data.reshape(c_out, -1)
    out = _contract(cols, kernel_mat).reshape(n, out_h, out_w, c_out).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def _backward(g):
        g_mat = g.transpose(0, 2, 3, 1).reshape(n, out_h * out_w, c_out)
        if kernel.requires_grad:
            _accumulate(kernel, np.tensordot(g_mat, cols, axes=([0, 1], [0, 1])).reshape(kernel.shape))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            g_cols = (g_mat @ kernel_mat).reshape(n, out_h, out_w, c_in, k_h, k_w).transpose(0, 3, 1, 2, 4, 5)
            g_padded = np.zeros(padded.shape, dtype=g.dtype)
            for ki in range(k_h):
                for kj in range(k_w):
                    g_padded[:, :, ki:ki + s_h * (out_h - 1) + 1:s_h, kj:kj + s_w * (out_w - 1) + 1:s_w] += g_cols[..., ki, kj]
            _accumulate(x, _unpad_grad(g_padded, x.shape, pad))

    return _result(out, parents, _backward)


def conv1d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, circular: bool = True) -> Tensor:
    """
    1D-Faltung mit Längenerhalt über [1, L] oder [N, 1, L].

    Args:
        x: Eingabe
        kernel: Gewichte [1, 1, k], k ungerade
        bias: Optional [1]
        circular: Circular- statt Zero-Padding

    Returns:
        Tensor gleicher Form wie x
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if kernel.ndim != 3 or kernel.shape[:2] != (1, 1):
        raise ValueError(f"conv1d kernel must have shape [1,1,k], got {kernel.shape}")
    k = kernel.shape[2]
    if k % 2 == 0:
        raise ValueError(f"conv1d kernel size must be odd, got {k}")
    if x.ndim not in (2, 3) or x.shape[-2] != 1:
        raise ValueError(f"conv1d expects input [1,L] or [N,1,L], got {x.shape}")

    length = x.shape[-1]
    batch = 1 if x.ndim == 2 else x.shape[0]
    pad = PadMode.circular(k - 1) if circular else PadMode.zero(k // 2)
    out = conv2d(x.reshape(batch, 1, 1, length), kernel.reshape(1, 1, 1, k), bias, (1, 1), pad)
    return out.reshape(x.shape)
