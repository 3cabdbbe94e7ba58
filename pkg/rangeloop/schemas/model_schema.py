import math
import re
from typing import Dict, List, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..models.conv import PadKind

_LAYER_PATTERN = re.compile(r"^\s*(\d+)x(\d+)/(\d+)\s*$")


class LayerSpec(BaseModel):
    """Eine Faltungsschicht der CCM (Kernel, vertikales Padding, Stride, Ausgabekanäle)"""
    model_config = ConfigDict(frozen=True)

    kernel_h: int = Field(..., ge=1)
    kernel_w: int = Field(..., ge=1)
    vpad: int = Field(..., ge=0, description="Vertical zero padding per side")
    stride_h: int = Field(..., ge=1)
    stride_w: int = Field(1, ge=1)
    out_channels: int = Field(..., ge=1)

    def schedule_token(self) -> str:
        return f"{self.kernel_h}x{self.kernel_w}/{self.stride_h}"


class CcmConfig(BaseModel):
    """Schichtplan der Circular Convolution Module"""
    model_config = ConfigDict(frozen=True)

    height: int = Field(..., ge=1, description="Input image height")
    in_channels: int = Field(1, ge=1)
    layers: List[LayerSpec] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_schedule(self):
        for index, layer in enumerate(self.layers):
            if layer.stride_w != 1:
                raise ValueError(f"layer {index}: horizontal stride must be 1, got {layer.stride_w}")
        product = math.prod(layer.stride_h for layer in self.layers)
        if product != self.height:
            raise ValueError(f"product of vertical strides ({product}) must equal image height {self.height}")
        return self

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_channels

    @classmethod
    def for_height(cls, height: int, stride2_channels: Sequence[int], stride1_channels: Sequence[int]) -> "CcmConfig":
        """
        Standard-Schichtplan: ein 5×5 (Stride 2×1, vpad 2), log2(h)-1 mal 3×3 (Stride 2×1, vpad 1),
        danach 1×3 Schichten (Stride 1×1, vpad 0).
        """
        depth = int(round(math.log2(height))) if height >= 2 else 0
        if depth < 1 or 2 ** depth != height:
            raise ValueError(f"default schedule needs a power-of-two height >= 2, got {height}")
        if len(stride2_channels) != depth:
            raise ValueError(f"height {height} needs {depth} stride-2 channel widths, got {len(stride2_channels)}")
        layers = [LayerSpec(kernel_h=5, kernel_w=5, vpad=2, stride_h=2, out_channels=stride2_channels[0])]
        layers += [LayerSpec(kernel_h=3, kernel_w=3, vpad=1, stride_h=2, out_channels=c) for c in stride2_channels[1:]]
        layers += [LayerSpec(kernel_h=1, kernel_w=3, vpad=0, stride_h=1, out_channels=c) for c in stride1_channels]
        return cls(height=height, layers=layers)

    @classmethod
    def from_schedule(cls, height: int, schedule: str, channels: Sequence[int]) -> "CcmConfig":
        """Parst 'KhxKw/Sh,...' (z.B. '5x5/2,3x3/2,1x3/1'); vertikales Padding = floor(K_h / 2)."""
        tokens = [t for t in schedule.split(",") if t.strip()]
        if len(tokens) != len(channels):
            raise ValueError(f"schedule has {len(tokens)} layers but {len(channels)} channel widths were given")
        layers = []
        for index, (token, width) in enumerate(zip(tokens, channels)):
            match = _LAYER_PATTERN.match(token)
            if not match:
                raise ValueError(f"layer {index}: cannot parse schedule token '{token}'")
            k_h, k_w, s_h = (int(g) for g in match.groups())
            layers.append(LayerSpec(kernel_h=k_h, kernel_w=k_w, vpad=k_h // 2, stride_h=s_h, out_channels=width))
        return cls(height=height, layers=layers)

    def schedule(self) -> str:
        return ",".join(layer.schedule_token() for layer in self.layers)

    def channels(self) -> List[int]:
        return [layer.out_channels for layer in self.layers]


class RtmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k_c: int = Field(3, ge=1, description="Channel attention 1-D kernel size (odd)")
    k_s: int = Field(7, ge=1, description="Spatial attention 1 x k_s kernel width (odd)")

    @field_validator("k_c", "k_s")
    @classmethod
    def validate_odd(cls, v):
        if v % 2 == 0:
            raise ValueError(f"attention kernel sizes must be odd, got {v}")
        return v


class HeadConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    clusters: int = Field(64, ge=2, description="NetVLAD cluster count K")
    descriptor_dim: int = Field(256, ge=1, description="Output descriptor dimension")


def _parse_int_list(value) -> List[int]:
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]


class ModelConfig(BaseModel):
    """Gesamte Netzwerk-Konfiguration inkl. Ablations-Schalter"""
    model_config = ConfigDict(frozen=True)

    ccm: CcmConfig
    rtm: RtmConfig = RtmConfig()
    head: HeadConfig = HeadConfig()
    seed: int = Field(0, description="Weight initialization seed")
    padding: PadKind = Field(PadKind.CIRCULAR, description="Horizontal padding of the CCM (zero = standard convolution)")
    use_rtm: bool = Field(True, description="Disable to feed CCM features straight into NetVLAD")

    @model_validator(mode="after")
    def validate_channel_attention(self):
        if self.use_rtm and self.ccm.out_channels < self.rtm.k_c:
            raise ValueError(f"channel attention needs C >= k_c, got C={self.ccm.out_channels}, k_c={self.rtm.k_c}")
        return self

    @classmethod
    def from_key_values(cls, values: Dict[str, str]) -> "ModelConfig":
        ccm = CcmConfig.from_schedule(int(values["height"]), values["schedule"], _parse_int_list(values["channels"]))
        rtm = RtmConfig(**{k: values[k] for k in ("k_c", "k_s") if k in values})
        head = HeadConfig(**{k: values[k] for k in ("clusters", "descriptor_dim") if k in values})
        extra = {k: values[k] for k in ("seed", "padding", "use_rtm") if k in values}
        return cls(ccm=ccm, rtm=rtm, head=head, **extra)

    def to_key_values(self) -> Dict[str, str]:
        return {
            "height": str(self.ccm.height),
            "schedule": self.ccm.schedule(),
            "channels": ",".join(str(c) for c in self.ccm.channels()),
            "k_c": str(self.rtm.k_c),
            "k_s": str(self.rtm.k_s),
            "clusters": str(self.head.clusters),
            "descriptor_dim": str(self.head.descriptor_dim),
            "seed": str(self.seed),
            "padding": self.padding.value,
            "use_rtm": str(self.use_rtm).lower(),
        }
