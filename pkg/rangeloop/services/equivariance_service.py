"""
Gierwinkel-Äquivarianz
Verschiebt Range-Bilder spaltenweise (= Drehung des Sensors) und vergleicht CCM, RTM und Deskriptor
mit den verschobenen Ausgaben des unverschobenen Bilds. Zero-Padding dient als Negativkontrolle.
"""
import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..config import get_dtype
from ..models.conv import PadKind
from ..models.range_image import RangeImage
from ..schemas.equivariance_schema import EquivarianceReport, EquivarianceRow
from ..schemas.model_schema import ModelConfig
from .network_service import Weights, forward_stages
from .projection_service import roll_columns, shift_columns

logger = logging.getLogger(__name__)

CONTROL_THRESHOLD = 1e-3
TOLERANCE = {"float64": 1e-9, "float32": 1e-4}
CONTROL_MARKER = "control failed as expected"


def default_shifts(width: int) -> List[int]:
    """0, 1, 5, w/2 und w-1 (ohne Duplikate, aufsteigend)"""
    return sorted({0, 1 % width, 5 % width, width // 2, width - 1})


def equicheck(
    images: Sequence[RangeImage],
    cfg: ModelConfig,
    weights: Weights,
    shifts: Optional[Iterable[int]] = None,
    tolerance: Optional[float] = None,
) -> EquivarianceReport:
    """
    Prüft Äquivarianz (CCM, RTM) und Invarianz (Deskriptor) unter Spaltenverschiebung.

    Der Padding-Modus kommt aus cfg.padding. Im Zirkulär-Modus gilt der Lauf als erwartungsgemäß,
    wenn alle Abweichungen unter der Toleranz liegen; im Zero-Modus, wenn die CCM-Abweichung 1e-3 übersteigt.

    Raises:
        ValueError: Keine Bilder oder Bildhöhe passt nicht zum Schichtplan
    """
    if not images:
        raise ValueError("equicheck needs at least one image")
    for image in images:
        if image.params.h != cfg.ccm.height:
            raise ValueError(
                f"image height {image.params.h} does not match model height {cfg.ccm.height}"
            )
    width = images[0].params.w
    if any(image.params.w != width for image in images):
        raise ValueError("all images must have the same width")
    shifts = sorted(set(int(k) for k in shifts)) if shifts is not None else default_shifts(width)
    precision = np.dtype(get_dtype()).name
    tolerance = TOLERANCE.get(precision, 1e-4) if tolerance is None else tolerance

    base = forward_stages(list(images), cfg, weights)
    rows = []
    for k in shifts:
        shifted = forward_stages([shift_columns(image, k) for image in images], cfg, weights)
        rows.append(EquivarianceRow(
            shift=k,
            ccm=float(np.abs(roll_columns(base["ccm"].data, k) - shifted["ccm"].data).max()),
            rtm=float(np.abs(roll_columns(base["rtm"].data, k) - shifted["rtm"].data).max()),
            descriptor=float(np.abs(base["descriptor"].data - shifted["descriptor"].data).max()),
        ))
        logger.debug(f"Shift {k}: CCM {rows[-1].ccm:.3e}, Deskriptor {rows[-1].descriptor:.3e}")

    max_ccm = max(row.ccm for row in rows)
    max_rtm = max(row.rtm for row in rows)
    max_descriptor = max(row.descriptor for row in rows)
    if cfg.padding == PadKind.CIRCULAR:
        as_expected = max(max_ccm, max_rtm, max_descriptor) <= tolerance
        verdict = f"equivariant within {tolerance:.0e}" if as_expected else f"equivariance violated (tolerance {tolerance:.0e})"
    else:
        as_expected = max_ccm > CONTROL_THRESHOLD
        verdict = CONTROL_MARKER if as_expected else f"control did not fail: CCM error stayed <= {CONTROL_THRESHOLD:.0e}"

    marker = "✅" if as_expected else "❌"
    logger.info(f"{marker} Äquivarianz ({cfg.padding.value}): CCM {max_ccm:.3e}, Deskriptor {max_descriptor:.3e}")
    return EquivarianceReport(
        mode=cfg.padding,
        precision=precision,
        image_count=len(images),
        tolerance=tolerance,
        rows=rows,
        max_ccm=max_ccm,
        max_rtm=max_rtm,
        max_descriptor=max_descriptor,
        as_expected=as_expected,
        verdict=verdict,
    )
