"""
Flacher, exakter Deskriptor-Index
Unveränderlich nach dem Aufbau, daher für parallele Abfragen geeignet.
Deskriptoren werden in float32 gehalten (Präzision des RLD1-Formats), gerechnet wird in float64.
"""
from collections import Counter
from pathlib import Path
from typing import List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from ..utils.binary_formats import load_descriptor_db, save_descriptor_db


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    values = np.asarray(matrix, dtype=np.float32).astype(np.float64)
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm descriptor has no defined similarity")
    return values / norms


class DescriptorIndex:
    """Einträge (scan_id, Deskriptor) in Einfügereihenfolge"""

    def __init__(self, scan_ids: Sequence[int], descriptors: np.ndarray):
        descriptors = np.asarray(descriptors)
        ids = [int(i) for i in scan_ids]
        if descriptors.ndim != 2 or descriptors.shape[0] == 0:
            raise ValueError(f"index needs a nonempty [N, D] descriptor matrix, got shape {descriptors.shape}")
        if len(ids) != descriptors.shape[0]:
            raise ValueError(f"{len(ids)} scan ids for {descriptors.shape[0]} descriptors")
        duplicates = sorted(i for i, n in Counter(ids).items() if n > 1)
        if duplicates:
            raise ValueError(f"duplicate scan_id {duplicates[0]} in index")
        if any(i < 0 for i in ids):
            raise ValueError("scan ids must be non-negative")
        self._ids = np.array(ids, dtype=np.int64)
        self._descriptors = np.array(descriptors, dtype=np.float32)
        self._unit = _unit_rows(self._descriptors)
        self._ids.setflags(write=False)
        self._descriptors.setflags(write=False)
        self._unit.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self._descriptors.shape[1]

    @property
    def scan_ids(self) -> np.ndarray:
        return self._ids

    @property
    def descriptors(self) -> np.ndarray:
        return self._descriptors

    def __len__(self) -> int:
        return self._ids.shape[0]

    def __contains__(self, scan_id: int) -> bool:
        return bool(np.any(self._ids == scan_id))

    def similarities(self, d_q) -> np.ndarray:
        """(cos + 1) / 2 gegen alle Einträge, auf [0, 1] begrenzt"""
        q = np.asarray(d_q).reshape(-1)
        if q.shape[0] != self.dimension:
            raise ValueError(f"query dimension {q.shape[0]} does not match index dimension {self.dimension}")
        q_unit = _unit_rows(q[None, :])[0]
        return np.clip((self._unit @ q_unit + 1.0) / 2.0, 0.0, 1.0)

    def query(self, d_q, exclusion: Optional[Set[int]] = None,
              top_k: Optional[int] = None) -> List[Tuple[int, float]]:
        """
        Rangliste nach Ähnlichkeit absteigend, Gleichstand nach aufsteigender scan_id.

        Raises:
            ValueError: Dimensionsfehler oder wenn alle Kandidaten ausgeschlossen sind
        """
        sims = self.similarities(d_q)
        keep = np.ones(len(self), dtype=bool)
        if exclusion:
            keep &= ~np.isin(self._ids, np.fromiter(exclusion, dtype=np.int64, count=len(exclusion)))
        if not np.any(keep):
            raise ValueError("query has no candidates left after exclusion")
        ids, sims = self._ids[keep], sims[keep]
        # lexsort: letzter Schlüssel ist der primäre
        order = np.lexsort((ids, -sims))
        if top_k is not None:
            if top_k < 1:
                raise ValueError(f"top_k must be >= 1, got {top_k}")
            order = order[:top_k]
        return [(int(ids[i]), float(sims[i])) for i in order]

    def save(self, path: Union[str, Path]) -> None:
        save_descriptor_db(path, self._ids, self._descriptors)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DescriptorIndex":
        scan_ids, descriptors = load_descriptor_db(path)
        return cls(scan_ids, descriptors)


def build_index(descriptors, scan_ids: Optional[Sequence[int]] = None) -> DescriptorIndex:
    """
    Baut einen Index aus [N, D] Deskriptoren (oder einer Liste von Vektoren).

    Raises:
        ValueError: Leere Eingabe, Dimensionskonflikt, doppelte scan_id, Null-Deskriptor
    """
    if isinstance(descriptors, np.ndarray):
        matrix = descriptors
    else:
        rows = [np.asarray(d).reshape(-1) for d in descriptors]
        if not rows:
            raise ValueError("cannot build an index from zero descriptors")
        dims = {row.shape[0] for row in rows}
        if len(dims) != 1:
            raise ValueError(f"descriptor dimension mismatch: {sorted(dims)}")
        matrix = np.stack(rows)
    if scan_ids is None:
        scan_ids = range(matrix.shape[0] if matrix.ndim == 2 else 0)
    return DescriptorIndex(scan_ids, matrix)
