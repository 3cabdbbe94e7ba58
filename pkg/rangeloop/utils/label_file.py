"""Overlap-Labeldatei: pro Zeile 'query_id reference_id overlap', '#' leitet Kommentare ein."""
from pathlib import Path
from typing import List, Sequence, Union

from ..schemas.label_schema import OverlapLabel


def write_labels(path: Union[str, Path], labels: Sequence[OverlapLabel]) -> None:
    lines = ["# query_id reference_id overlap"]
    lines += [f"{label.query_id} {label.reference_id} {label.overlap:.6f}" for label in labels]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path: Union[str, Path]) -> List[OverlapLabel]:
    """
    Raises:
        ValueError: Bei fehlerhafter Zeile (mit Zeilennummer)
    """
    labels = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path} line {line_number}: expected 'query_id reference_id overlap'")
            try:
                labels.append(OverlapLabel(query_id=int(parts[0]), reference_id=int(parts[1]), overlap=float(parts[2])))
            except ValueError as exc:
                raise ValueError(f"{path} line {line_number}: {exc}")
    return labels
