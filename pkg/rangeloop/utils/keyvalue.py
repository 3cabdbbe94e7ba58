"""Key-Value-Textdateien ('key = value', '#' Kommentare) für Modell-, Trainings- und Welt-Konfiguration."""
from pathlib import Path
from typing import Dict, Mapping, Union


def parse_key_values(text: str, source: str = "<text>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source} line {line_number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{source} line {line_number}: empty key")
        if key in values:
            raise ValueError(f"{source} line {line_number}: duplicate key '{key}'")
        values[key] = value
    return values


def read_key_values(path: Union[str, Path]) -> Dict[str, str]:
    return parse_key_values(Path(path).read_text(encoding="utf-8"), str(path))


def write_key_values(path: Union[str, Path], values: Mapping[str, str], header: str = "") -> None:
    lines = [f"# {header}"] if header else []
    lines += [f"{key} = {value}" for key, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
