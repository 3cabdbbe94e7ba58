"""Manifest neben jeder CLI-Ausgabe (ohne Zeitstempel, damit wiederholte Läufe bytegleich sind)."""
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence, Union

from ..config import settings
from ..schemas.manifest_schema import RunManifest

MANIFEST_FILE = "manifest.json"
_TRACKED_PACKAGES = ("rangeloop", "numpy", "pydantic", "pydantic-settings", "jinja2")


def package_versions(packages: Iterable[str] = _TRACKED_PACKAGES) -> Dict[str, str]:
    versions = {}
    for package in packages:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def build_manifest(command: str, argv: Sequence[str], profile: str, seed: int, precision: str,
                   config: Mapping[str, Mapping[str, str]], outputs: Iterable[str] = ()) -> RunManifest:
    return RunManifest(
        command=command,
        argv=list(argv),
        profile=profile,
        seed=seed,
        precision=precision,
        config={section: dict(values) for section, values in config.items()},
        versions={"app": settings.APP_NAME, **package_versions()},
        outputs=sorted(outputs),
    )


def write_manifest(out_dir: Union[str, Path], manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path
