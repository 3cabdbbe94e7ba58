"""
Gemeinsame CLI-Bausteine: geteilte Flags, Profil-Auflösung mit Key-Value-Overrides, Laden von Gewichten.
"""
import argparse
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from ..config import settings
from ..models.tensor import Tensor
from ..schemas.model_schema import ModelConfig
from ..schemas.profile_schema import Profile, ProfileName, get_profile
from ..schemas.projection_schema import ProjectionParams
from ..schemas.retrieval_schema import EvalProtocol
from ..schemas.train_schema import TrainConfig
from ..schemas.world_schema import WorldSpec
from ..services.network_service import check_weights, init_weights
from ..utils.binary_formats import load_checkpoint
from ..utils.keyvalue import read_key_values

logger = logging.getLogger(__name__)

MODEL_CONFIG_FILE = "model.cfg"
TRAIN_CONFIG_FILE = "train.cfg"

_SECTIONS = ("projection", "model", "train", "eval", "world")


class InputError(ValueError):
    """Ungültige Eingabe: Argumente, Konfiguration oder Eingabedateien (Exit-Code 1)"""


class UsageError(InputError):
    """Ungültige Kommandozeile (unbekanntes Flag, fehlendes Argument)"""


@contextmanager
def reading_inputs() -> Iterator[None]:
    """Fehler beim Lesen und Prüfen von Eingaben werden zu InputError, alles danach bleibt Laufzeitfehler."""
    try:
        yield
    except InputError:
        raise
    except (ValueError, OSError) as e:
        raise InputError(str(e)) from e


class CliParser(argparse.ArgumentParser):
    """ArgumentParser, der bei Fehlern Usage auf stderr schreibt und UsageError wirft statt exit(2)"""

    def error(self, message):
        self.print_usage()
        raise UsageError(f"{self.prog}: error: {message}")

    def print_usage(self, file=None):
        super().print_usage(file or sys.stderr)


class RunContext(BaseModel):
    """Aufgelöste gemeinsame Flags eines Laufs"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: str
    argv: List[str]
    profile: Profile
    seed: int
    precision: str
    out_dir: Optional[Path] = None
    workers: int = 1

    def require_out(self) -> Path:
        if self.out_dir is None:
            raise InputError(f"'{self.command}' writes files and needs --out")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir


class CommandResult(BaseModel):
    """Was ein Subcommand geschrieben hat und mit welcher Konfiguration"""
    outputs: List[str] = Field(default_factory=list)
    config: Dict[str, Dict[str, str]] = Field(default_factory=dict)


Handler = Callable[[argparse.Namespace, RunContext], CommandResult]


def add_shared_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("shared options")
    group.add_argument("--config", type=Path, default=None,
                       help="key-value file with section-prefixed overrides (e.g. 'model.clusters = 8')")
    group.add_argument("--seed", type=int, default=None, help="seed for all randomness (default: %(default)s from settings)")
    group.add_argument("--out", type=Path, default=None, help="output directory")
    group.add_argument("--profile", choices=[p.value for p in ProfileName], default=ProfileName.DESK.value,
                       help="size profile (default: %(default)s)")
    group.add_argument("--log-level", default=None, help="logging level (default: settings.LOG_LEVEL)")
    group.add_argument("--precision", choices=["float32", "float64"], default=None,
                       help="numeric precision (default: settings.PRECISION)")
    group.add_argument("--workers", type=int, default=None, help="worker threads (default: settings.WORKERS)")


def _split_sections(values: Dict[str, str]) -> Dict[str, Dict[str, str]]:
    sections: Dict[str, Dict[str, str]] = {name: {} for name in _SECTIONS}
    for key, value in values.items():
        section, _, field = key.partition(".")
        if not field or section not in sections:
            raise InputError(f"config key '{key}' must be prefixed with one of {', '.join(_SECTIONS)}")
        sections[section][field] = value
    return sections


def projection_to_key_values(params: ProjectionParams) -> Dict[str, str]:
    return {
        "w": str(params.w),
        "h": str(params.h),
        "f_up_deg": repr(math.degrees(params.f_up)),
        "f_down_deg": repr(math.degrees(params.f_down)),
        "min_range": repr(params.min_range),
    }


def resolve_profile(name: str, seed: int, config_path: Optional[Path] = None) -> Profile:
    """
    Profil laden, Overrides aus der Key-Value-Datei anwenden, zuletzt den Seed setzen.

    Raises:
        ValueError: Unbekannter Schlüssel oder ungültiger Wert
    """
    profile = get_profile(name)
    if config_path is not None:
        sections = _split_sections(read_key_values(config_path))
        projection = {**projection_to_key_values(profile.projection), **sections["projection"]}
        model = {**profile.network.to_key_values(), **sections["model"]}
        profile = profile.model_copy(update={
            "projection": ProjectionParams.from_degrees(
                int(projection["w"]), int(projection["h"]),
                float(projection["f_up_deg"]), float(projection["f_down_deg"]), float(projection["min_range"]),
            ),
            "network": ModelConfig.from_key_values(model),
            "train": TrainConfig(**{**profile.train.model_dump(), **sections["train"]}),
            "protocol": EvalProtocol(**{**profile.protocol.model_dump(), **sections["eval"]}),
            "world": WorldSpec.from_key_values({**profile.world.to_key_values(), **sections["world"]}),
        })
    return profile.with_seed(seed)


def profile_config(profile: Profile) -> Dict[str, Dict[str, str]]:
    """Konfigurations-Echo für das Manifest"""
    return {
        "projection": projection_to_key_values(profile.projection),
        "model": profile.network.to_key_values(),
        "train": profile.train.to_key_values(),
        "eval": {k: str(v.value if hasattr(v, "value") else v) for k, v in profile.protocol.model_dump().items()},
        "world": profile.world.to_key_values(),
    }


def build_context(args: argparse.Namespace, argv: Sequence[str], precision: str) -> RunContext:
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    with reading_inputs():
        profile = resolve_profile(args.profile, seed, args.config)
    return RunContext(
        command=args.command,
        argv=list(argv),
        profile=profile,
        seed=seed,
        precision=precision,
        out_dir=args.out,
        workers=args.workers or settings.WORKERS,
    )


def _find_model_config(weights_path: Path) -> Optional[Path]:
    for directory in (weights_path.parent, weights_path.parent.parent):
        candidate = directory / MODEL_CONFIG_FILE
        if candidate.exists():
            return candidate
    return None


def load_model(ctx: RunContext, weights_path: Optional[Path],
               model_config_path: Optional[Path] = None) -> Tuple[ModelConfig, Dict[str, Tensor]]:
    """
    Modell-Konfiguration und Gewichte: Checkpoint + model.cfg (neben dem Checkpoint gesucht),
    ohne Checkpoint zufällige Gewichte aus dem Seed.
    """
    cfg = ctx.profile.network
    if weights_path is None:
        logger.info(f"🔄 Keine Gewichte angegeben - zufällige Initialisierung (seed {cfg.seed})")
        return cfg, init_weights(cfg)

    config_path = model_config_path or _find_model_config(Path(weights_path))
    with reading_inputs():
        if config_path is not None:
            cfg = ModelConfig.from_key_values(read_key_values(config_path))
        weights = load_checkpoint(weights_path)
        check_weights(cfg, weights)
    logger.info(f"✅ Gewichte geladen: {weights_path}")
    return cfg, weights


def parse_int_list(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated list of integers, got '{text}'")
