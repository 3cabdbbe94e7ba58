"""
Kommandozeilen-Einstieg: Subcommand wählen, Präzision setzen, Handler ausführen, Manifest schreiben.

Exit-Codes: 0 Erfolg, 1 ungültige Eingabe (InputError: Usage, Datei, Konfiguration), 2 alle anderen Fehler.
"""
import logging
import sys
from typing import Optional, Sequence

from .commands import COMMAND_MODULES
from .commands.common import CliParser, InputError, UsageError, build_context
from .config import precision, settings
from .utils.manifest import build_manifest, write_manifest

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> CliParser:
    parser = CliParser(prog="rangeloop", description=settings.APP_NAME)
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure_logging(args.log_level)
    mode = args.precision or getattr(args, "default_precision", None) or settings.PRECISION
    try:
        with precision(mode):
            ctx = build_context(args, argv, mode)
            result = args.handler(args, ctx)
            if ctx.out_dir is not None:
                manifest = build_manifest(ctx.command, argv, ctx.profile.name.value, ctx.seed, mode,
                                          result.config, result.outputs)
                write_manifest(ctx.out_dir, manifest)
    except InputError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"❌ {args.command} fehlgeschlagen: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
