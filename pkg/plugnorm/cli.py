import argparse
import importlib
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from loguru import logger

from plugnorm import constants
from plugnorm.constants import ExitCodes, FileNames
from plugnorm.errors import DatasetExistsError, PlugnormError
from plugnorm.utils.config import ExperimentConfig, dump_config, load_config
from plugnorm.utils.extensions import EXTENSIONS

STDERR_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}"


@dataclass
class Context:
    """Everything a command handler gets: parsed flags, resolved config and its output directory."""

    args: argparse.Namespace
    config: ExperimentConfig
    out: Path


Handler = Callable[[Context], None]
Configure = Callable[[argparse.Namespace, ExperimentConfig], ExperimentConfig]


@dataclass(frozen=True)
class Command:
    name: str
    handler: Handler
    configure: Configure | None = None
    fresh_output: bool = False


class Cli:
    """The core of the command line: one subcommand per module under plugnorm.exts."""

    def __init__(self) -> None:
        self.parser = argparse.ArgumentParser(
            prog="plugnorm",
            description="Plug-and-play dynamic instance normalization for segmentation under appearance shift.",
        )
        self.subparsers = self.parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
        self.commands: dict[str, Command] = {}
        self.load_extensions()

    def load_extensions(self) -> None:
        """Register every command found by walk_extensions()."""
        for ext in EXTENSIONS:
            importlib.import_module(ext).setup(self)
            logger.trace(f"Registered command module: {ext}")

    def add_command(
        self,
        name: str,
        handler: Handler,
        help: str,
        default_out: str,
        configure: Configure | None = None,
        fresh_output: bool = False,
    ) -> argparse.ArgumentParser:
        """
        Declare a subcommand with the shared flags (--config, --out, --seed,
        --log-level) and return its parser for command-specific flags.

        With `fresh_output` the command refuses a non-empty --out unless
        --force is given, checked before anything is written there.
        """
        parser = self.subparsers.add_parser(name, help=help, description=help)
        parser.add_argument("--config", type=Path, help="YAML experiment config (defaults apply when omitted).")
        parser.add_argument("--out", type=Path, default=Path(default_out), help=f"Output directory (default {default_out}).")
        parser.add_argument("--seed", type=int, help="Override the top-level seed.")
        parser.add_argument("--log-level", default=None, help="stderr log level (default PLUGNORM_LOG_LEVEL or INFO).")
        if fresh_output:
            parser.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory.")
        self.commands[name] = Command(name, handler, configure, fresh_output)
        return parser

    @staticmethod
    def configure_logging(level: str, out: Path) -> int:
        """Replace the default sink by stderr at `level` and add `run.log` in `out`; return the file sink id."""
        logger.remove()
        logger.add(sys.stderr, level=level, format=STDERR_FORMAT)
        out.mkdir(parents=True, exist_ok=True)
        return logger.add(out / FileNames.run_log, level="DEBUG", mode="w")

    def run(self, argv: Sequence[str] | None = None) -> int:
        args = self.parser.parse_args(argv)
        command = self.commands[args.command]
        constants.LOG_LEVEL = (args.log_level or constants.LOG_LEVEL).upper()
        out: Path = args.out
        sink = None
        try:
            if command.fresh_output and out.exists() and any(out.iterdir()) and not args.force:
                raise DatasetExistsError(f"{out} is not empty; pass --force to overwrite.")
            sink = self.configure_logging(constants.LOG_LEVEL, out)

            config = load_config(args.config, seed=args.seed)
            if command.configure is not None:
                config = command.configure(args, config)
            dump_config(config, out / FileNames.resolved_config)

            logger.info(f"Running `{command.name}` into {out}")
            command.handler(Context(args, config, out))
            logger.info(f"Finished `{command.name}`")
            return ExitCodes.success
        except PlugnormError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
        except Exception:
            logger.exception(f"`{command.name}` failed unexpectedly")
            return ExitCodes.failure
        finally:
            if sink is not None:
                logger.remove(sink)
