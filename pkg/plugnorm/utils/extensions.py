import importlib
import inspect
import pkgutil
from typing import Iterator, NoReturn

from loguru import logger

from plugnorm import exts


def module_stem(name: str) -> str:
    """`plugnorm.exts.training` -> `training`."""
    return name.rsplit(".", maxsplit=1)[-1]


def walk_extensions() -> Iterator[str]:
    """
    Dotted names of the command modules under plugnorm.exts, sorted.

    A command module defines a module-level `setup(cli)`; private modules
    (leading underscore) hold shared helpers and are skipped.
    """

    def fail(name: str) -> NoReturn:
        raise ImportError(f"Cannot import command package {name}", name=name)

    found = pkgutil.walk_packages(exts.__path__, f"{exts.__name__}.", onerror=fail)
    for info in sorted(found, key=lambda info: info.name):
        if module_stem(info.name).startswith("_"):
            continue
        module = importlib.import_module(info.name)
        if inspect.isfunction(getattr(module, "setup", None)):
            yield info.name
        else:
            logger.debug(f"{info.name} has no setup(), not a command module")


logger.trace("Collecting commands")
EXTENSIONS = tuple(walk_extensions())
