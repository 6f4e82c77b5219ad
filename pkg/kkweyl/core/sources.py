import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterable

from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from kkweyl.core.catalog import (
    GeometryEntry,
    builtin,
    builtin_names,
    read_metric_file,
)
from kkweyl.core.conf import get_setting
from kkweyl.core.exceptions import GeometryNotFound


logger = logging.getLogger(__name__)


class GeometrySource(ABC):
    """
    Base class for geometry sources.

    A source knows a set of named geometry entries. The command line resolves
    geometry names through the configured source.
    """

    @abstractmethod
    def names(self) -> Iterable[str]:
        raise NotImplementedError()

    @abstractmethod
    def load(self, name: str) -> GeometryEntry:
        """
        Loads one entry.

        Raises:
            GeometryNotFound: The source has no entry with that name.
        """
        raise NotImplementedError()

    def entries(self) -> list[GeometryEntry]:
        return [self.load(name) for name in sorted(self.names())]


class BuiltinSource(GeometrySource):
    """
    The geometries shipped with the package.
    """

    def names(self) -> Iterable[str]:
        return builtin_names()

    def load(self, name: str) -> GeometryEntry:
        return builtin(name)


class DirectorySource(BuiltinSource):
    """
    The builtin geometries plus every `*.metric` file in the directories
    listed in the `DIRS` setting. A file shadows a builtin of the same name.

    Example:

        KKWEYL = {
            'SOURCE': 'kkweyl.core.sources.DirectorySource',
            'DIRS': ['geometries/'],
        }
    """

    def __init__(self, dirs: Iterable[str | Path] | None = None):
        if dirs is None:
            dirs = get_setting('DIRS')
        if isinstance(dirs, (str, Path)):
            raise ImproperlyConfigured('KKWEYL.DIRS must be a list of paths')
        self.dirs = [Path(d) for d in dirs]

    def files(self) -> dict[str, Path]:
        found = {}
        for directory in self.dirs:
            if not directory.is_dir():
                logger.warning(
                    'Geometry directory %s does not exist', directory
                )
                continue
            for path in sorted(directory.glob('*.metric')):
                found.setdefault(path.stem, path)
        return found

    def names(self) -> Iterable[str]:
        return sorted({*super().names(), *self.files()})

    def load(self, name: str) -> GeometryEntry:
        path = self.files().get(name)
        if path is None:
            return super().load(name)
        entry = read_metric_file(path)
        if entry.name != name:
            raise GeometryNotFound(
                f'{path} declares name {entry.name!r}, expected {name!r}'
            )
        return entry


DEFAULT_SOURCE = 'kkweyl.core.sources.BuiltinSource'


def get_source() -> GeometrySource:
    """
    Loads and instantiates the configured geometry source.
    """
    return import_string(get_setting('SOURCE', DEFAULT_SOURCE))()


__all__ = [
    'GeometrySource',
    'BuiltinSource',
    'DirectorySource',
    'get_source',
]
