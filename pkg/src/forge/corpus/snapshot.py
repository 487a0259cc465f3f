"""Corpus loading: an immutable, indexed view of a source tree.

Recognized extensions map to language adapters: ``.mj`` (MiniJ),
``.schema`` (message declarations), ``.config`` (flag declarations).
Per-directory ``OWNERS`` files (one owner per line, ``#`` comments)
feed ownership lookups for sharding.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ..errors import CorpusError
from .minij import parse_minij
from .schemacfg import parse_config, parse_schema
from .tree import SyntaxTree

EXTENSION_LANGUAGES = {
    ".mj": "minij",
    ".schema": "schema",
    ".config": "config",
}

DEFAULT_TEST_PATTERN = r".*Test$"

_ADAPTERS: dict[str, Callable[[str, str], SyntaxTree]] = {
    "minij": parse_minij,
    "schema": parse_schema,
    "config": parse_config,
}


@dataclass(frozen=True)
class SourceFile:
    path: str  # relative to the corpus root, '/' separators
    content: str
    kind: str  # implementation | test | schema | config
    language: str


@dataclass
class RepoSnapshot:
    root: str
    files: list[SourceFile]
    owners: dict[str, list[str]]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._by_path = {f.path: f for f in self.files}
        self._trees: dict[str, SyntaxTree] = {}

    def get(self, path: str) -> Optional[SourceFile]:
        return self._by_path.get(path)

    def __contains__(self, path: str) -> bool:
        return path in self._by_path

    def tree(self, path: str) -> SyntaxTree:
        """Parse (and cache) the file at ``path``."""
        if path not in self._trees:
            f = self._by_path.get(path)
            if f is None:
                raise CorpusError(f"unknown file in snapshot: {path}")
            self._trees[path] = parse_file(f)
        return self._trees[path]


def file_kind(path: str, language: str, test_pattern: str) -> str:
    if language == "schema":
        return "schema"
    if language == "config":
        return "config"
    stem = Path(path).stem
    if re.fullmatch(test_pattern, stem):
        return "test"
    return "implementation"


def parse_file(file: SourceFile) -> SyntaxTree:
    """Parse one source file with its registered language adapter."""
    adapter = _ADAPTERS.get(file.language)
    if adapter is None:
        raise CorpusError(f"no parser adapter registered for language {file.language!r}")
    return adapter(file.content, file.path)


def _parse_owners(text: str) -> list[str]:
    owners = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            owners.append(line)
    return owners


def load_snapshot(root: str | Path, test_pattern: str = DEFAULT_TEST_PATTERN) -> RepoSnapshot:
    """Load every recognized file under ``root`` into an immutable snapshot.

    Files that cannot be decoded as UTF-8 are skipped with a recorded
    warning; an unreadable root is fatal.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a readable directory: {root}")

    files: list[SourceFile] = []
    owners: dict[str, list[str]] = {}
    warnings: list[str] = []

    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        if path.name == "OWNERS":
            try:
                owners[str(Path(rel).parent.as_posix())] = _parse_owners(
                    path.read_text(encoding="utf-8")
                )
            except UnicodeDecodeError:
                warnings.append(f"skipped undecodable owners file: {rel}")
            continue
        language = EXTENSION_LANGUAGES.get(path.suffix)
        if language is None:
            continue
        try:
            content = path.read_text(encoding="utf-8")
        except UnicodeDecodeError:
            warnings.append(f"skipped undecodable file: {rel}")
            continue
        files.append(
            SourceFile(
                path=rel,
                content=content,
                kind=file_kind(rel, language, test_pattern),
                language=language,
            )
        )

    files.sort(key=lambda f: f.path)
    return RepoSnapshot(root=str(root), files=files, owners=owners, warnings=warnings)


def owners_of(snapshot: RepoSnapshot, file: str) -> list[str]:
    """Owners of the nearest ancestor directory that has an OWNERS file."""
    if file not in snapshot:
        raise CorpusError(f"unknown file in snapshot: {file}")
    cur = Path(file).parent
    while True:
        key = cur.as_posix()
        if key in snapshot.owners:
            return list(snapshot.owners[key])
        if key == ".":
            return []
        cur = cur.parent


def code_search(
    snapshot: RepoSnapshot, pattern: str
) -> list[tuple[str, int, int, str]]:
    """All non-overlapping regex matches over the corpus, ordered by
    (file, line, col). Invalid patterns report the syntax fault position."""
    try:
        rx = re.compile(pattern)
    except re.error as e:
        raise CorpusError(f"invalid search pattern at position {e.pos}: {e.msg}") from e

    hits: list[tuple[str, int, int, str]] = []
    for f in snapshot.files:
        line_starts = [0]
        for i, ch in enumerate(f.content):
            if ch == "\n":
                line_starts.append(i + 1)
        for m in rx.finditer(f.content):
            line = bisect.bisect_right(line_starts, m.start()) - 1
            col = m.start() - line_starts[line] + 1
            hits.append((f.path, line + 1, col, m.group()))
    return hits
