"""Lossless concrete syntax trees.

Every token of a parsed file becomes a leaf node; whatever sits between
tokens (whitespace, and comments in positions the parser does not
materialize) is trivia recovered from the source text on serialization.
Serializing a tree therefore reproduces the file byte-for-byte.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterator, Optional


@dataclass
class SyntaxNode:
    """One node of a concrete syntax tree.

    Leaves carry the token text; internal nodes span their children.
    ``name`` is set for declaration-like nodes (class, method, field,
    message, flag, import) so later stages can match nodes by identity.
    """

    kind: str
    start: int
    end: int
    children: list["SyntaxNode"] = field(default_factory=list)
    text: Optional[str] = None  # leaves only
    name: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return self.text is not None

    def walk(self) -> Iterator["SyntaxNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def leaves(self) -> Iterator["SyntaxNode"]:
        if self.is_leaf:
            yield self
        for child in self.children:
            yield from child.leaves()

    def find(self, kind: str) -> Iterator["SyntaxNode"]:
        for node in self.walk():
            if node.kind == kind:
                yield node

    def child_of_kind(self, kind: str) -> Optional["SyntaxNode"]:
        for child in self.children:
            if child.kind == kind:
                return child
        return None


class SyntaxTree:
    """Parse result for one source file."""

    def __init__(self, root: SyntaxNode, text: str, source_path: str):
        self.root = root
        self.text = text
        self.source_path = source_path
        self._line_starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self._line_starts.append(i + 1)

    def serialize(self) -> str:
        """Reconstruct the file content from leaves plus inter-token trivia."""
        out = []
        last = 0
        for leaf in self.root.leaves():
            out.append(self.text[last:leaf.start])
            out.append(leaf.text or "")
            last = leaf.end
        out.append(self.text[last:])
        return "".join(out)

    def line_col(self, offset: int) -> tuple[int, int]:
        """1-based (line, col) for a byte offset."""
        line = bisect.bisect_right(self._line_starts, offset) - 1
        return line + 1, offset - self._line_starts[line] + 1

    def offset_of_line(self, line: int) -> int:
        """Byte offset where 1-based ``line`` starts."""
        return self._line_starts[line - 1]

    def line_span(self, line: int) -> tuple[int, int]:
        start = self._line_starts[line - 1]
        end = (
            self._line_starts[line]
            if line < len(self._line_starts)
            else len(self.text)
        )
        return start, end

    def line_count(self) -> int:
        return len(self._line_starts)

    def nodes_on_line(self, line: int) -> list[SyntaxNode]:
        """All nodes whose span intersects the given 1-based line."""
        lo, hi = self.line_span(line)
        hits = []
        for node in self.root.walk():
            if node.start < hi and node.end > lo:
                hits.append(node)
        return hits

    def node_text(self, node: SyntaxNode) -> str:
        return self.text[node.start:node.end]

    def has_errors(self) -> bool:
        return any(True for _ in self.root.find("ErrorNode"))
