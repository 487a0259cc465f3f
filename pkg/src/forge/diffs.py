"""Unified diff emission, parsing, and zero-fuzz application.

Emission is deterministic (3 context lines, ``--- a/<path>`` headers,
``\\ No newline at end of file`` markers) so goldens can be bit-exact.
Application requires every context and deletion line to match the target
exactly; a mismatch is an error naming the failing hunk, never a fuzzy
placement.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field

from .errors import DiffError

NO_NEWLINE_MARKER = "\\ No newline at end of file"

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: list[tuple[str, str]] = field(default_factory=list)  # (tag, text)


@dataclass
class FileDiff:
    path: str
    hunks: list[Hunk] = field(default_factory=list)


def _format_range(start: int, length: int) -> str:
    beginning = start + 1 if length else start
    if length == 1:
        return str(beginning)
    return f"{beginning},{length}"


def _emit_line(out: list[str], prefix: str, line: str):
    if line.endswith("\n"):
        out.append(prefix + line)
    else:
        out.append(prefix + line + "\n")
        out.append(NO_NEWLINE_MARKER + "\n")


def diff_file(path: str, old: str, new: str, context: int = 3) -> str:
    """Unified diff section for one file; empty string when identical."""
    if old == new:
        return ""
    a = old.splitlines(keepends=True)
    b = new.splitlines(keepends=True)
    sm = difflib.SequenceMatcher(a=a, b=b, autojunk=False)
    out = [f"--- a/{path}\n", f"+++ b/{path}\n"]
    for group in sm.get_grouped_opcodes(context):
        i1, i2 = group[0][1], group[-1][2]
        j1, j2 = group[0][3], group[-1][4]
        out.append(f"@@ -{_format_range(i1, i2 - i1)} +{_format_range(j1, j2 - j1)} @@\n")
        for tag, ai, aj, bi, bj in group:
            if tag == "equal":
                for line in a[ai:aj]:
                    _emit_line(out, " ", line)
                continue
            if tag in ("replace", "delete"):
                for line in a[ai:aj]:
                    _emit_line(out, "-", line)
            if tag in ("replace", "insert"):
                for line in b[bi:bj]:
                    _emit_line(out, "+", line)
    return "".join(out)


def diff_files(changes: dict[str, tuple[str, str]], context: int = 3) -> str:
    """Multi-file unified diff; files emitted in lexicographic path order."""
    return "".join(
        diff_file(path, old, new, context)
        for path, (old, new) in sorted(changes.items())
    )


def parse_diff(text: str) -> list[FileDiff]:
    """Parse a unified diff into per-file hunks.

    Tolerates leading junk before the first ``---`` header (model output
    envelopes); inside a section the format is strict.
    """
    diffs: list[FileDiff] = []
    lines = text.splitlines(keepends=True)
    i = 0
    current: FileDiff | None = None
    hunk: Hunk | None = None

    def close_line_newline_strip():
        if hunk and hunk.lines:
            tag, t = hunk.lines[-1]
            hunk.lines[-1] = (tag, t.rstrip("\n"))

    while i < len(lines):
        raw = lines[i]
        stripped = raw.rstrip("\n")
        if stripped.startswith("--- "):
            if i + 1 < len(lines) and lines[i + 1].startswith("+++ "):
                new_path = lines[i + 1].rstrip("\n")[4:].strip()
                if new_path.startswith("b/"):
                    new_path = new_path[2:]
                current = FileDiff(path=new_path)
                diffs.append(current)
                hunk = None
                i += 2
                continue
        m = _HUNK_RE.match(stripped)
        if m and current is not None:
            hunk = Hunk(
                old_start=int(m.group(1)),
                old_len=int(m.group(2)) if m.group(2) is not None else 1,
                new_start=int(m.group(3)),
                new_len=int(m.group(4)) if m.group(4) is not None else 1,
            )
            current.hunks.append(hunk)
            i += 1
            continue
        if hunk is not None and stripped.startswith(NO_NEWLINE_MARKER[:1]):
            close_line_newline_strip()
            i += 1
            continue
        if hunk is not None and raw[:1] in (" ", "+", "-"):
            body = raw[1:]
            hunk.lines.append((raw[0], body))
            i += 1
            continue
        if hunk is not None and raw == "\n":
            # some emitters drop the space prefix on empty context lines
            hunk.lines.append((" ", "\n"))
            i += 1
            continue
        # anything else ends the current hunk/section
        hunk = None
        if raw[:4] not in ("--- ",):
            current = None
        i += 1
    return [d for d in diffs if d.hunks]


def is_valid_diff(text: str) -> bool:
    try:
        return bool(parse_diff(text))
    except Exception:
        return False


def apply_file_diff(old: str, fd: FileDiff) -> str:
    """Apply hunks to ``old`` with zero fuzz."""
    a = old.splitlines(keepends=True)
    out: list[str] = []
    pos = 0
    for n, hunk in enumerate(fd.hunks, start=1):
        anchor = hunk.old_start - 1 if hunk.old_len else hunk.old_start
        if anchor < pos:
            raise DiffError(f"{fd.path}: hunk {n} overlaps a previous hunk")
        out.extend(a[pos:anchor])
        pos = anchor
        for tag, text in hunk.lines:
            if tag in (" ", "-"):
                have = a[pos] if pos < len(a) else None
                if have != text:
                    raise DiffError(
                        f"{fd.path}: hunk {n}: context mismatch at line {pos + 1}: "
                        f"expected {text!r}, found {have!r}"
                    )
                if tag == " ":
                    out.append(have)
                pos += 1
            elif tag == "+":
                out.append(text)
    out.extend(a[pos:])
    return "".join(out)


def apply_diff(
    contents: dict[str, str],
    diff_text: str,
    allowed_paths: set[str] | None = None,
) -> dict[str, str]:
    """Apply a multi-file unified diff to a content map.

    Returns a new map holding only the changed files. Paths outside
    ``allowed_paths`` (when given) or missing from ``contents`` are errors.
    """
    result: dict[str, str] = {}
    for fd in parse_diff(diff_text):
        if allowed_paths is not None and fd.path not in allowed_paths:
            raise DiffError(f"diff targets file outside the group: {fd.path}")
        if fd.path not in contents:
            raise DiffError(f"diff targets unknown file: {fd.path}")
        result[fd.path] = apply_file_diff(contents[fd.path], fd)
    return result


def added_text(diff_text: str) -> str:
    """Concatenated text of all added lines, in diff order."""
    parts = []
    for fd in parse_diff(diff_text):
        for hunk in fd.hunks:
            for tag, text in hunk.lines:
                if tag == "+":
                    parts.append(text)
    return "".join(parts)


def added_text_by_file(diff_text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for fd in parse_diff(diff_text):
        parts = []
        for hunk in fd.hunks:
            for tag, text in hunk.lines:
                if tag == "+":
                    parts.append(text)
        out[fd.path] = out.get(fd.path, "") + "".join(parts)
    return out


def touched_paths(diff_text: str) -> list[str]:
    return sorted({fd.path for fd in parse_diff(diff_text)})
