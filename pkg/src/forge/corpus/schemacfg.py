"""Parsers for the two declaration-only corpus formats.

``.schema`` files hold protobuf-like message declarations whose fields
generate accessor symbols (``foo_bar`` -> ``getFooBar``/``setFooBar``).
``.config`` files declare experiment flags; a flag generates the same
style of accessor pair from its name.
"""

from __future__ import annotations

from .minij import ParseError, Token, tokenize
from .tree import SyntaxNode, SyntaxTree


def camel_accessors(snake_name: str) -> tuple[str, str]:
    """Derive (getter, setter) accessor names from a snake_case field name."""
    camel = "".join(part.capitalize() for part in snake_name.split("_") if part)
    return f"get{camel}", f"set{camel}"


class _DeclParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self) -> Token | None:
        while self.i < len(self.tokens) and self.tokens[self.i].rk == "COMMENT":
            # comments stay trivia in declaration files
            self.i += 1
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, children: list[SyntaxNode], kind: str) -> SyntaxNode:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of file")
        self.i += 1
        node = SyntaxNode(kind, t.start, t.end, text=t.text)
        children.append(node)
        return node

    def expect(self, children: list[SyntaxNode], text: str, kind: str = "Punct") -> SyntaxNode:
        t = self.peek()
        if t is None or t.text != text:
            raise ParseError(f"expected {text!r}")
        return self.take(children, kind)

    def wrap(self, kind: str, children: list[SyntaxNode], name: str | None = None) -> SyntaxNode:
        leaves = [lf for c in children for lf in c.leaves()]
        start = leaves[0].start if leaves else 0
        end = leaves[-1].end if leaves else 0
        return SyntaxNode(kind, start, end, children=children, name=name)

    def recover(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        while self.peek() is not None and not self.peek().text in {";", "}"}:
            self.take(children, "Skipped")
        if self.peek() is not None:
            self.take(children, "Skipped")
        if not children:
            pos = len(self.text)
            return SyntaxNode("ErrorNode", pos, pos)
        return self.wrap("ErrorNode", children)


def parse_schema(text: str, source_path: str = "<memory>") -> SyntaxTree:
    p = _DeclParser(text)
    children: list[SyntaxNode] = []
    try:
        if p.peek() is not None and p.peek().text == "package":
            pkg: list[SyntaxNode] = []
            p.expect(pkg, "package", "Keyword")
            parts = [p.take(pkg, "Identifier").text]
            while p.peek() is not None and p.peek().text == ".":
                p.take(pkg, "Punct")
                parts.append(p.take(pkg, "Identifier").text)
            p.expect(pkg, ";")
            children.append(p.wrap("PackageDecl", pkg, name=".".join(parts)))
        while p.peek() is not None:
            msg: list[SyntaxNode] = []
            p.expect(msg, "message", "Keyword")
            mname = p.take(msg, "Identifier").text
            p.expect(msg, "{")
            while p.peek() is not None and p.peek().text != "}":
                fld: list[SyntaxNode] = []
                p.take(fld, "TypeName")
                fname = p.take(fld, "Identifier").text
                p.expect(fld, "=")
                p.take(fld, "IntLiteral")
                p.expect(fld, ";")
                msg.append(p.wrap("SchemaFieldDecl", fld, name=fname))
            p.expect(msg, "}")
            children.append(p.wrap("MessageDecl", msg, name=mname))
    except ParseError:
        children.append(p.recover())
    root = SyntaxNode("CompilationUnit", 0, len(text), children=children)
    return SyntaxTree(root, text, source_path)


def parse_config(text: str, source_path: str = "<memory>") -> SyntaxTree:
    p = _DeclParser(text)
    children: list[SyntaxNode] = []
    try:
        while p.peek() is not None:
            flg: list[SyntaxNode] = []
            p.expect(flg, "flag", "Keyword")
            fname = p.take(flg, "Identifier").text
            p.expect(flg, "{")
            while p.peek() is not None and p.peek().text != "}":
                entry: list[SyntaxNode] = []
                key = p.take(entry, "Identifier").text
                p.take(entry, "Value")
                flg.append(p.wrap("ConfigEntry", entry, name=key))
            p.expect(flg, "}")
            children.append(p.wrap("FlagDecl", flg, name=fname))
    except ParseError:
        children.append(p.recover())
    root = SyntaxNode("CompilationUnit", 0, len(text), children=children)
    return SyntaxTree(root, text, source_path)
