"""Recursive-descent parser for MiniJ, the bundled Java-like mini-language.

Grammar (informal):

    unit      := package? import* (class | comment)*
    package   := 'package' qname ';'
    import    := 'import' qname ';'
    class     := anno* 'class' NAME ('extends' type)? '{' member* '}'
    anno      := '@' NAME ('(' args? ')')?
    member    := anno* type NAME ( '(' params? ')' block | ('=' expr)? ';' )
    block     := '{' stmt* '}'
    stmt      := localdecl | assign | exprstmt | if | return
    expr      := unary (CMP unary)?
    unary     := '(' type ')' unary | primary
    primary   := literal | NAME (('.' NAME)? ('(' args ')')?)*

Error recovery consumes tokens into an ErrorNode until the next ';' or
'}' at the same nesting depth, so the tree stays lossless and downstream
stages never see a hard parse failure.
"""

from __future__ import annotations

import re

from .tree import SyntaxNode, SyntaxTree

KEYWORDS = {"package", "import", "class", "extends", "if", "else", "return"}
PRIMITIVES = {"int", "long", "string", "void"}
CMP_OPS = {"==", "!=", "<=", ">=", "<", ">"}

_TOKEN_RE = re.compile(
    r"""
    (?P<COMMENT>//[^\n]*)
  | (?P<NAME>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<NUMBER>-?[0-9]+L?)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<OP>==|!=|<=|>=)
  | (?P<PUNCT>[{}();,.=<>@])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("rk", "text", "start", "end")

    def __init__(self, rk: str, text: str, start: int, end: int):
        self.rk = rk
        self.text = text
        self.start = start
        self.end = end

    def __repr__(self):  # pragma: no cover
        return f"Token({self.rk}, {self.text!r}, {self.start})"


def tokenize(text: str) -> list[Token]:
    """Scan MiniJ tokens; anything unmatched other than whitespace is
    surfaced as a BAD token so the parser can recover around it."""
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m:
            tokens.append(Token(m.lastgroup, m.group(), m.start(), m.end()))
            pos = m.end()
            continue
        if text[pos].isspace():
            pos += 1
            continue
        tokens.append(Token("BAD", text[pos], pos, pos + 1))
        pos += 1
    return tokens


class ParseError(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # -- token plumbing ------------------------------------------------

    def _skip_comments_into(self, children: list[SyntaxNode]):
        while self.i < len(self.tokens) and self.tokens[self.i].rk == "COMMENT":
            children.append(self._leaf("Comment"))

    def peek(self, offset: int = 0) -> Token | None:
        j = self.i
        seen = 0
        while j < len(self.tokens):
            if self.tokens[j].rk != "COMMENT":
                if seen == offset:
                    return self.tokens[j]
                seen += 1
            j += 1
        return None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def at_name(self) -> bool:
        t = self.peek()
        return t is not None and t.rk == "NAME" and t.text not in KEYWORDS

    def _leaf(self, kind: str) -> SyntaxNode:
        t = self.tokens[self.i]
        self.i += 1
        return SyntaxNode(kind, t.start, t.end, text=t.text)

    def take(self, children: list[SyntaxNode], kind: str) -> SyntaxNode:
        self._skip_comments_into(children)
        if self.i >= len(self.tokens):
            raise ParseError("unexpected end of file")
        node = self._leaf(kind)
        children.append(node)
        return node

    def expect(self, children: list[SyntaxNode], text: str, kind: str = "Punct") -> SyntaxNode:
        self._skip_comments_into(children)
        t = self.peek()
        if t is None or t.text != text:
            raise ParseError(f"expected {text!r}")
        return self.take(children, kind)

    def _wrap(self, kind: str, children: list[SyntaxNode], name: str | None = None) -> SyntaxNode:
        leaves = [lf for c in children for lf in c.leaves()]
        if leaves:
            start, end = leaves[0].start, leaves[-1].end
        else:
            t = self.tokens[self.i] if self.i < len(self.tokens) else None
            start = end = t.start if t else len(self.text)
        return SyntaxNode(kind, start, end, children=children, name=name)

    # -- error recovery -------------------------------------------------

    def recover(self) -> SyntaxNode:
        """Consume tokens until the next ';' or '}' at the current depth."""
        children: list[SyntaxNode] = []
        depth = 0
        while self.i < len(self.tokens):
            t = self.tokens[self.i]
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                if depth == 0:
                    break
                depth -= 1
            elif t.text == ";" and depth == 0:
                children.append(self._leaf("Punct"))
                break
            children.append(self._leaf("ErrorToken" if t.rk == "BAD" else "Skipped"))
        if children:
            node = self._wrap("ErrorNode", children)
        else:
            pos = self.tokens[self.i].start if self.i < len(self.tokens) else len(self.text)
            node = SyntaxNode("ErrorNode", pos, pos, children=[])
        return node

    # -- grammar --------------------------------------------------------

    def parse_unit(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self._skip_comments_into(children)
        if self.at("package"):
            children.append(self.parse_package())
        self._skip_comments_into(children)
        while self.at("import"):
            children.append(self.parse_import())
            self._skip_comments_into(children)
        while self.peek() is not None:
            try:
                children.append(self.parse_class())
            except ParseError:
                err = self.recover()
                if not err.children and self.peek() is not None:
                    # stray token recover() refuses to eat (e.g. '}'): force
                    # progress so the top-level loop terminates
                    leaf = self._leaf("Skipped")
                    err.children.append(leaf)
                    err.start, err.end = leaf.start, leaf.end
                children.append(err)
            self._skip_comments_into(children)
        node = self._wrap("CompilationUnit", children)
        node.start, node.end = 0, len(self.text)
        return node

    def _qname(self, children: list[SyntaxNode], kind: str = "Identifier") -> str:
        parts = [self.take(children, kind).text]
        while self.at("."):
            self.take(children, "Punct")
            self._skip_comments_into(children)
            if not self.at_name():
                raise ParseError("expected name after '.'")
            parts.append(self.take(children, kind).text)
        return ".".join(parts)

    def parse_package(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self.expect(children, "package", "Keyword")
        name = self._qname(children)
        self.expect(children, ";")
        return self._wrap("PackageDecl", children, name=name)

    def parse_import(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self.expect(children, "import", "Keyword")
        name = self._qname(children)
        self.expect(children, ";")
        return self._wrap("ImportDecl", children, name=name)

    def parse_annotation(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self.expect(children, "@")
        name = self.take(children, "Identifier").text
        if self.at("("):
            self.take(children, "Punct")
            if not self.at(")"):
                children.append(self.parse_expr())
                while self.at(","):
                    self.take(children, "Punct")
                    children.append(self.parse_expr())
            self.expect(children, ")")
        return self._wrap("Annotation", children, name=name)

    def parse_class(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self._skip_comments_into(children)
        while self.at("@"):
            children.append(self.parse_annotation())
            self._skip_comments_into(children)
        self.expect(children, "class", "Keyword")
        name = self.take(children, "Identifier").text
        self._skip_comments_into(children)
        if self.at("extends"):
            ext: list[SyntaxNode] = []
            self.expect(ext, "extends", "Keyword")
            ext.append(self.parse_type())
            children.append(self._wrap("ExtendsClause", ext))
        self.expect(children, "{")
        self._skip_comments_into(children)
        while not self.at("}") and self.peek() is not None:
            try:
                children.append(self.parse_member())
            except ParseError:
                children.append(self.recover())
            self._skip_comments_into(children)
        self.expect(children, "}")
        return self._wrap("ClassDecl", children, name=name)

    def parse_type(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self._skip_comments_into(children)
        if not self.at_name() and not (self.peek() and self.peek().text in PRIMITIVES):
            raise ParseError("expected type")
        self._qname(children, "TypeName")
        if self.at("<"):
            self.take(children, "Punct")
            children.append(self.parse_type())
            self.expect(children, ">")
        return self._wrap("Type", children)

    def _looks_like_decl(self) -> bool:
        """True when the upcoming tokens read as ``type NAME`` (a declaration)."""
        t = self.peek()
        if t is None or t.rk != "NAME" or t.text in KEYWORDS:
            return False
        j = 1
        while True:
            nxt = self.peek(j)
            if nxt is None:
                return False
            if nxt.text == ".":
                after = self.peek(j + 1)
                if after is None or after.rk != "NAME":
                    return False
                j += 2
                continue
            if nxt.text == "<":
                # skip a balanced generic argument
                depth = 1
                j += 1
                while depth:
                    cur = self.peek(j)
                    if cur is None:
                        return False
                    if cur.text == "<":
                        depth += 1
                    elif cur.text == ">":
                        depth -= 1
                    elif cur.text in {";", "{", "}"}:
                        return False
                    j += 1
                continue
            break
        return nxt.rk == "NAME" and nxt.text not in KEYWORDS

    def parse_member(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self._skip_comments_into(children)
        while self.at("@"):
            children.append(self.parse_annotation())
            self._skip_comments_into(children)
        children.append(self.parse_type())
        name = self.take(children, "Identifier").text
        if self.at("("):
            self.take(children, "Punct")
            if not self.at(")"):
                params: list[SyntaxNode] = []
                while True:
                    p: list[SyntaxNode] = []
                    p.append(self.parse_type())
                    pname = self.take(p, "Identifier").text
                    params.append(self._wrap("Param", p, name=pname))
                    if self.at(","):
                        self.take(params, "Punct")
                        continue
                    break
                children.append(self._wrap("ParamList", params))
            self.expect(children, ")")
            children.append(self.parse_block())
            return self._wrap("MethodDecl", children, name=name)
        if self.at("="):
            self.take(children, "Punct")
            children.append(self.parse_expr())
        self.expect(children, ";")
        return self._wrap("FieldDecl", children, name=name)

    def parse_block(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self.expect(children, "{")
        self._skip_comments_into(children)
        while not self.at("}") and self.peek() is not None:
            try:
                children.append(self.parse_statement())
            except ParseError:
                children.append(self.recover())
            self._skip_comments_into(children)
        self.expect(children, "}")
        return self._wrap("Block", children)

    def parse_statement(self) -> SyntaxNode:
        if self.at("if"):
            return self.parse_if()
        if self.at("return"):
            children: list[SyntaxNode] = []
            self.expect(children, "return", "Keyword")
            if not self.at(";"):
                children.append(self.parse_expr())
            self.expect(children, ";")
            return self._wrap("ReturnStmt", children)
        t = self.peek()
        if t is not None and (t.text in PRIMITIVES or self._looks_like_decl()):
            children = []
            children.append(self.parse_type())
            name = self.take(children, "Identifier").text
            if self.at("="):
                self.take(children, "Punct")
                children.append(self.parse_expr())
            self.expect(children, ";")
            return self._wrap("LocalDecl", children, name=name)
        # assignment or expression statement
        children = []
        expr = self.parse_expr()
        children.append(expr)
        if self.at("="):
            self.take(children, "Punct")
            children.append(self.parse_expr())
            self.expect(children, ";")
            return self._wrap("AssignStmt", children)
        self.expect(children, ";")
        return self._wrap("ExprStmt", children)

    def parse_if(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        self.expect(children, "if", "Keyword")
        self.expect(children, "(")
        children.append(self.parse_expr())
        self.expect(children, ")")
        children.append(self.parse_block())
        self._skip_comments_into(children)
        if self.at("else"):
            self.expect(children, "else", "Keyword")
            self._skip_comments_into(children)
            if self.at("if"):
                children.append(self.parse_if())
            else:
                children.append(self.parse_block())
        return self._wrap("IfStmt", children)

    def parse_expr(self) -> SyntaxNode:
        left = self.parse_unary()
        t = self.peek()
        if t is not None and t.text in CMP_OPS:
            children = [left]
            self.take(children, "Op")
            children.append(self.parse_unary())
            return self._wrap("BinaryExpr", children)
        return left

    def _looks_like_cast(self) -> bool:
        t = self.peek()
        if t is None or t.text != "(":
            return False
        j = 1
        cur = self.peek(j)
        if cur is None or cur.rk != "NAME" or cur.text in KEYWORDS:
            return False
        j += 1
        while True:
            cur = self.peek(j)
            if cur is None:
                return False
            if cur.text == ".":
                nxt = self.peek(j + 1)
                if nxt is None or nxt.rk != "NAME":
                    return False
                j += 2
                continue
            break
        if cur.text != ")":
            return False
        after = self.peek(j + 1)
        return after is not None and (
            after.rk in {"NAME", "NUMBER", "STRING"} or after.text == "("
        )

    def parse_unary(self) -> SyntaxNode:
        if self._looks_like_cast():
            children: list[SyntaxNode] = []
            self.expect(children, "(")
            children.append(self.parse_type())
            self.expect(children, ")")
            children.append(self.parse_unary())
            return self._wrap("Cast", children)
        return self.parse_primary()

    def parse_primary(self) -> SyntaxNode:
        t = self.peek()
        if t is None:
            raise ParseError("expected expression")
        if t.rk == "NUMBER":
            kind = "LongLiteral" if t.text.endswith("L") else "IntLiteral"
            holder: list[SyntaxNode] = []
            return self.take(holder, kind)
        if t.rk == "STRING":
            holder = []
            return self.take(holder, "StringLiteral")
        if t.rk != "NAME" or t.text in KEYWORDS:
            raise ParseError(f"unexpected token {t.text!r}")
        return self.parse_chain()

    def parse_chain(self) -> SyntaxNode:
        children: list[SyntaxNode] = []
        first = self.take(children, "Identifier")
        if self.at("("):
            call = self._finish_call(first)
            children[-1] = call
        while self.at("."):
            self.take(children, "Punct")
            self._skip_comments_into(children)
            name = self.take(children, "Identifier")
            if self.at("("):
                children[-1] = self._finish_call(name)
        if len(children) == 1:
            return children[0]
        return self._wrap("Chain", children)

    def _finish_call(self, name_leaf: SyntaxNode) -> SyntaxNode:
        children: list[SyntaxNode] = [name_leaf]
        self.expect(children, "(")
        if not self.at(")"):
            children.append(self.parse_expr())
            while self.at(","):
                self.take(children, "Punct")
                children.append(self.parse_expr())
        self.expect(children, ")")
        return self._wrap("Call", children, name=name_leaf.text)


def parse_minij(text: str, source_path: str = "<memory>") -> SyntaxTree:
    root = _Parser(text).parse_unit()
    return SyntaxTree(root, text, source_path)
