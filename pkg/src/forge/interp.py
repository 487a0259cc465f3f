"""Mini test runner: interprets test methods over the expression subset.

Message and flag accessors (``getFooBar``/``setFooBar``) are builtins over
instance fields; ``assertEquals(a, b)`` decides pass/fail. A narrowing
``(int)`` cast truncates to signed 32 bits, which is exactly the overflow
behavior the widening migration exists to remove.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus.minij import parse_minij
from .corpus.schemacfg import camel_accessors
from .corpus.tree import SyntaxNode, SyntaxTree
from .errors import ForgeError

INT32_MOD = 2**32
INT32_HALF = 2**31

MAX_STEPS = 100_000
MAX_DEPTH = 64


class AssertionFailure(Exception):
    pass


class InterpError(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


@dataclass
class Instance:
    type_name: str  # qualified class or message name ('' when unknown)
    fields: dict = field(default_factory=dict)


@dataclass
class ClassRef:
    qualified: str


@dataclass
class TestResult:
    file: str
    test: str
    passed: bool
    detail: str = ""


def _unquote(text: str) -> str:
    body = text[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _truncate32(value: int) -> int:
    return (value + INT32_HALF) % INT32_MOD - INT32_HALF


class Program:
    """Snapshot-wide class/message/flag environment with content overlays."""

    def __init__(self, snapshot, overlay: dict[str, str] | None = None):
        self.snapshot = snapshot
        self.overlay = overlay or {}
        self.classes: dict[str, tuple[SyntaxTree, SyntaxNode]] = {}
        self.messages: set[str] = set()
        self.accessor_fields: dict[str, str] = {}  # accessor -> snake field name
        self._load()

    def _content(self, f) -> str:
        return self.overlay.get(f.path, f.content)

    def _load(self):
        from .corpus.schemacfg import parse_config, parse_schema

        for f in self.snapshot.files:
            content = self._content(f)
            if f.language == "minij":
                tree = parse_minij(content, f.path)
                pkg = tree.root.child_of_kind("PackageDecl")
                package = pkg.name if pkg is not None else ""
                for cls in tree.root.find("ClassDecl"):
                    qualified = f"{package}.{cls.name}" if package else cls.name
                    self.classes[qualified] = (tree, cls)
            elif f.language == "schema":
                tree = parse_schema(content, f.path)
                pkg = tree.root.child_of_kind("PackageDecl")
                package = pkg.name if pkg is not None else ""
                for msg in tree.root.find("MessageDecl"):
                    qualified = f"{package}.{msg.name}" if package else msg.name
                    self.messages.add(qualified)
                    for fld in msg.find("SchemaFieldDecl"):
                        getter, setter = camel_accessors(fld.name)
                        self.accessor_fields[getter] = fld.name
                        self.accessor_fields[setter] = fld.name
            elif f.language == "config":
                tree = parse_config(content, f.path)
                for flg in tree.root.find("FlagDecl"):
                    getter, setter = camel_accessors(flg.name)
                    self.accessor_fields[getter] = flg.name
                    self.accessor_fields[setter] = flg.name

    def resolve_type(self, name: str, imports: dict[str, str], package: str) -> str | None:
        if "." in name:
            qualified = name
        elif name in imports:
            qualified = imports[name]
        elif package and f"{package}.{name}" in self.classes:
            qualified = f"{package}.{name}"
        elif package and f"{package}.{name}" in self.messages:
            qualified = f"{package}.{name}"
        else:
            candidates = [q for q in (set(self.classes) | self.messages)
                          if q.rsplit(".", 1)[-1] == name]
            qualified = candidates[0] if len(candidates) == 1 else name
        if qualified in self.classes or qualified in self.messages:
            return qualified
        return None


class Interpreter:
    def __init__(self, program: Program):
        self.program = program
        self.steps = 0

    # -- context helpers -------------------------------------------------

    def _file_ctx(self, tree: SyntaxTree) -> tuple[dict[str, str], str]:
        imports = {}
        for imp in tree.root.find("ImportDecl"):
            if imp.name:
                imports[imp.name.rsplit(".", 1)[-1]] = imp.name
        pkg = tree.root.child_of_kind("PackageDecl")
        return imports, (pkg.name if pkg is not None else "")

    def _tick(self):
        self.steps += 1
        if self.steps > MAX_STEPS:
            raise InterpError("step budget exhausted (possible infinite loop)")

    def _default_value(self, type_text: str, imports, package):
        base = type_text.split("<", 1)[0]
        if base in {"int", "long"}:
            return 0
        if base == "string":
            return ""
        qualified = self.program.resolve_type(base, imports, package)
        if qualified is not None:
            return Instance(type_name=qualified)
        return Instance(type_name="")

    # -- execution --------------------------------------------------------

    def run_method(self, qualified_class: str, method: SyntaxNode, self_obj: Instance,
                   args: list, depth: int = 0):
        if depth > MAX_DEPTH:
            raise InterpError("call depth exceeded")
        tree, _cls = self.program.classes[qualified_class]
        imports, package = self._file_ctx(tree)
        scope: dict[str, object] = {}
        params = [p for pl in method.children if pl.kind == "ParamList"
                  for p in pl.children if p.kind == "Param"]
        if len(params) != len(args):
            raise InterpError(
                f"{qualified_class}.{method.name}: expected {len(params)} args, got {len(args)}"
            )
        for p, a in zip(params, args):
            scope[p.name] = a
        block = method.child_of_kind("Block")
        if block is None:
            return None
        try:
            self.exec_block(block, tree, imports, package, qualified_class, self_obj, scope, depth)
        except _Return as r:
            return r.value
        return None

    def exec_block(self, block, tree, imports, package, qcls, self_obj, scope, depth):
        for stmt in block.children:
            if stmt.is_leaf:
                continue
            self.exec_stmt(stmt, tree, imports, package, qcls, self_obj, scope, depth)

    def exec_stmt(self, stmt, tree, imports, package, qcls, self_obj, scope, depth):
        self._tick()
        kind = stmt.kind
        ev = lambda node: self.eval(node, tree, imports, package, qcls, self_obj, scope, depth)
        if kind == "LocalDecl":
            type_node = stmt.child_of_kind("Type")
            init = None
            seen_eq = False
            for c in stmt.children:
                if c.is_leaf and c.kind == "Punct" and c.text == "=":
                    seen_eq = True
                    continue
                if seen_eq and not (c.is_leaf and c.kind == "Punct"):
                    init = c
                    break
            if init is not None:
                scope[stmt.name] = ev(init)
            else:
                type_text = tree.node_text(type_node) if type_node is not None else "int"
                scope[stmt.name] = self._default_value(type_text, imports, package)
        elif kind == "AssignStmt":
            parts = [c for c in stmt.children if not (c.is_leaf and c.kind == "Punct")]
            if len(parts) != 2:
                raise InterpError("malformed assignment")
            target, value_node = parts
            value = ev(value_node)
            self.assign(target, value, tree, imports, package, qcls, self_obj, scope, depth)
        elif kind == "ExprStmt":
            for c in stmt.children:
                if not (c.is_leaf and c.kind == "Punct"):
                    ev(c)
        elif kind == "IfStmt":
            cond = None
            blocks = []
            else_if = None
            for c in stmt.children:
                if c.kind == "Block":
                    blocks.append(c)
                elif c.kind == "IfStmt":
                    else_if = c
                elif not c.is_leaf:
                    cond = c
                elif c.kind in {"IntLiteral", "LongLiteral", "Identifier", "StringLiteral"}:
                    cond = c
            value = ev(cond) if cond is not None else False
            truthy = bool(value) if not isinstance(value, int) else value != 0
            if truthy and blocks:
                self.exec_block(blocks[0], tree, imports, package, qcls, self_obj, scope, depth)
            elif not truthy:
                if len(blocks) > 1:
                    self.exec_block(blocks[1], tree, imports, package, qcls, self_obj, scope, depth)
                elif else_if is not None:
                    self.exec_stmt(else_if, tree, imports, package, qcls, self_obj, scope, depth)
        elif kind == "ReturnStmt":
            expr = next(
                (c for c in stmt.children if not (c.is_leaf and c.kind in {"Keyword", "Punct"})),
                None,
            )
            raise _Return(ev(expr) if expr is not None else None)
        elif kind == "ErrorNode":
            raise InterpError("cannot execute code with parse errors")
        # comments and stray leaves are no-ops

    def assign(self, target, value, tree, imports, package, qcls, self_obj, scope, depth):
        if target.is_leaf and target.kind == "Identifier":
            name = target.text
            if name in scope:
                scope[name] = value
            elif self_obj is not None and name in self._field_names(qcls):
                self_obj.fields[name] = value
            else:
                scope[name] = value
            return
        if target.kind == "Chain":
            elements = [c for c in target.children if not (c.is_leaf and c.kind == "Punct")]
            if len(elements) < 2 or not all(e.is_leaf for e in elements):
                raise InterpError("unsupported assignment target")
            obj = self.eval(elements[0], tree, imports, package, qcls, self_obj, scope, depth)
            for mid in elements[1:-1]:
                obj = self._get_field(obj, mid.text)
            if not isinstance(obj, Instance):
                raise InterpError("assignment target is not an object")
            obj.fields[elements[-1].text] = value
            return
        raise InterpError(f"unsupported assignment target: {target.kind}")

    def _field_names(self, qualified_class: str) -> set[str]:
        entry = self.program.classes.get(qualified_class)
        if entry is None:
            return set()
        _tree, cls = entry
        return {m.name for m in cls.children if m.kind == "FieldDecl" and m.name}

    def _get_field(self, obj, name: str):
        if not isinstance(obj, Instance):
            raise InterpError(f"cannot read field {name!r} of non-object")
        return obj.fields.get(name, 0)

    def eval(self, node, tree, imports, package, qcls, self_obj, scope, depth):
        self._tick()
        if node.is_leaf:
            if node.kind == "IntLiteral" or node.kind == "LongLiteral":
                return int((node.text or "0").rstrip("L"))
            if node.kind == "StringLiteral":
                return _unquote(node.text or '""')
            if node.kind == "Identifier":
                return self._lookup(node.text, tree, imports, package, qcls, self_obj, scope)
            raise InterpError(f"cannot evaluate leaf {node.kind}")
        if node.kind == "Cast":
            type_node = node.child_of_kind("Type")
            value = self.eval(node.children[-1], tree, imports, package, qcls, self_obj, scope, depth)
            if type_node is not None and tree.node_text(type_node) == "int" and isinstance(value, int):
                return _truncate32(value)
            return value
        if node.kind == "BinaryExpr":
            parts = [c for c in node.children if not (c.is_leaf and c.kind == "Op")]
            op = next(c.text for c in node.children if c.is_leaf and c.kind == "Op")
            a = self.eval(parts[0], tree, imports, package, qcls, self_obj, scope, depth)
            b = self.eval(parts[1], tree, imports, package, qcls, self_obj, scope, depth)
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if not isinstance(a, int) or not isinstance(b, int):
                raise InterpError(f"ordering comparison needs numbers, got {a!r} {op} {b!r}")
            return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]
        if node.kind == "Call":
            name = node.children[0].text
            args = [
                self.eval(c, tree, imports, package, qcls, self_obj, scope, depth)
                for c in node.children[1:]
                if not (c.is_leaf and c.kind == "Punct")
            ]
            return self._call_on(self_obj, qcls, name, args, tree, imports, package, depth,
                                 bare=True)
        if node.kind == "Chain":
            elements = [c for c in node.children if not (c.is_leaf and c.kind == "Punct")]
            current = None
            current_cls = None
            for idx, el in enumerate(elements):
                if idx == 0:
                    if el.is_leaf and el.kind == "Identifier":
                        current = self._lookup(
                            el.text, tree, imports, package, qcls, self_obj, scope
                        )
                    elif el.kind == "Call":
                        current = self.eval(el, tree, imports, package, qcls, self_obj, scope, depth)
                    else:
                        raise InterpError(f"bad chain head {el.kind}")
                    continue
                if el.is_leaf and el.kind == "Identifier":
                    current = self._get_field(self._materialize(current), el.text)
                elif el.kind == "Call":
                    name = el.children[0].text
                    args = [
                        self.eval(c, tree, imports, package, qcls, self_obj, scope, depth)
                        for c in el.children[1:]
                        if not (c.is_leaf and c.kind == "Punct")
                    ]
                    receiver = self._materialize(current)
                    current = self._call_on(receiver, None, name, args, tree, imports, package, depth)
                else:
                    raise InterpError(f"bad chain element {el.kind}")
            return current

        raise InterpError(f"cannot evaluate {node.kind}")

    def _materialize(self, value):
        """Instantiate when a chain dereferences a class name (static-style call)."""
        if isinstance(value, ClassRef):
            return Instance(type_name=value.qualified)
        return value

    def _lookup(self, name, tree, imports, package, qcls, self_obj, scope):
        if name in scope:
            return scope[name]
        if self_obj is not None and name in self_obj.fields:
            return self_obj.fields[name]
        if self_obj is not None and name in self._field_names(qcls):
            # uninitialized field: default by declared type
            entry = self.program.classes.get(qcls)
            tree_c, cls = entry
            for m in cls.children:
                if m.kind == "FieldDecl" and m.name == name:
                    type_node = m.child_of_kind("Type")
                    value = self._default_value(
                        tree_c.node_text(type_node) if type_node is not None else "int",
                        *self._file_ctx(tree_c),
                    )
                    self_obj.fields[name] = value
                    return value
        qualified = self.program.resolve_type(name, imports, package)
        if qualified is not None:
            return ClassRef(qualified)
        if name in {"true", "false"}:
            return name == "true"
        raise InterpError(f"unknown name {name!r}")

    def _find_method(self, qualified_class: str, name: str) -> SyntaxNode | None:
        entry = self.program.classes.get(qualified_class)
        if entry is None:
            return None
        _tree, cls = entry
        for m in cls.children:
            if m.kind == "MethodDecl" and m.name == name:
                return m
        return None

    def _call_on(self, receiver, caller_cls, name, args, tree, imports, package, depth,
                 bare=False):
        if bare:
            if name == "assertEquals":
                if len(args) != 2:
                    raise InterpError("assertEquals takes two arguments")
                a, b = args
                if a != b:
                    raise AssertionFailure(f"assertEquals failed: {a!r} != {b!r}")
                return None
            # unqualified call resolves against the enclosing class
            if caller_cls is not None:
                method = self._find_method(caller_cls, name)
                if method is not None:
                    return self.run_method(caller_cls, method, receiver, args, depth + 1)
            raise InterpError(f"unknown function {name!r}")
        if isinstance(receiver, Instance):
            if receiver.type_name:
                method = self._find_method(receiver.type_name, name)
                if method is not None:
                    return self.run_method(receiver.type_name, method, receiver, args, depth + 1)
            if name in self.program.accessor_fields:
                fname = self.program.accessor_fields[name]
                if name.startswith("set"):
                    receiver.fields[fname] = args[0] if args else 0
                    return None
                return receiver.fields.get(fname, 0)
            if name == "assertEquals":  # Assert.assertEquals style
                return self._call_on(None, None, name, args, tree, imports, package, depth, bare=True)
            raise InterpError(f"unknown method {name!r} on {receiver.type_name or 'object'}")
        raise InterpError(f"cannot call {name!r} on {receiver!r}")


TEST_NAME_RE = re.compile(r"test\w*")


def discover_tests(tree: SyntaxTree) -> list[tuple[SyntaxNode, SyntaxNode]]:
    """(class, method) pairs: methods annotated @Test or named test*."""
    found = []
    for cls in tree.root.find("ClassDecl"):
        for member in cls.children:
            if member.kind != "MethodDecl":
                continue
            annotated = any(
                a.kind == "Annotation" and a.name == "Test" for a in member.children
            )
            named = TEST_NAME_RE.fullmatch(member.name or "") is not None
            if annotated or named:
                found.append((cls, member))
    return found


def run_tests(snapshot, test_paths: list[str], overlay: dict[str, str] | None = None) -> list[TestResult]:
    """Interpret every test method in the given files; overlay supplies
    modified content for candidate validation."""
    program = Program(snapshot, overlay)
    results: list[TestResult] = []
    for path in test_paths:
        f = snapshot.get(path)
        if f is None or f.language != "minij":
            continue
        content = (overlay or {}).get(path, f.content)
        tree = parse_minij(content, path)
        pkg = tree.root.child_of_kind("PackageDecl")
        package = pkg.name if pkg is not None else ""
        for cls, method in discover_tests(tree):
            qcls = f"{package}.{cls.name}" if package else cls.name
            interp = Interpreter(program)
            self_obj = Instance(type_name=qcls)
            try:
                interp.run_method(qcls, method, self_obj, [])
                results.append(TestResult(path, method.name or "?", True))
            except AssertionFailure as e:
                results.append(TestResult(path, method.name or "?", False, str(e)))
            except (InterpError, ForgeError) as e:
                results.append(TestResult(path, method.name or "?", False, f"error: {e}"))
    return results
