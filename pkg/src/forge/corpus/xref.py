"""Symbol extraction and the cross-reference graph.

Name resolution is deliberately syntactic: an identifier resolves iff it
matches an imported name, a name declared in the same file, or a derived
schema/flag accessor name. Everything else is silently dropped; the
expansion result is a best-effort superset that discovery filters refine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import CorpusError
from .schemacfg import camel_accessors
from .snapshot import RepoSnapshot
from .tree import SyntaxNode, SyntaxTree

ROLE_DEFINITION = "definition"
ROLE_REFERENCE = "reference"
ROLE_CALL = "call"


@dataclass(frozen=True, order=True)
class SymbolRef:
    file: str
    line: int
    col: int
    symbol: str
    role: str


@dataclass(frozen=True)
class RefRecord:
    """One reference site plus the declarations that enclose it."""

    site: SymbolRef
    enclosing: tuple[str, ...]  # nearest method/field symbol and owning class


@dataclass
class ReferenceSet:
    """Seed-expansion result: reached symbols with levels, plus the
    definition/reference locations materialized for discovery."""

    levels: dict[str, int]
    entries: list[tuple[SymbolRef, int]]

    def symbols_at_or_below(self, depth: int) -> set[str]:
        return {s for s, lv in self.levels.items() if lv <= depth}

    def locations(self) -> list[tuple[str, int]]:
        """Distinct (file, line) pairs in deterministic order."""
        seen = sorted({(r.file, r.line) for r, _ in self.entries})
        return seen


class XrefGraph:
    def __init__(self):
        self.nodes: set[str] = set()
        self.defs: dict[str, list[SymbolRef]] = {}
        self.refs: dict[str, list[RefRecord]] = {}

    # -- construction ----------------------------------------------------

    def add_def(self, ref: SymbolRef):
        self.nodes.add(ref.symbol)
        self.defs.setdefault(ref.symbol, []).append(ref)

    def add_ref(self, record: RefRecord):
        self.nodes.add(record.site.symbol)
        for enc in record.enclosing:
            self.nodes.add(enc)
        self.refs.setdefault(record.site.symbol, []).append(record)

    # -- views -------------------------------------------------------------

    @property
    def edges(self) -> set[tuple[str, str]]:
        out = set()
        for symbol, records in self.refs.items():
            for rec in records:
                for enc in rec.enclosing:
                    if enc != symbol:
                        out.add((enc, symbol))
        return out

    def file_index(self) -> dict[str, list[SymbolRef]]:
        index: dict[str, list[SymbolRef]] = {}
        for symbol, defs in self.defs.items():
            index.setdefault(symbol, []).extend(defs)
        for symbol, records in self.refs.items():
            index.setdefault(symbol, []).extend(r.site for r in records)
        for refs in index.values():
            refs.sort()
        return index

    def def_files(self, symbol: str) -> list[str]:
        return sorted({d.file for d in self.defs.get(symbol, [])})

    def file_projection(self) -> set[tuple[str, str]]:
        """Directed file edges: referencing file -> defining file."""
        edges = set()
        for symbol, records in self.refs.items():
            for rec in records:
                for def_file in self.def_files(symbol):
                    if def_file != rec.site.file:
                        edges.add((rec.site.file, def_file))
        return edges

    def file_neighbors_undirected(self, files: set[str]) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {f: set() for f in files}
        for a, b in self.file_projection():
            if a in files and b in files:
                adj[a].add(b)
                adj[b].add(a)
        return adj

    def dump(self) -> str:
        """One edge per line, ``FROM<TAB>TO``, sorted; bit-exact for goldens."""
        lines = [f"{a}\t{b}" for a, b in sorted(self.edges)]
        return "".join(line + "\n" for line in lines)


# -- extraction --------------------------------------------------------------


def _decl_name_leaf(node: SyntaxNode) -> SyntaxNode | None:
    for child in node.children:
        if child.is_leaf and child.kind == "Identifier":
            return child
    return None


@dataclass
class _FileSymbols:
    package: str
    defs: list[tuple[str, SymbolRef]] = field(default_factory=list)
    local_names: dict[str, str] = field(default_factory=dict)  # short -> qualified


def _qualify(package: str, *parts: str) -> str:
    return ".".join(p for p in (package, *parts) if p)


def _collect_minij_defs(tree: SyntaxTree, path: str) -> _FileSymbols:
    pkg_node = tree.root.child_of_kind("PackageDecl")
    package = pkg_node.name if pkg_node is not None else ""
    out = _FileSymbols(package=package)

    def add(symbol: str, leaf: SyntaxNode, short: str):
        line, col = tree.line_col(leaf.start)
        out.defs.append((symbol, SymbolRef(path, line, col, symbol, ROLE_DEFINITION)))
        out.local_names[short] = symbol

    for cls in tree.root.find("ClassDecl"):
        cname_leaf = _decl_name_leaf(cls)
        if cname_leaf is None:
            continue
        csym = _qualify(package, cls.name)
        add(csym, cname_leaf, cls.name)
        for member in cls.children:
            if member.kind in {"MethodDecl", "FieldDecl"} and member.name:
                leaf = _decl_name_leaf(member)
                if leaf is not None:
                    add(_qualify(package, cls.name, member.name), leaf, member.name)
    return out


def _collect_schema_defs(tree: SyntaxTree, path: str) -> tuple[_FileSymbols, dict[str, str]]:
    pkg_node = tree.root.child_of_kind("PackageDecl")
    package = pkg_node.name if pkg_node is not None else ""
    out = _FileSymbols(package=package)
    accessors: dict[str, str] = {}
    for msg in tree.root.find("MessageDecl"):
        leaf = _decl_name_leaf(msg)
        if leaf is None:
            continue
        msym = _qualify(package, msg.name)
        line, col = tree.line_col(leaf.start)
        out.defs.append((msym, SymbolRef(path, line, col, msym, ROLE_DEFINITION)))
        out.local_names[msg.name] = msym
        for fld in msg.find("SchemaFieldDecl"):
            fleaf = _decl_name_leaf(fld)
            if fleaf is None:
                continue
            fsym = f"{msym}.{fld.name}"
            fline, fcol = tree.line_col(fleaf.start)
            out.defs.append((fsym, SymbolRef(path, fline, fcol, fsym, ROLE_DEFINITION)))
            getter, setter = camel_accessors(fld.name)
            for acc in (getter, setter):
                out.defs.append(
                    (acc, SymbolRef(path, fline, fcol, acc, ROLE_DEFINITION))
                )
                accessors[acc] = acc
    return out, accessors


def _collect_config_defs(tree: SyntaxTree, path: str) -> tuple[_FileSymbols, dict[str, str]]:
    out = _FileSymbols(package="")
    accessors: dict[str, str] = {}
    for flg in tree.root.find("FlagDecl"):
        leaf = _decl_name_leaf(flg)
        if leaf is None:
            continue
        line, col = tree.line_col(leaf.start)
        out.defs.append((flg.name, SymbolRef(path, line, col, flg.name, ROLE_DEFINITION)))
        getter, setter = camel_accessors(flg.name)
        for acc in (getter, setter):
            out.defs.append((acc, SymbolRef(path, line, col, acc, ROLE_DEFINITION)))
            accessors[acc] = acc
    return out, accessors


def _minij_references(
    tree: SyntaxTree,
    path: str,
    local: _FileSymbols,
    accessors: dict[str, str],
    known: set[str] | None = None,
) -> list[RefRecord]:
    imports: dict[str, str] = {}
    for imp in tree.root.find("ImportDecl"):
        if imp.name:
            imports[imp.name.rsplit(".", 1)[-1]] = imp.name

    package = local.package
    known = known or set()
    records: list[RefRecord] = []

    decl_name_ids = set()
    for node in tree.root.walk():
        if node.kind in {"ClassDecl", "MethodDecl", "FieldDecl", "Param", "LocalDecl"}:
            leaf = _decl_name_leaf(node)
            if leaf is not None:
                decl_name_ids.add(id(leaf))

    def resolve(name: str) -> str | None:
        if name in imports:
            return imports[name]
        if name in local.local_names:
            return local.local_names[name]
        if name in accessors:
            return accessors[name]
        return None

    def record(leaf: SyntaxNode, target: str, role: str, method_sym, class_sym):
        line, col = tree.line_col(leaf.start)
        enclosing = tuple(s for s in (method_sym, class_sym) if s and s != target)
        records.append(RefRecord(SymbolRef(path, line, col, target, role), enclosing))

    def chain_element_name(el: SyntaxNode) -> tuple[SyntaxNode, str, str] | None:
        if el.is_leaf and el.kind == "Identifier":
            return el, el.text, ROLE_REFERENCE
        if el.kind == "Call" and el.children and el.children[0].is_leaf:
            return el.children[0], el.children[0].text, ROLE_CALL
        return None

    def visit(node: SyntaxNode, method_sym: str | None, class_sym: str | None):
        if node.kind in {"ImportDecl", "PackageDecl"}:
            return  # handled below; their name segments are not uses
        if node.kind == "ClassDecl" and node.name:
            class_sym = _qualify(package, node.name)
            method_sym = None
        elif node.kind in {"MethodDecl", "FieldDecl"} and node.name and class_sym:
            method_sym = f"{class_sym}.{node.name}"
        if node.is_leaf:
            if node.kind in {"Identifier", "TypeName"} and id(node) not in decl_name_ids:
                target = resolve(node.text)
                if target is not None:
                    record(node, target, ROLE_REFERENCE, method_sym, class_sym)
            return
        if node.kind == "Chain":
            # member after a resolved head may resolve statically: the
            # qualified name ClassName.member must be defined somewhere
            elements = [c for c in node.children if not (c.is_leaf and c.kind == "Punct")]
            prev_target: str | None = None
            for idx, el in enumerate(elements):
                named = chain_element_name(el)
                if named is None:
                    prev_target = None
                    if not el.is_leaf:
                        visit(el, method_sym, class_sym)
                    continue
                leaf, name, role = named
                target = None
                if idx > 0 and prev_target and f"{prev_target}.{name}" in known:
                    target = f"{prev_target}.{name}"
                elif id(leaf) not in decl_name_ids:
                    target = resolve(name)
                if target is not None:
                    record(leaf, target, role, method_sym, class_sym)
                prev_target = target
                if el.kind == "Call":
                    for arg in el.children[1:]:
                        visit(arg, method_sym, class_sym)
            return
        if node.kind == "Call" and node.children and node.children[0].is_leaf:
            head = node.children[0]
            if id(head) not in decl_name_ids:
                target = resolve(head.text)
                if target is not None:
                    record(head, target, ROLE_CALL, method_sym, class_sym)
            for child in node.children[1:]:
                visit(child, method_sym, class_sym)
            return
        for child in node.children:
            visit(child, method_sym, class_sym)

    visit(tree.root, None, None)
    # import statements reference the imported symbol at their position
    for imp in tree.root.find("ImportDecl"):
        if not imp.name:
            continue
        leaf = next((c for c in imp.children if c.kind == "Identifier"), None)
        if leaf is not None:
            line, col = tree.line_col(leaf.start)
            records.append(
                RefRecord(SymbolRef(path, line, col, imp.name, ROLE_REFERENCE), ())
            )
    return records


def extract_symbols(
    tree: SyntaxTree,
    file,
    accessors: dict[str, str] | None = None,
    known: set[str] | None = None,
) -> list[SymbolRef]:
    """Definitions and resolved references of one file, sorted by
    (file, line, col). Unresolvable identifiers are silently ignored."""
    accessors = accessors or {}
    path = file.path
    refs: list[SymbolRef] = []
    if file.language == "minij":
        local = _collect_minij_defs(tree, path)
        refs.extend(ref for _, ref in local.defs)
        refs.extend(
            r.site for r in _minij_references(tree, path, local, accessors, known)
        )
    elif file.language == "schema":
        local, _ = _collect_schema_defs(tree, path)
        refs.extend(ref for _, ref in local.defs)
    elif file.language == "config":
        local, _ = _collect_config_defs(tree, path)
        refs.extend(ref for _, ref in local.defs)
    else:
        raise CorpusError(f"no symbol extractor for language {file.language!r}")
    refs.sort(key=lambda r: (r.file, r.line, r.col, r.symbol, r.role))
    return refs


def collect_accessors(snapshot: RepoSnapshot) -> dict[str, str]:
    """All derived accessor names (schema fields and flags) in the corpus."""
    accessors: dict[str, str] = {}
    for f in snapshot.files:
        tree = snapshot.tree(f.path)
        if f.language == "schema":
            _, acc = _collect_schema_defs(tree, f.path)
            accessors.update(acc)
        elif f.language == "config":
            _, acc = _collect_config_defs(tree, f.path)
            accessors.update(acc)
    return accessors


def build_xref(snapshot: RepoSnapshot) -> XrefGraph:
    """Two-pass graph build: global definitions and accessor names first,
    then references resolved against them."""
    graph = XrefGraph()
    accessors: dict[str, str] = {}
    per_file: dict[str, _FileSymbols] = {}

    for f in snapshot.files:
        tree = snapshot.tree(f.path)
        if f.language == "minij":
            local = _collect_minij_defs(tree, f.path)
        elif f.language == "schema":
            local, acc = _collect_schema_defs(tree, f.path)
            accessors.update(acc)
        elif f.language == "config":
            local, acc = _collect_config_defs(tree, f.path)
            accessors.update(acc)
        else:  # pragma: no cover - loader only admits known languages
            continue
        per_file[f.path] = local
        for _, ref in local.defs:
            graph.add_def(ref)

    known = set(graph.nodes)
    for f in snapshot.files:
        if f.language != "minij":
            continue
        tree = snapshot.tree(f.path)
        for record in _minij_references(tree, f.path, per_file[f.path], accessors, known):
            graph.add_ref(record)
    return graph


def expand_seed(graph: XrefGraph, seeds: list[str], depth: int) -> ReferenceSet:
    """Breadth-first closure over reverse reference edges.

    Level 0 holds the seed definitions; level k holds references to any
    symbol reached at level k-1, with the enclosing declarations of those
    reference sites joining the reached set at level k.
    """
    if depth < 1:
        raise CorpusError("expansion depth must be >= 1")
    if not seeds:
        raise CorpusError("no seed symbols given")
    for seed in seeds:
        if seed not in graph.nodes:
            raise CorpusError(f"unknown seed symbol: {seed}")

    levels: dict[str, int] = {}
    frontier = []
    for seed in seeds:
        levels[seed] = 0
        frontier.append(seed)

    level = 0
    while frontier and level < depth:
        level += 1
        nxt = []
        for symbol in frontier:
            for rec in graph.refs.get(symbol, ()):
                for enc in rec.enclosing:
                    if enc not in levels:
                        levels[enc] = level
                        nxt.append(enc)
        frontier = nxt

    entry_map: dict[tuple, int] = {}
    for symbol, lv in levels.items():
        for d in graph.defs.get(symbol, ()):
            key = (d.file, d.line, d.col, d.symbol, d.role)
            entry_map[key] = min(entry_map.get(key, lv), lv)
        if lv + 1 <= depth:
            for rec in graph.refs.get(symbol, ()):
                s = rec.site
                key = (s.file, s.line, s.col, s.symbol, s.role)
                entry_map[key] = min(entry_map.get(key, lv + 1), lv + 1)

    entries = [
        (SymbolRef(f, ln, c, sym, role), lv)
        for (f, ln, c, sym, role), lv in sorted(entry_map.items())
    ]
    return ReferenceSet(levels=levels, entries=entries)
