from .minij import parse_minij
from .schemacfg import camel_accessors, parse_config, parse_schema
from .snapshot import (
    DEFAULT_TEST_PATTERN,
    RepoSnapshot,
    SourceFile,
    code_search,
    load_snapshot,
    owners_of,
    parse_file,
)
from .tree import SyntaxNode, SyntaxTree
from .xref import (
    ReferenceSet,
    RefRecord,
    SymbolRef,
    XrefGraph,
    build_xref,
    expand_seed,
    extract_symbols,
)

__all__ = [
    "DEFAULT_TEST_PATTERN",
    "RepoSnapshot",
    "SourceFile",
    "SyntaxNode",
    "SyntaxTree",
    "SymbolRef",
    "RefRecord",
    "ReferenceSet",
    "XrefGraph",
    "build_xref",
    "camel_accessors",
    "code_search",
    "expand_seed",
    "extract_symbols",
    "load_snapshot",
    "owners_of",
    "parse_config",
    "parse_file",
    "parse_minij",
    "parse_schema",
]
