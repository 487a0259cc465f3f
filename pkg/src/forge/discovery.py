"""Location discovery: reduce the expansion superset to tagged locations.

Filters run in recipe order; the first terminal decision (to-migrate or
irrelevant) wins. Locations that no filter decides stay ambiguous and are
carried forward as reviewer notes rather than dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus.snapshot import RepoSnapshot
from .corpus.tree import SyntaxNode, SyntaxTree
from .corpus.xref import ReferenceSet
from .errors import BackendError, ForgeError

INT32_MAX = 2**31 - 1
INT32_MIN = -(2**31)

TAG_TO_MIGRATE = "to-migrate"
TAG_IRRELEVANT = "irrelevant"
TAG_AMBIGUOUS = "ambiguous"

FILTER_KINDS = {"pattern", "literal-width", "definition-irrelevance", "model-classifier"}

_KIND_PARAMS = {
    "pattern": {"regex", "tag", "kinds", "mode"},
    "literal-width": {"threshold"},
    "definition-irrelevance": set(),
    "model-classifier": set(),
}


@dataclass(frozen=True)
class FilterSpec:
    id: str
    kind: str
    params: dict = field(default_factory=dict, hash=False)

    def validate(self) -> None:
        if self.kind not in FILTER_KINDS:
            raise ForgeError(f"filter {self.id!r}: unknown kind {self.kind!r}")
        allowed = _KIND_PARAMS[self.kind]
        for key in self.params:
            if key not in allowed:
                raise ForgeError(
                    f"filter {self.id!r}: parameter {key!r} not valid for kind {self.kind!r}"
                )
        if self.kind == "pattern" and "regex" not in self.params and (
            self.params.get("mode") != "narrowing-cast"
        ):
            raise ForgeError(f"filter {self.id!r}: pattern filter needs regex= or mode=narrowing-cast")


@dataclass(frozen=True)
class TaggedLocation:
    file: str
    line: int
    tag: str
    reason: str
    annotation: str | None = None


@dataclass
class DiscoveryContext:
    """Everything filters may consult besides the location itself."""

    snapshot: RepoSnapshot
    seed_getters: dict[str, str] = field(default_factory=dict)  # accessor -> id name
    seed_setters: dict[str, str] = field(default_factory=dict)
    annotation_template: str | None = None
    backend: object | None = None
    few_shot: list[tuple[str, str]] = field(default_factory=list)

    def render_annotation(self, id_name: str | None) -> str | None:
        if self.annotation_template is None:
            return None
        return self.annotation_template.replace("{id}", id_name or "id")


def _line_nodes(tree: SyntaxTree, line: int) -> list[SyntaxNode]:
    return tree.nodes_on_line(line)


def _call_name(node: SyntaxNode) -> str | None:
    if node.kind == "Call" and node.children and node.children[0].is_leaf:
        return node.children[0].text
    return None


def _contains_getter_call(node: SyntaxNode, getters: dict[str, str]) -> str | None:
    for sub in node.walk():
        name = _call_name(sub)
        if name in getters:
            return name
    return None


def cast_filter(
    file, line: int, tree: SyntaxTree, ctx: DiscoveryContext
) -> tuple[str, str | None] | None:
    """to-migrate when a narrowing cast wraps a seed accessor call."""
    if file.kind != "implementation":
        return None
    lo, hi = tree.line_span(line)
    for node in tree.root.find("Cast"):
        if node.start >= hi or node.end <= lo:
            continue
        type_node = node.child_of_kind("Type")
        if type_node is None or tree.node_text(type_node) != "int":
            continue
        getter = _contains_getter_call(node, ctx.seed_getters)
        if getter is not None:
            return TAG_TO_MIGRATE, ctx.seed_getters[getter]
    return None


def literal_width_filter(
    file, line: int, tree: SyntaxTree, ctx: DiscoveryContext, threshold: int
) -> tuple[str, str | None] | None:
    """to-migrate when a literal passed to a seed setter still fits 32 bits
    (the test should exercise values beyond the threshold)."""
    if file.kind != "test":
        return None
    lo, hi = tree.line_span(line)
    for node in tree.root.find("Call"):
        if node.start >= hi or node.end <= lo:
            continue
        name = _call_name(node)
        if name not in ctx.seed_setters:
            continue
        for arg in node.children[1:]:
            if arg.kind in {"IntLiteral", "LongLiteral"}:
                value = int((arg.text or "0").rstrip("L"))
                if INT32_MIN <= value <= INT32_MAX:
                    return TAG_TO_MIGRATE, ctx.seed_setters[name]
    return None


def definition_irrelevance_filter(
    file, line: int, tree: SyntaxTree
) -> tuple[str, str | None] | None:
    """Method definition sites in test files are not change locations."""
    if file.kind != "test":
        return None
    lo, hi = tree.line_span(line)
    for node in tree.root.find("MethodDecl"):
        for child in node.children:
            if child.is_leaf and child.kind == "Identifier" and lo <= child.start < hi:
                return TAG_IRRELEVANT, None
    return None


def pattern_filter(
    file, line: int, tree: SyntaxTree, spec: FilterSpec, ctx: DiscoveryContext
) -> tuple[str, str | None] | None:
    if spec.params.get("mode") == "narrowing-cast":
        return cast_filter(file, line, tree, ctx)
    kinds = spec.params.get("kinds")
    if kinds and file.kind not in kinds.split(","):
        return None
    import re

    lo, hi = tree.line_span(line)
    text = tree.text[lo:hi]
    if re.search(spec.params["regex"], text):
        return spec.params.get("tag", TAG_TO_MIGRATE), None
    return None


CLASSIFIER_PROMPT = """Decide whether the following file still needs to be migrated.
Answer with MIGRATE or SKIP on the first line, then a short reason.

Examples:
{examples}
File:
{content}
Answer:"""


def build_classifier_prompt(content: str, few_shot: list[tuple[str, str]]) -> str:
    examples = "\n".join(
        f"---\n{excerpt}\n=> {verdict.upper()}" for excerpt, verdict in few_shot
    )
    return CLASSIFIER_PROMPT.format(examples=examples, content=content)


def needs_migration_classifier(file, few_shot, backend) -> tuple[bool, str]:
    """Ask the backend whether a file needs migration; the reply must put
    MIGRATE or SKIP alone on its first line."""
    if not few_shot:
        raise ForgeError("needs-migration check requires few-shot examples")
    if backend is None:
        raise ForgeError("needs-migration check requires a backend")
    prompt = build_classifier_prompt(file.content, few_shot)
    reply = backend.complete_text(prompt)
    first = (reply or "").strip().splitlines()[0].strip() if reply else ""
    if first == "MIGRATE":
        return True, reply
    if first == "SKIP":
        return False, reply
    raise BackendError(f"unparseable classifier reply: {first[:40]!r}")


def run_filter_pipeline(
    locations: ReferenceSet | list[tuple[str, int]],
    filters: list[FilterSpec],
    snapshot: RepoSnapshot,
    ctx: DiscoveryContext | None = None,
) -> list[TaggedLocation]:
    """Tag every input location exactly once; the pipeline never aborts."""
    if not filters:
        raise ForgeError("filter pipeline needs at least one filter")
    ctx = ctx or DiscoveryContext(snapshot=snapshot)
    if isinstance(locations, ReferenceSet):
        pairs = locations.locations()
    else:
        pairs = sorted(set(locations))

    classifier_cache: dict[str, tuple[bool, str] | BackendError] = {}
    tagged: list[TaggedLocation] = []
    for path, line in pairs:
        file = snapshot.get(path)
        if file is None:
            tagged.append(TaggedLocation(path, line, TAG_AMBIGUOUS, "unknown-file"))
            continue
        tree = snapshot.tree(path)
        decision: TaggedLocation | None = None
        pending_error = False
        for spec in filters:
            result: tuple[str, str | None] | None = None
            if spec.kind == "pattern":
                result = pattern_filter(file, line, tree, spec, ctx)
            elif spec.kind == "literal-width":
                threshold = int(spec.params.get("threshold", 10000000000))
                result = literal_width_filter(file, line, tree, ctx, threshold)
            elif spec.kind == "definition-irrelevance":
                result = definition_irrelevance_filter(file, line, tree)
            elif spec.kind == "model-classifier":
                if path not in classifier_cache:
                    try:
                        classifier_cache[path] = needs_migration_classifier(
                            file, ctx.few_shot, ctx.backend
                        )
                    except (BackendError, ForgeError) as e:
                        classifier_cache[path] = BackendError(str(e))
                cached = classifier_cache[path]
                if isinstance(cached, BackendError):
                    pending_error = True
                elif cached[0] is False:
                    result = (TAG_IRRELEVANT, None)
            if result is not None:
                tag, id_name = result
                annotation = (
                    ctx.render_annotation(id_name) if tag == TAG_TO_MIGRATE else None
                )
                decision = TaggedLocation(path, line, tag, spec.id, annotation)
                break
        if decision is None:
            reason = "backend-error" if pending_error else "unfiltered"
            decision = TaggedLocation(path, line, TAG_AMBIGUOUS, reason)
        tagged.append(decision)
    tagged.sort(key=lambda t: (t.file, t.line))
    return tagged


def to_migrate_files(tagged: list[TaggedLocation]) -> list[str]:
    return sorted({t.file for t in tagged if t.tag == TAG_TO_MIGRATE})


def format_tagged_tsv(tagged: list[TaggedLocation]) -> str:
    lines = [f"{t.file}\t{t.line}\t{t.tag}\t{t.reason}" for t in tagged]
    return "".join(line + "\n" for line in lines)
