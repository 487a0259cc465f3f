"""Declarative migration recipes.

A recipe is a line-oriented key-value document (grammar normative in
docs/recipe-format.md). It binds seeds, filters, prompt texts, mapping
tables, validators, ranking, and the knobs the edit generator needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .discovery import FilterSpec
from .errors import RecipeError

SEED_KINDS = {"symbols", "schema-field", "flag", "search"}
STRATEGIES = ("all-locations", "single-location-holistic", "no-locations-holistic")

DEFAULT_DEPTH = 3
DEFAULT_K = 6
DEFAULT_BUDGET = 500_000
DEFAULT_TEMPERATURES = (0.2, 0.8)


@dataclass
class SeedSpec:
    kind: str  # symbols | schema-field | flag | search
    symbols: list[str] = field(default_factory=list)
    flag_name: str | None = None
    flag_getter: str | None = None
    flag_value: str | None = None
    search_pattern: str | None = None


@dataclass
class ValidatorSpec:
    id: str
    blocking: bool = False
    params: dict = field(default_factory=dict)


@dataclass
class Recipe:
    id: str
    seed: SeedSpec
    depth: int = DEFAULT_DEPTH
    k: int = DEFAULT_K
    budget: int = DEFAULT_BUDGET
    temperatures: list[float] = field(default_factory=lambda: list(DEFAULT_TEMPERATURES))
    test_pattern: str | None = None
    instructions: list[str] = field(default_factory=list)
    annotation: str | None = None
    filters: list[FilterSpec] = field(default_factory=list)
    few_shot: list[tuple[str, str]] = field(default_factory=list)  # (excerpt, verdict)
    mapping: list[tuple[str, str]] = field(default_factory=list)
    auxiliary: list[str] = field(default_factory=list)
    validators: list[ValidatorSpec] = field(default_factory=list)
    ranking: str = "example-distance"
    example_diffs: list[str] = field(default_factory=list)
    forbidden: list[str] = field(default_factory=list)
    guard_allowed: list[str] = field(default_factory=list)

    @property
    def two_phase(self) -> bool:
        return self.seed.kind == "flag"


_KNOWN_DIRECTIVES = {
    "recipe", "seed", "depth", "k", "budget", "temperature", "test-pattern",
    "instruction", "annotation", "filter", "few-shot", "map", "auxiliary",
    "validator", "ranking", "example-diff", "forbidden", "guard-allowed",
}


def _parse_params(tokens: list[str], where: str) -> dict:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise RecipeError(f"{where}: expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        params[key] = value
    return params


def parse_recipe(text: str, source: str = "<memory>") -> Recipe:
    lines = text.splitlines()
    i = 0
    rid: str | None = None
    seed: SeedSpec | None = None
    fields: dict = {
        "depth": DEFAULT_DEPTH,
        "k": DEFAULT_K,
        "budget": DEFAULT_BUDGET,
        "temperatures": [],
        "test_pattern": None,
        "instructions": [],
        "annotation": None,
        "filters": [],
        "few_shot": [],
        "mapping": [],
        "auxiliary": [],
        "validators": [],
        "ranking": "example-distance",
        "example_diffs": [],
        "forbidden": [],
        "guard_allowed": [],
    }

    def read_block(start: int) -> tuple[str, int]:
        block: list[str] = []
        j = start
        while j < len(lines) and lines[j].startswith("  "):
            block.append(lines[j][2:])
            j += 1
        if not block:
            raise RecipeError(f"{source}:{start}: expected an indented block")
        return "\n".join(block), j

    while i < len(lines):
        raw = lines[i]
        line = raw.rstrip()
        i += 1
        if not line or line.lstrip().startswith("#"):
            continue
        if line.startswith(" "):
            raise RecipeError(f"{source}:{i}: unexpected indentation")
        tokens = line.split()
        key = tokens[0]
        if key not in _KNOWN_DIRECTIVES:
            raise RecipeError(f"{source}:{i}: unknown key {key!r}")
        if key == "recipe":
            if len(tokens) != 2:
                raise RecipeError(f"{source}:{i}: recipe takes exactly one id")
            rid = tokens[1]
        elif key == "seed":
            if len(tokens) < 2 or tokens[1] not in SEED_KINDS:
                raise RecipeError(
                    f"{source}:{i}: seed kind must be one of {sorted(SEED_KINDS)}"
                )
            kind = tokens[1]
            if seed is not None and seed.kind != kind:
                raise RecipeError(f"{source}:{i}: mixed seed kinds")
            if kind in {"symbols", "schema-field"}:
                if len(tokens) < 3:
                    raise RecipeError(f"{source}:{i}: seed {kind} needs symbols")
                seed = seed or SeedSpec(kind=kind)
                seed.symbols.extend(tokens[2:])
            elif kind == "search":
                if len(tokens) != 3:
                    raise RecipeError(f"{source}:{i}: seed search takes one pattern")
                seed = SeedSpec(kind=kind, search_pattern=tokens[2])
            else:  # flag
                if len(tokens) < 3:
                    raise RecipeError(f"{source}:{i}: seed flag needs a name")
                params = _parse_params(tokens[3:], f"{source}:{i}")
                if "value" not in params:
                    raise RecipeError(
                        f"{source}:{i}: flag seeds must supply value= (the flag constant)"
                    )
                seed = SeedSpec(
                    kind="flag",
                    flag_name=tokens[2],
                    flag_getter=params.get("getter"),
                    flag_value=params["value"],
                )
        elif key in {"depth", "k", "budget"}:
            fields[key] = int(tokens[1])
        elif key == "temperature":
            fields["temperatures"].append(float(tokens[1]))
        elif key == "test-pattern":
            fields["test_pattern"] = tokens[1]
        elif key == "instruction":
            if len(tokens) != 2 or tokens[1] != ">":
                raise RecipeError(f"{source}:{i}: instruction must be `instruction >`")
            block, i = read_block(i)
            fields["instructions"].append(block)
        elif key == "annotation":
            fields["annotation"] = line.split(None, 1)[1]
        elif key == "filter":
            if len(tokens) < 3:
                raise RecipeError(f"{source}:{i}: filter needs an id and a kind")
            spec = FilterSpec(
                id=tokens[1], kind=tokens[2],
                params=_parse_params(tokens[3:], f"{source}:{i}"),
            )
            try:
                spec.validate()
            except Exception as e:
                raise RecipeError(f"{source}:{i}: {e}") from e
            fields["filters"].append(spec)
        elif key == "few-shot":
            if len(tokens) != 3 or tokens[1] not in {"migrate", "skip"} or tokens[2] != ">":
                raise RecipeError(f"{source}:{i}: few-shot must be `few-shot migrate|skip >`")
            block, i = read_block(i)
            fields["few_shot"].append((block, tokens[1]))
        elif key == "map":
            rest = line.split(None, 1)[1]
            if " -> " not in rest:
                raise RecipeError(f"{source}:{i}: map needs `from -> to`")
            frm, to = rest.split(" -> ", 1)
            fields["mapping"].append((frm.strip(), to.strip()))
        elif key == "auxiliary":
            fields["auxiliary"].append(tokens[1])
        elif key == "validator":
            blocking = "blocking" in tokens[2:]
            params = _parse_params(
                [t for t in tokens[2:] if t != "blocking"], f"{source}:{i}"
            )
            fields["validators"].append(
                ValidatorSpec(id=tokens[1], blocking=blocking, params=params)
            )
        elif key == "ranking":
            if tokens[1] not in {"example-distance", "model-judge"}:
                raise RecipeError(f"{source}:{i}: unknown ranking {tokens[1]!r}")
            fields["ranking"] = tokens[1]
        elif key == "example-diff":
            fields["example_diffs"].append(tokens[1])
        elif key == "forbidden":
            fields["forbidden"].extend(tokens[1:])
        elif key == "guard-allowed":
            fields["guard_allowed"].extend(tokens[1:])

    if rid is None:
        raise RecipeError(f"{source}: missing `recipe <id>`")
    if seed is None:
        raise RecipeError(f"{source}: missing `seed` declaration")
    if not 1 <= len(fields["instructions"]) <= 2:
        raise RecipeError(
            f"{source}: instructions: at most 2 and at least 1 "
            f"(found {len(fields['instructions'])})"
        )
    if not fields["temperatures"]:
        fields["temperatures"] = list(DEFAULT_TEMPERATURES)
    return Recipe(id=rid, seed=seed, **fields)


def load_recipe(path: str | Path) -> Recipe:
    path = Path(path)
    if not path.is_file():
        raise RecipeError(f"recipe file not found: {path}")
    return parse_recipe(path.read_text(encoding="utf-8"), source=str(path))


def serialize_recipe(recipe: Recipe) -> str:
    """Canonical form: load(serialize(r)) == r."""
    out: list[str] = [f"recipe {recipe.id}"]
    s = recipe.seed
    if s.kind in {"symbols", "schema-field"}:
        for sym in s.symbols:
            out.append(f"seed {s.kind} {sym}")
    elif s.kind == "search":
        out.append(f"seed search {s.search_pattern}")
    else:
        getter = f" getter={s.flag_getter}" if s.flag_getter else ""
        out.append(f"seed flag {s.flag_name}{getter} value={s.flag_value}")
    out.append(f"depth {recipe.depth}")
    out.append(f"k {recipe.k}")
    out.append(f"budget {recipe.budget}")
    for t in recipe.temperatures:
        out.append(f"temperature {t}")
    if recipe.test_pattern:
        out.append(f"test-pattern {recipe.test_pattern}")
    for text in recipe.instructions:
        out.append("instruction >")
        out.extend("  " + line for line in text.split("\n"))
    if recipe.annotation:
        out.append(f"annotation {recipe.annotation}")
    for f in recipe.filters:
        params = "".join(f" {k}={v}" for k, v in f.params.items())
        out.append(f"filter {f.id} {f.kind}{params}")
    for excerpt, verdict in recipe.few_shot:
        out.append(f"few-shot {verdict} >")
        out.extend("  " + line for line in excerpt.split("\n"))
    for frm, to in recipe.mapping:
        out.append(f"map {frm} -> {to}")
    for aux in recipe.auxiliary:
        out.append(f"auxiliary {aux}")
    for v in recipe.validators:
        blocking = " blocking" if v.blocking else ""
        params = "".join(f" {k}={val}" for k, val in v.params.items())
        out.append(f"validator {v.id}{blocking}{params}")
    out.append(f"ranking {recipe.ranking}")
    for d in recipe.example_diffs:
        out.append(f"example-diff {d}")
    if recipe.forbidden:
        out.append("forbidden " + " ".join(recipe.forbidden))
    if recipe.guard_allowed:
        out.append("guard-allowed " + " ".join(recipe.guard_allowed))
    return "".join(line + "\n" for line in out)


def seed_symbols(recipe: Recipe) -> list[str]:
    """The symbols expansion starts from (search seeds expand separately)."""
    from .corpus.schemacfg import camel_accessors

    s = recipe.seed
    if s.kind == "symbols":
        return list(s.symbols)
    if s.kind == "schema-field":
        symbols = []
        for fq in s.symbols:
            symbols.append(fq)
            fname = fq.rsplit(".", 1)[-1]
            getter, setter = camel_accessors(fname)
            symbols.extend([getter, setter])
        return symbols
    if s.kind == "flag":
        return [s.flag_getter] if s.flag_getter else [s.flag_name]
    return []


def seed_accessor_maps(recipe: Recipe) -> tuple[dict[str, str], dict[str, str]]:
    """(getter -> id name, setter -> id name) for the recipe's seeds."""
    from .corpus.schemacfg import camel_accessors

    getters: dict[str, str] = {}
    setters: dict[str, str] = {}
    s = recipe.seed
    if s.kind == "schema-field":
        for fq in s.symbols:
            fname = fq.rsplit(".", 1)[-1]
            getter, setter = camel_accessors(fname)
            getters[getter] = fname
            setters[setter] = fname
    elif s.kind == "flag" and s.flag_name:
        getter, setter = camel_accessors(s.flag_name)
        getters[s.flag_getter or getter] = s.flag_name
        setters[setter] = s.flag_name
    return getters, setters


def validate_recipe(recipe: Recipe, snapshot) -> list[str]:
    """Diagnostics are data: the empty list means the recipe is runnable."""
    import re

    from .corpus.xref import build_xref
    from .diffs import parse_diff

    diagnostics: list[str] = []
    if recipe.seed.kind == "search":
        try:
            re.compile(recipe.seed.search_pattern or "")
        except re.error as e:
            diagnostics.append(f"seed search pattern does not compile: {e}")
    else:
        graph = build_xref(snapshot)
        for sym in seed_symbols(recipe):
            if sym not in graph.nodes:
                diagnostics.append(f"seed symbol not found in corpus: {sym}")
    for aux in recipe.auxiliary:
        if aux not in snapshot:
            diagnostics.append(f"auxiliary file not in corpus: {aux}")
    for path in recipe.example_diffs:
        p = Path(path)
        if not p.is_file():
            diagnostics.append(f"example diff not found: {path}")
        elif not parse_diff(p.read_text(encoding="utf-8")):
            diagnostics.append(f"example diff does not parse: {path}")
    return diagnostics
