"""Model context assembly and prompt-variant generation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..errors import ForgeError
from ..discovery import TAG_TO_MIGRATE, TaggedLocation
from ..recipes import STRATEGIES, Recipe

ANNOTATION_MARKER = "// MIGRATE:"
HOLISTIC_SUFFIX = (
    "Apply the change everywhere in each file it is needed, not only on the "
    "annotated line."
)


@dataclass(frozen=True)
class PromptVariant:
    id: str
    strategy: str
    instruction_text: str
    temperature: float


@dataclass
class ModelContext:
    group_id: str
    files: list[tuple[str, str]]  # (path, content with inline annotations)
    global_instruction: str
    auxiliary: list[tuple[str, str]] = field(default_factory=list)
    variant_id: str = "v1"
    temperature: float = 0.0
    phase: int = 0  # two-phase recipes advance this

    def content_map(self) -> dict[str, str]:
        return {path: strip_annotations(content) for path, content in self.files}


def annotate(content: str, annotations: dict[int, str]) -> str:
    """Insert ``// MIGRATE:`` comment lines directly above annotated lines
    (1-based), matching their indentation."""
    if not annotations:
        return content
    lines = content.splitlines(keepends=True)
    out: list[str] = []
    for n, line in enumerate(lines, start=1):
        if n in annotations:
            indent = line[: len(line) - len(line.lstrip())].rstrip("\n")
            out.append(f"{indent}{ANNOTATION_MARKER} {annotations[n]}\n")
        out.append(line)
    return "".join(out)


def strip_annotations(content: str) -> str:
    """Inverse of annotate(): drop marker comment lines, byte-exact."""
    return "".join(
        line
        for line in content.splitlines(keepends=True)
        if not line.lstrip().startswith(ANNOTATION_MARKER)
    )


def generate_prompt_combinations(recipe: Recipe, k: int | None = None) -> list[PromptVariant]:
    """Instruction-major cross product of instructions x strategies x
    temperatures, capped at k, ids v1..vk."""
    cap = k if k is not None else recipe.k
    temps = sorted(recipe.temperatures)
    combos = itertools.product(recipe.instructions, STRATEGIES, temps)
    variants = []
    for n, (instruction, strategy, temp) in enumerate(itertools.islice(combos, cap), start=1):
        variants.append(
            PromptVariant(
                id=f"v{n}",
                strategy=strategy,
                instruction_text=instruction,
                temperature=temp,
            )
        )
    return variants


def assemble_context(
    group_files: list[tuple[str, str]],
    tagged: list[TaggedLocation],
    recipe: Recipe,
    variant: PromptVariant,
    auxiliary: list[tuple[str, str]] | None = None,
    group_id: str | None = None,
    phase: int = 0,
) -> ModelContext:
    """Render one group into a model context per the variant's strategy."""
    by_file: dict[str, dict[int, str]] = {}
    for t in tagged:
        if t.tag != TAG_TO_MIGRATE:
            continue
        text = t.annotation or f"change needed here ({t.reason})"
        by_file.setdefault(t.file, {})[t.line] = text

    total = sum(len(v) for v in by_file.values())
    if total == 0 and variant.strategy != "no-locations-holistic":
        raise ForgeError(
            f"strategy {variant.strategy} needs at least one to-migrate line in the group"
        )

    instruction = variant.instruction_text
    rendered: list[tuple[str, str]] = []
    for path, content in group_files:
        annotations = by_file.get(path, {})
        if variant.strategy == "no-locations-holistic":
            annotations = {}
        elif variant.strategy == "single-location-holistic" and annotations:
            first = min(annotations)
            annotations = {first: annotations[first]}
        rendered.append((path, annotate(content, annotations)))
    if variant.strategy == "single-location-holistic":
        instruction = instruction + "\n" + HOLISTIC_SUFFIX

    return ModelContext(
        group_id=group_id or (group_files[0][0] if group_files else "<empty>"),
        files=rendered,
        global_instruction=instruction,
        auxiliary=list(auxiliary or []),
        variant_id=variant.id,
        temperature=variant.temperature,
        phase=phase,
    )
