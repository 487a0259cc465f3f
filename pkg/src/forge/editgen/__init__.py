from .backends import (
    CandidateEdit,
    RemoteBackend,
    ReplayBackend,
    context_hash,
    context_request,
    extract_diff,
    invoke_backend,
    make_backend,
)
from .context import (
    ANNOTATION_MARKER,
    ModelContext,
    PromptVariant,
    annotate,
    assemble_context,
    generate_prompt_combinations,
    strip_annotations,
)
from .rules import RuleBackend

__all__ = [
    "ANNOTATION_MARKER",
    "CandidateEdit",
    "ModelContext",
    "PromptVariant",
    "RemoteBackend",
    "ReplayBackend",
    "RuleBackend",
    "annotate",
    "assemble_context",
    "context_hash",
    "context_request",
    "extract_diff",
    "generate_prompt_combinations",
    "invoke_backend",
    "make_backend",
    "strip_annotations",
]
