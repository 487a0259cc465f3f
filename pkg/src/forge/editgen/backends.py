"""Pluggable model backends and candidate-edit plumbing.

The rule backend (rules.py) is the deterministic, hermetic stand-in for
the model; the replay backend serves recorded responses from a
content-hash-keyed fixture store; the remote backend posts the wire
format to a configured endpoint.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from ..diffs import is_valid_diff, parse_diff
from ..errors import BackendError
from .context import ModelContext

STATE_GENERATED = "generated"
STATE_APPLIED = "applied"
STATE_VALIDATED = "validated"
STATE_FAILED = "failed"
STATE_SELECTED = "selected"

ENV_MODEL_URL = "FORGE_MODEL_URL"
ENV_MODEL_TOKEN = "FORGE_MODEL_TOKEN"


@dataclass
class CandidateEdit:
    group_id: str
    variant_id: str
    backend_id: str
    diff: str
    attempt: int = 0
    state: str = STATE_GENERATED
    raw_output: str = ""
    failure_reason: str = ""

    @property
    def candidate_id(self) -> str:
        return f"{self.group_id}:{self.variant_id}:{self.attempt}"


def context_request(context: ModelContext) -> dict:
    """The remote wire format (also the replay hash key)."""
    return {
        "instruction": context.global_instruction,
        "files": [{"path": p, "content": c} for p, c in context.files],
        "auxiliary": [{"path": p, "content": c} for p, c in context.auxiliary],
        "temperature": context.temperature,
    }


def context_hash(context: ModelContext) -> str:
    payload = json.dumps(context_request(context), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def extract_diff(raw: str) -> str | None:
    """Pull a unified diff out of free-form model output: the last fenced
    ```diff block wins, otherwise the longest substring that parses."""
    fences = []
    pos = 0
    while True:
        start = raw.find("```diff", pos)
        if start == -1:
            break
        body_start = raw.find("\n", start)
        if body_start == -1:
            break
        end = raw.find("```", body_start)
        if end == -1:
            break
        fences.append(raw[body_start + 1 : end])
        pos = end + 3
    for candidate in reversed(fences):
        if is_valid_diff(candidate):
            return candidate
    if is_valid_diff(raw):
        # trim any prose before the first file header
        idx = raw.find("--- ")
        return raw[idx:] if idx > 0 else raw
    return None


class RuleBackendBase:
    id = "rule"
    kind = "rule"
    max_parallelism = 0  # pure function: any parallelism is safe

    def generate(self, context: ModelContext) -> list[str]:  # pragma: no cover
        raise NotImplementedError

    def complete_text(self, prompt: str) -> str:  # pragma: no cover
        raise NotImplementedError


class ReplayBackend:
    """Serves recorded response documents keyed by the 16-hex context hash."""

    id = "replay"
    kind = "replay"
    max_parallelism = 0

    def __init__(self, store_dir: str | Path):
        self.store_dir = Path(store_dir)

    def _load(self, key: str) -> dict:
        path = self.store_dir / key
        if not path.is_file():
            raise BackendError("no-fixture")
        return json.loads(path.read_text(encoding="utf-8"))

    def generate(self, context: ModelContext) -> list[str]:
        doc = self._load(context_hash(context))
        return list(doc.get("diffs", []))

    def complete_text(self, prompt: str) -> str:
        key = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
        doc = self._load(key)
        if "text" not in doc:
            raise BackendError("fixture has no text response")
        return doc["text"]

    def record(self, context: ModelContext, diffs: list[str]) -> str:
        """Test helper: write a response document for this context."""
        key = context_hash(context)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        (self.store_dir / key).write_text(
            json.dumps({"diffs": diffs}), encoding="utf-8"
        )
        return key

    def record_text(self, prompt: str, text: str) -> str:
        key = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
        self.store_dir.mkdir(parents=True, exist_ok=True)
        (self.store_dir / key).write_text(json.dumps({"text": text}), encoding="utf-8")
        return key


class RemoteBackend:
    """POSTs the wire format to FORGE_MODEL_URL; excluded from hermetic runs."""

    id = "remote"
    kind = "remote"
    max_parallelism = 4
    max_retries = 3

    def __init__(self, url: str | None = None, token: str | None = None,
                 transport=None, backoff_base: float = 0.2):
        self.url = url or os.environ.get(ENV_MODEL_URL)
        self.token = token or os.environ.get(ENV_MODEL_TOKEN)
        self.transport = transport or self._http_post
        self.backoff_base = backoff_base
        if not self.url:
            raise BackendError(f"remote backend needs {ENV_MODEL_URL}")

    def _http_post(self, payload: bytes) -> bytes:  # pragma: no cover - network
        req = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        with urllib.request.urlopen(req, timeout=60) as resp:
            return resp.read()

    def generate(self, context: ModelContext) -> list[str]:
        payload = json.dumps(context_request(context)).encode("utf-8")
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                body = self.transport(payload)
                doc = json.loads(body.decode("utf-8"))
                return list(doc.get("diffs", []))
            except Exception as e:  # transport or decode failure
                last_error = e
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff_base * (2**attempt))
        raise BackendError(f"remote backend failed after {self.max_retries} tries: {last_error}")

    def complete_text(self, prompt: str) -> str:
        context = ModelContext(group_id="<prompt>", files=[], global_instruction=prompt)
        diffs = self.generate(context)
        return diffs[0] if diffs else ""


def invoke_backend(backend, context: ModelContext) -> list[CandidateEdit]:
    """Run one generation call and normalize outputs into candidates.

    Backend failures become failed candidates with the reason preserved;
    raw outputs that contain no parseable diff are kept for diagnostics."""
    try:
        outputs = backend.generate(context)
    except BackendError as e:
        return [
            CandidateEdit(
                group_id=context.group_id,
                variant_id=context.variant_id,
                backend_id=backend.id,
                diff="",
                state=STATE_FAILED,
                failure_reason=str(e),
            )
        ]
    candidates = []
    for raw in outputs:
        diff = extract_diff(raw)
        if diff is None and raw.strip() == "":
            diff = ""  # an explicit empty diff means "no change needed"
        if diff is None:
            candidates.append(
                CandidateEdit(
                    group_id=context.group_id,
                    variant_id=context.variant_id,
                    backend_id=backend.id,
                    diff="",
                    state=STATE_FAILED,
                    raw_output=raw,
                    failure_reason="no-diff",
                )
            )
        else:
            candidates.append(
                CandidateEdit(
                    group_id=context.group_id,
                    variant_id=context.variant_id,
                    backend_id=backend.id,
                    diff=diff,
                    state=STATE_GENERATED,
                    raw_output=raw if raw != diff else "",
                )
            )
    return candidates


def make_backend(name: str, recipe=None, snapshot=None, store_dir=None):
    """Construct a backend by CLI name."""
    if name == "rule":
        from .rules import RuleBackend

        return RuleBackend(recipe=recipe, snapshot=snapshot)
    if name == "replay":
        if store_dir is None:
            raise BackendError("replay backend needs a fixture store directory")
        return ReplayBackend(store_dir)
    if name == "remote":
        return RemoteBackend()
    raise BackendError(f"unknown backend: {name}")
