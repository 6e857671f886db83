"""HTTP service: assessment plus per-student revision history.

The service loads exactly one (pyramid, space, rubric) bundle at startup and
keeps an append-only revision log so students can track drafts. Assessment
calls are pure; only the log is stateful, and appends are serialized per
student key.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .assessment import AssessmentConfig, assess_essay, checklist_to_document, make_checklist
from .corpus import Essay, Rubric, rubric_hash
from .embedding import EmbeddingSpace
from .pyramid import Pyramid

_logger = logging.getLogger(__name__)

DEFAULT_MAX_TEXT_CHARS = 20_000


class RevisionStore:
    """Append-only JSONL log of submissions with an in-memory index.

    Records are immutable once written; draft_index counts up from 0 per
    student. A torn final line (interrupted write) is tolerated on load,
    anything else corrupt is an error.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._index: dict[str, list[dict]] = {}
        self._write_lock = threading.Lock()
        self._student_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        lines = self._path.read_text(encoding="utf-8").splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = record["student_key"]
                draft_index = record["draft_index"]
            except (json.JSONDecodeError, KeyError, TypeError):
                if number == len(lines):
                    _logger.warning("%s: dropping torn final line", self._path)
                    break
                raise ValueError(f"{self._path}: corrupted revision record on line {number}")
            history = self._index.setdefault(key, [])
            if draft_index != len(history):
                raise ValueError(f"{self._path}: student {key!r} has draft_index "
                                 f"{draft_index} where {len(history)} was expected")
            history.append(record)

    def _lock_for(self, student_key: str) -> threading.Lock:
        with self._locks_guard:
            if student_key not in self._student_locks:
                self._student_locks[student_key] = threading.Lock()
            return self._student_locks[student_key]

    def append(self, student_key: str, text: str, checklist: dict) -> dict:
        """Assign the next draft_index and persist the record atomically."""
        with self._lock_for(student_key):
            history = self._index.setdefault(student_key, [])
            record = {
                "student_key": student_key,
                "draft_index": len(history),
                "submitted_at": datetime.now(timezone.utc).isoformat(),
                "text": text,
                "checklist": checklist,
            }
            if self._path is not None:
                line = json.dumps(record, ensure_ascii=False) + "\n"
                with self._write_lock, open(self._path, "a", encoding="utf-8") as handle:
                    handle.write(line)
                    handle.flush()
            history.append(record)
            return record

    def history(self, student_key: str) -> list[dict]:
        return list(self._index.get(student_key, []))


@dataclass
class ServiceBundle:
    """Everything the service needs: model, space, rubric, config, store."""

    pyramid: Pyramid
    space: EmbeddingSpace
    rubric: Rubric
    config: AssessmentConfig = field(default_factory=AssessmentConfig)
    store: RevisionStore = field(default_factory=RevisionStore)
    max_text_chars: int = DEFAULT_MAX_TEXT_CHARS

    def __post_init__(self) -> None:
        if self.pyramid.rubric_hash != rubric_hash(self.rubric):
            raise ValueError("pyramid was labeled with a different rubric")
        if not self.pyramid.is_rubric_ready(len(self.rubric)):
            raise ValueError("pyramid is not rubric-ready")
        if self.pyramid.embedding_space_id != self.space.id:
            raise ValueError("pyramid was built over a different embedding space")
        if self.max_text_chars < 1:
            raise ValueError("max_text_chars must be positive")


class AssessRequest(BaseModel):
    student_key: str = Field(min_length=1, max_length=200)
    text: str = Field(min_length=1)


def create_app(bundle: ServiceBundle) -> FastAPI:
    from . import __version__

    app = FastAPI(title="essaycheck", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError) -> JSONResponse:
        # field diagnostics with a 400, not the framework default 422
        return JSONResponse(status_code=400,
                            content={"detail": jsonable_encoder(exc.errors())})

    @app.post("/assess")
    def assess(request: AssessRequest) -> dict:
        if len(request.text) > bundle.max_text_chars:
            raise HTTPException(status_code=413,
                                detail=f"text has {len(request.text)} characters; "
                                       f"limit is {bundle.max_text_chars}")
        try:
            essay = Essay(id=request.student_key, text=request.text, role="student")
            assessment = assess_essay(essay, bundle.pyramid, bundle.space, bundle.config)
            checklist = make_checklist(assessment, bundle.rubric)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return bundle.store.append(request.student_key, request.text,
                                   checklist_to_document(checklist))

    @app.get("/revisions/{student_key}")
    def revisions(student_key: str) -> dict:
        return {"student_key": student_key,
                "revisions": bundle.store.history(student_key)}

    @app.get("/rubric")
    def rubric() -> dict:
        return {"main_ideas": [{"id": idea.id, "text": idea.text,
                                "confidence": idea.confidence}
                               for idea in bundle.rubric.main_ideas]}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok",
                "version": __version__,
                "pyramid_id": bundle.pyramid.id,
                "space_id": bundle.space.id,
                "config": {"topk": bundle.config.topk, "t": bundle.config.t}}

    return app
