"""FastAPI application wrapping one inference backend.

All model calls serialize through a lock (one model instance, a queue of
requests); endpoints answer 503 until the backend finishes loading and 400
on any schema or offset violation.
"""

from __future__ import annotations

import threading
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .backends import Backend
from .schemas import (
    EmbedRequest,
    EmbedResponse,
    ReadRequest,
    ReadResponse,
    VerbalizeRequest,
    VerbalizeResponse,
)


def create_app(backend_factory: Callable[[], Backend], eager: bool = True) -> FastAPI:
    """Build the service; `eager=False` defers model loading so the caller
    controls when /health flips from 503 to ready (used by tests and by
    the serve entry point, which loads in a background thread)."""
    app = FastAPI(title="model-server", version=__version__)
    app.state.backend = None
    app.state.load_error = None
    app.state.inference_lock = threading.Lock()

    def load() -> None:
        try:
            app.state.backend = backend_factory()
        except Exception as exc:  # surfaced via /health
            app.state.load_error = f"{type(exc).__name__}: {exc}"
            raise

    app.state.load = load
    if eager:
        load()

    @app.exception_handler(RequestValidationError)
    async def bad_schema(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    def _ready() -> JSONResponse | None:
        if app.state.backend is None:
            detail = app.state.load_error or "models loading"
            return JSONResponse(status_code=503, content={"error": detail})
        return None

    @app.get("/health")
    def health():
        not_ready = _ready()
        if not_ready:
            return not_ready
        info = app.state.backend.info()
        info["version"] = __version__
        return info

    @app.post("/read", response_model=ReadResponse)
    def read(request: ReadRequest):
        not_ready = _ready()
        if not_ready:
            return not_ready
        n = len(request.passage)
        for c in request.candidates:
            if not (0 <= c.start < c.end <= n):
                return JSONResponse(
                    status_code=400,
                    content={"error": f"span ({c.start}, {c.end}) outside passage of length {n}"},
                )
        with app.state.inference_lock:
            scores = app.state.backend.read_scores(
                request.question,
                request.passage,
                [(c.start, c.end) for c in request.candidates],
            )
        return ReadResponse(scores=scores)

    @app.post("/verbalize", response_model=VerbalizeResponse)
    def verbalize(request: VerbalizeRequest):
        not_ready = _ready()
        if not_ready:
            return not_ready
        with app.state.inference_lock:
            sentences = app.state.backend.verbalize(request.units)
        return VerbalizeResponse(sentences=sentences)

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest):
        not_ready = _ready()
        if not_ready:
            return not_ready
        with app.state.inference_lock:
            vectors = app.state.backend.embed(request.texts)
        return EmbedResponse(vectors=vectors)

    return app
