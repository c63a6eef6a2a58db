"""FastAPI application factory and entry point for the sidecar service.

Configuration is taken from environment variables:

* ``SIDECAR_VOCAB`` — path to the shared ``vocab.jsonl`` (required).
* ``SIDECAR_MODE`` — ``fallback`` (default, no downloads) or ``transformer``.
* ``SIDECAR_MODEL`` — transformer model name (transformer mode only).
* ``PORT`` — listen port for the ``divlex-sidecar`` console script.
"""

from __future__ import annotations

import os

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from divlex_sidecar.encoders import (
    HashingEncoder,
    KeywordChargeScorer,
    TransformerEncoder,
    load_vocab,
)


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    dim: int
    vectors: list[list[float]]


class ChargeScore(BaseModel):
    id: int
    prob: float = Field(ge=0.0, le=1.0)


class ChargePredictRequest(BaseModel):
    text: str


class ChargePredictResponse(BaseModel):
    charges: list[ChargeScore]


def create_app(
    vocab_path: str | None = None,
    mode: str | None = None,
    model_name: str | None = None,
    defer_load: bool = False,
) -> FastAPI:
    """Build the service. With ``defer_load=True`` the app starts in the
    "loading" state (health and both POST endpoints answer 503) until
    ``app.state.load()`` is called; used to exercise the not-ready paths."""
    vocab_path = vocab_path or os.environ.get("SIDECAR_VOCAB")
    mode = (mode or os.environ.get("SIDECAR_MODE", "fallback")).lower()
    model_name = model_name or os.environ.get("SIDECAR_MODEL")
    if not vocab_path:
        raise ValueError("vocab path required (SIDECAR_VOCAB)")
    if mode not in ("fallback", "transformer"):
        raise ValueError(f"unknown mode {mode!r}; expected fallback or transformer")

    app = FastAPI(title="divlex-sidecar")
    state = app.state
    state.encoder = None
    state.scorer = None
    state.vocab_error = None

    def load() -> None:
        try:
            charges = load_vocab(vocab_path)
            if len(charges) != len({cid for cid, _ in charges}):
                raise ValueError("duplicate charge ids in vocabulary")
            state.scorer = KeywordChargeScorer(charges)
        except Exception as exc:  # surfaced as health status 500
            state.vocab_error = str(exc)
            return
        if mode == "transformer":
            kwargs = {"model_name": model_name} if model_name else {}
            state.encoder = TransformerEncoder(**kwargs)
        else:
            state.encoder = HashingEncoder()

    state.load = load
    if not defer_load:
        load()

    @app.get("/health")
    def health():
        if state.vocab_error is not None:
            return JSONResponse(
                status_code=500,
                content={"status": "vocab-error", "detail": state.vocab_error},
            )
        if state.encoder is None or state.scorer is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {
            "status": "ready",
            "dim": state.encoder.dim,
            "vocab_size": state.scorer.vocab_size,
        }

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if state.encoder is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        if not req.texts:
            return JSONResponse(status_code=400, content={"detail": "texts must be non-empty"})
        vectors = state.encoder.encode(req.texts)
        return EmbedResponse(dim=state.encoder.dim, vectors=vectors)

    @app.post("/predict_charges")
    def predict_charges(req: ChargePredictRequest):
        if state.scorer is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        if not req.text:
            return JSONResponse(status_code=400, content={"detail": "text must be non-empty"})
        scored = state.scorer.predict(req.text)
        return ChargePredictResponse(
            charges=[ChargeScore(id=cid, prob=prob) for cid, prob in scored]
        )

    return app


def main() -> None:
    import uvicorn

    port = int(os.environ.get("PORT", "8750"))
    uvicorn.run(create_app(), host="127.0.0.1", port=port)


if __name__ == "__main__":
    main()
