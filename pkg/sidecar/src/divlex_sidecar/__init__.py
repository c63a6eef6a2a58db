"""HTTP sidecar providing passage embeddings and charge predictions.

The service exposes three endpoints consumed by the core retrieval engine
over plain JSON-over-HTTP:

* ``POST /embed`` — batch text embedding, L2-normalized vectors.
* ``POST /predict_charges`` — scored charge list for one text, descending.
* ``GET /health`` — readiness plus advertised dimensions.

Two encoder modes exist: a transformer encoder (requires the optional
``sentence-transformers`` dependency and a model download) and a
dependency-light fallback (feature-hashing embedder plus keyword charge
scorer) that satisfies the identical contract with no downloads.
"""

from divlex_sidecar.app import create_app

__all__ = ["create_app"]
