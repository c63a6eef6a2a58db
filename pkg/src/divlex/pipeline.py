"""Experiment harness: binds a dataset to embedding/prediction providers,
extracts DLRM features, trains the ranker and its ablation variants, runs
the baselines, and evaluates everything with the diversity metrics."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import chargegraph, metrics, ranker, textsim
from .corpus import Dataset
from .errors import PredictorUnavailable, ProviderError

BASELINES = ("bm25", "mmr", "ia_select", "exia_select")
DLRM_METHODS = ("dlrm", "text_only", "charge_only", "random")
DEFAULT_MMR_LAMBDA = 0.05


class KeywordChargePredictor:
    """Dependency-free charge predictor: scores each charge by how often
    its name occurs in the text, normalized to probabilities. Always
    returns the full vocabulary so the >=5 contract holds."""

    def __init__(self, vocab):
        self._names = list(vocab.charges)

    def __call__(self, text: str) -> list[tuple[int, float]]:
        counts = [(cid, float(text.count(name))) for cid, name in self._names]
        total = sum(c for _, c in counts)
        if total > 0:
            scored = [(cid, c / total) for cid, c in counts]
        else:
            scored = [(cid, 1.0 / len(counts)) for cid, _ in counts]
        return sorted(scored, key=lambda t: (-t[1], t[0]))


class SidecarChargePredictor:
    """Charge predictor backed by the sidecar's /predict_charges endpoint."""

    def __init__(self, url: str, timeout: float = 30.0):
        import httpx

        self._client = httpx.Client(base_url=url.rstrip("/"), timeout=timeout)

    def __call__(self, text: str) -> list[tuple[int, float]]:
        try:
            resp = self._client.post("/predict_charges", json={"text": text})
        except Exception as exc:
            raise PredictorUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise PredictorUnavailable(f"/predict_charges returned {resp.status_code}")
        charges = resp.json()["charges"]
        return [(int(c["id"]), float(c["prob"])) for c in charges]


class ExperimentPipeline:
    """Caches per-query and per-document representations for one dataset
    and exposes feature extraction, training, ranking, and evaluation."""

    def __init__(
        self,
        dataset: Dataset,
        embedder=None,
        predictor=None,
        alpha: float = chargegraph.DEFAULT_ALPHA,
        walk_steps: int = chargegraph.DEFAULT_WALK_STEPS,
        boost: float = chargegraph.DEFAULT_BOOST,
        textsim_length: int = textsim.TEXTSIM_LENGTH,
    ):
        self.dataset = dataset
        self.embedder = embedder or textsim.HashingEmbedder()
        self.predictor = predictor or KeywordChargePredictor(dataset.vocab)
        self.walk_steps = walk_steps
        self.textsim_length = textsim_length
        s = dataset.vocab.size
        g = chargegraph.reversal_matrix(s, dataset.reversals)
        self.graph = chargegraph.build_graph(g, alpha)
        self._boost = boost

        self._query_text_vec: dict[str, np.ndarray] = {}
        self._doc_text_vec: dict[str, np.ndarray] = {}
        self._query_passage_vecs: dict[str, np.ndarray] = {}
        self._doc_passage_vecs: dict[str, np.ndarray] = {}
        self._cqo: dict[str, np.ndarray] = {}
        self._cq: dict[str, np.ndarray] = {}
        self._cd: dict[str, np.ndarray] = {}
        self._pair_features: dict[tuple[str, str], np.ndarray] = {}
        self._doc_tokens: dict[str, list[str]] = {}

    # -- representations ----------------------------------------------------

    def query_initial_dist(self, qid: str) -> np.ndarray:
        if qid not in self._cqo:
            q = self.dataset.queries[qid]
            scores = dict(self.predictor(q.text))
            self._cqo[qid] = chargegraph.init_query_dist(
                q.candidate_charge_set, scores, self.dataset.vocab.size, boost=self._boost
            )
        return self._cqo[qid]

    def query_walked_dist(self, qid: str) -> np.ndarray:
        if qid not in self._cq:
            self._cq[qid] = chargegraph.rwog(
                self.query_initial_dist(qid), self.graph, self.walk_steps
            )
        return self._cq[qid]

    def doc_walked_dist(self, did: str) -> np.ndarray:
        if did not in self._cd:
            doc = self.dataset.docs[did]
            self._cd[did] = chargegraph.rwog(
                chargegraph.init_doc_dist(doc.charges, self.dataset.vocab.size),
                self.graph,
                self.walk_steps,
            )
        return self._cd[did]

    def _text_vec(self, text: str, cache: dict, key: str) -> np.ndarray:
        if key not in cache:
            cache[key] = self.embedder.embed([text])[0]
        return cache[key]

    def query_vector(self, qid: str) -> np.ndarray:
        return self._text_vec(self.dataset.queries[qid].text, self._query_text_vec, qid)

    def doc_vector(self, did: str) -> np.ndarray:
        return self._text_vec(self.dataset.docs[did].text, self._doc_text_vec, did)

    def _passages(self, sentences, w, d, cache, key) -> np.ndarray:
        if key not in cache:
            passages = textsim.csw_slice(sentences, w, d)
            cache[key] = np.asarray(self.embedder.embed([p.text for p in passages]))
        return cache[key]

    def text_feature(self, qid: str, did: str) -> np.ndarray:
        qv = self._passages(
            self.dataset.queries[qid].sentences,
            textsim.QUERY_WINDOW, textsim.QUERY_STEP,
            self._query_passage_vecs, qid,
        )
        dv = self._passages(
            self.dataset.docs[did].sentences,
            textsim.DOC_WINDOW, textsim.DOC_STEP,
            self._doc_passage_vecs, did,
        )
        t_s = textsim.cosine_matrix(qv, dv).max(axis=1)
        return textsim.pad_fixed(t_s, self.textsim_length)

    def pair_features(self, qid: str, did: str) -> np.ndarray:
        """concat(T_sim, C_q (x) C_d): the MLP input for one pair."""
        key = (qid, did)
        if key not in self._pair_features:
            kron = chargegraph.kron_feature(
                self.query_walked_dist(qid), self.doc_walked_dist(did)
            )
            self._pair_features[key] = np.concatenate([self.text_feature(qid, did), kron])
        return self._pair_features[key]

    @property
    def feature_dim(self) -> int:
        return self.textsim_length + self.dataset.vocab.size ** 2

    # -- fast NDCG-IA@10 closure for training labels ------------------------

    def fast_ndcg_ia_metric(self, qid: str, cutoff: int = 10):
        """Vectorized NDCG-IA@cutoff over this query's candidate pool,
        numerically identical to metrics.ndcg_ia."""
        q = self.dataset.queries[qid]
        pool = [d.id for d in self.dataset.docs_for(qid)]
        idx = {did: i for i, did in enumerate(pool)}
        intents = sorted(c for c, p in q.intent_dist.items() if p > 0.0)
        weights = np.array([q.intent_dist[c] for c in intents])
        gains = np.array(
            [
                [2 ** self.dataset.grade(qid, c, did) - 1 for c in intents]
                for did in pool
            ],
            dtype=float,
        )
        discounts = 1.0 / np.log2(np.arange(2, cutoff + 2))
        idcg = np.array(
            [
                np.sort(gains[:, j])[::-1][:cutoff] @ discounts[: min(cutoff, len(pool))]
                for j in range(len(intents))
            ]
        )
        total_w = weights.sum()

        def metric(ranked_ids: Sequence[str]) -> float:
            if total_w == 0.0:
                return 0.0
            rows = gains[[idx[i] for i in ranked_ids[:cutoff]]]
            dcg = discounts[: rows.shape[0]] @ rows
            with np.errstate(invalid="ignore", divide="ignore"):
                per_intent = np.where(idcg > 0, dcg / np.where(idcg > 0, idcg, 1.0), 0.0)
            return float(weights @ per_intent / total_w)

        return metric

    # -- training -----------------------------------------------------------

    def training_samples(self, n_samples, mc_samples, seed):
        return ranker.build_training_set(
            self.dataset.split.train,
            pool_of=lambda qid: [d.id for d in self.dataset.docs_for(qid)],
            feature_fn=self.pair_features,
            metric_factory=self.fast_ndcg_ia_metric,
            n_samples=n_samples,
            mc_samples=mc_samples,
            seed=seed,
        )

    def _variant_features(self, sample: ranker.TrainingSample, variant: str) -> np.ndarray:
        return ranker.apply_variant(
            sample.features, variant, self.textsim_length,
            noise_seed=zlib.crc32(f"{sample.query_id}/{sample.doc_id}".encode()),
        )

    def train_models(
        self,
        n_samples: int,
        mc_samples: int,
        seed: int,
        config: ranker.TrainConfig,
        variants: Sequence[str] = ("full",),
    ) -> dict[str, ranker.RankerModel]:
        """Draw one sample stream and fit one model per ablation variant on
        masked copies of it (labels are identical across variants)."""
        samples = list(self.training_samples(n_samples, mc_samples, seed))
        models = {}
        for variant in variants:
            masked = [
                (self._variant_features(smp, variant), smp.label) for smp in samples
            ]
            models[variant] = ranker.train(masked, config)
        return models

    # -- ranking ------------------------------------------------------------

    def text_relevance(self, qid: str, did: str) -> float:
        """Whole-text embedding cosine rescaled to [0,1]."""
        sim = textsim.cosine_matrix(
            self.query_vector(qid)[None, :], self.doc_vector(did)[None, :]
        )[0, 0]
        return (sim + 1.0) / 2.0

    def pool_relevance(self, qid: str, pool) -> dict[str, float]:
        """Text relevance min-max rescaled over the candidate pool, so the
        best candidate maps to 1 and the worst to 0."""
        raw = {did: self.text_relevance(qid, did) for did in pool}
        lo, hi = min(raw.values()), max(raw.values())
        if hi == lo:
            return {did: 1.0 for did in raw}
        return {did: (v - lo) / (hi - lo) for did, v in raw.items()}

    def _per_intent_relevance(self, qid: str, pool) -> dict[str, dict[int, float]]:
        rel = self.pool_relevance(qid, pool)
        return {
            did: {c: rel[did] for c in self.dataset.docs[did].charges}
            for did in pool
        }

    def rank_query(self, method: str, qid: str, models=None, mmr_lambda=DEFAULT_MMR_LAMBDA) -> list[str]:
        pool = [d.id for d in self.dataset.docs_for(qid)]
        q = self.dataset.queries[qid]
        if method == "bm25":
            tokens = {did: self._tokens(did) for did in pool}
            return [did for did, _ in ranker.bm25_rank(ranker.tokenize(q.text), tokens)]
        if method == "mmr":
            relevance = self.pool_relevance(qid, pool)
            vectors = {did: self.doc_vector(did) for did in pool}
            return ranker.mmr_rank(relevance, vectors, mmr_lambda)
        if method in ("ia_select", "exia_select"):
            init = (
                self.query_initial_dist(qid)
                if method == "ia_select"
                else self.query_walked_dist(qid)
            )
            weights = {c: float(init[c]) for c in range(len(init)) if init[c] > 0}
            return ranker.ia_select_rank(weights, self._per_intent_relevance(qid, pool))
        if method in DLRM_METHODS:
            variant = "full" if method == "dlrm" else method
            model = models[variant]
            feats = {}
            for did in pool:
                smp = ranker.TrainingSample(self.pair_features(qid, did), 0.0, qid, did)
                feats[did] = self._variant_features(smp, variant)
            return ranker.rank(model, feats)
        raise ValueError(f"unknown method {method!r}")

    def _tokens(self, did: str) -> list[str]:
        if did not in self._doc_tokens:
            self._doc_tokens[did] = ranker.tokenize(self.dataset.docs[did].text)
        return self._doc_tokens[did]

    # -- evaluation ---------------------------------------------------------

    def evaluate(
        self,
        methods: Sequence[str],
        models: dict[str, ranker.RankerModel] | None = None,
        cutoffs: Sequence[int] = metrics.EVAL_CUTOFFS,
        query_ids: Sequence[str] | None = None,
        metric_alpha: float = metrics.DEFAULT_METRIC_ALPHA,
        jobs: int = 1,
        mmr_lambda: float = DEFAULT_MMR_LAMBDA,
    ) -> dict[str, dict[str, dict[str, float]]]:
        """Per-method, per-query metric table over the test split (or the
        given query ids). Parallel over queries; output order is fixed."""
        qids = list(query_ids) if query_ids is not None else list(self.dataset.split.test)

        def eval_one(args):
            method, qid = args
            ranked = self.rank_query(method, qid, models=models, mmr_lambda=mmr_lambda)
            q = self.dataset.queries[qid]
            grade_of = lambda c, d: self.dataset.grade(qid, c, d)
            row = {}
            for k in cutoffs:
                row[f"N-IA@{k}"] = metrics.ndcg_ia(q.intent_dist, ranked, grade_of, k)
                row[f"a-N@{k}"] = metrics.alpha_ndcg(
                    q.intent_dist, ranked, grade_of, k, metric_alpha
                )
            return method, qid, row

        tasks = [(m, qid) for m in methods for qid in qids]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(eval_one, tasks))
        else:
            results = [eval_one(t) for t in tasks]

        table: dict[str, dict[str, dict[str, float]]] = {m: {} for m in methods}
        for method, qid, row in results:
            table[method][qid] = row
        return table


def make_embedder(spec: str):
    """Provider factory for the ``embedder`` config key:
    ``builtin-hash`` or ``sidecar(<url>)``."""
    if spec == "builtin-hash":
        return textsim.HashingEmbedder()
    if spec.startswith("sidecar(") and spec.endswith(")"):
        return textsim.SidecarEmbedder(spec[len("sidecar(") : -1])
    raise ProviderError(f"unknown embedder spec {spec!r}")
