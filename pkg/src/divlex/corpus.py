"""Data model, dataset file formats, and a synthetic-corpus generator.

The on-disk layout is a directory of JSONL files (``vocab.jsonl``,
``queries.jsonl``, ``docs.jsonl``, ``triples.jsonl``), a ``split.json``,
and an optional ``reversals.jsonl`` with charge-reversal frequencies.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, IntegrityError, SchemaError

DEFAULT_TERMINATORS = ("。", "！", "？", ".", "!", "?")

GRADE_NAMES = {0: "irrelevant", 1: "fair", 2: "excellent", 3: "perfect"}


@dataclass(frozen=True)
class ChargeVocabulary:
    """Dense 0..s-1 charge ids with unique names."""

    charges: tuple[tuple[int, str], ...]

    def __post_init__(self):
        ids = [cid for cid, _ in self.charges]
        names = [name for _, name in self.charges]
        if ids != list(range(len(ids))):
            raise SchemaError("charge ids must be dense 0..s-1")
        if len(set(names)) != len(names) or any(not n for n in names):
            raise SchemaError("charge names must be unique and non-empty")

    @property
    def size(self) -> int:
        return len(self.charges)

    def name(self, charge_id: int) -> str:
        return self.charges[charge_id][1]

    @property
    def names(self) -> list[str]:
        return [name for _, name in self.charges]


@dataclass(frozen=True)
class QueryCase:
    id: str
    sentences: tuple[str, ...]
    candidate_charge_set: frozenset[int]
    intent_dist: dict[int, float]

    def __post_init__(self):
        if not self.sentences:
            raise SchemaError(f"query {self.id}: sentences must be non-empty")
        extra = set(self.intent_dist) - set(self.candidate_charge_set)
        if extra:
            raise SchemaError(
                f"query {self.id}: intent_dist keys {sorted(extra)} outside CCS"
            )
        for cid, p in self.intent_dist.items():
            if not 0.0 <= p <= 1.0:
                raise SchemaError(f"query {self.id}: P({cid})={p} outside [0,1]")

    @property
    def text(self) -> str:
        return "".join(self.sentences)


@dataclass(frozen=True)
class CandidateDoc:
    id: str
    query_id: str
    sentences: tuple[str, ...]
    charges: frozenset[int]
    query_relevance: int

    def __post_init__(self):
        if not self.sentences:
            raise SchemaError(f"doc {self.id}: sentences must be non-empty")
        if self.query_relevance not in (0, 1, 2, 3):
            raise SchemaError(f"doc {self.id}: qrel={self.query_relevance}")

    @property
    def text(self) -> str:
        return "".join(self.sentences)


@dataclass(frozen=True)
class GradedTriple:
    query_id: str
    charge_id: int
    doc_id: str
    grade: int

    def __post_init__(self):
        if self.grade not in (0, 1, 2, 3):
            raise SchemaError(f"triple grade {self.grade} outside 0-3")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        if set(self.train) & set(self.test):
            raise SchemaError("train/test splits overlap")


@dataclass
class Dataset:
    vocab: ChargeVocabulary
    queries: dict[str, QueryCase]
    docs: dict[str, CandidateDoc]
    triples: list[GradedTriple]
    split: DatasetSplit
    reversals: list[tuple[int, int, int]] = field(default_factory=list)

    def docs_for(self, query_id: str) -> list[CandidateDoc]:
        return sorted(
            (d for d in self.docs.values() if d.query_id == query_id),
            key=lambda d: d.id,
        )

    def grade(self, query_id: str, charge_id: int, doc_id: str) -> int:
        """Lenient lookup: unlabeled triples count as grade 0."""
        return self._grade_index().get((query_id, charge_id, doc_id), 0)

    def _grade_index(self) -> dict[tuple[str, int, str], int]:
        if not hasattr(self, "_grades"):
            self._grades = {
                (t.query_id, t.charge_id, t.doc_id): t.grade for t in self.triples
            }
        return self._grades


def split_sentences(text: str, terminators=DEFAULT_TERMINATORS) -> list[str]:
    """Split on terminator characters, keeping each terminator attached
    to the sentence it ends. Trailing text without a terminator becomes
    a final sentence of its own."""
    sentences = []
    start = 0
    for i, ch in enumerate(text):
        if ch in terminators:
            sentences.append(text[start : i + 1])
            start = i + 1
    tail = text[start:]
    if tail.strip():
        sentences.append(tail)
    return sentences


# ---------------------------------------------------------------------------
# JSONL IO


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}", path=str(path), line=lineno)


def _require(record, key, path, lineno):
    if key not in record:
        raise SchemaError(f"missing field {key!r}", path=str(path), line=lineno)
    return record[key]


def load_dataset(path) -> Dataset:
    """Load a dataset directory, enforcing schema and referential integrity."""
    root = Path(path)
    vocab_path = root / "vocab.jsonl"
    charges = []
    for lineno, rec in _read_jsonl(vocab_path):
        charges.append(
            (_require(rec, "id", vocab_path, lineno), _require(rec, "name", vocab_path, lineno))
        )
    try:
        vocab = ChargeVocabulary(tuple(sorted(charges)))
    except SchemaError as exc:
        raise SchemaError(str(exc), path=str(vocab_path))
    valid_ids = set(range(vocab.size))

    queries: dict[str, QueryCase] = {}
    q_path = root / "queries.jsonl"
    for lineno, rec in _read_jsonl(q_path):
        try:
            q = QueryCase(
                id=str(_require(rec, "id", q_path, lineno)),
                sentences=tuple(_require(rec, "sentences", q_path, lineno)),
                candidate_charge_set=frozenset(_require(rec, "ccs", q_path, lineno)),
                intent_dist={int(k): float(v) for k, v in _require(rec, "intent_dist", q_path, lineno).items()},
            )
        except SchemaError as exc:
            raise SchemaError(str(exc), path=str(q_path), line=lineno)
        if not q.candidate_charge_set <= valid_ids:
            raise IntegrityError(f"query {q.id}: CCS references unknown charges")
        queries[q.id] = q

    docs: dict[str, CandidateDoc] = {}
    d_path = root / "docs.jsonl"
    for lineno, rec in _read_jsonl(d_path):
        try:
            d = CandidateDoc(
                id=str(_require(rec, "id", d_path, lineno)),
                query_id=str(_require(rec, "query_id", d_path, lineno)),
                sentences=tuple(_require(rec, "sentences", d_path, lineno)),
                charges=frozenset(_require(rec, "charges", d_path, lineno)),
                query_relevance=int(_require(rec, "qrel", d_path, lineno)),
            )
        except SchemaError as exc:
            raise SchemaError(str(exc), path=str(d_path), line=lineno)
        if not d.charges <= valid_ids:
            raise IntegrityError(f"doc {d.id}: unknown charges {sorted(d.charges - valid_ids)}")
        if d.query_id not in queries:
            raise IntegrityError(f"doc {d.id}: unknown query {d.query_id}")
        docs[d.id] = d

    triples = []
    t_path = root / "triples.jsonl"
    for lineno, rec in _read_jsonl(t_path):
        try:
            t = GradedTriple(
                query_id=str(_require(rec, "query_id", t_path, lineno)),
                charge_id=int(_require(rec, "charge_id", t_path, lineno)),
                doc_id=str(_require(rec, "doc_id", t_path, lineno)),
                grade=int(_require(rec, "grade", t_path, lineno)),
            )
        except SchemaError as exc:
            raise SchemaError(str(exc), path=str(t_path), line=lineno)
        if t.query_id not in queries:
            raise IntegrityError(f"triple at line {lineno}: unknown query {t.query_id}")
        if t.doc_id not in docs:
            raise IntegrityError(f"triple at line {lineno}: unknown doc {t.doc_id}")
        if t.charge_id not in valid_ids:
            raise IntegrityError(f"triple at line {lineno}: unknown charge {t.charge_id}")
        triples.append(t)

    with open(root / "split.json", encoding="utf-8") as fh:
        split_rec = json.load(fh)
    split = DatasetSplit(
        train=tuple(split_rec["train"]), test=tuple(split_rec["test"])
    )
    covered = set(split.train) | set(split.test)
    if covered != set(queries):
        raise IntegrityError("split does not cover exactly the query set")

    reversals = []
    r_path = root / "reversals.jsonl"
    if r_path.exists():
        for lineno, rec in _read_jsonl(r_path):
            frm = int(_require(rec, "from", r_path, lineno))
            to = int(_require(rec, "to", r_path, lineno))
            count = int(_require(rec, "count", r_path, lineno))
            if frm not in valid_ids or to not in valid_ids:
                raise IntegrityError(f"reversal at line {lineno}: unknown charge")
            if count < 0:
                raise SchemaError("negative reversal count", path=str(r_path), line=lineno)
            reversals.append((frm, to, count))

    return Dataset(vocab, queries, docs, triples, split, reversals)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset directory. Records are emitted in sorted order so
    output is byte-stable for a given object graph."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    def dump(name, records):
        with open(root / name, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    dump("vocab.jsonl", ({"id": cid, "name": name} for cid, name in dataset.vocab.charges))
    dump(
        "queries.jsonl",
        (
            {
                "id": q.id,
                "sentences": list(q.sentences),
                "ccs": sorted(q.candidate_charge_set),
                "intent_dist": {str(k): q.intent_dist[k] for k in sorted(q.intent_dist)},
            }
            for q in sorted(dataset.queries.values(), key=lambda q: q.id)
        ),
    )
    dump(
        "docs.jsonl",
        (
            {
                "id": d.id,
                "query_id": d.query_id,
                "sentences": list(d.sentences),
                "charges": sorted(d.charges),
                "qrel": d.query_relevance,
            }
            for d in sorted(dataset.docs.values(), key=lambda d: d.id)
        ),
    )
    dump(
        "triples.jsonl",
        (
            {"query_id": t.query_id, "charge_id": t.charge_id, "doc_id": t.doc_id, "grade": t.grade}
            for t in sorted(dataset.triples, key=lambda t: (t.query_id, t.charge_id, t.doc_id))
        ),
    )
    with open(root / "split.json", "w", encoding="utf-8") as fh:
        json.dump({"train": list(dataset.split.train), "test": list(dataset.split.test)}, fh)
        fh.write("\n")
    if dataset.reversals:
        dump(
            "reversals.jsonl",
            ({"from": f, "to": t, "count": c} for f, t, c in sorted(dataset.reversals)),
        )


# ---------------------------------------------------------------------------
# Synthetic generator

_NOUNS = (
    "ledger", "vehicle", "warehouse", "contract", "shipment", "account",
    "storefront", "device", "permit", "invoice", "residence", "dock",
)
_PLACES = (
    "north district", "harbor", "market square", "old mill", "east bridge",
    "depot", "courthouse annex", "riverside", "terminal", "back office",
)
_VERBS = (
    "documented", "reported", "described", "recorded", "witnessed",
    "uncovered", "traced", "confirmed",
)


@dataclass
class GeneratorConfig:
    """Settings for the synthetic corpus.

    Defaults mirror the target corpus shape: 70 train + 36 test queries
    with 30 candidates each and about 3.5 relevant charges per query.
    """

    n_charges: int = 24
    n_train_queries: int = 70
    n_test_queries: int = 36
    docs_per_query: int = 30
    templates_per_charge: int = 6
    query_sentences: int = 7
    doc_sentences: int = 10

    def validate(self):
        for name in (
            "n_charges", "n_train_queries", "n_test_queries",
            "docs_per_query", "templates_per_charge",
            "query_sentences", "doc_sentences",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_charges < 6:
            raise ConfigError("need at least 6 charges to plant correlations")


def _charge_names(n: int) -> list[str]:
    stems = (
        "taking", "holding", "moving", "selling", "forging", "hiding",
        "breaking", "dumping", "copying", "blocking", "luring", "rigging",
    )
    objs = (
        "goods", "funds", "records", "permits", "cargo", "votes",
        "seals", "bonds", "wares", "claims", "deeds", "stock",
    )
    names = []
    for i in range(n):
        stem = stems[i % len(stems)]
        obj = objs[(i // len(stems)) % len(objs)]
        names.append(f"unlawful {stem} of {obj} c{i:02d}")
    return names


_SYLLABLES = (
    "ka", "ro", "ven", "tu", "mis", "pol", "dra", "sel", "nor", "fay",
    "gul", "zam", "bri", "lox", "qued", "wim",
)


def _jargon(charge_id: int, rng: random.Random, count: int = 6) -> list[str]:
    """Charge-private vocabulary so texts about different charges stay
    lexically distinguishable."""
    words = []
    for w in range(count):
        word = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        words.append(f"{word}{charge_id:02d}")
    return words


@dataclass
class _TemplateBank:
    """Two disjoint sentence-template halves per charge. Both halves carry
    the charge name (so regex extraction always works), but each half uses
    its own private jargon: texts from opposite halves of the same charge
    are lexically distant."""

    near: list[str]
    far: list[str]

    def pick(self, half: str, rng: random.Random) -> str:
        if half == "near":
            return rng.choice(self.near)
        if half == "far":
            return rng.choice(self.far)
        return rng.choice(self.near + self.far)


def _templates(name: str, jargon: list[str], rng: random.Random, count: int) -> _TemplateBank:
    halves = []
    mid = len(jargon) // 2
    for words in (jargon[:mid], jargon[mid:]):
        bank = []
        for _ in range(count):
            verb = rng.choice(_VERBS)
            noun = rng.choice(_NOUNS)
            place = rng.choice(_PLACES)
            j1, j2 = rng.sample(words, 2)
            bank.append(f"The file {verb} {name} with {j1} {j2} involving the {noun} at the {place}.")
        halves.append(bank)
    return _TemplateBank(near=halves[0], far=halves[1])


def generate_synthetic(config: GeneratorConfig, seed: int) -> Dataset:
    """Build a corpus whose text, charge labels, and graded triples are
    consistent by construction.

    Charges are planted in correlated pairs (2p, 2p+1) via a ground-truth
    reversal matrix. Each query centers on one charge; the center's
    correlated partner is a strong secondary intent that the query text
    never mentions, so purely lexical rankers (and intent inits that skip
    the graph) under-serve it while the charge graph carries that signal.
    A random third charge is a weak tertiary intent, and three distractor
    charges round out the candidate charge set with zero intent mass.

    Within the center charge, documents split into a "near" group written
    from the same template half as the query (grade 3) and a "far" group
    from the opposite half (grade 1): the grade difference is visible only
    in the text, so charge features alone cannot recover it. Coverage of
    the hidden partner intent, conversely, is visible only in the charges.
    """
    config.validate()
    rng = random.Random(seed)
    s = config.n_charges
    names = _charge_names(s)
    vocab = ChargeVocabulary(tuple(enumerate(names)))
    templates = {
        cid: _templates(names[cid], _jargon(cid, rng), rng, config.templates_per_charge)
        for cid in range(s)
    }

    # correlated pairs via reversal counts, plus light noise edges
    reversals = []
    partner = {}
    for p in range(s // 2):
        a, b = 2 * p, 2 * p + 1
        partner[a], partner[b] = b, a
        # the even member's outgoing mass is split between its partner and
        # assorted noise targets, while the odd member points back almost
        # exclusively; queries centre on even charges, so random-walk mass
        # settles measurably higher on the centre than on its partner
        reversals.append((a, b, rng.randint(25, 35)))
        reversals.append((b, a, rng.randint(25, 35)))
        for j in rng.sample([c for c in range(s) if c not in (a, b)], 3):
            reversals.append((a, j, rng.randint(8, 12)))
        noise = rng.choice([c for c in range(s) if c not in (a, b)])
        reversals.append((b, noise, rng.randint(1, 2)))

    n_queries = config.n_train_queries + config.n_test_queries
    queries: dict[str, QueryCase] = {}
    docs: dict[str, CandidateDoc] = {}
    triples: list[GradedTriple] = []

    for qi in range(n_queries):
        qid = f"q{qi:03d}"
        core = 2 * rng.randrange(s // 2)
        second = partner[core]
        third = rng.choice([c for c in range(s) if c not in (core, second)])
        # intent levels: core alone > partner > third  =>  P = 1, 2/3, 1/3
        intent = {core: 1.0, second: 2.0 / 3.0, third: 1.0 / 3.0}
        distractors = rng.sample(
            [c for c in range(s) if c not in intent], 3
        )
        ccs = frozenset(intent) | frozenset(distractors)
        intent_full = dict(intent)
        for c in distractors:
            intent_full[c] = 0.0

        # the partner and third intents are deliberately absent from the
        # query text (they enter the CCS through the charge predictor, the
        # way an LJP model surfaces charges a fact pattern only implies);
        # only the charge-graph side of the model can reward them
        mentioned = [*distractors]
        plan = [core] * max(1, config.query_sentences - len(mentioned)) + mentioned
        q_sents = [templates[cid].pick("near", rng) for cid in plan[: max(config.query_sentences, len(plan))]]
        queries[qid] = QueryCase(qid, tuple(q_sents), ccs, intent_full)

        # candidate pool recipes: (charges, template half, grades per charge)
        recipes = (
            [(frozenset({core}), "near", {core: 3})] * 4
            + [(frozenset({core}), "far", {core: 2})] * 1
            + [(frozenset({second}), "any", {second: 2})] * 7
            + [(frozenset({third}), "far", {third: 1})] * 4
        )
        # background docs avoid every charge the random walk can reach from
        # the CCS, so stray walk mass has nothing to reward; small charge
        # spaces fall back to progressively weaker exclusions
        near = set(ccs) | {partner[c] for c in ccs if c in partner}
        reachable = near | {j for (i, j, _) in reversals if i in near}
        for excluded in (reachable, near, set(ccs)):
            background = [c for c in range(s) if c not in excluded]
            if background:
                break
        while len(recipes) < config.docs_per_query:
            other = rng.sample(background, min(rng.choice((1, 2)), len(background)))
            recipes.append((frozenset(other), "any", {}))
        recipes = recipes[: config.docs_per_query]
        rng.shuffle(recipes)

        for di, (charge_set, half, grades) in enumerate(recipes):
            did = f"{qid}-d{di:02d}"
            qrel = max(grades.values(), default=0)
            ordered = sorted(charge_set)
            d_sents = []
            for si in range(config.doc_sentences):
                cid = ordered[si % len(ordered)]
                d_sents.append(templates[cid].pick(half, rng))
            docs[did] = CandidateDoc(did, qid, tuple(d_sents), charge_set, qrel)
            for cid in sorted(grades):
                triples.append(GradedTriple(qid, cid, did, grades[cid]))

    ids = sorted(queries)
    rng.shuffle(ids)
    split = DatasetSplit(
        train=tuple(sorted(ids[: config.n_train_queries])),
        test=tuple(sorted(ids[config.n_train_queries :])),
    )
    triples.sort(key=lambda t: (t.query_id, t.charge_id, t.doc_id))
    return Dataset(vocab, queries, docs, triples, split, sorted(reversals))


def generate_to_disk(config: GeneratorConfig, seed: int, out_dir) -> Dataset:
    dataset = generate_synthetic(config, seed)
    save_dataset(dataset, out_dir)
    return dataset
