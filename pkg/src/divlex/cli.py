"""Command-line entry point wiring the modules into reproducible pipelines.

Every subcommand is deterministic given its seed and inputs. A TOML config
file can pre-set any option; explicit flags win.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from . import annotation, chargegraph, corpus, metrics, pipeline, ranker
from .errors import DivlexError


def _load_config(path):
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _option(cli_value, config, key, default):
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _embedder_spec(config):
    url = os.environ.get("DIVLEX_SIDECAR_URL")
    if url:
        return f"sidecar({url})"
    return config.get("embedder", "builtin-hash")


def _build_pipeline(dataset_dir, config):
    dataset = corpus.load_dataset(dataset_dir)
    embedder = pipeline.make_embedder(_embedder_spec(config))
    predictor = None
    url = os.environ.get("DIVLEX_SIDECAR_URL") or config.get("sidecar_url")
    if url and config.get("sidecar_predictor", True) and os.environ.get("DIVLEX_SIDECAR_URL"):
        predictor = pipeline.SidecarChargePredictor(url)
    return pipeline.ExperimentPipeline(
        dataset,
        embedder=embedder,
        predictor=predictor,
        alpha=float(config.get("graph_alpha", chargegraph.DEFAULT_ALPHA)),
        walk_steps=int(config.get("walk_steps", chargegraph.DEFAULT_WALK_STEPS)),
    )


@click.group()
def main():
    """Diversified legal-case retrieval engine and evaluation harness."""


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--charges", type=int, default=24, show_default=True)
@click.option("--train-queries", type=int, default=70, show_default=True)
@click.option("--test-queries", type=int, default=36, show_default=True)
@click.option("--docs-per-query", type=int, default=30, show_default=True)
def gen(seed, out_dir, charges, train_queries, test_queries, docs_per_query):
    """Generate a synthetic dataset directory."""
    config = corpus.GeneratorConfig(
        n_charges=charges,
        n_train_queries=train_queries,
        n_test_queries=test_queries,
        docs_per_query=docs_per_query,
    )
    try:
        corpus.generate_to_disk(config, seed, out_dir)
    except DivlexError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote dataset to {out_dir}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
def validate(dataset_dir):
    """Schema- and integrity-check a dataset directory."""
    try:
        ds = corpus.load_dataset(dataset_dir)
    except DivlexError as exc:
        click.echo(f"invalid dataset: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {len(ds.queries)} queries, {len(ds.docs)} docs, "
        f"{len(ds.triples)} triples, {ds.vocab.size} charges"
    )


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--alpha", type=float, default=chargegraph.DEFAULT_ALPHA, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def graph(dataset_dir, alpha, out_path):
    """Build the charge transition graph and dump it as sparse triplets."""
    ds = corpus.load_dataset(dataset_dir)
    g = chargegraph.reversal_matrix(ds.vocab.size, ds.reversals)
    cg = chargegraph.build_graph(g, alpha)
    Path(out_path).write_text(chargegraph.dump_graph_tsv(cg), encoding="utf-8")
    click.echo(f"wrote graph ({cg.size} nodes) to {out_path}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--query", "query_id", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), required=True)
def features(dataset_dir, query_id, config_path, out_path):
    """Emit T_sim and C_qd features for every candidate of one query."""
    config = _load_config(config_path)
    pipe = _build_pipeline(dataset_dir, config)
    if query_id not in pipe.dataset.queries:
        click.echo(f"unknown query {query_id}", err=True)
        sys.exit(1)
    with open(out_path, "w", encoding="utf-8") as fh:
        for doc in pipe.dataset.docs_for(query_id):
            feats = pipe.pair_features(query_id, doc.id)
            fh.write(
                json.dumps(
                    {
                        "query_id": query_id,
                        "doc_id": doc.id,
                        "t_sim": feats[: pipe.textsim_length].tolist(),
                        "c_qd": feats[pipe.textsim_length :].tolist(),
                    }
                )
                + "\n"
            )
    click.echo(f"wrote features to {out_path}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int)
@click.option("--n-samples", type=int)
@click.option("--mc-samples", type=int)
@click.option("--lr", type=float)
@click.option("--epochs", type=int)
@click.option("--variant", type=click.Choice(ranker.VARIANTS), default="full", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def train(dataset_dir, config_path, seed, n_samples, mc_samples, lr, epochs, variant, out_path):
    """Train the MLP ranker and write a JSON checkpoint."""
    config = _load_config(config_path)
    seed = _option(seed, config, "seed", 0)
    n_samples = _option(n_samples, config, "n_samples", 4000)
    mc_samples = _option(mc_samples, config, "mc_samples", 24)
    lr = _option(lr, config, "learning_rate", 1e-2)
    epochs = _option(epochs, config, "epochs", 200)
    pipe = _build_pipeline(dataset_dir, config)
    train_config = ranker.TrainConfig(
        learning_rate=lr, epochs=epochs, seed=seed
    )
    models = pipe.train_models(n_samples, mc_samples, seed, train_config, variants=(variant,))
    Path(out_path).write_text(models[variant].to_json(), encoding="utf-8")
    click.echo(f"wrote checkpoint to {out_path}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--query", "query_id", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
def rank(dataset_dir, model_path, query_id, config_path):
    """Rank one query's candidates with a trained model and print the list."""
    config = _load_config(config_path)
    pipe = _build_pipeline(dataset_dir, config)
    if query_id not in pipe.dataset.queries:
        click.echo(f"unknown query {query_id}", err=True)
        sys.exit(1)
    model = ranker.RankerModel.from_json(Path(model_path).read_text(encoding="utf-8"))
    models = {"full": model}
    for i, did in enumerate(pipe.rank_query("dlrm", query_id, models=models), start=1):
        click.echo(f"{i}\t{did}")


@main.command("eval")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int)
@click.option("--n-samples", type=int)
@click.option("--mc-samples", type=int)
@click.option("--lr", type=float)
@click.option("--epochs", type=int)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--skip-ablations", is_flag=True, default=False)
@click.option("--out", "out_path", type=click.Path(), required=True)
def eval_cmd(dataset_dir, config_path, seed, n_samples, mc_samples, lr, epochs, jobs, skip_ablations, out_path):
    """Full baseline-vs-DLRM evaluation table (TSV + JSON detail + t-tests)."""
    config = _load_config(config_path)
    seed = _option(seed, config, "seed", 0)
    n_samples = _option(n_samples, config, "n_samples", 4000)
    mc_samples = _option(mc_samples, config, "mc_samples", 24)
    lr = _option(lr, config, "learning_rate", 1e-2)
    epochs = _option(epochs, config, "epochs", 200)
    pipe = _build_pipeline(dataset_dir, config)

    variants = ("full",) if skip_ablations else ranker.VARIANTS
    train_config = ranker.TrainConfig(learning_rate=lr, epochs=epochs, seed=seed)
    models = pipe.train_models(n_samples, mc_samples, seed, train_config, variants=variants)

    methods = list(pipeline.BASELINES) + (
        ["dlrm"] if skip_ablations else list(pipeline.DLRM_METHODS)
    )
    table = pipe.evaluate(methods, models=models, jobs=jobs)

    out = Path(out_path)
    out.write_text(metrics.evaluation_table(table), encoding="utf-8")
    out.with_suffix(".detail.json").write_text(
        json.dumps(table, indent=2, sort_keys=True), encoding="utf-8"
    )
    out.with_suffix(".ttest.tsv").write_text(metrics.pairwise_ttests(table), encoding="utf-8")
    click.echo(Path(out_path).read_text(encoding="utf-8"), nl=False)


@main.command()
@click.option("--annotations", "ann_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def agreement(ann_path, out_path):
    """Inter-annotator kappa/tau report from an annotations JSONL file.

    Each record: {"annotator": str, "item": str, "grade": int}. All
    annotators must cover the same items.
    """
    by_annotator: dict[str, dict[str, int]] = {}
    with open(ann_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            by_annotator.setdefault(rec["annotator"], {})[rec["item"]] = int(rec["grade"])
    item_sets = {frozenset(v) for v in by_annotator.values()}
    if len(item_sets) != 1:
        click.echo("annotators cover different item sets", err=True)
        sys.exit(1)
    items = sorted(next(iter(item_sets)))
    labels = {a: [g[i] for i in items] for a, g in by_annotator.items()}
    try:
        report = annotation.agreement(labels)
    except DivlexError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    Path(out_path).write_text(annotation.agreement_tsv(report), encoding="utf-8")
    click.echo(f"wrote agreement report to {out_path}")


@main.command("annotate-prep")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def annotate_prep(dataset_dir, out_path):
    """Emit the CCS per query and the triple-filter worklist as JSONL."""
    ds = corpus.load_dataset(dataset_dir)
    with open(out_path, "w", encoding="utf-8") as fh:
        for qid in sorted(ds.queries):
            q = ds.queries[qid]
            fh.write(json.dumps({"query_id": qid, "ccs": sorted(q.candidate_charge_set)}) + "\n")
            for doc in ds.docs_for(qid):
                for cid in sorted(q.candidate_charge_set):
                    if annotation.triple_needs_annotation(q, cid, doc):
                        fh.write(
                            json.dumps(
                                {"query_id": qid, "charge_id": cid, "doc_id": doc.id}
                            )
                            + "\n"
                        )
    click.echo(f"wrote worklist to {out_path}")


if __name__ == "__main__":
    main()
