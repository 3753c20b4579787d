"""Batch CLI: corpus generation, baseline embedding, evaluation, t-SNE, merging."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import FORMAT_VERSIONS, __version__, cluster, corpus, embedstore, features, merge
from . import projection as proj


def write_stamp(primary_output: str | Path, config: dict) -> None:
    """Deterministic reproducibility stamp next to a subcommand's main output."""
    lines = [f"seqembed {__version__}"]
    lines += [f"format {k}={v}" for k, v in sorted(FORMAT_VERSIONS.items())]
    lines += [f"{k}={v}" for k, v in sorted(config.items())]
    Path(str(primary_output) + ".stamp").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.version_option(__version__)
def main():
    """Numeric-sequence embedding evaluation and checkpoint merging."""


@main.command("gen-corpus")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--families",
    default=",".join(f.display_name for f in corpus.FamilyKind),
    show_default=True,
    help="Comma-separated family names.",
)
@click.option("--windows", default=4, show_default=True, help="Sequences per family.")
@click.option("--length", default=50, show_default=True, help="Numbers per sequence.")
@click.option("--max-chars", default=20000, show_default=True)
def cmd_gen_corpus(out_path, families, windows, length, max_chars):
    """Generate the sequence corpus manifest."""
    try:
        fams = tuple(corpus.FAMILY_BY_NAME[name.strip().lower()] for name in families.split(","))
    except KeyError as exc:
        _fail(f"unknown family {exc.args[0]!r}")
    spec = corpus.CorpusSpec(
        families=fams, sequences_per_family=windows, length=length, max_chars=max_chars
    )
    write_stamp(out_path, {"cmd": "gen-corpus", "families": families, "windows": windows,
                           "length": length, "max_chars": max_chars})
    try:
        built = corpus.build_corpus(spec)
        corpus.write_manifest(built, out_path)
    except corpus.SerializationError as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(built.records)} records to {out_path}")


@main.command("baseline-embed")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", default=features.DEFAULT_DIM, show_default=True)
@click.option("--model-tag", default="baseline-ngram", show_default=True)
def cmd_baseline_embed(manifest_path, out_path, dim, model_tag):
    """Embed the corpus with the built-in hashed n-gram featurizer."""
    rows = corpus.read_manifest(manifest_path)
    if not rows:
        _fail("manifest holds no records")
    write_stamp(out_path, {"cmd": "baseline-embed", "manifest": Path(manifest_path).name,
                           "dim": dim, "model_tag": model_tag})
    data = features.featurize_corpus([text for _, _, _, text in rows], dim=dim)
    matrix = embedstore.EmbeddingMatrix(data=data, source_model=model_tag)
    embedstore.write_embeddings(matrix, out_path)
    click.echo(f"wrote {matrix.n}x{matrix.d} embeddings to {out_path}")


@main.command("evaluate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "emb_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--model-name", default=None, help="Report row name; defaults to the EMBF tag.")
@click.option("--normalize", is_flag=True, help="L2-normalize rows before clustering.")
@click.option("--restarts", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--k", default=None, type=int, help="Cluster count; defaults to family count.")
def cmd_evaluate(manifest_path, emb_path, report_path, model_name, normalize, restarts, seed, k):
    """Compute silhouette/DBI under true and KMeans labels; append a report row."""
    rows = corpus.read_manifest(manifest_path)
    try:
        matrix = embedstore.read_embeddings(emb_path)
    except embedstore.FormatError as exc:
        _fail(str(exc))
    labels = [label for label, _, _, _ in rows]
    if matrix.n != len(labels):
        _fail(f"alignment error: {matrix.n} embedding rows vs {len(labels)} manifest records")
    params = cluster.KMeansParams(
        k=k if k is not None else len(set(labels)), restarts=restarts, seed=seed
    )
    write_stamp(report_path, {"cmd": "evaluate", "embeddings": Path(emb_path).name,
                              "normalize": normalize, "k": params.k,
                              "restarts": restarts, "seed": seed})
    try:
        report = cluster.evaluate(matrix, labels, params, normalize=normalize)
    except cluster.ClusterError as exc:
        _fail(str(exc))
    row = embedstore.ReportRow(
        model_name=model_name or matrix.source_model or Path(emb_path).stem,
        silhouette_true=report.silhouette_true,
        dbi_true=report.dbi_true,
        silhouette_kmeans=report.silhouette_kmeans,
        dbi_kmeans=report.dbi_kmeans,
    )
    embedstore.append_report_row(row, report_path)
    click.echo(row.render())
    click.echo(f"agreement (ARI): {report.agreement:.4f}")


@main.command("tsne")
@click.option("--embeddings", "emb_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--coords-out", required=True, type=click.Path())
@click.option("--svg-out", required=True, type=click.Path())
@click.option("--perplexity", default=None, type=float, help="Default: 30, or 10 when n < 50.")
@click.option("--iterations", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_tsne(emb_path, manifest_path, coords_out, svg_out, perplexity, iterations, seed):
    """Project embeddings to 2D and write coordinates CSV plus an SVG scatter."""
    try:
        matrix = embedstore.read_embeddings(emb_path)
    except embedstore.FormatError as exc:
        _fail(str(exc))
    rows = corpus.read_manifest(manifest_path)
    if matrix.n != len(rows):
        _fail(f"alignment error: {matrix.n} embedding rows vs {len(rows)} manifest records")
    params = proj.TsneParams(perplexity=perplexity, iterations=iterations, seed=seed)
    write_stamp(coords_out, {"cmd": "tsne", "embeddings": Path(emb_path).name,
                             "perplexity": perplexity, "iterations": iterations, "seed": seed})
    try:
        result = proj.tsne(matrix, params)
    except proj.ProjectionError as exc:
        _fail(str(exc))
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    embedstore.write_coords_csv(result.coords, coords_out)
    labels = [label for label, _, _, _ in rows]
    names_by_label = {label: family for label, family, _, _ in rows}
    class_names = [names_by_label[c] for c in sorted(set(labels))]
    proj.scatter_svg(result, labels, svg_out, class_names=class_names,
                     title=matrix.source_model)
    click.echo(f"final KL divergence: {result.final_kl:.6f}")


@main.command("merge")
@click.option("--method", required=True,
              type=click.Choice(["slerp", "lerp", "soup", "fold", "fold-then-soup",
                                 "fold-then-slerp"]))
@click.option("--inputs", required=True, help="Comma-separated TMAP checkpoint paths.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report-out", default=None, type=click.Path(),
              help="Merge report (slerp angles and fallback flags).")
@click.option("-t", "--fraction", default=0.5, show_default=True,
              help="Interpolation fraction for slerp/lerp.")
@click.option("--base", default=None, type=click.Path(exists=True),
              help="Base checkpoint for fold methods; --inputs then lists adapters.")
def cmd_merge(method, inputs, out_path, report_out, fraction, base):
    """Merge checkpoints (SLERP / lerp / soup / LoRA folding and compositions)."""
    paths = [p.strip() for p in inputs.split(",") if p.strip()]
    write_stamp(out_path, {"cmd": "merge", "method": method, "t": fraction,
                           "inputs": ",".join(Path(p).name for p in paths),
                           "base": Path(base).name if base else ""})
    try:
        maps = [merge.load_tensormap(p) for p in paths]
        report = None
        if method == "slerp":
            if len(maps) < 2:
                _fail("slerp needs at least 2 checkpoints")
            result = maps[0]
            for other in maps[1:]:
                result, report = merge.slerp_merge(result, other, merge.SlerpParams(t=fraction))
        elif method == "lerp":
            if len(maps) < 2:
                _fail("lerp needs at least 2 checkpoints")
            result = maps[0]
            for other in maps[1:]:
                result = merge.lerp_merge(result, other, fraction)
        elif method == "soup":
            if len(maps) < 2:
                _fail("soup needs at least 2 checkpoints")
            result = merge.soup(maps)
        else:
            if base is None:
                _fail(f"{method} requires --base")
            base_map = merge.load_tensormap(base)
            folded = [
                merge.lora_fold(base_map, merge.adapter_from_tensormap(m)) for m in maps
            ]
            if method == "fold":
                if len(folded) != 1:
                    _fail("fold takes exactly one adapter")
                result = folded[0]
            elif method == "fold-then-soup":
                result = merge.soup(folded)
            else:  # fold-then-slerp: pairwise-sequential over the folded maps
                result = folded[0]
                for other in folded[1:]:
                    result, report = merge.slerp_merge(
                        result, other, merge.SlerpParams(t=fraction)
                    )
        merge.save_tensormap(result, out_path)
        if report_out:
            Path(report_out).write_text(
                report.render() if report else "tensor\tangle_radians\tlinear_fallback\n",
                encoding="utf-8",
            )
    except merge.MergeError as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(result)} tensors to {out_path}")


if __name__ == "__main__":
    main()
