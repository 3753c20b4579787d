"""Command line for the model runner: encode a manifest, list candidate models."""

from __future__ import annotations

import sys

import click

from . import __version__
from .runner import RunnerConfig, RunnerError, encode_corpus, list_models


@click.group()
@click.version_option(__version__)
def main():
    """Encode a SEQCORPUS manifest with an external embedding model."""


@main.command("encode")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--model", required=True, help="Registry name or local model path.")
@click.option("--out", "output", required=True, type=click.Path())
@click.option("--device", default=None, help="Device selector (cpu, cuda, cuda:0, ...).")
@click.option("--batch-size", default=64, show_default=True)
@click.option("--trust-remote-code", is_flag=True)
@click.option("--normalize", is_flag=True,
              help="Ask the model to L2-normalize outputs (off by default).")
def cmd_encode(manifest, model, output, device, batch_size, trust_remote_code, normalize):
    """Encode every manifest record, in order, into an EMBF file."""
    config = RunnerConfig(
        model=model,
        output=output,
        device=device,
        batch_size=batch_size,
        trust_remote_code=trust_remote_code,
        normalize=normalize,
    )
    try:
        matrix = encode_corpus(manifest, config)
    except RunnerError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {matrix.shape[0]}x{matrix.shape[1]} embeddings to {output}")


@main.command("list-models")
@click.option("--prefix", default="", help="Case-insensitive identifier prefix filter.")
@click.option("--suggestion-file", default=None, type=click.Path(),
              help="Override the bundled roster file.")
def cmd_list_models(prefix, suggestion_file):
    """Print candidate model identifiers."""
    for name in list_models(prefix, suggestion_file):
        click.echo(name)


if __name__ == "__main__":
    main()
