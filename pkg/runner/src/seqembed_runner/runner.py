"""Encode a SEQCORPUS manifest with an external model and emit an EMBF file.

This package talks to the core toolkit only through its file formats
(SEQCORPUS manifest in, EMBF binary out), so both are implemented here
against their published layouts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

MANIFEST_HEADER = "SEQCORPUS 1"
EMBF_MAGIC = b"EMBF"
EMBF_VERSION = 1


class RunnerError(RuntimeError):
    pass


@dataclass
class RunnerConfig:
    model: str
    output: str
    device: str | None = None
    batch_size: int = 64
    trust_remote_code: bool = False
    normalize: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise RunnerError("batch size must be >= 1")


def read_manifest_texts(source: str | Path) -> list[str]:
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise RunnerError(f"{source}: not a SEQCORPUS manifest")
    texts = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise RunnerError(f"{source}: line {i} has {len(fields)} fields, expected 4")
        texts.append(fields[3])
    return texts


def write_embf(matrix: np.ndarray, model_tag: str, destination: str | Path) -> None:
    data = np.ascontiguousarray(matrix, dtype="<f4")
    if data.ndim != 2:
        raise RunnerError(f"expected a 2-D matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise RunnerError("model produced non-finite embedding values")
    tag = model_tag.encode("utf-8")
    n, d = data.shape
    blob = EMBF_MAGIC + struct.pack("<BIII", EMBF_VERSION, n, d, len(tag)) + tag + data.tobytes()
    Path(destination).write_bytes(blob)


def load_model(config: RunnerConfig):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise RunnerError(
            "sentence-transformers is not installed; install the [models] extra"
        ) from exc
    try:
        return SentenceTransformer(
            config.model,
            device=config.device,
            trust_remote_code=config.trust_remote_code,
        )
    except Exception as exc:
        raise RunnerError(f"failed to load model {config.model!r}: {exc}") from exc


def encode_corpus(manifest: str | Path, config: RunnerConfig, model=None) -> np.ndarray:
    """Encode every manifest record in order; writes EMBF and returns the matrix.

    `model` may be any object with a SentenceTransformer-style
    encode(texts, batch_size=..., ...) method; by default the configured
    model identifier is loaded through the SentenceTransformer interface.
    The model's native pooling is used untouched.
    """
    texts = read_manifest_texts(manifest)
    if not texts:
        raise RunnerError(f"{manifest}: manifest holds no records, nothing to encode")
    if model is None:
        model = load_model(config)
    embeddings = model.encode(
        texts,
        batch_size=config.batch_size,
        convert_to_numpy=True,
        normalize_embeddings=config.normalize,
        show_progress_bar=False,
    )
    matrix = np.asarray(embeddings, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(texts):
        raise RunnerError(
            f"row-count mismatch: model returned shape {matrix.shape} "
            f"for {len(texts)} records"
        )
    tag = f"{config.model} [{np.asarray(embeddings).dtype}]"
    write_embf(matrix, tag, config.output)
    return matrix


FALLBACK_ROSTER = [
    "EmbeddingGemma(0.3B)",
    "gte multilingual-base(0.3B)",
    "gte-large-en-v1.5(0.4B)",
    "nomic-embed-text-v2-moe(0.5B)",
    "Multilingual-e5-large(0.6B)",
    "Qwen3 Embedding(0.6B)",
    "gte-Qwen2-1.5B-instruct",
    "Qwen3 Embedding(4B)",
    "GritLM-7B",
    "gte-Qwen2-7B instruct",
    "e5-mistral-7b-instruct",
    "Qwen3 Embedding(8B)",
    "llama-embed-Nemtron(8B)",
    "bge-multilingual-gemma2(9B)",
]


def list_models(prefix: str = "", suggestion_file: str | Path | None = None) -> list[str]:
    """Candidate model identifiers from the suggestion file (fallback: built-in roster)."""
    names = None
    if suggestion_file is not None:
        path = Path(suggestion_file)
        if path.exists():
            names = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    else:
        try:
            raw = resources.files("seqembed_runner").joinpath("models.txt").read_text("utf-8")
            names = [ln for ln in raw.splitlines() if ln.strip()]
        except (FileNotFoundError, OSError):
            names = None
    if names is None:
        names = list(FALLBACK_ROSTER)
    lowered = prefix.lower()
    return [n for n in names if n.lower().startswith(lowered)]
