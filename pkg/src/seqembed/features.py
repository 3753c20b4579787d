"""Built-in non-learned featurizer: hashed character n-gram counts, L2-normalized.

Keeps the full pipeline runnable without any external embedding model.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_DIM = 256
NGRAM_SIZES = (1, 2, 3)


def _bucket(ngram: str, dim: int) -> int:
    digest = hashlib.md5(ngram.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


def featurize_text(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Unit-norm float32 vector of hashed character n-gram counts."""
    counts = np.zeros(dim, dtype=np.float64)
    for size in NGRAM_SIZES:
        for i in range(len(text) - size + 1):
            counts[_bucket(text[i : i + size], dim)] += 1.0
    norm = np.linalg.norm(counts)
    if norm > 0.0:
        counts /= norm
    return counts.astype(np.float32)


def featurize_corpus(texts: list[str], dim: int = DEFAULT_DIM) -> np.ndarray:
    return np.stack([featurize_text(t, dim) for t in texts])
