"""File formats: EMBF binary embedding container, CSV interop, report CSV.

EMBF layout (all integers little-endian):
    magic "EMBF" | version u8=1 | n u32 | d u32 | tag_len u32 | tag utf-8
    | n*d float32 row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"EMBF"
VERSION = 1

REPORT_HEADER = (
    "model_name,silhouette_true_groups,davies_bouldin_true_groups,"
    "silhouette_kmeans,davies_bouldin_kmeans"
)


class FormatError(ValueError):
    """Base class for container format violations."""


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


class RaggedRowsError(FormatError):
    pass


@dataclass
class EmbeddingMatrix:
    """n x d float32 matrix; row i corresponds to corpus record i."""

    data: np.ndarray
    source_model: str = ""

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(f"expected 2-D matrix with n,d >= 1, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError("embedding matrix contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def write_embeddings(matrix: EmbeddingMatrix, destination: str | Path) -> None:
    """Serialize to the EMBF binary container (validates before writing)."""
    if not np.all(np.isfinite(matrix.data)):
        raise NonFiniteError("refusing to write non-finite matrix")
    tag = matrix.source_model.encode("utf-8")
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    blob = (
        MAGIC
        + struct.pack("<BIII", VERSION, matrix.n, matrix.d, len(tag))
        + tag
        + payload
    )
    Path(destination).write_bytes(blob)


def read_embeddings(source: str | Path) -> EmbeddingMatrix:
    """Inverse of write_embeddings; validates magic, version, size, finiteness."""
    raw = Path(source).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{source}: not an EMBF file")
    if len(raw) < 17:
        raise TruncatedError(f"{source}: truncated header")
    version, n, d, tag_len = struct.unpack_from("<BIII", raw, 4)
    if version != VERSION:
        raise BadVersionError(f"{source}: unsupported EMBF version {version}")
    offset = 17
    if len(raw) < offset + tag_len:
        raise TruncatedError(f"{source}: truncated model tag")
    tag = raw[offset : offset + tag_len].decode("utf-8")
    offset += tag_len
    expected = n * d * 4
    if len(raw) - offset < expected:
        raise TruncatedError(
            f"{source}: payload holds {len(raw) - offset} bytes, header declares {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{source}: non-finite entry in payload")
    return EmbeddingMatrix(data=data.copy(), source_model=tag)


def read_embeddings_csv(source: str | Path, source_model: str = "") -> EmbeddingMatrix:
    """Parse a plain CSV of decimal floats, one row per line, uniform arity."""
    lines = [ln for ln in Path(source).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{source}: empty CSV")
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise RaggedRowsError(f"{source}: line {i} has {len(tokens)} fields, expected {width}")
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise FormatError(f"{source}: line {i}: {exc}") from exc
    return EmbeddingMatrix(data=np.array(rows, dtype=np.float32), source_model=source_model)


def write_coords_csv(coords: np.ndarray, destination: str | Path) -> None:
    """Dump a real matrix as the plain CSV format accepted by read_embeddings_csv."""
    lines = [",".join(repr(float(v)) for v in row) for row in np.asarray(coords)]
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ReportRow:
    model_name: str
    silhouette_true: float
    dbi_true: float
    silhouette_kmeans: float
    dbi_kmeans: float

    def render(self) -> str:
        return (
            f"{self.model_name},{self.silhouette_true:.4f},{self.dbi_true:.4f},"
            f"{self.silhouette_kmeans:.4f},{self.dbi_kmeans:.4f}"
        )


def write_report(rows: list[ReportRow], destination: str | Path) -> None:
    """Write the four-metric report CSV with 4-decimal rendering."""
    if not rows:
        raise ValueError("rows must be non-empty")
    lines = [REPORT_HEADER] + [r.render() for r in rows]
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def append_report_row(row: ReportRow, destination: str | Path) -> None:
    """Append one row, creating the file with its header if needed."""
    path = Path(destination)
    if path.exists():
        with path.open("a", encoding="utf-8") as fh:
            fh.write(row.render() + "\n")
    else:
        write_report([row], path)
