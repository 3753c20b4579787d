"""Generation of the six numeric sequence families and their text corpus.

Each family has one canonical enumeration; a corpus is built by slicing that
enumeration into disjoint contiguous windows and serializing each window as a
comma-separated string. Generation is fully deterministic (no RNG anywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path


class FamilyKind(IntEnum):
    """The six sequence families; integer codes double as true cluster labels."""

    CONSECUTIVE = 0
    EVEN = 1
    ODD = 2
    PRIME = 3
    RECAMAN = 4
    COMPOSITE = 5

    @property
    def display_name(self) -> str:
        return self.name.lower()


FAMILY_BY_NAME = {f.name.lower(): f for f in FamilyKind}


class SerializationError(ValueError):
    """A single number does not fit inside the character budget."""


class ManifestError(ValueError):
    """Malformed corpus manifest file."""


@dataclass(frozen=True)
class SequenceRecord:
    family: FamilyKind
    chunk_index: int
    values: list[int]
    text: str


@dataclass(frozen=True)
class CorpusSpec:
    families: tuple[FamilyKind, ...] = tuple(FamilyKind)
    sequences_per_family: int = 4
    length: int = 50
    max_chars: int = 20000


@dataclass(frozen=True)
class Corpus:
    records: list[SequenceRecord]
    labels: list[int]
    spec: CorpusSpec = field(default_factory=CorpusSpec)


def _sieve(limit: int) -> bytearray:
    """Byte flags for 0..limit, 1 where the index is prime."""
    flags = bytearray([1]) * (limit + 1)
    flags[0:2] = b"\x00\x00"
    for p in range(2, int(limit**0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = bytearray(len(flags[p * p :: p]))
    return flags


def primes(count: int) -> list[int]:
    """First `count` primes, growing the sieve bound until enough are found."""
    limit = max(32, count * 16)
    while True:
        flags = _sieve(limit)
        found = [i for i in range(2, limit + 1) if flags[i]]
        if len(found) >= count:
            return found[:count]
        limit *= 2


def composites(count: int) -> list[int]:
    """First `count` composite numbers (4, 6, 8, 9, 10, ...)."""
    limit = max(32, count * 2 + 8)
    while True:
        flags = _sieve(limit)
        found = [i for i in range(4, limit + 1) if not flags[i]]
        if len(found) >= count:
            return found[:count]
        limit *= 2


def recaman(count: int) -> list[int]:
    """First `count` Recaman terms: a(0)=0, a(n)=a(n-1)-n if positive and new, else a(n-1)+n."""
    terms = [0]
    seen = {0}
    for n in range(1, count):
        back = terms[-1] - n
        nxt = back if back > 0 and back not in seen else terms[-1] + n
        terms.append(nxt)
        seen.add(nxt)
    return terms[:count]


def enumerate_family(family: FamilyKind, count: int) -> list[int]:
    """First `count` terms of the family's canonical enumeration."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if family is FamilyKind.CONSECUTIVE:
        return list(range(1, count + 1))
    if family is FamilyKind.EVEN:
        return list(range(2, 2 * count + 1, 2))
    if family is FamilyKind.ODD:
        return list(range(1, 2 * count, 2))
    if family is FamilyKind.PRIME:
        return primes(count)
    if family is FamilyKind.RECAMAN:
        return recaman(count)
    if family is FamilyKind.COMPOSITE:
        return composites(count)
    raise ValueError(f"unknown family {family!r}")


def serialize_sequence(values: list[int], max_chars: int) -> str:
    """Join values with ", ", truncating at the last whole number that fits.

    Raises SerializationError if even the first number alone exceeds the cap.
    """
    if not values:
        raise ValueError("values must be non-empty")
    first = str(values[0])
    if len(first) > max_chars:
        raise SerializationError(
            f"first value {values[0]} needs {len(first)} chars, cap is {max_chars}"
        )
    parts = [first]
    total = len(first)
    for v in values[1:]:
        piece = ", " + str(v)
        if total + len(piece) > max_chars:
            break
        parts.append(piece)
        total += len(piece)
    return "".join(parts)


def generate_family_windows(
    family: FamilyKind, window_count: int, length: int, max_chars: int = 20000
) -> list[SequenceRecord]:
    """Slice the family enumeration into `window_count` disjoint windows of `length`."""
    if window_count < 1 or length < 1:
        raise ValueError("window_count and length must be >= 1")
    terms = enumerate_family(family, window_count * length)
    records = []
    for k in range(window_count):
        chunk = terms[k * length : (k + 1) * length]
        records.append(
            SequenceRecord(
                family=family,
                chunk_index=k,
                values=chunk,
                text=serialize_sequence(chunk, max_chars),
            )
        )
    return records


def build_corpus(spec: CorpusSpec | None = None) -> Corpus:
    """Deterministic corpus in family-major, chunk-minor order."""
    spec = spec or CorpusSpec()
    if not spec.families:
        raise ValueError("spec.families must be non-empty")
    records: list[SequenceRecord] = []
    for family in spec.families:
        records.extend(
            generate_family_windows(
                family, spec.sequences_per_family, spec.length, spec.max_chars
            )
        )
    labels = [int(r.family) for r in records]
    return Corpus(records=records, labels=labels, spec=spec)


MANIFEST_HEADER = "SEQCORPUS 1"


def write_manifest(corpus: Corpus, destination: str | Path) -> None:
    """Line-oriented manifest: header, then label<TAB>family<TAB>chunk<TAB>text."""
    lines = [MANIFEST_HEADER]
    for record in corpus.records:
        lines.append(
            f"{int(record.family)}\t{record.family.display_name}"
            f"\t{record.chunk_index}\t{record.text}"
        )
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(source: str | Path) -> list[tuple[int, str, int, str]]:
    """Parse a manifest into (label, family_name, chunk_index, text) tuples."""
    raw = Path(source).read_text(encoding="utf-8")
    lines = raw.splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ManifestError(f"bad manifest header in {source}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestError(f"line {i}: expected 4 tab-separated fields")
        label, family_name, chunk, text = fields
        rows.append((int(label), family_name, int(chunk), text))
    return rows
