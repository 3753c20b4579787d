"""Weight-space merging over checkpoint tensor maps, plus the TMAP container.

Kernels: SLERP, linear interpolation, (weighted) soup averaging, LoRA folding.
All accumulation happens in float64; storage stays float32.

TMAP layout (integers little-endian):
    magic "TMAP" | version u8=1 | count u32
    per tensor (lexicographic by name):
        name_len u32 | name utf-8 | rank u8 | dims u32 x rank | float32 payload
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TMAP"
VERSION = 1


class MergeError(ValueError):
    pass


class StructureError(MergeError):
    """Tensor name sets or shapes disagree between inputs."""


class TensorMapFormatError(MergeError):
    pass


class TensorMap:
    """Ordered name -> float32 ndarray map; iteration order is lexicographic."""

    def __init__(self, entries: dict[str, np.ndarray] | None = None):
        self._entries: dict[str, np.ndarray] = {}
        for name, data in (entries or {}).items():
            self[name] = data

    def __setitem__(self, name: str, data) -> None:
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise MergeError(f"tensor {name!r} contains non-finite values")
        self._entries[name] = arr
        self._entries = dict(sorted(self._entries.items()))

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorMap):
            return NotImplemented
        return self.names() == other.names() and all(
            self[n].shape == other[n].shape and np.array_equal(self[n], other[n])
            for n in self.names()
        )


@dataclass(frozen=True)
class SlerpParams:
    t: float = 0.5
    parallel_threshold: float = 1e-7
    antipodal_threshold: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise MergeError(f"t={self.t} outside [0, 1]")


@dataclass
class SlerpOutcome:
    values: np.ndarray
    angle: float
    used_fallback: bool


@dataclass
class MergeReport:
    """Per-tensor great-circle angles and linear-fallback flags."""

    angles: dict[str, float] = field(default_factory=dict)
    fallbacks: dict[str, bool] = field(default_factory=dict)

    def render(self) -> str:
        lines = ["tensor\tangle_radians\tlinear_fallback"]
        for name in sorted(self.angles):
            lines.append(f"{name}\t{self.angles[name]:.9f}\t{self.fallbacks[name]}")
        return "\n".join(lines) + "\n"


def slerp_vectors(u, v, t: float, params: SlerpParams | None = None) -> SlerpOutcome:
    """Great-circle interpolation; angle from normalized vectors, weights on raw ones.

    Near-parallel or near-antipodal pairs fall back to linear interpolation.
    """
    params = params or SlerpParams(t=t)
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise StructureError(f"vector lengths differ: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise MergeError("slerp is undefined for a zero vector")
    if t == 0.0:
        return SlerpOutcome(values=a.copy(), angle=0.0, used_fallback=False)
    if t == 1.0:
        return SlerpOutcome(values=b.copy(), angle=0.0, used_fallback=False)
    cos_omega = float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0))
    omega = math.acos(cos_omega)
    if omega < params.parallel_threshold or math.pi - omega < params.antipodal_threshold:
        return SlerpOutcome(values=(1.0 - t) * a + t * b, angle=omega, used_fallback=True)
    sin_omega = math.sin(omega)
    wa = math.sin((1.0 - t) * omega) / sin_omega
    wb = math.sin(t * omega) / sin_omega
    return SlerpOutcome(values=wa * a + wb * b, angle=omega, used_fallback=False)


def _check_structure(maps: list[TensorMap]) -> None:
    ref = maps[0]
    for other in maps[1:]:
        if other.names() != ref.names():
            missing = set(ref.names()) ^ set(other.names())
            first = sorted(missing)[0] if missing else "<order>"
            raise StructureError(f"tensor name sets differ, first offender: {first!r}")
        for name in ref.names():
            if other[name].shape != ref[name].shape:
                raise StructureError(
                    f"shape mismatch for {name!r}: "
                    f"{ref[name].shape} vs {other[name].shape}"
                )


def slerp_merge(a: TensorMap, b: TensorMap, params: SlerpParams) -> tuple[TensorMap, MergeReport]:
    """Per-tensor SLERP on flattened weights; returns the merge and its report."""
    _check_structure([a, b])
    out = TensorMap()
    report = MergeReport()
    for name in a.names():
        if params.t == 0.0:
            out[name] = a[name]
            report.angles[name] = 0.0
            report.fallbacks[name] = False
            continue
        if params.t == 1.0:
            out[name] = b[name]
            report.angles[name] = 0.0
            report.fallbacks[name] = False
            continue
        outcome = slerp_vectors(a[name].ravel(), b[name].ravel(), params.t, params)
        out[name] = outcome.values.reshape(a[name].shape).astype(np.float32)
        report.angles[name] = outcome.angle
        report.fallbacks[name] = outcome.used_fallback
    return out, report


def lerp_merge(a: TensorMap, b: TensorMap, t: float) -> TensorMap:
    """Element-wise (1-t) a + t b."""
    if not 0.0 <= t <= 1.0:
        raise MergeError(f"t={t} outside [0, 1]")
    _check_structure([a, b])
    out = TensorMap()
    for name in a.names():
        if t == 0.0:
            out[name] = a[name]
        elif t == 1.0:
            out[name] = b[name]
        else:
            out[name] = (
                (1.0 - t) * a[name].astype(np.float64) + t * b[name].astype(np.float64)
            ).astype(np.float32)
    return out


def soup(models: list[TensorMap], weights: list[float] | None = None) -> TensorMap:
    """Weighted element-wise mean; contributions are summed in a canonical
    (per-element sorted) order so the result is independent of input order."""
    if not models:
        raise MergeError("soup needs at least one model")
    _check_structure(models)
    if weights is None:
        weights = [1.0] * len(models)
    if len(weights) != len(models):
        raise MergeError("one weight per model required")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0.0):
        raise MergeError("weights must be non-negative")
    total = w.sum()
    if total <= 0.0:
        raise MergeError("weights sum to zero")
    w = w / total
    if len(models) == 1:
        return TensorMap({n: models[0][n] for n in models[0].names()})
    out = TensorMap()
    for name in models[0].names():
        contribs = np.stack(
            [w[i] * models[i][name].astype(np.float64) for i in range(len(models))]
        )
        contribs.sort(axis=0)
        out[name] = np.add.reduce(contribs, axis=0).astype(np.float32)
    return out


@dataclass
class LoraAdapter:
    """Per adapted tensor: low-rank factors A (r x in), B (out x r) and a scale."""

    entries: dict[str, tuple[np.ndarray, np.ndarray, float]]

    def rank(self, name: str) -> int:
        return self.entries[name][0].shape[0]


def lora_fold(base: TensorMap, adapter: LoraAdapter) -> TensorMap:
    """Fold each adapter delta (alpha / r) B A into its base tensor."""
    out = TensorMap()
    for name in base.names():
        out[name] = base[name]
    for name, (A, B, alpha) in adapter.entries.items():
        if name not in base:
            raise StructureError(f"adapted tensor {name!r} missing from base")
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[1]:
            raise StructureError(f"inconsistent adapter factor shapes for {name!r}")
        W = base[name]
        if W.shape != (B.shape[0], A.shape[1]):
            raise StructureError(
                f"adapter for {name!r} implies shape {(B.shape[0], A.shape[1])}, "
                f"base has {W.shape}"
            )
        r = A.shape[0]
        out[name] = (W.astype(np.float64) + (alpha / r) * (B @ A)).astype(np.float32)
    return out


# --- TMAP container -------------------------------------------------------


def save_tensormap(tensor_map: TensorMap, destination: str | Path) -> None:
    chunks = [MAGIC, struct.pack("<BI", VERSION, len(tensor_map))]
    for name, data in tensor_map.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(np.ascontiguousarray(data, dtype="<f4").tobytes())
    Path(destination).write_bytes(b"".join(chunks))


def load_tensormap(source: str | Path) -> TensorMap:
    raw = Path(source).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise TensorMapFormatError(f"{source}: not a TMAP file")
    if len(raw) < 9:
        raise TensorMapFormatError(f"{source}: truncated header")
    version, count = struct.unpack_from("<BI", raw, 4)
    if version != VERSION:
        raise TensorMapFormatError(f"{source}: unsupported TMAP version {version}")
    offset = 9
    out = TensorMap()
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            if len(raw) < offset + name_len:
                raise TensorMapFormatError(f"{source}: truncated tensor name")
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
        except struct.error as exc:
            raise TensorMapFormatError(f"{source}: truncated tensor header") from exc
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        nbytes = size * 4
        if len(raw) < offset + nbytes:
            raise TensorMapFormatError(f"{source}: truncated payload for {name!r}")
        if name in out:
            raise TensorMapFormatError(f"{source}: duplicate tensor name {name!r}")
        data = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).reshape(dims)
        if not np.all(np.isfinite(data)):
            raise TensorMapFormatError(f"{source}: non-finite value in {name!r}")
        out[name] = data.copy()
        offset += nbytes
    return out


# --- adapter container convention ----------------------------------------

LORA_A_SUFFIX = ".lora_A"
LORA_B_SUFFIX = ".lora_B"
LORA_ALPHA_SUFFIX = ".lora_alpha"


def adapter_from_tensormap(tensor_map: TensorMap) -> LoraAdapter:
    """Read an adapter stored as {name}.lora_A / .lora_B / optional .lora_alpha."""
    entries: dict[str, tuple[np.ndarray, np.ndarray, float]] = {}
    for name in tensor_map.names():
        if not name.endswith(LORA_A_SUFFIX):
            continue
        target = name[: -len(LORA_A_SUFFIX)]
        b_name = target + LORA_B_SUFFIX
        if b_name not in tensor_map:
            raise StructureError(f"adapter factor {b_name!r} missing")
        alpha_name = target + LORA_ALPHA_SUFFIX
        alpha = (
            float(tensor_map[alpha_name].ravel()[0]) if alpha_name in tensor_map else 1.0
        )
        entries[target] = (tensor_map[name], tensor_map[b_name], alpha)
    if not entries:
        raise StructureError("no .lora_A/.lora_B tensor pairs found in adapter map")
    return LoraAdapter(entries=entries)


def adapter_to_tensormap(adapter: LoraAdapter) -> TensorMap:
    out = TensorMap()
    for name, (A, B, alpha) in adapter.entries.items():
        out[name + LORA_A_SUFFIX] = A
        out[name + LORA_B_SUFFIX] = B
        out[name + LORA_ALPHA_SUFFIX] = np.array([alpha], dtype=np.float32)
    return out
