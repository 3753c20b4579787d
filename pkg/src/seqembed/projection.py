"""Exact dense t-SNE: perplexity calibration, symmetric affinities, 2D descent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import pairwise_distances

P_FLOOR = 1e-12


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class TsneParams:
    perplexity: float | None = None  # None -> 30, or 10 when n < 50
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_switch_iter: int = 250
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0


@dataclass
class Projection2D:
    coords: np.ndarray
    final_kl: float
    warnings: list[str] = field(default_factory=list)


def default_perplexity(n: int) -> float:
    return 10.0 if n < 50 else 30.0


def _row_entropy(d2: np.ndarray, sigma: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and conditionals for one row at bandwidth sigma."""
    logits = -d2 / (2.0 * sigma * sigma)
    logits -= logits.max()
    p = np.exp(logits)
    total = p.sum()
    p /= total
    nz = p > 0
    entropy = float(-np.sum(p[nz] * np.log(p[nz])))
    return entropy, p


def row_perplexity(distance_row, sigma: float) -> float:
    """exp(entropy) of the conditional distribution at bandwidth sigma."""
    d = np.asarray(distance_row, dtype=np.float64)
    entropy, _ = _row_entropy(d * d, sigma)
    return math.exp(entropy)


def calibrate_sigma(
    distance_row, target_perplexity: float, warnings: list[str] | None = None
) -> float:
    """Bisection on log(sigma) until the row perplexity matches the target.

    Perplexity is monotone increasing in sigma with range (1, m] for m
    neighbors; unattainable targets clamp to the bracket edge with a warning.
    """
    d = np.asarray(distance_row, dtype=np.float64)
    if d.size < 2:
        raise ProjectionError("calibration needs at least 2 neighbor distances")
    if np.all(d == 0.0):
        if warnings is not None:
            warnings.append("degenerate row: all neighbor distances zero")
        return 1.0
    d2 = d * d
    target_entropy = math.log(target_perplexity)
    lo, hi = -30.0, 30.0
    entropy_hi, _ = _row_entropy(d2, math.exp(hi))
    if target_entropy >= entropy_hi:
        if warnings is not None:
            warnings.append(
                f"perplexity {target_perplexity:g} unattainable for {d.size} neighbors; clamped"
            )
        return math.exp(hi)
    entropy_lo, _ = _row_entropy(d2, math.exp(lo))
    if target_entropy <= entropy_lo:
        if warnings is not None:
            warnings.append(f"perplexity {target_perplexity:g} below bracket; clamped")
        return math.exp(lo)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        entropy, _ = _row_entropy(d2, math.exp(mid))
        if abs(entropy - target_entropy) < 1e-5:
            return math.exp(mid)
        if entropy > target_entropy:
            hi = mid
        else:
            lo = mid
    return math.exp(0.5 * (lo + hi))


def conditional_probabilities(
    X, perplexity: float, warnings: list[str] | None = None
) -> np.ndarray:
    """Row-stochastic P(j|i) with per-row bandwidths calibrated to the perplexity."""
    D = pairwise_distances(X)
    n = D.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        others = np.delete(D[i], i)
        sigma = calibrate_sigma(others, perplexity, warnings)
        d2 = np.delete(D[i] * D[i], i)
        _, p = _row_entropy(d2, sigma)
        P[i, np.arange(n) != i] = p
    return P


def joint_probabilities(X, perplexity: float, warnings: list[str] | None = None) -> np.ndarray:
    """Symmetrized affinities (P + P^T) / 2n, floored at 1e-12, zero diagonal."""
    A = np.asarray(getattr(X, "data", X), dtype=np.float64)
    n = A.shape[0]
    if n < 3:
        raise ProjectionError("t-SNE affinities need n >= 3")
    cond = conditional_probabilities(A, perplexity, warnings)
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return P


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def _student_t_q(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff2 = np.sum((Y[:, None, :] - Y[None, :, :]) ** 2, axis=2)
    num = 1.0 / (1.0 + diff2)
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), P_FLOOR)
    return Q, num


def tsne(X, params: TsneParams | None = None) -> Projection2D:
    """Gradient descent on KL(P || Q) with a 1-dof Student-t low-dimensional kernel."""
    params = params or TsneParams()
    A = np.asarray(getattr(X, "data", X), dtype=np.float64)
    n = A.shape[0]
    if n < 3:
        raise ProjectionError(f"t-SNE needs n >= 3, got n={n}")
    warnings: list[str] = []
    perplexity = params.perplexity if params.perplexity is not None else default_perplexity(n)
    if perplexity <= 1.0:
        raise ProjectionError("perplexity must exceed 1")
    if perplexity > (n - 1) / 3.0:
        warnings.append(
            f"perplexity {perplexity:g} exceeds (n-1)/3 = {(n - 1) / 3.0:g}; "
            "neighborhoods cover most of the data"
        )
    if perplexity > n - 1:
        warnings.append(f"perplexity clamped from {perplexity:g} to n-1 = {n - 1}")
        perplexity = float(n - 1)

    P = joint_probabilities(A, perplexity, warnings)
    rng = np.random.default_rng(params.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    for it in range(params.iterations):
        exaggeration = params.early_exaggeration if it < params.exaggeration_iters else 1.0
        momentum = params.momentum_early if it < params.momentum_switch_iter else params.momentum_late
        Q, num = _student_t_q(Y)
        W = (exaggeration * P - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        if not np.all(np.isfinite(grad)):
            raise ProjectionError(f"non-finite gradient at iteration {it}")
        velocity = momentum * velocity - params.learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
    Q, _ = _student_t_q(Y)
    return Projection2D(coords=Y, final_kl=_kl_divergence(P, Q), warnings=warnings)


PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def scatter_svg(
    projection: Projection2D,
    labels,
    destination,
    class_names: list[str] | None = None,
    title: str = "",
) -> None:
    """Self-contained deterministic SVG scatter, one color per label class."""
    from pathlib import Path

    coords = np.asarray(projection.coords, dtype=np.float64)
    lab = np.asarray(labels)
    if lab.shape[0] != coords.shape[0]:
        raise ValueError(f"{lab.shape[0]} labels for {coords.shape[0]} points")
    classes = sorted(set(int(v) for v in lab))
    if class_names is None:
        class_names = [f"class {c}" for c in classes]
    if len(class_names) != len(classes):
        raise ValueError("class_names length must match number of classes")

    width, height, margin, legend_w = 640, 480, 40, 150
    plot_w, plot_h = width - 2 * margin - legend_w, height - 2 * margin
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo == 0.0, 1.0, hi - lo)

    def sx(x):
        return margin + (x - lo[0]) / span[0] * plot_w

    def sy(y):
        return margin + plot_h - (y - lo[1]) / span[1] * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{title}</text>'
        )
    for (x, y), c in zip(coords, lab):
        color = PALETTE[classes.index(int(c)) % len(PALETTE)]
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="{color}" '
            f'fill-opacity="0.85"/>'
        )
    lx = width - legend_w - margin // 2
    for idx, (c, name) in enumerate(zip(classes, class_names)):
        ly = margin + 20 * idx
        color = PALETTE[idx % len(PALETTE)]
        parts.append(f'<circle cx="{lx}" cy="{ly}" r="5" fill="{color}"/>')
        parts.append(
            f'<text x="{lx + 12}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    Path(destination).write_text("\n".join(parts) + "\n", encoding="utf-8")
