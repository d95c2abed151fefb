"""Feature extraction and 2-D embedding of explanation images.

Features are a deterministic handcrafted descriptor (color histograms,
downsampled grayscale, gradient orientations). The reducer optimizes a
2-D layout over three pair classes (near, mid-near, further) with a phased
weight schedule and Adam, from a PCA initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, TooFewPoints
from .imaging import RgbImage, luma, resize_bilinear_float
from .rng import derive_seed, generator

FEATURE_DIM = 24 + 64 + 9  # histograms + downsample + orientations

NEAR_DENOM = 10.0
MID_DENOM = 10000.0


@dataclass(frozen=True)
class EmbeddingConfig:
    n_neighbors: int = 10
    mid_near_ratio: float = 0.5
    far_pair_ratio: float = 2.0
    iterations: int = 450
    learning_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise InvalidParams("n_neighbors must be >= 1")
        if self.mid_near_ratio <= 0 or self.far_pair_ratio <= 0:
            raise InvalidParams("pair ratios must be > 0")
        if self.iterations < 1:
            raise InvalidParams("iterations must be >= 1")


@dataclass
class Embedding2D:
    """Final coordinates plus the exact pair lists the optimizer used."""

    coords: np.ndarray
    near_pairs: np.ndarray
    mid_near_pairs: np.ndarray
    far_pairs: np.ndarray


def extract_features(image: RgbImage) -> np.ndarray:
    """97-dim descriptor: 3x8 color histogram, 8x8 gray, 9 orientation bins.

    Each histogram block is normalized to sum 1; a zero-gradient image gets
    the uniform orientation histogram so constant inputs stay valid.
    """
    px = image.pixels
    n = px.shape[0] * px.shape[1]
    hists = []
    for c in range(3):
        counts = np.bincount(px[..., c].ravel() >> 5, minlength=8)
        hists.append(counts.astype(np.float64) / n)

    gray = luma(image)
    small = resize_bilinear_float(gray, 8, 8).ravel() / 255.0

    # Central differences inside, one-sided at borders; a 1-sample axis has
    # no gradient at all.
    gy = np.gradient(gray, axis=0) if gray.shape[0] > 1 else np.zeros_like(gray)
    gx = np.gradient(gray, axis=1) if gray.shape[1] > 1 else np.zeros_like(gray)
    magnitude = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((theta / np.pi * 9).astype(np.int64), 8)
    orient = np.bincount(bins.ravel(), weights=magnitude.ravel(), minlength=9)
    total = orient.sum()
    orient = np.full(9, 1.0 / 9.0) if total <= 0 else orient / total

    return np.concatenate([*hists, small, orient])


def select_near_pairs(features: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Exact k-nearest-neighbor pairs (anchor, neighbor), ties to lower index."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n <= n_neighbors:
        raise TooFewPoints(f"need more than {n_neighbors} points, got {n}")
    sq = (x**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, np.inf)
    pairs = np.empty((n * n_neighbors, 2), dtype=np.int64)
    indices = np.arange(n)
    for i in range(n):
        order = np.lexsort((indices, d2[i]))
        pairs[i * n_neighbors : (i + 1) * n_neighbors, 0] = i
        pairs[i * n_neighbors : (i + 1) * n_neighbors, 1] = order[:n_neighbors]
    return pairs


def sample_mid_near_pairs(features: np.ndarray, count_per_point: int, seed: int) -> np.ndarray:
    """Mid-near pairs: per anchor and pair, draw 6 distinct non-anchor points
    and keep the second closest.

    Draw order is part of the contract: anchors ascending, pairs in order,
    one ``choice(n - 1, 6, replace=False)`` per pair from the stream
    ``generator(seed, "mid-near")`` (values >= anchor shifted up by one).
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < 7:
        raise TooFewPoints(f"mid-near sampling needs >= 7 points, got {n}")
    if count_per_point < 1:
        return np.empty((0, 2), dtype=np.int64)
    rng = generator(seed, "mid-near")
    pairs = np.empty((n * count_per_point, 2), dtype=np.int64)
    row = 0
    for anchor in range(n):
        for _ in range(count_per_point):
            candidates = rng.choice(n - 1, size=6, replace=False)
            candidates[candidates >= anchor] += 1
            dists = ((x[candidates] - x[anchor]) ** 2).sum(axis=1)
            order = np.lexsort((candidates, dists))
            pairs[row] = (anchor, candidates[order[1]])
            row += 1
    return pairs


def sample_further_pairs(
    features: np.ndarray, near_pairs: np.ndarray, count_per_point: int, seed: int
) -> np.ndarray:
    """Distinct random partners per anchor, rejecting self and near pairs."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if count_per_point < 1:
        return np.empty((0, 2), dtype=np.int64)
    near_sets = [set() for _ in range(n)]
    for i, j in np.asarray(near_pairs).tolist():
        near_sets[i].add(j)
    rng = generator(seed, "far")
    pairs = np.empty((n * count_per_point, 2), dtype=np.int64)
    row = 0
    for anchor in range(n):
        excluded = near_sets[anchor]
        eligible = n - 1 - len(excluded)
        if eligible < count_per_point:
            raise TooFewPoints(
                f"anchor {anchor} has {eligible} eligible far partners, needs {count_per_point}"
            )
        chosen = []
        seen = set()
        while len(chosen) < count_per_point:
            j = int(rng.integers(0, n))
            if j == anchor or j in excluded or j in seen:
                continue
            seen.add(j)
            chosen.append(j)
        for j in chosen:
            pairs[row] = (anchor, j)
            row += 1
    return pairs


def pacmap_loss_and_grad(coords: np.ndarray, pairs, phase_weights):
    """Loss over the three pair classes and its exact analytic gradient.

    With ``t = |y_i - y_j|^2 + 1``: near terms are ``t / (10 + t)``, mid-near
    ``t / (10000 + t)``, far ``1 / (1 + t)``, each scaled by its phase weight.
    """
    y = np.asarray(coords, dtype=np.float64)
    near, mid, far = pairs
    w_nb, w_mn, w_fp = phase_weights
    loss = 0.0
    grad = np.zeros_like(y)

    def accumulate(pair_array, weight, kind):
        nonlocal loss
        if weight == 0 or len(pair_array) == 0:
            return
        i = pair_array[:, 0]
        j = pair_array[:, 1]
        diff = y[i] - y[j]
        t = (diff**2).sum(axis=1) + 1.0
        if kind == "attract_near":
            loss_terms = t / (NEAR_DENOM + t)
            dldt = NEAR_DENOM / (NEAR_DENOM + t) ** 2
        elif kind == "attract_mid":
            loss_terms = t / (MID_DENOM + t)
            dldt = MID_DENOM / (MID_DENOM + t) ** 2
        else:
            loss_terms = 1.0 / (1.0 + t)
            dldt = -1.0 / (1.0 + t) ** 2
        loss += weight * float(loss_terms.sum())
        contrib = (weight * dldt)[:, None] * (2.0 * diff)
        np.add.at(grad, i, contrib)
        np.add.at(grad, j, -contrib)

    accumulate(near, w_nb, "attract_near")
    accumulate(mid, w_mn, "attract_mid")
    accumulate(far, w_fp, "repel")
    return loss, grad


def phase_weights(step: int):
    """Three-phase schedule over 0-based optimizer steps."""
    if step < 100:
        frac = step / 100.0
        return 2.0, 1000.0 * (1.0 - frac) + 3.0 * frac, 1.0
    if step < 200:
        return 3.0, 3.0, 1.0
    return 1.0, 0.0, 1.0


def standardize_features(features: np.ndarray):
    """Z-score per dimension over the rows; constant dimensions are dropped."""
    x = np.asarray(features, dtype=np.float64)
    rows = x.shape[0]
    keep = x.max(axis=0) != x.min(axis=0)
    x = x[:, keep]
    if x.shape[1] == 0:
        return np.zeros((rows, 0))
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return (x - mean) / std


def pca_init_coords(features: np.ndarray) -> np.ndarray:
    """Top-2 principal components of the mean-centered rows, scaled by 0.01.

    Sign convention: each component's largest-magnitude entry is positive.
    Missing rank is padded with zero columns.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    centered = x - x.mean(axis=0)
    coords = np.zeros((n, 2))
    if centered.shape[1] == 0:
        return coords
    cov = centered.T @ centered / max(1, n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    take = min(2, centered.shape[1])
    for out_col, col in enumerate(range(centered.shape[1] - 1, centered.shape[1] - 1 - take, -1)):
        vec = eigvecs[:, col]
        if vec[int(np.argmax(np.abs(vec)))] < 0:
            vec = -vec
        coords[:, out_col] = centered @ vec
    return coords * 0.01


def _round_count(value: float) -> int:
    return int(np.floor(value + 0.5))


def pacmap_embed(features: np.ndarray, config: EmbeddingConfig) -> Embedding2D:
    """Standardize, build pairs, and optimize coordinates with Adam."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < max(config.n_neighbors + 1, 7):
        raise TooFewPoints(
            f"embedding needs >= {max(config.n_neighbors + 1, 7)} points, got {n}"
        )
    z = standardize_features(x)
    near = select_near_pairs(z, config.n_neighbors)
    mid = sample_mid_near_pairs(
        z, _round_count(config.mid_near_ratio * config.n_neighbors), derive_seed(config.seed, "mid")
    )
    far = sample_further_pairs(
        z, near, _round_count(config.far_pair_ratio * config.n_neighbors), derive_seed(config.seed, "far")
    )
    pairs = (near, mid, far)

    coords = pca_init_coords(z)
    beta1, beta2, eps = 0.9, 0.999, 1e-7
    m = np.zeros_like(coords)
    v = np.zeros_like(coords)
    for step in range(config.iterations):
        _, grad = pacmap_loss_and_grad(coords, pairs, phase_weights(step))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad**2
        m_hat = m / (1.0 - beta1 ** (step + 1))
        v_hat = v / (1.0 - beta2 ** (step + 1))
        coords = coords - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return Embedding2D(coords, near, mid, far)


def embedding_csv(ids, coords, correct) -> str:
    """Delimited export of the 2-D map joined with correctness flags."""
    lines = ["index,x,y,correct"]
    for i, (x, y), flag in zip(ids, np.asarray(coords).tolist(), correct):
        lines.append(f"{int(i)},{x!r},{y!r},{1 if flag else 0}")
    return "\n".join(lines) + "\n"
