"""Superpixel segmentation: SLIC, Felzenszwalb graph merging, and quickshift.

All three produce a :class:`SuperpixelMap` with dense segment ids. Every
tie-break is pinned (center order, edge sort keys, row-major parent
preference) so identical inputs always yield identical label maps.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.ndimage
import scipy.sparse
import scipy.sparse.csgraph

from .errors import InvalidParams, MalformedFile, UnsupportedFormat
from .imaging import RgbImage, rgb_to_lab


@dataclass(frozen=True)
class SlicParams:
    """k-means superpixels in (L, a, b, x, y) space."""

    n_segments: int = 50
    compactness: float = 10.0
    max_iter: int = 10

    algorithm = "slic"


@dataclass(frozen=True)
class FelzenszwalbParams:
    """Graph-based merging with an adaptive component threshold."""

    scale: float = 100.0
    sigma: float = 0.8
    min_size: int = 20

    algorithm = "felzenszwalb"


@dataclass(frozen=True)
class QuickshiftParams:
    """Mode seeking on a Parzen density estimate in (Lab, x, y) space."""

    ratio: float = 0.2
    kernel_size: float = 4.0
    max_dist: float = 8.0

    algorithm = "quickshift"


SegmentationParams = Union[SlicParams, FelzenszwalbParams, QuickshiftParams]

_PARAM_TYPES = {
    "slic": SlicParams,
    "felzenszwalb": FelzenszwalbParams,
    "quickshift": QuickshiftParams,
}


def segmentation_params(algorithm: str, **kwargs) -> SegmentationParams:
    """Build the parameter block for one algorithm by name."""
    try:
        cls = _PARAM_TYPES[algorithm]
    except KeyError:
        raise InvalidParams(f"unknown segmentation algorithm {algorithm!r}") from None
    return cls(**kwargs)


class SuperpixelMap:
    """Per-pixel segment labels with dense ids 0..num_segments-1."""

    __slots__ = ("labels", "num_segments")

    def __init__(self, labels: np.ndarray):
        lbl = np.ascontiguousarray(np.asarray(labels, dtype=np.int32))
        if lbl.ndim != 2:
            raise InvalidParams(f"label map must be 2-D, got shape {lbl.shape}")
        counts = np.bincount(lbl.ravel())
        if lbl.min() < 0 or np.any(counts == 0):
            raise InvalidParams("segment ids must be dense 0..K-1")
        lbl.setflags(write=False)
        object.__setattr__(self, "labels", lbl)
        object.__setattr__(self, "num_segments", int(len(counts)))

    def __setattr__(self, name, value):
        raise AttributeError("SuperpixelMap is immutable")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "labels": self.labels.ravel().tolist(),
            "num_segments": self.num_segments,
        }


def densify_labels(labels: np.ndarray) -> np.ndarray:
    """Remap arbitrary integer labels to 0..K-1 by first row-major occurrence."""
    flat = np.asarray(labels).ravel()
    uniq, first = np.unique(flat, return_index=True)
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq), dtype=np.int32)
    return rank[np.searchsorted(uniq, flat)].reshape(np.asarray(labels).shape)


def _grid_components(labels: np.ndarray):
    """4-connected components of equal-label pixels; returns (comp map, count)."""
    h, w = labels.shape
    n = h * w
    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    rows, cols = [], []
    same = labels[:, 1:] == labels[:, :-1]
    rows.append(idx[:, 1:][same])
    cols.append(idx[:, :-1][same])
    same = labels[1:, :] == labels[:-1, :]
    rows.append(idx[1:, :][same])
    cols.append(idx[:-1, :][same])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = scipy.sparse.coo_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)
    )
    ncomp, comp = scipy.sparse.csgraph.connected_components(graph, directed=False)
    return comp.reshape(h, w), ncomp


def _component_contacts(comp: np.ndarray, ncomp: int):
    """Counter of shared 4-boundary length per adjacent component pair."""
    a_list, b_list = [], []
    diff = comp[:, 1:] != comp[:, :-1]
    a_list.append(comp[:, 1:][diff])
    b_list.append(comp[:, :-1][diff])
    diff = comp[1:, :] != comp[:-1, :]
    a_list.append(comp[1:, :][diff])
    b_list.append(comp[:-1, :][diff])
    a = np.concatenate(a_list).astype(np.int64)
    b = np.concatenate(b_list).astype(np.int64)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keys, counts = np.unique(lo * ncomp + hi, return_counts=True)
    contacts = [Counter() for _ in range(ncomp)]
    for key, cnt in zip(keys.tolist(), counts.tolist()):
        p, q = divmod(key, ncomp)
        contacts[p][q] += cnt
        contacts[q][p] += cnt
    return contacts


def _absorb_small_components(labels: np.ndarray, min_size: float) -> np.ndarray:
    """Relabel by 4-connected components, then absorb fragments below
    ``min_size`` into the neighbor sharing the longest boundary (ties to the
    lower component id)."""
    comp, ncomp = _grid_components(labels)
    sizes = np.bincount(comp.ravel(), minlength=ncomp).astype(np.int64)
    contacts = _component_contacts(comp, ncomp)
    root = list(range(ncomp))

    def find(c):
        while root[c] != c:
            root[c] = root[root[c]]
            c = root[c]
        return c

    for c in range(ncomp):
        r = find(c)
        if r != c or sizes[r] >= min_size:
            continue
        tally = Counter()
        for other, cnt in contacts[r].items():
            ro = find(other)
            if ro != r:
                tally[ro] += cnt
        if not tally:
            continue
        target = min(tally, key=lambda k: (-tally[k], k))
        root[r] = target
        sizes[target] += sizes[r]
        merged = contacts[r] + contacts[target]
        merged.pop(r, None)
        merged.pop(target, None)
        contacts[target] = merged

    final = np.array([find(c) for c in range(ncomp)], dtype=np.int64)
    return densify_labels(final[comp])


def slic(image: RgbImage, params: SlicParams) -> SuperpixelMap:
    """SLIC superpixels: windowed k-means over (L, a, b, x, y).

    Centers start on a regular grid at spacing ``S = sqrt(N / n_segments)``;
    each iteration assigns pixels within a 2S x 2S window of each center by
    ``d^2 = d_lab^2 + compactness^2 * (d_xy / S)^2`` (earlier center wins
    ties), then recomputes centers as label means. Fragments smaller than
    ``N / (4 n_segments)`` are absorbed into the dominant adjacent segment.
    """
    h, w = image.height, image.width
    n = h * w
    k = params.n_segments
    if k < 1 or k > n:
        raise InvalidParams(f"n_segments must be in 1..{n}, got {k}")
    if params.compactness <= 0:
        raise InvalidParams("compactness must be > 0")

    lab = rgb_to_lab(image).pixels
    spacing = math.sqrt(n / k)
    nx = max(1, round(w / spacing))
    ny = max(1, round(h / spacing))

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    centers = []
    for gy in range(ny):
        for gx in range(nx):
            cx = (gx + 0.5) * w / nx
            cy = (gy + 0.5) * h / ny
            px = min(w - 1, int(cx))
            py = min(h - 1, int(cy))
            centers.append([lab[py, px, 0], lab[py, px, 1], lab[py, px, 2], cx, cy])
    centers = np.array(centers, dtype=np.float64)

    ratio = (params.compactness / spacing) ** 2
    for _ in range(max(1, params.max_iter)):
        best = np.full((h, w), np.inf)
        labels = np.full((h, w), -1, dtype=np.int64)
        for ci in range(len(centers)):
            cl, ca, cb, cx, cy = centers[ci]
            x0 = max(0, int(math.floor(cx - spacing)))
            x1 = min(w, int(math.ceil(cx + spacing)) + 1)
            y0 = max(0, int(math.floor(cy - spacing)))
            y1 = min(h, int(math.ceil(cy + spacing)) + 1)
            if x0 >= x1 or y0 >= y1:
                continue
            win = lab[y0:y1, x0:x1]
            d2 = (
                (win[..., 0] - cl) ** 2
                + (win[..., 1] - ca) ** 2
                + (win[..., 2] - cb) ** 2
                + ratio
                * ((xs[y0:y1, x0:x1] - cx) ** 2 + (ys[y0:y1, x0:x1] - cy) ** 2)
            )
            closer = d2 < best[y0:y1, x0:x1]
            best[y0:y1, x0:x1][closer] = d2[closer]
            labels[y0:y1, x0:x1][closer] = ci

        missing = labels < 0
        if np.any(missing):
            # Centers drifted off some pixel's windows: fall back to the
            # spatially nearest center (lowest index on ties).
            mx, my = xs[missing], ys[missing]
            d2 = (mx[:, None] - centers[None, :, 3]) ** 2 + (
                my[:, None] - centers[None, :, 4]
            ) ** 2
            labels[missing] = np.argmin(d2, axis=1)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers)).astype(np.float64)
        filled = counts > 0
        feats = np.stack(
            [lab[..., 0].ravel(), lab[..., 1].ravel(), lab[..., 2].ravel(), xs.ravel(), ys.ravel()],
            axis=1,
        )
        for fi in range(5):
            sums = np.bincount(flat, weights=feats[:, fi], minlength=len(centers))
            centers[filled, fi] = sums[filled] / counts[filled]

    final = _absorb_small_components(labels, n / (4.0 * k))
    return SuperpixelMap(final)


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        """Merge the sets of roots a and b; the larger (ties: lower) root wins."""
        if self.size[a] < self.size[b] or (self.size[a] == self.size[b] and b < a):
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def _grid_edges_8(height: int, width: int):
    """8-neighborhood edges (u, v) with u < v, in fixed E, S, SE, SW order."""
    idx = np.arange(height * width, dtype=np.int64).reshape(height, width)
    us = [idx[:, :-1], idx[:-1, :], idx[:-1, :-1], idx[:-1, 1:]]
    vs = [idx[:, 1:], idx[1:, :], idx[1:, 1:], idx[1:, :-1]]
    u = np.concatenate([a.ravel() for a in us])
    v = np.concatenate([a.ravel() for a in vs])
    return u, v


def felzenszwalb(image: RgbImage, params: FelzenszwalbParams) -> SuperpixelMap:
    """Graph-based segmentation with union-find over sorted edges.

    Channels are Gaussian-smoothed (kernel truncated at 4 sigma, reflected
    borders), edges of the 8-neighbor grid carry Euclidean RGB distance, and
    components A, B merge when the next edge weight does not exceed
    ``min(Int(A) + scale/|A|, Int(B) + scale/|B|)``. A final sweep merges
    components below ``min_size`` through their cheapest connecting edge.
    Segments are then split into 4-connected pieces so ids are spatially
    coherent.
    """
    if params.scale <= 0:
        raise InvalidParams("scale must be > 0")
    if params.sigma < 0:
        raise InvalidParams("sigma must be >= 0")
    if params.min_size < 1:
        raise InvalidParams("min_size must be >= 1")

    h, w = image.height, image.width
    img = image.pixels.astype(np.float64)
    if params.sigma > 0:
        img = np.stack(
            [
                scipy.ndimage.gaussian_filter(
                    img[..., c], params.sigma, truncate=4.0, mode="reflect"
                )
                for c in range(3)
            ],
            axis=-1,
        )
    flat = img.reshape(-1, 3)

    u, v = _grid_edges_8(h, w)
    weights = np.sqrt(((flat[u] - flat[v]) ** 2).sum(axis=1))
    # Stable sort: ascending weight, then smaller endpoint, then build order.
    order = np.lexsort((u, weights))

    uf = _UnionFind(h * w)
    threshold = np.full(h * w, params.scale, dtype=np.float64)
    u_list, v_list, w_list = u.tolist(), v.tolist(), weights.tolist()
    for e in order.tolist():
        a = uf.find(u_list[e])
        b = uf.find(v_list[e])
        if a == b:
            continue
        we = w_list[e]
        if we <= threshold[a] and we <= threshold[b]:
            r = uf.union(a, b)
            threshold[r] = we + params.scale / uf.size[r]

    if params.min_size > 1:
        for e in order.tolist():
            a = uf.find(u_list[e])
            b = uf.find(v_list[e])
            if a != b and (uf.size[a] < params.min_size or uf.size[b] < params.min_size):
                uf.union(a, b)

    roots = np.fromiter((uf.find(i) for i in range(h * w)), dtype=np.int64, count=h * w)
    merged = densify_labels(roots.reshape(h, w))
    comp, _ = _grid_components(merged)
    return SuperpixelMap(densify_labels(comp))


def quickshift(image: RgbImage, params: QuickshiftParams) -> SuperpixelMap:
    """Quickshift: link each pixel to its nearest higher-density neighbor.

    Works in (ratio*L, ratio*a, ratio*b, x, y). Density is a Gaussian Parzen
    estimate of bandwidth ``kernel_size`` over a 3*kernel_size window; a
    pixel's parent is the 5-D-nearest pixel within ``max_dist`` having
    strictly higher density (lowest row-major index on distance ties; equal
    densities never link). Trees become segments.
    """
    if not (0 < params.ratio <= 1):
        raise InvalidParams("ratio must be in (0, 1]")
    if params.kernel_size <= 0:
        raise InvalidParams("kernel_size must be > 0")
    if params.max_dist <= 0:
        raise InvalidParams("max_dist must be > 0")

    h, w = image.height, image.width
    n = h * w
    color = rgb_to_lab(image).pixels * params.ratio

    def offset_views(arr, dy, dx):
        """Aligned (pixel, shifted-neighbor) views for one offset."""
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        ysq = slice(max(0, dy), h - max(0, -dy))
        xsq = slice(max(0, dx), w - max(0, -dx))
        return arr[ys, xs], arr[ysq, xsq], (ys, xs)

    density = np.ones((h, w), dtype=np.float64)  # the (0, 0) offset term
    radius = int(math.ceil(3 * params.kernel_size))
    inv_bw = 1.0 / (2.0 * params.kernel_size**2)
    # The kernel is symmetric, so each strictly-positive offset contributes
    # the same value to both endpoints; halving the sweep keeps every pixel's
    # term sequence fixed (determinism) at half the cost.
    for dy in range(0, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx <= 0:
                continue
            here, there, region = offset_views(color, dy, dx)
            d2 = ((there - here) ** 2).sum(axis=-1) + dy * dy + dx * dx
            contribution = np.exp(-d2 * inv_bw)
            density[region] += contribution
            ys_q = slice(max(0, dy), h - max(0, -dy))
            xs_q = slice(max(0, dx), w - max(0, -dx))
            density[ys_q, xs_q] += contribution

    index = np.arange(n, dtype=np.int64).reshape(h, w)
    best_d2 = np.full((h, w), np.inf)
    parent = np.full((h, w), n, dtype=np.int64)
    max_d2 = params.max_dist**2
    reach = int(math.floor(params.max_dist))
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            if dy == 0 and dx == 0:
                continue
            here, there, region = offset_views(color, dy, dx)
            dens_here, dens_there, _ = offset_views(density, dy, dx)
            _, idx_there, _ = offset_views(index, dy, dx)
            d2 = ((there - here) ** 2).sum(axis=-1) + dy * dy + dx * dx
            linkable = (dens_there > dens_here) & (d2 <= max_d2)
            cur_d2 = best_d2[region]  # view: updates land in best_d2
            cur_par = parent[region]
            better = linkable & ((d2 < cur_d2) | ((d2 == cur_d2) & (idx_there < cur_par)))
            cur_d2[better] = d2[better]
            cur_par[better] = idx_there[better]

    par = parent.ravel()
    own = np.arange(n, dtype=np.int64)
    par = np.where(par == n, own, par)
    while True:
        grand = par[par]
        if np.array_equal(grand, par):
            break
        par = grand
    return SuperpixelMap(densify_labels(par.reshape(h, w)))


def segment(image: RgbImage, params: SegmentationParams) -> SuperpixelMap:
    """Dispatch to the algorithm selected by the parameter block."""
    if isinstance(params, SlicParams):
        return slic(image, params)
    if isinstance(params, FelzenszwalbParams):
        return felzenszwalb(image, params)
    if isinstance(params, QuickshiftParams):
        return quickshift(image, params)
    raise InvalidParams(f"unknown segmentation params {type(params).__name__}")


def boundary_mask(spmap: SuperpixelMap) -> np.ndarray:
    """Boolean mask of pixels having a 4-neighbor with a different label."""
    lbl = spmap.labels
    mask = np.zeros(lbl.shape, dtype=bool)
    horiz = lbl[:, 1:] != lbl[:, :-1]
    mask[:, 1:] |= horiz
    mask[:, :-1] |= horiz
    vert = lbl[1:, :] != lbl[:-1, :]
    mask[1:, :] |= vert
    mask[:-1, :] |= vert
    return mask


def spmap_to_pgm(spmap: SuperpixelMap):
    """Serialize labels as a gray P5 image plus a ``num_segments=K`` sidecar."""
    if spmap.num_segments > 65536:
        raise InvalidParams("PGM label export supports at most 65536 segments")
    wide = spmap.num_segments > 256
    maxval = 65535 if wide else 255
    header = f"P5\n{spmap.width} {spmap.height}\n{maxval}\n".encode("ascii")
    if wide:
        payload = spmap.labels.astype(">u2").tobytes()
    else:
        payload = spmap.labels.astype(np.uint8).tobytes()
    return header + payload, f"num_segments={spmap.num_segments}\n"


def spmap_from_pgm(data: bytes, sidecar: str) -> SuperpixelMap:
    """Inverse of :func:`spmap_to_pgm`."""
    if data[:2] != b"P5":
        raise UnsupportedFormat(f"unsupported PGM magic {data[:2]!r}")
    from .imaging import _ppm_tokens

    (w_tok, h_tok, maxval_tok), offset = _ppm_tokens(data, 3, 2)
    width, height, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    payload = data[offset + 1 :]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expected = width * height * dtype.itemsize
    if len(payload) < expected:
        raise MalformedFile("PGM payload shorter than header promises")
    labels = (
        np.frombuffer(payload[:expected], dtype=dtype)
        .reshape(height, width)
        .astype(np.int32)
    )
    key, _, value = sidecar.strip().partition("=")
    if key != "num_segments":
        raise MalformedFile(f"unexpected sidecar line {sidecar!r}")
    spmap = SuperpixelMap(labels)
    if spmap.num_segments != int(value):
        raise MalformedFile(
            f"sidecar claims {value} segments, labels contain {spmap.num_segments}"
        )
    return spmap
