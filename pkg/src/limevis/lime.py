"""Local surrogate explanations for image classifiers.

One explanation is produced by perturbing an image over its superpixels
(Bernoulli masks), probing the black box on every perturbed variant,
fitting a kernel-weighted ridge surrogate to the target-class probability,
and ranking superpixels by their surrogate coefficients.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidParams, SingularSystem
from .imaging import RgbImage, quantize_u8
from .predictor import ClassProbabilities, PredictorHandle
from .rng import generator
from .segmentation import (
    QuickshiftParams,
    SegmentationParams,
    SuperpixelMap,
    boundary_mask,
    segment,
    segmentation_params,
)

POSITIVE_OUTLINE = (0, 255, 0)
NEGATIVE_OUTLINE = (255, 0, 0)
NEUTRAL_OUTLINE = (255, 255, 0)


@dataclass(frozen=True)
class ExplainConfig:
    """Knobs of one explanation run.

    ``hide_color=None`` replaces hidden superpixels by their own mean color
    during sampling (keeps perturbed images near the data distribution); a
    fixed RGB triple is what interactive toggling uses (black).
    """

    segmentation: SegmentationParams = QuickshiftParams()
    num_samples: int = 1000
    kernel_width: float = 0.25
    ridge_lambda: float = 1.0
    positive_only: bool = True
    num_features: int = 5
    hide_rest: bool = False
    hide_color: Optional[Tuple[int, int, int]] = None
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 2:
            raise InvalidParams(f"num_samples must be >= 2, got {self.num_samples}")
        if self.num_features < 1:
            raise InvalidParams(f"num_features must be >= 1, got {self.num_features}")
        if self.kernel_width <= 0:
            raise InvalidParams("kernel_width must be > 0")
        if self.ridge_lambda < 0:
            raise InvalidParams("ridge_lambda must be >= 0")
        if self.hide_color is not None:
            color = tuple(int(c) for c in self.hide_color)
            if len(color) != 3 or any(c < 0 or c > 255 for c in color):
                raise InvalidParams(f"hide_color must be three 8-bit samples, got {self.hide_color}")
            object.__setattr__(self, "hide_color", color)

    def to_json_dict(self) -> dict:
        seg = {"algorithm": self.segmentation.algorithm}
        seg.update(dataclasses.asdict(self.segmentation))
        return {
            "segmentation": seg,
            "num_samples": self.num_samples,
            "kernel_width": self.kernel_width,
            "ridge_lambda": self.ridge_lambda,
            "positive_only": self.positive_only,
            "num_features": self.num_features,
            "hide_rest": self.hide_rest,
            "hide_color": "mean" if self.hide_color is None else list(self.hide_color),
            "seed": self.seed,
        }


def explain_config_from_dict(payload: dict) -> ExplainConfig:
    """Parse the JSON form produced by :meth:`ExplainConfig.to_json_dict`."""
    if not isinstance(payload, dict):
        raise InvalidParams("config must be a JSON object")
    known = {
        "segmentation",
        "num_samples",
        "kernel_width",
        "ridge_lambda",
        "positive_only",
        "num_features",
        "hide_rest",
        "hide_color",
        "seed",
    }
    unknown = set(payload) - known
    if unknown:
        raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(payload)
    seg = kwargs.pop("segmentation", None)
    if seg is not None:
        if not isinstance(seg, dict) or "algorithm" not in seg:
            raise InvalidParams("segmentation must be an object with an 'algorithm' key")
        seg = dict(seg)
        algorithm = seg.pop("algorithm")
        try:
            kwargs["segmentation"] = segmentation_params(algorithm, **seg)
        except TypeError as exc:
            raise InvalidParams(f"bad segmentation parameters: {exc}") from exc
    hide = kwargs.get("hide_color")
    if hide == "mean":
        kwargs["hide_color"] = None
    elif isinstance(hide, list):
        kwargs["hide_color"] = tuple(hide)
    try:
        return ExplainConfig(**kwargs)
    except TypeError as exc:
        raise InvalidParams(f"bad config: {exc}") from exc


@dataclass
class Explanation:
    """Per-superpixel surrogate weights for one explained prediction."""

    target_class: int
    weights: np.ndarray
    intercept: float
    local_fit_r2: float
    num_superpixels: int
    selected: list
    original_probs: ClassProbabilities

    def to_json_dict(self, config: Optional[ExplainConfig] = None) -> dict:
        payload = {
            "target_class": self.target_class,
            "intercept": self.intercept,
            "weights": np.asarray(self.weights, dtype=np.float64).tolist(),
            "selected": [int(s) for s in self.selected],
            "local_fit_r2": self.local_fit_r2,
            "original_probs": self.original_probs.tolist(),
            "num_superpixels": self.num_superpixels,
        }
        if config is not None:
            payload["config_echo"] = config.to_json_dict()
        return payload


class ExplainResult(NamedTuple):
    explanation: Explanation
    rendered: RgbImage
    spmap: SuperpixelMap


def sample_masks(num_samples: int, num_segments: int, seed: int) -> np.ndarray:
    """Perturbation matrix: row 0 is all-ones, the rest i.i.d. Bernoulli(0.5)."""
    if num_samples < 2:
        raise InvalidParams(f"num_samples must be >= 2, got {num_samples}")
    if num_segments < 1:
        raise InvalidParams(f"num_segments must be >= 1, got {num_segments}")
    rng = generator(seed, "masks")
    rows = rng.integers(0, 2, size=(num_samples - 1, num_segments), dtype=np.uint8)
    return np.vstack([np.ones((1, num_segments), dtype=np.uint8), rows])


def superpixel_mean_fill(image: RgbImage, spmap: SuperpixelMap) -> np.ndarray:
    """Image where every pixel takes its superpixel's mean color (uint8)."""
    flat = image.pixels.reshape(-1, 3).astype(np.float64)
    labels = spmap.labels.ravel()
    counts = np.bincount(labels, minlength=spmap.num_segments).astype(np.float64)
    means = np.stack(
        [
            np.bincount(labels, weights=flat[:, c], minlength=spmap.num_segments) / counts
            for c in range(3)
        ],
        axis=1,
    )
    return quantize_u8(means)[labels].reshape(image.pixels.shape)


def _check_geometry(image: RgbImage, spmap: SuperpixelMap):
    if (spmap.height, spmap.width) != (image.height, image.width):
        raise DimensionMismatch(
            f"superpixel map is {spmap.width}x{spmap.height}, image is {image.width}x{image.height}"
        )


def _fill_pixels(image: RgbImage, spmap: SuperpixelMap, hide_color) -> np.ndarray:
    if hide_color is None:
        return superpixel_mean_fill(image, spmap)
    return np.broadcast_to(
        np.asarray(hide_color, dtype=np.uint8), image.pixels.shape
    ).copy()


def apply_mask(image: RgbImage, spmap: SuperpixelMap, mask, hide_color=None) -> RgbImage:
    """Keep superpixels with mask 1, replace the rest by the hide color."""
    return apply_masks_batch(image, spmap, np.asarray(mask).reshape(1, -1), hide_color)[0]


def apply_masks_batch(image: RgbImage, spmap: SuperpixelMap, masks, hide_color=None) -> list:
    """Vectorized :func:`apply_mask` over the rows of a mask matrix."""
    _check_geometry(image, spmap)
    masks = np.asarray(masks)
    if masks.ndim != 2 or masks.shape[1] != spmap.num_segments:
        raise DimensionMismatch(
            f"masks have {masks.shape[-1] if masks.ndim else 0} columns, "
            f"map has {spmap.num_segments} segments"
        )
    fill = _fill_pixels(image, spmap, hide_color).reshape(-1, 3)
    orig = image.pixels.reshape(-1, 3)
    hidden = masks.astype(bool)[:, spmap.labels.ravel()]
    np.logical_not(hidden, out=hidden)
    # copyto keeps the stack C-contiguous (np.where would not), so the
    # per-sample views below need no copies.
    stacked = np.empty((masks.shape[0],) + orig.shape, dtype=np.uint8)
    np.copyto(stacked, orig[None])
    np.copyto(stacked, fill[None], where=hidden[:, :, None])
    shape = image.pixels.shape
    return [RgbImage(stacked[i].reshape(shape)) for i in range(masks.shape[0])]


def kernel_weights(masks, kernel_width: float) -> np.ndarray:
    """Exponential kernel on cosine distance from the all-ones mask."""
    if kernel_width <= 0:
        raise InvalidParams("kernel_width must be > 0")
    masks = np.asarray(masks, dtype=np.float64)
    k = masks.shape[-1]
    ones = masks.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        distance = np.where(ones > 0, 1.0 - ones / np.sqrt(k * np.maximum(ones, 1)), 1.0)
    return np.exp(-(distance**2) / kernel_width**2)


def kernel_weight(mask, kernel_width: float) -> float:
    return float(kernel_weights(np.asarray(mask).reshape(1, -1), kernel_width)[0])


def fit_weighted_ridge(masks, responses, sample_weights, ridge_lambda: float):
    """Weighted ridge with unpenalized intercept via centered normal equations.

    Minimizes ``sum_i w_i (y_i - b0 - beta . z_i)^2 + lambda ||beta||^2`` and
    returns (coefficients, intercept, weighted R^2).
    """
    z = np.asarray(masks, dtype=np.float64)
    y = np.asarray(responses, dtype=np.float64)
    w = np.asarray(sample_weights, dtype=np.float64)
    if z.ndim != 2 or y.shape != (z.shape[0],) or w.shape != (z.shape[0],):
        raise DimensionMismatch(
            f"inconsistent system: masks {z.shape}, responses {y.shape}, weights {w.shape}"
        )
    if np.any(w < 0) or not np.any(w > 0):
        raise InvalidParams("sample weights must be nonnegative and not all zero")
    if ridge_lambda < 0:
        raise InvalidParams("ridge_lambda must be >= 0")
    if np.all(y == y[0]):
        # Constant responses have the exact solution (0, c); solving the
        # normal equations would leave float dust in the coefficients.
        return np.zeros(z.shape[1]), float(y[0]), 1.0

    total = w.sum()
    mean_z = (w @ z) / total
    mean_y = (w @ y) / total
    zc = z - mean_z
    yc = y - mean_y
    normal = (zc * w[:, None]).T @ zc
    normal[np.diag_indices_from(normal)] += ridge_lambda
    rhs = zc.T @ (w * yc)
    try:
        coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), rhs)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(f"normal equations are singular: {exc}") from exc
    intercept = float(mean_y - coef @ mean_z)

    fitted = intercept + z @ coef
    sse = float(w @ (y - fitted) ** 2)
    sst = float(w @ yc**2)
    if sst <= 0.0:
        r2 = 1.0 if sse <= 1e-12 * max(1.0, total) else 0.0
    else:
        r2 = 1.0 - sse / sst
    return coef, intercept, r2


def select_superpixels(coefficients, num_features: int, positive_only: bool) -> list:
    """Rank superpixels by coefficient; may return fewer than requested."""
    if num_features < 1:
        raise InvalidParams(f"num_features must be >= 1, got {num_features}")
    coefs = np.asarray(coefficients, dtype=np.float64)
    ids = np.arange(coefs.size)
    if positive_only:
        candidates = [(-coefs[i], i) for i in ids if coefs[i] > 0]
    else:
        candidates = [(-abs(coefs[i]), i) for i in ids]
    candidates.sort()
    return [int(i) for _, i in candidates[:num_features]]


def render_explanation(
    image: RgbImage, spmap: SuperpixelMap, explanation: Explanation, config: ExplainConfig
) -> RgbImage:
    """Draw the explanation: hide unselected regions, or outline selections.

    With ``hide_rest`` the selected superpixels keep their pixels and the
    rest takes the hide color. Otherwise boundary pixels of each selected
    superpixel are recolored: yellow under positive_only, green/red by
    coefficient sign when negatives may be shown.
    """
    _check_geometry(image, spmap)
    selected = [int(s) for s in explanation.selected]
    if any(s < 0 or s >= spmap.num_segments for s in selected):
        raise DimensionMismatch("selected superpixel outside the label range")
    if config.hide_rest:
        mask = np.zeros(spmap.num_segments, dtype=np.uint8)
        mask[selected] = 1
        return apply_mask(image, spmap, mask, config.hide_color)

    out = image.pixels.copy()
    border = boundary_mask(spmap)
    for sid in selected:
        if config.positive_only:
            color = NEUTRAL_OUTLINE
        else:
            color = POSITIVE_OUTLINE if explanation.weights[sid] > 0 else NEGATIVE_OUTLINE
        out[border & (spmap.labels == sid)] = color
    return RgbImage(out)


def explain(image: RgbImage, predictor: PredictorHandle, config: ExplainConfig) -> ExplainResult:
    """Full pipeline: segment, perturb, probe, fit, select, render.

    Deterministic given (image, model, config.seed); the explained class is
    the argmax of the unperturbed prediction.
    """
    spmap = segment(image, config.segmentation)
    masks = sample_masks(config.num_samples, spmap.num_segments, config.seed)
    perturbed = apply_masks_batch(image, spmap, masks, config.hide_color)
    probs = predictor.predict_batch(perturbed)
    original_probs = probs[0]
    target = original_probs.argmax_class
    responses = np.array([p[target] for p in probs])
    weights = kernel_weights(masks, config.kernel_width)
    coef, intercept, r2 = fit_weighted_ridge(masks, responses, weights, config.ridge_lambda)
    selected = select_superpixels(coef, config.num_features, config.positive_only)
    explanation = Explanation(
        target_class=target,
        weights=coef,
        intercept=intercept,
        local_fit_r2=r2,
        num_superpixels=spmap.num_segments,
        selected=selected,
        original_probs=original_probs,
    )
    rendered = render_explanation(image, spmap, explanation, config)
    return ExplainResult(explanation, rendered, spmap)
