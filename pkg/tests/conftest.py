"""Shared fixtures: synthetic images, datasets, and predictor harnesses."""

import sys
from pathlib import Path

import numpy as np
import pytest

from limevis.imaging import LabeledDataset, RgbImage

HARNESS_DIR = Path(__file__).parent / "harness"


def harness_command(script, *args):
    """Shell command launching one of the external-predictor test scripts."""
    parts = [sys.executable, str(HARNESS_DIR / script), *args]
    return " ".join(parts)


def random_image(rng, width, height, low=0, high=256):
    """Seeded random RGB image with values in [low, high)."""
    return RgbImage(rng.integers(low, high, size=(height, width, 3), dtype=np.uint8))


def uniform_image(width, height, color):
    return RgbImage(np.full((height, width, 3), color, dtype=np.uint8))


def smooth_random_image(rng, width, height, cells=4, low=10):
    """Low-frequency random image: a small random grid upsampled bilinearly.

    Unlike per-pixel noise this segments into a handful of superpixels, and
    ``low >= 10`` keeps every sample clear of the black fill color.
    """
    from limevis.imaging import resize_bilinear

    base = RgbImage(rng.integers(low, 256, size=(cells, cells, 3), dtype=np.uint8))
    return resize_bilinear(base, width, height)


def quadrant_image(size=32, colors=((255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0))):
    """Four uniform quadrants with maximally distinct colors."""
    half = size // 2
    px = np.zeros((size, size, 3), dtype=np.uint8)
    px[:half, :half] = colors[0]
    px[:half, half:] = colors[1]
    px[half:, :half] = colors[2]
    px[half:, half:] = colors[3]
    return RgbImage(px)


def quadrant_labels(size=32):
    half = size // 2
    labels = np.zeros((size, size), dtype=np.int64)
    labels[:half, half:] = 1
    labels[half:, :half] = 2
    labels[half:, half:] = 3
    return labels


def partitions_equal(labels_a, labels_b):
    """True when two label maps define the same partition (id permutation ok)."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        return False
    forward = {}
    backward = {}
    for va, vb in zip(a.tolist(), b.tolist()):
        if forward.setdefault(va, vb) != vb:
            return False
        if backward.setdefault(vb, va) != va:
            return False
    return True


def make_linear_oracle(image, spmap, seed, class_count=3):
    """Black box whose class-0 probability is exactly linear in the
    visible-superpixel indicator.

    Visibility is probed by comparing one pixel per superpixel against the
    original image, so the caller must hide superpixels with fixed black and
    use images whose samples are all >= 10. Returns (predictor, coefficients,
    base) with base + sum(coefficients * visible) always inside (1/3, 0.9),
    which keeps class 0 the argmax of the unperturbed prediction.
    """
    from limevis.predictor import CallablePredictor

    oracle_rng = np.random.default_rng(seed)
    k = spmap.num_segments
    raw = oracle_rng.uniform(-1.0, 1.0, size=k)
    if np.all(raw <= 0):
        raw[int(np.argmax(np.abs(raw)))] *= -1.0  # guarantee a positive coefficient
    coefs = raw * (0.25 / np.sum(np.abs(raw)))
    base = 0.6

    flat = spmap.labels.ravel()
    _, first = np.unique(flat, return_index=True)
    rows, cols = np.divmod(first, spmap.width)
    probe_colors = image.pixels[rows, cols].copy()
    assert probe_colors.min() >= 10, "oracle images must avoid the black fill"

    def predict_fn(img):
        visible = np.all(img.pixels[rows, cols] == probe_colors, axis=1)
        p = base + float(coefs @ visible)
        rest = (1.0 - p) / (class_count - 1)
        return [p] + [rest] * (class_count - 1)

    names = [f"class_{i}" for i in range(class_count)]
    return CallablePredictor(predict_fn, names), coefs, base


def separable_dataset(rng, per_class=10, size=24):
    """Three linearly separable classes: red/green/blue bases plus noise."""
    bases = ((200, 40, 40), (40, 200, 40), (40, 40, 200))
    images, labels = [], []
    for label, base in enumerate(bases):
        for _ in range(per_class):
            noise = rng.integers(-20, 21, size=(size, size, 3))
            px = np.clip(np.asarray(base) + noise, 0, 255).astype(np.uint8)
            images.append(RgbImage(px))
            labels.append(label)
    return LabeledDataset(images, labels, ["red", "green", "blue"], source="synthetic")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


_acceptance_reports = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance_reports.append(report)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    if not _acceptance_reports:
        return
    terminalreporter.section("acceptance criteria")
    for report in _acceptance_reports:
        name = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
