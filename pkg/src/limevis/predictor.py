"""Black-box classifier abstraction.

Ships a trainable softmax-regression model over 16x16 downsampled pixels so
every pipeline path runs with zero external dependencies, plus two adapters
for plugging in arbitrary models: a newline-delimited-JSON subprocess
protocol and an HTTP POST endpoint. External failures are always fatal for
the operation that needed them; there is no silent fallback to the builtin.
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import struct
import subprocess
import threading
from dataclasses import dataclass

import numpy as np
import requests

from .errors import EmptyDataset, ExternalPredictorFailure, InvalidParams
from .imaging import (
    LabeledDataset,
    RgbImage,
    quantize_u8,
    resize_bilinear,
    resize_bilinear_float_batch,
)

DOWNSAMPLE_SIZE = 16
FEATURE_DIM = DOWNSAMPLE_SIZE * DOWNSAMPLE_SIZE * 3
MODEL_MAGIC = b"LVM1"


class ClassProbabilities:
    """A per-category probability vector: entries in [0, 1] summing to 1."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = np.ascontiguousarray(np.asarray(probs, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidParams(f"probabilities must be a nonempty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidParams("probabilities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidParams(f"probabilities outside [0, 1]: min {arr.min()}, max {arr.max()}")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-6:
            raise InvalidParams(f"probabilities sum to {total}, expected 1 within 1e-6")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ClassProbabilities is immutable")

    @property
    def class_count(self) -> int:
        return int(self.probs.size)

    @property
    def argmax_class(self) -> int:
        """Most probable class; ties break to the lowest index."""
        return int(np.argmax(self.probs))

    def tolist(self) -> list:
        return self.probs.tolist()

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])


def softmax(logits) -> ClassProbabilities:
    """Exp-normalize with max subtraction for numerical stability."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidParams("logits must be finite")
    shifted = np.exp(z - z.max())
    return ClassProbabilities(shifted / shifted.sum())


@dataclass
class BuiltinModel:
    """Softmax regression over downsampled raw pixels scaled to [0, 1]."""

    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    class_names: list

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise InvalidParams("weights must be (C, D), bias (C,)")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise InvalidParams("weights and bias disagree on class count")
        if len(self.class_names) != self.weights.shape[0]:
            raise InvalidParams("class_names length must equal class count")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise InvalidParams("model parameters must be finite")

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def builtin_features(image: RgbImage) -> np.ndarray:
    """Flattened 16x16 bilinear downsample, scaled to [0, 1]."""
    small = resize_bilinear(image, DOWNSAMPLE_SIZE, DOWNSAMPLE_SIZE)
    return small.pixels.astype(np.float64).ravel() / 255.0


def _builtin_features_stack(images) -> np.ndarray:
    """Feature rows for a batch, bitwise equal to per-image extraction.

    Same-size images go through the batched resize (identical arithmetic);
    mixed sizes fall back to the per-image path.
    """
    if not images:
        return np.empty((0, FEATURE_DIM))
    shape = images[0].pixels.shape
    if any(img.pixels.shape != shape for img in images):
        return np.stack([builtin_features(img) for img in images])
    stack = np.stack([img.pixels for img in images])
    small = quantize_u8(resize_bilinear_float_batch(stack, DOWNSAMPLE_SIZE, DOWNSAMPLE_SIZE))
    return small.astype(np.float64).reshape(len(images), -1) / 255.0


def model_to_bytes(model: BuiltinModel) -> bytes:
    """Little-endian binary encoding: magic, C, D, weights, biases."""
    c, d = model.weights.shape
    return (
        MODEL_MAGIC
        + struct.pack("<ii", c, d)
        + model.weights.astype("<f8").tobytes()
        + model.bias.astype("<f8").tobytes()
    )


def model_from_bytes(data: bytes, class_names=None) -> BuiltinModel:
    """Decode :func:`model_to_bytes` output. Names are not stored in the
    binary; callers supply them (defaults to class_<i>)."""
    if data[:4] != MODEL_MAGIC:
        raise InvalidParams(f"bad model magic {data[:4]!r}")
    c, d = struct.unpack("<ii", data[4:12])
    if c < 1 or d < 1:
        raise InvalidParams(f"bad model dimensions C={c}, D={d}")
    expected = 12 + (c * d + c) * 8
    if len(data) < expected:
        raise InvalidParams(f"model file has {len(data)} bytes, expected {expected}")
    weights = np.frombuffer(data, dtype="<f8", count=c * d, offset=12).reshape(c, d)
    bias = np.frombuffer(data, dtype="<f8", count=c, offset=12 + c * d * 8)
    if class_names is None:
        class_names = [f"class_{i}" for i in range(c)]
    return BuiltinModel(weights.copy(), bias.copy(), list(class_names))


class PredictorHandle:
    """Common interface over the builtin model and external adapters."""

    kind = "abstract"
    class_names: list

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def predict(self, image: RgbImage) -> ClassProbabilities:
        raise NotImplementedError

    def predict_batch(self, images) -> list:
        """Elementwise equal to predict() on each image, in input order.

        Fails atomically: any per-image failure aborts the whole batch.
        """
        return [self.predict(image) for image in images]

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class BuiltinPredictor(PredictorHandle):
    kind = "builtin"

    def __init__(self, model: BuiltinModel, class_names=None):
        self.model = model
        self.class_names = list(class_names) if class_names is not None else list(model.class_names)
        if len(self.class_names) != model.class_count:
            raise InvalidParams("class_names length must equal the model's class count")

    def predict(self, image: RgbImage) -> ClassProbabilities:
        return self._from_features(builtin_features(image))

    def _from_features(self, x: np.ndarray) -> ClassProbabilities:
        if x.size != self.model.feature_dim:
            raise InvalidParams(
                f"model expects {self.model.feature_dim} features, got {x.size}"
            )
        logits = self.model.weights @ x + self.model.bias
        return softmax(logits)

    def predict_batch(self, images) -> list:
        # Matrix-level batching would let BLAS reorder the reductions; the
        # per-row product keeps predict() and batch results bit-identical.
        return [self._from_features(x) for x in _builtin_features_stack(images)]


class CallablePredictor(PredictorHandle):
    """Adapter for in-process black boxes (synthetic oracles, test doubles)."""

    kind = "callable"

    def __init__(self, fn, class_names):
        self.fn = fn
        self.class_names = list(class_names)

    def predict(self, image: RgbImage) -> ClassProbabilities:
        out = self.fn(image)
        probs = out if isinstance(out, ClassProbabilities) else ClassProbabilities(out)
        if probs.class_count != self.class_count:
            raise InvalidParams(
                f"callable returned {probs.class_count} probs, expected {self.class_count}"
            )
        return probs


def _validate_external_probs(payload, expect_id: int, class_count: int) -> ClassProbabilities:
    if not isinstance(payload, dict):
        raise ExternalPredictorFailure(f"expected a JSON object, got {type(payload).__name__}")
    if payload.get("id") != expect_id:
        raise ExternalPredictorFailure(
            f"response id {payload.get('id')!r} does not match request id {expect_id}"
        )
    probs = payload.get("probs")
    if not isinstance(probs, list) or len(probs) != class_count:
        raise ExternalPredictorFailure(
            f"expected {class_count} probabilities, got {probs!r}"
        )
    try:
        return ClassProbabilities(probs)
    except InvalidParams as exc:
        raise ExternalPredictorFailure(f"invalid probabilities: {exc}") from exc


def _image_request(request_id: int, image: RgbImage) -> dict:
    return {
        "id": request_id,
        "width": image.width,
        "height": image.height,
        "pixels_b64": base64.b64encode(image.pixels.tobytes()).decode("ascii"),
    }


class _ExternalBase(PredictorHandle):
    kind = "external"

    def __init__(self, timeout: float):
        self.timeout = timeout
        self._lock = threading.Lock()  # one in-flight request per connection
        self._next_id = 0
        self.class_names = []

    def _exchange(self, payload: dict) -> dict:
        raise NotImplementedError

    def _handshake(self):
        reply = self._exchange({"hello": True})
        if not isinstance(reply, dict):
            raise ExternalPredictorFailure("handshake reply is not a JSON object")
        count = reply.get("class_count")
        names = reply.get("class_names")
        if not isinstance(count, int) or count < 1:
            raise ExternalPredictorFailure(f"bad class_count in handshake: {count!r}")
        if (
            not isinstance(names, list)
            or len(names) != count
            or not all(isinstance(n, str) for n in names)
        ):
            raise ExternalPredictorFailure(f"bad class_names in handshake: {names!r}")
        self.class_names = names

    def predict(self, image: RgbImage) -> ClassProbabilities:
        with self._lock:
            self._next_id += 1
            request_id = self._next_id
            reply = self._exchange(_image_request(request_id, image))
        return _validate_external_probs(reply, request_id, self.class_count)


class ExternalProcessPredictor(_ExternalBase):
    """Speaks newline-delimited JSON over a spawned subprocess's stdio."""

    def __init__(self, command: str, timeout: float = 30.0):
        super().__init__(timeout)
        argv = shlex.split(command)
        if not argv:
            raise InvalidParams("external command is empty")
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise ExternalPredictorFailure(f"failed to spawn {argv[0]!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._handshake()
        except ExternalPredictorFailure:
            self.close()
            raise

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _exchange(self, payload: dict) -> dict:
        try:
            self._proc.stdin.write(json.dumps(payload).encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise ExternalPredictorFailure(f"predictor process rejected input: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ExternalPredictorFailure(
                f"predictor process did not answer within {self.timeout}s"
            ) from None
        if line is None:
            raise ExternalPredictorFailure("predictor process closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ExternalPredictorFailure(f"malformed JSON from predictor: {exc}") from exc

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


class ExternalHttpPredictor(_ExternalBase):
    """POSTs each exchange to the endpoint's /predict route."""

    def __init__(self, url: str, timeout: float = 30.0):
        super().__init__(timeout)
        self.url = url if url.rstrip("/").endswith("/predict") else url.rstrip("/") + "/predict"
        self._session = requests.Session()
        self._handshake()

    def _exchange(self, payload: dict) -> dict:
        try:
            response = self._session.post(self.url, json=payload, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise ExternalPredictorFailure(f"HTTP predictor failure: {exc}") from exc
        except ValueError as exc:
            raise ExternalPredictorFailure(f"malformed JSON from predictor: {exc}") from exc

    def close(self):
        self._session.close()


@dataclass
class TrainingResult:
    model: BuiltinModel
    epoch_losses: list


def _cross_entropy_and_grads(weights, bias, x, labels):
    """Mean cross-entropy over the batch and its analytic gradients."""
    logits = x @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = x.shape[0]
    loss = float(-np.log(probs[np.arange(n), labels] + 1e-300).mean())
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    return loss, delta.T @ x, delta.sum(axis=0)


def train_builtin(
    dataset: LabeledDataset,
    epochs: int,
    learning_rate: float = 0.1,
    seed: int = 0,
    batch_size: int = 32,
) -> TrainingResult:
    """Mini-batch SGD on softmax regression from zero-initialized weights.

    Shuffling is fixed by ``seed``; returns the final model and the
    per-epoch mean training loss.
    """
    from .rng import generator

    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if epochs < 1:
        raise InvalidParams(f"epochs must be >= 1, got {epochs}")

    x = np.stack([builtin_features(img) for img in dataset.images])
    y = np.asarray(dataset.labels, dtype=np.int64)
    class_count = dataset.class_count or int(y.max()) + 1
    weights = np.zeros((class_count, x.shape[1]))
    bias = np.zeros(class_count)

    rng = generator(seed, "train-builtin")
    n = len(y)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            loss, grad_w, grad_b = _cross_entropy_and_grads(weights, bias, x[batch], y[batch])
            weights -= learning_rate * grad_w
            bias -= learning_rate * grad_b
            total += loss * len(batch)
        losses.append(total / n)

    names = list(dataset.category_names) or [f"class_{i}" for i in range(class_count)]
    return TrainingResult(BuiltinModel(weights, bias, names), losses)


def training_accuracy(model: BuiltinModel, dataset: LabeledDataset) -> float:
    predictor = BuiltinPredictor(model)
    hits = sum(
        predictor.predict(img).argmax_class == int(label)
        for img, label in zip(dataset.images, dataset.labels)
    )
    return hits / len(dataset)
