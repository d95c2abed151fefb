"""Session orchestration: dataset loading, batch analysis, toggle state.

One session is one executed analysis of a category: up to 100 images, each
with its superpixel map, surrogate explanation, rendered explanation image,
correctness flag, and a user-controlled visibility vector that drives live
re-prediction.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import (
    Embedding2D,
    EmbeddingConfig,
    extract_features,
    pacmap_embed,
    pca_init_coords,
    standardize_features,
)
from .errors import (
    EmptyCategory,
    InvalidParams,
    LabelImageCountMismatch,
    MalformedFile,
    OutOfBounds,
    SuperpixelOutOfRange,
    UnknownImage,
)
from .imaging import (
    LabeledDataset,
    RgbImage,
    STL10_CATEGORIES,
    read_ppm,
    read_stl10_record,
    stl10_record_count,
)
from .lime import ExplainConfig, Explanation, apply_mask, explain
from .predictor import ClassProbabilities, PredictorHandle
from .rng import derive_seed, generator
from .segmentation import SuperpixelMap

GRID_COLUMNS = 10
SESSION_IMAGE_LIMIT = 100
TOGGLE_HIDE_COLOR = (0, 0, 0)


@dataclass
class SessionEntry:
    image_id: int
    original: RgbImage
    spmap: SuperpixelMap
    explanation: Explanation
    lime_image: RgbImage
    predicted_class: int
    correct: bool


@dataclass
class OverviewCell:
    image_id: int
    row: int
    col: int
    correct: bool


@dataclass
class Session:
    category: int
    category_name: str
    config: ExplainConfig
    embedding_config: EmbeddingConfig
    predictor: PredictorHandle
    entries: list
    embedding: Embedding2D
    dataset_source: str = ""
    toggle_states: dict = field(default_factory=dict)

    def __post_init__(self):
        for entry in self.entries:
            self.toggle_states.setdefault(
                entry.image_id, np.ones(entry.spmap.num_segments, dtype=np.uint8)
            )

    def entry(self, image_id: int) -> SessionEntry:
        for entry in self.entries:
            if entry.image_id == image_id:
                return entry
        raise UnknownImage(f"image {image_id} is not part of this session")


def _read_ppm_directory(root: Path) -> LabeledDataset:
    listing = root / "categories.txt"
    if not listing.is_file():
        raise MalformedFile(f"missing {listing}")
    names = [line.strip() for line in listing.read_text().splitlines() if line.strip()]
    if not names:
        raise MalformedFile("categories.txt lists no categories")
    images, labels = [], []
    for label, name in enumerate(names):
        category_dir = root / name
        if not category_dir.is_dir():
            raise MalformedFile(f"missing category directory {category_dir}")
        files = sorted(
            category_dir.glob("*.ppm"),
            key=lambda p: (not p.stem.isdigit(), int(p.stem) if p.stem.isdigit() else 0, p.name),
        )
        for ppm_path in files:
            images.append(read_ppm(ppm_path.read_bytes()))
            labels.append(label)
    return LabeledDataset(images, labels, names, source=str(root))


def _stl10_paths(path: Path):
    if path.is_dir():
        candidates = sorted(path.glob("*_X.bin"))
        if len(candidates) != 1:
            raise MalformedFile(
                f"expected exactly one *_X.bin under {path}, found {len(candidates)}"
            )
        image_path = candidates[0]
    else:
        image_path = path
    name = image_path.name
    if "X" not in name:
        raise MalformedFile(f"cannot derive a labels file from {name!r} (no 'X' in name)")
    head, _, tail = name.rpartition("X")
    label_path = image_path.with_name(head + "y" + tail)
    if not label_path.is_file():
        raise MalformedFile(f"missing labels file {label_path}")
    return image_path, label_path


def _read_stl10_binary(path: Path) -> LabeledDataset:
    image_path, label_path = _stl10_paths(path)
    data = image_path.read_bytes()
    count = stl10_record_count(data)
    raw_labels = label_path.read_bytes()
    if len(raw_labels) != count:
        raise LabelImageCountMismatch(
            f"{label_path.name} has {len(raw_labels)} labels for {count} images"
        )
    labels = np.frombuffer(raw_labels, dtype=np.uint8).astype(np.int64)
    if labels.size and (labels.min() < 1 or labels.max() > 10):
        raise MalformedFile("STL-10 labels must be in 1..10")
    names_path = image_path.with_name("class_names.txt")
    if names_path.is_file():
        names = [line.strip() for line in names_path.read_text().splitlines() if line.strip()]
        if len(names) != 10:
            raise MalformedFile(f"{names_path.name} must list 10 names, found {len(names)}")
    else:
        names = list(STL10_CATEGORIES)
    images = [read_stl10_record(data, i) for i in range(count)]
    return LabeledDataset(images, labels - 1, names, source=str(image_path))


def load_dataset(path, dataset_format: str) -> LabeledDataset:
    """Load a labeled dataset from a PPM directory or an STL-10 binary pair."""
    fmt = dataset_format.replace("_", "-").lower()
    p = Path(path)
    if not p.exists():
        raise MalformedFile(f"dataset path {p} does not exist")
    if fmt in ("ppm-directory", "ppmdir"):
        return _read_ppm_directory(p)
    if fmt in ("stl10-binary", "stl10"):
        return _read_stl10_binary(p)
    raise InvalidParams(f"unknown dataset format {dataset_format!r}")


def resolve_category(dataset: LabeledDataset, category) -> int:
    """Map a category name or index onto the label index."""
    if isinstance(category, str) and not category.isdigit():
        try:
            return dataset.category_names.index(category)
        except ValueError:
            raise InvalidParams(f"unknown category {category!r}") from None
    index = int(category)
    if index < 0 or index >= dataset.class_count:
        raise InvalidParams(f"category index {index} out of range 0..{dataset.class_count - 1}")
    return index


def _session_embedding(lime_images, config: ExplainConfig, embedding_config) -> Embedding2D:
    features = np.stack([extract_features(img) for img in lime_images])
    if embedding_config is None:
        embedding_config = EmbeddingConfig(seed=derive_seed(config.seed, "embedding"))
    n = features.shape[0]
    if n >= 7:
        # Small sessions clamp the neighbor count so far-pair sampling still
        # has eligible partners: need n - 1 - k >= 2k draws per anchor.
        k = max(1, min(embedding_config.n_neighbors, (n - 1) // 4))
        if k != embedding_config.n_neighbors:
            embedding_config = dataclasses.replace(embedding_config, n_neighbors=k)
        return pacmap_embed(features, embedding_config)
    # Below the pair-sampling minimum, degrade to the PCA layout.
    coords = pca_init_coords(standardize_features(features))
    empty = np.empty((0, 2), dtype=np.int64)
    return Embedding2D(coords, empty, empty, empty)


def execute_category(
    dataset: LabeledDataset,
    category,
    config: ExplainConfig,
    predictor: PredictorHandle,
    embedding_config: EmbeddingConfig = None,
    limit: int = SESSION_IMAGE_LIMIT,
    shuffle_seed: int = None,
    workers: int = 1,
) -> Session:
    """Run the batch analysis for one category.

    Takes the first ``limit`` images of the category in dataset order (or a
    seeded shuffle when ``shuffle_seed`` is given); each image is explained
    with the per-image seed derived from (config.seed, position), so results
    do not depend on the worker count.
    """
    category = resolve_category(dataset, category)
    indices = [i for i, label in enumerate(dataset.labels) if int(label) == category]
    if shuffle_seed is not None:
        order = generator(shuffle_seed, "shuffle").permutation(len(indices))
        indices = [indices[i] for i in order]
    indices = indices[:limit]
    if not indices:
        raise EmptyCategory(f"category {dataset.category_names[category]!r} has no images")

    def analyze(position_and_id):
        position, image_id = position_and_id
        image = dataset.images[image_id]
        per_image = dataclasses.replace(config, seed=derive_seed(config.seed, position))
        explanation, rendered, spmap = explain(image, predictor, per_image)
        predicted = explanation.original_probs.argmax_class
        return SessionEntry(
            image_id=image_id,
            original=image,
            spmap=spmap,
            explanation=explanation,
            lime_image=rendered,
            predicted_class=predicted,
            correct=predicted == category,
        )

    work = list(enumerate(indices))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(analyze, work))
    else:
        entries = [analyze(item) for item in work]

    embedding = _session_embedding([e.lime_image for e in entries], config, embedding_config)
    return Session(
        category=category,
        category_name=dataset.category_names[category],
        config=config,
        embedding_config=embedding_config
        or EmbeddingConfig(seed=derive_seed(config.seed, "embedding")),
        predictor=predictor,
        entries=entries,
        embedding=embedding,
        dataset_source=dataset.source,
    )


def overview_cells(session: Session) -> list:
    """Row-major grid cells (10 columns) for the overview layout."""
    return [
        OverviewCell(
            image_id=entry.image_id,
            row=i // GRID_COLUMNS,
            col=i % GRID_COLUMNS,
            correct=entry.correct,
        )
        for i, entry in enumerate(session.entries)
    ]


def toggle_superpixel(session: Session, image_id: int, superpixel_id: int):
    """Flip one superpixel's visibility and re-predict on the masked image.

    Hidden superpixels are masked to black. Returns (toggle vector copy,
    masked image, current prediction); the vector persists in the session.
    """
    entry = session.entry(image_id)
    if superpixel_id < 0 or superpixel_id >= entry.spmap.num_segments:
        raise SuperpixelOutOfRange(
            f"superpixel {superpixel_id} out of range 0..{entry.spmap.num_segments - 1}"
        )
    toggles = session.toggle_states[image_id]
    toggles[superpixel_id] ^= 1
    masked = apply_mask(entry.original, entry.spmap, toggles, TOGGLE_HIDE_COLOR)
    current = session.predictor.predict(masked)
    return toggles.copy(), masked, current


def reset_toggles(session: Session, image_id: int) -> np.ndarray:
    """Restore the all-visible state; the next prediction equals the original."""
    entry = session.entry(image_id)
    session.toggle_states[image_id] = np.ones(entry.spmap.num_segments, dtype=np.uint8)
    return session.toggle_states[image_id].copy()


def current_prediction(session: Session, image_id: int) -> ClassProbabilities:
    """Prediction for the image under its current toggle state."""
    entry = session.entry(image_id)
    toggles = session.toggle_states[image_id]
    if np.all(toggles == 1):
        return entry.explanation.original_probs
    masked = apply_mask(entry.original, entry.spmap, toggles, TOGGLE_HIDE_COLOR)
    return session.predictor.predict(masked)


def pixel_to_superpixel(session: Session, image_id: int, x: int, y: int) -> int:
    """Segment id under a pixel click."""
    entry = session.entry(image_id)
    if x < 0 or x >= entry.original.width or y < 0 or y >= entry.original.height:
        raise OutOfBounds(
            f"({x}, {y}) outside {entry.original.width}x{entry.original.height}"
        )
    return int(entry.spmap.labels[y, x])


def session_summary(session: Session) -> dict:
    """Aggregate counts for reports: accuracy and border color tallies."""
    correct = sum(1 for e in session.entries if e.correct)
    total = len(session.entries)
    return {
        "category": session.category,
        "category_name": session.category_name,
        "num_images": total,
        "correct_count": correct,
        "incorrect_count": total - correct,
        "accuracy": correct / total,
    }
