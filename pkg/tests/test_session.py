"""Dataset loading, batch execution, and interactive toggle state."""

import numpy as np
import pytest

from limevis.errors import (
    EmptyCategory,
    InvalidParams,
    LabelImageCountMismatch,
    MalformedFile,
    OutOfBounds,
    SuperpixelOutOfRange,
    UnknownImage,
)
from limevis.imaging import STL10_RECORD_BYTES, LabeledDataset, RgbImage, write_ppm, write_stl10_record
from limevis.lime import ExplainConfig
from limevis.predictor import CallablePredictor
from limevis.segmentation import SlicParams, segment
from limevis.session import (
    current_prediction,
    execute_category,
    load_dataset,
    overview_cells,
    pixel_to_superpixel,
    reset_toggles,
    resolve_category,
    session_summary,
    toggle_superpixel,
)

from conftest import make_linear_oracle, random_image, smooth_random_image, uniform_image


def write_ppm_dataset(root, rng, categories=("sky", "grass"), per_category=3, size=24):
    """Dataset of smooth random images (noise would collapse to one segment)."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "categories.txt").write_text("\n".join(categories) + "\n")
    for name in categories:
        category_dir = root / name
        category_dir.mkdir()
        for i in range(per_category):
            img = smooth_random_image(rng, size, size)
            (category_dir / f"{i}.ppm").write_bytes(write_ppm(img))
    return root


def write_stl10_dataset(root, rng, labels):
    root.mkdir(parents=True, exist_ok=True)
    records = b"".join(
        write_stl10_record(random_image(rng, 96, 96)) for _ in labels
    )
    (root / "train_X.bin").write_bytes(records)
    (root / "train_y.bin").write_bytes(bytes(labels))
    return root


def uniform_predictor(class_count=4):
    return CallablePredictor(
        lambda _: [1.0 / class_count] * class_count,
        [f"c{i}" for i in range(class_count)],
    )


def small_config(seed=0, **kwargs):
    kwargs.setdefault("segmentation", SlicParams(n_segments=4))
    kwargs.setdefault("num_samples", 64)
    return ExplainConfig(seed=seed, **kwargs)


class TestLoadDataset:
    def test_ppm_directory(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "data", rng)
        dataset = load_dataset(root, "ppm-directory")
        assert len(dataset) == 6
        assert dataset.category_names == ["sky", "grass"]
        assert dataset.labels.tolist() == [0, 0, 0, 1, 1, 1]

    def test_missing_categories_file(self, tmp_path):
        (tmp_path / "data").mkdir()
        with pytest.raises(MalformedFile):
            load_dataset(tmp_path / "data", "ppmdir")

    def test_stl10_binary(self, tmp_path, rng):
        root = write_stl10_dataset(tmp_path / "stl", rng, labels=[1, 5, 10])
        dataset = load_dataset(root, "stl10-binary")
        assert len(dataset) == 3
        assert dataset.labels.tolist() == [0, 4, 9]
        assert dataset.category_names[0] == "airplane"
        assert dataset.images[0].width == 96

    def test_stl10_zero_label_rejected(self, tmp_path, rng):
        root = write_stl10_dataset(tmp_path / "stl", rng, labels=[0, 1])
        with pytest.raises(MalformedFile):
            load_dataset(root, "stl10")

    def test_stl10_count_mismatch(self, tmp_path, rng):
        root = write_stl10_dataset(tmp_path / "stl", rng, labels=[1, 2])
        (root / "train_y.bin").write_bytes(bytes([1, 2, 3]))
        with pytest.raises(LabelImageCountMismatch):
            load_dataset(root, "stl10")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InvalidParams):
            load_dataset(tmp_path, "tarball")

    def test_resolve_category(self, rng, tmp_path):
        root = write_ppm_dataset(tmp_path / "d", rng)
        dataset = load_dataset(root, "ppmdir")
        assert resolve_category(dataset, "grass") == 1
        assert resolve_category(dataset, 0) == 0
        assert resolve_category(dataset, "1") == 1
        with pytest.raises(InvalidParams):
            resolve_category(dataset, "ocean")
        with pytest.raises(InvalidParams):
            resolve_category(dataset, 7)


class TestExecuteCategory:
    def test_constant_predictor_correctness_flags(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, categories=("a", "b", "c", "d"), per_category=2)
        dataset = load_dataset(root, "ppmdir")
        predictor = uniform_predictor(4)
        on_first = execute_category(dataset, 0, small_config(), predictor)
        assert all(e.correct for e in on_first.entries)
        on_last = execute_category(dataset, 3, small_config(), predictor)
        assert not any(e.correct for e in on_last.entries)

    def test_red_count_matches_oracle_recount(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=8)
        dataset = load_dataset(root, "ppmdir")

        def quirky(img):
            # class depends on the parity of the top-left red sample
            return [0.9, 0.1] if img.pixels[0, 0, 0] % 2 == 0 else [0.1, 0.9]

        predictor = CallablePredictor(quirky, ["even", "odd"])
        session = execute_category(dataset, 0, small_config(), predictor)
        red = sum(1 for e in session.entries if not e.correct)
        expected_red = sum(
            1
            for image_id in range(8)
            if np.argmax(predictor.predict(dataset.images[image_id]).probs) != 0
        )
        assert red == expected_red
        assert session_summary(session)["incorrect_count"] == red

    def test_same_seed_reproducible(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=8)
        dataset = load_dataset(root, "ppmdir")
        predictor = uniform_predictor(2)
        a = execute_category(dataset, 0, small_config(seed=42), predictor)
        b = execute_category(dataset, 0, small_config(seed=42), predictor)
        assert [e.explanation.selected for e in a.entries] == [
            e.explanation.selected for e in b.entries
        ]
        assert np.array_equal(a.embedding.coords, b.embedding.coords)

    def test_worker_count_does_not_change_results(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=8)
        dataset = load_dataset(root, "ppmdir")
        predictor = uniform_predictor(2)
        serial = execute_category(dataset, 0, small_config(seed=1), predictor, workers=1)
        threaded = execute_category(dataset, 0, small_config(seed=1), predictor, workers=4)
        for a, b in zip(serial.entries, threaded.entries):
            assert np.array_equal(a.explanation.weights, b.explanation.weights)
            assert a.lime_image == b.lime_image
        assert np.array_equal(serial.embedding.coords, threaded.embedding.coords)

    def test_empty_category(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng)
        (root / "void").mkdir()
        (root / "categories.txt").write_text("sky\ngrass\nvoid\n")
        dataset = load_dataset(root, "ppmdir")
        with pytest.raises(EmptyCategory):
            execute_category(dataset, "void", small_config(), uniform_predictor(3))

    def test_limit_and_shuffle(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=9)
        dataset = load_dataset(root, "ppmdir")
        predictor = uniform_predictor(2)
        plain = execute_category(dataset, 0, small_config(), predictor, limit=5)
        assert [e.image_id for e in plain.entries] == [0, 1, 2, 3, 4]
        shuffled = execute_category(
            dataset, 0, small_config(), predictor, limit=5, shuffle_seed=3
        )
        assert len(shuffled.entries) == 5
        assert all(0 <= e.image_id < 9 for e in shuffled.entries)

    def test_cached_probs_match_recomputation(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=4)
        dataset = load_dataset(root, "ppmdir")

        def shade(img):
            p = 0.25 + float(img.pixels.mean()) / 255.0 * 0.5
            return [p, 1.0 - p]

        predictor = CallablePredictor(shade, ["bright", "dark"])
        session = execute_category(dataset, 0, small_config(), predictor)
        for entry in session.entries:
            again = predictor.predict(entry.original)
            assert np.array_equal(entry.explanation.original_probs.probs, again.probs)

    def test_overview_grid_bijection(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=8)
        dataset = load_dataset(root, "ppmdir")
        session = execute_category(dataset, 0, small_config(), uniform_predictor(2))
        cells = overview_cells(session)
        assert len(cells) == len(session.entries)
        positions = {(c.row, c.col) for c in cells}
        assert positions == {(i // 10, i % 10) for i in range(len(cells))}
        assert {c.image_id for c in cells} == {e.image_id for e in session.entries}


def single_image_session(rng, seed=0):
    """One-image session driven by the linear visibility oracle.

    A colored-quadrant image guarantees exactly four superpixels, and colors
    >= 10 keep the oracle's probes clear of the black fill.
    """
    from conftest import quadrant_image

    img = quadrant_image(32, colors=((200, 40, 40), (40, 200, 40), (40, 40, 200), (200, 200, 40)))
    spmap = segment(img, SlicParams(n_segments=4, compactness=1.0))
    assert spmap.num_segments == 4
    predictor, coefs, base = make_linear_oracle(img, spmap, seed=seed)
    dataset = LabeledDataset([img], [0], ["class_0", "class_1", "class_2"], source="mem")
    config = ExplainConfig(
        segmentation=SlicParams(n_segments=4, compactness=1.0),
        num_samples=256,
        ridge_lambda=1e-6,
        hide_color=(0, 0, 0),
        seed=seed,
    )
    session = execute_category(dataset, 0, config, predictor)
    return session, coefs


class TestToggles:
    def test_double_toggle_restores_everything(self, rng):
        session, _ = single_image_session(rng)
        image_id = session.entries[0].image_id
        before_vec = session.toggle_states[image_id].copy()
        before_probs = current_prediction(session, image_id).probs.copy()
        vec1, img1, probs1 = toggle_superpixel(session, image_id, 2)
        assert vec1[2] == 0
        vec2, img2, probs2 = toggle_superpixel(session, image_id, 2)
        assert np.array_equal(vec2, before_vec)
        assert img2 == session.entries[0].original
        assert np.array_equal(probs2.probs, before_probs)
        assert not np.array_equal(probs1.probs, before_probs)

    def test_all_off_equals_black_image(self, rng):
        session, _ = single_image_session(rng)
        entry = session.entries[0]
        for sid in range(entry.spmap.num_segments):
            _, masked, probs = toggle_superpixel(session, entry.image_id, sid)
        assert np.all(masked.pixels == 0)
        black = RgbImage(np.zeros_like(entry.original.pixels))
        expected = session.predictor.predict(black)
        assert np.array_equal(probs.probs, expected.probs)

    def test_top_positive_ablation_decreases_target(self, rng):
        for seed in range(5):
            session, coefs = single_image_session(rng, seed=seed)
            entry = session.entries[0]
            top = entry.explanation.selected[0]
            assert entry.explanation.weights[top] > 0
            before = current_prediction(session, entry.image_id)[0]
            _, _, probs = toggle_superpixel(session, entry.image_id, top)
            assert probs[0] < before
            assert np.isclose(before - probs[0], coefs[top], atol=1e-9)

    def test_bad_ids(self, rng):
        session, _ = single_image_session(rng)
        image_id = session.entries[0].image_id
        with pytest.raises(UnknownImage):
            toggle_superpixel(session, image_id + 999, 0)
        with pytest.raises(SuperpixelOutOfRange):
            toggle_superpixel(session, image_id, 99)

    def test_toggles_on_different_images_commute(self, tmp_path, rng):
        root = write_ppm_dataset(tmp_path / "d", rng, per_category=4)
        dataset = load_dataset(root, "ppmdir")
        predictor = uniform_predictor(2)

        def run(order):
            session = execute_category(dataset, 0, small_config(), predictor)
            results = {}
            for image_id, sid in order:
                vec, img, probs = toggle_superpixel(session, image_id, sid)
                results[image_id] = (vec.copy(), img, probs.probs.copy())
            return results, {k: v.copy() for k, v in session.toggle_states.items()}

        forward, state_f = run([(0, 1), (2, 0)])
        backward, state_b = run([(2, 0), (0, 1)])
        for image_id in (0, 2):
            assert np.array_equal(forward[image_id][0], backward[image_id][0])
            assert forward[image_id][1] == backward[image_id][1]
            assert np.array_equal(forward[image_id][2], backward[image_id][2])
        for key in state_f:
            assert np.array_equal(state_f[key], state_b[key])


class TestReset:
    def test_reset_restores_original_prediction(self, rng):
        session, _ = single_image_session(rng)
        entry = session.entries[0]
        toggle_superpixel(session, entry.image_id, 0)
        toggle_superpixel(session, entry.image_id, 3)
        vec = reset_toggles(session, entry.image_id)
        assert np.all(vec == 1)
        after = current_prediction(session, entry.image_id)
        assert np.array_equal(after.probs, entry.explanation.original_probs.probs)

    def test_reset_untouched_noop(self, rng):
        session, _ = single_image_session(rng)
        entry = session.entries[0]
        before = session.toggle_states[entry.image_id].copy()
        vec = reset_toggles(session, entry.image_id)
        assert np.array_equal(vec, before)

    def test_reset_then_sequence_equals_fresh_sequence(self, rng):
        session, _ = single_image_session(rng)
        entry = session.entries[0]
        sequence = [1, 3, 1, 0]
        # dirty the state, then reset and replay
        toggle_superpixel(session, entry.image_id, 2)
        reset_toggles(session, entry.image_id)
        replay = [toggle_superpixel(session, entry.image_id, s) for s in sequence]
        fresh, _ = single_image_session(rng=np.random.default_rng(20240917))
        fresh_entry = fresh.entries[0]
        fresh_results = [toggle_superpixel(fresh, fresh_entry.image_id, s) for s in sequence]
        for (va, ia, pa), (vb, ib, pb) in zip(replay, fresh_results):
            assert np.array_equal(va, vb)
            assert ia == ib
            assert np.array_equal(pa.probs, pb.probs)

    def test_reset_unknown_image(self, rng):
        session, _ = single_image_session(rng)
        with pytest.raises(UnknownImage):
            reset_toggles(session, 123456)


class TestPixelToSuperpixel:
    def test_single_segment_origin(self, rng):
        img = uniform_image(16, 16, (50, 60, 70))
        dataset = LabeledDataset([img], [0], ["only"], source="mem")
        session = execute_category(
            dataset, 0, small_config(segmentation=SlicParams(n_segments=1)), uniform_predictor(1)
        )
        assert pixel_to_superpixel(session, session.entries[0].image_id, 0, 0) == 0

    def test_quadrants_give_four_ids(self, rng):
        from conftest import quadrant_image

        img = quadrant_image(32)
        dataset = LabeledDataset([img], [0], ["quad"], source="mem")
        config = small_config(segmentation=SlicParams(n_segments=4, compactness=1.0))
        session = execute_category(dataset, 0, config, uniform_predictor(1))
        image_id = session.entries[0].image_id
        ids = {
            pixel_to_superpixel(session, image_id, 8, 8),
            pixel_to_superpixel(session, image_id, 24, 8),
            pixel_to_superpixel(session, image_id, 8, 24),
            pixel_to_superpixel(session, image_id, 24, 24),
        }
        assert ids == {0, 1, 2, 3}

    def test_out_of_bounds(self, rng):
        session, _ = single_image_session(rng)
        image_id = session.entries[0].image_id
        with pytest.raises(OutOfBounds):
            pixel_to_superpixel(session, image_id, 32, 0)
        with pytest.raises(OutOfBounds):
            pixel_to_superpixel(session, image_id, 0, -1)
