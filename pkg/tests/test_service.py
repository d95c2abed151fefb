"""HTTP API contract: routes, payload shapes, error mapping."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from limevis.imaging import read_ppm
from limevis.predictor import CallablePredictor
from limevis.service import create_app
from limevis.session import load_dataset

from test_session import write_ppm_dataset

SMALL_CONFIG = {
    "segmentation": {"algorithm": "slic", "n_segments": 4},
    "num_samples": 64,
    "seed": 3,
}


@pytest.fixture
def client(tmp_path, rng):
    root = write_ppm_dataset(tmp_path / "data", rng, per_category=8)
    dataset = load_dataset(root, "ppmdir")

    def shade(img):
        p = 0.25 + float(img.pixels.mean()) / 255.0 * 0.5
        return [p, 1.0 - p]

    predictor = CallablePredictor(shade, ["sky", "grass"])
    app = create_app(dataset, predictor)
    with TestClient(app) as test_client:
        yield test_client


def decode_cell_image(payload):
    return read_ppm(base64.b64decode(payload["ppm_b64"]))


class TestRoutes:
    def test_categories(self, client):
        assert client.get("/api/categories").json() == {"categories": ["sky", "grass"]}

    def test_no_session_conflict(self, client):
        for url in ("/api/overview", "/api/embedding", "/api/image/0/detail"):
            response = client.get(url)
            assert response.status_code == 409
            assert response.json()["error_code"] == "no_session"
        assert client.post("/api/image/0/toggle", json={"x": 0, "y": 0}).status_code == 409

    def test_execute_and_overview(self, client):
        response = client.post("/api/execute", json={"category": "sky", "config": SMALL_CONFIG})
        assert response.status_code == 200
        body = response.json()
        assert body["session_id"] == 1
        assert len(body["cells"]) == 8
        assert [c["row"] * 10 + c["col"] for c in body["cells"]] == list(range(8))

        overview = client.get("/api/overview", params={"mode": "lime"}).json()
        assert len(overview["cells"]) == 8
        image = decode_cell_image(overview["cells"][0])
        assert (image.width, image.height) == (24, 24)
        original = client.get("/api/overview", params={"mode": "original"}).json()
        assert decode_cell_image(original["cells"][0]).width == 24

    def test_overview_bad_mode(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        response = client.get("/api/overview", params={"mode": "sideways"})
        assert response.status_code == 400
        assert response.json()["error_code"] == "invalid_params"

    def test_embedding_points(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        points = client.get("/api/embedding").json()["points"]
        assert len(points) == 8
        for point in points:
            assert set(point) == {"image_id", "x", "y", "correct"}

    def test_detail_payload(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        detail = client.get("/api/image/0/detail").json()
        assert set(detail) >= {
            "original",
            "lime",
            "boundary_overlay",
            "spmap",
            "original_probs",
            "class_names",
            "toggle",
            "current_probs",
        }
        assert detail["class_names"] == ["sky", "grass"]
        assert abs(sum(detail["original_probs"]) - 1.0) < 1e-6
        assert detail["current_probs"] == detail["original_probs"]
        spmap = detail["spmap"]
        assert spmap["width"] == 24 and spmap["height"] == 24
        assert len(spmap["labels"]) == 24 * 24
        assert detail["toggle"] == [1] * spmap["num_segments"]
        overlay = decode_cell_image(detail["boundary_overlay"])
        original = decode_cell_image(detail["original"])
        changed = np.any(overlay.pixels != original.pixels, axis=2)
        assert np.all(overlay.pixels[changed] == (255, 255, 0))

    def test_unknown_image_maps_to_400(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        response = client.get("/api/image/999/detail")
        assert response.status_code == 400
        assert response.json()["error_code"] == "unknown_image"

    def test_execute_unknown_category(self, client):
        response = client.post("/api/execute", json={"category": "ocean"})
        assert response.status_code == 400
        assert response.json()["error_code"] == "invalid_params"

    def test_execute_bad_config_key(self, client):
        response = client.post(
            "/api/execute", json={"category": 0, "config": {"bogus_knob": 1}}
        )
        assert response.status_code == 400
        assert response.json()["error_code"] == "invalid_params"


class TestToggleRoutes:
    def test_toggle_by_coordinates_involution(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        detail = client.get("/api/image/0/detail").json()
        first = client.post("/api/image/0/toggle", json={"x": 2, "y": 3}).json()
        sid = first["superpixel_id"]
        assert first["toggle"][sid] == 0
        assert first["current_probs"] != detail["original_probs"]
        masked = decode_cell_image(first)
        labels = np.array(detail["spmap"]["labels"]).reshape(24, 24)
        hidden = labels == sid
        assert np.all(masked.pixels[hidden] == 0)

        second = client.post("/api/image/0/toggle", json={"x": 2, "y": 3}).json()
        assert second["superpixel_id"] == sid
        assert second["toggle"] == [1] * detail["spmap"]["num_segments"]
        assert second["current_probs"] == detail["original_probs"]

    def test_toggle_by_superpixel_id_and_reset(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        first = client.post("/api/image/1/toggle", json={"superpixel_id": 0}).json()
        assert first["toggle"][0] == 0
        reset = client.post("/api/image/1/reset").json()
        assert all(t == 1 for t in reset["toggle"])
        detail = client.get("/api/image/1/detail").json()
        assert reset["current_probs"] == detail["original_probs"]

    def test_toggle_bad_payloads(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        response = client.post("/api/image/0/toggle", json={"superpixel_id": 999})
        assert response.status_code == 400
        assert response.json()["error_code"] == "superpixel_out_of_range"
        response = client.post("/api/image/0/toggle", json={"x": 99, "y": 0})
        assert response.status_code == 400
        assert response.json()["error_code"] == "out_of_bounds"
        response = client.post("/api/image/0/toggle", json={})
        assert response.status_code == 400
        assert response.json()["error_code"] == "invalid_params"

    def test_reexecute_replaces_session(self, client):
        client.post("/api/execute", json={"category": 0, "config": SMALL_CONFIG})
        client.post("/api/image/0/toggle", json={"superpixel_id": 0})
        body = client.post("/api/execute", json={"category": 1, "config": SMALL_CONFIG}).json()
        assert body["session_id"] == 2
        detail = client.get("/api/image/8/detail").json()
        assert all(t == 1 for t in detail["toggle"])
        response = client.get("/api/image/0/detail")
        assert response.status_code == 400  # image 0 belongs to the replaced session
