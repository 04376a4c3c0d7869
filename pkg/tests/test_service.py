"""Tests for the HTTP service: lifecycle, endpoint contracts, error mapping,
and bit-exact agreement between service and library inference."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from siterec.catalog import desk_catalog
from siterec.checkpoint import save_checkpoint
from siterec.infer import Recommender
from siterec.model import LocationNet, ModelConfig
from siterec.scene import OBB, Scene, Unit
from siterec.sceneio import scene_from_doc, scene_to_doc
from siterec.service import (
    ENV_CHECKPOINT,
    ENV_PORT,
    ServiceConfig,
    create_app,
    load_service_config,
)
from siterec.synth import GeneratorConfig, generate_scene

from .test_model import TINY

CAT = desk_catalog()


def _scene_doc(units, grid_w=32, grid_h=32, forbidden=None):
    mask = np.zeros((grid_w, grid_h), dtype=bool)
    if forbidden is not None:
        mask[forbidden] = True
    return scene_to_doc(Scene(grid_w, grid_h, CAT, units, mask))


GOOD_DOC_UNITS = [Unit(0, 8, OBB(2, 2, 5, 4), 0), Unit(1, 10, OBB(12, 2, 4, 4), 0)]


@pytest.fixture(scope="module")
def checkpoint_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("svc") / "model.ckpt"
    cfg = ModelConfig(**{**TINY.to_doc(), "visual_channels": TINY.visual_channels, "n_max": 64})
    save_checkpoint(path, LocationNet(cfg, seed=0), CAT, extra={"variant": "full"})
    return path


@pytest.fixture(scope="module")
def client(checkpoint_path):
    app = create_app(ServiceConfig(checkpoint=str(checkpoint_path)))
    with TestClient(app) as c:
        yield c


# ---------------------------------------------------------------------------
# Lifecycle


def test_health_is_503_before_load(checkpoint_path):
    app = create_app(ServiceConfig(checkpoint=str(checkpoint_path)))
    cold = TestClient(app)  # no lifespan: checkpoint not loaded yet
    assert cold.get("/v1/health").status_code == 503
    with TestClient(app) as warm:
        response = warm.get("/v1/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert len(body["checkpoint_id"]) == 16


def test_catalog_endpoint(client):
    body = client.get("/v1/catalog").json()
    assert body["name"] == "desk12"
    assert len(body["entries"]) == len(CAT)


# ---------------------------------------------------------------------------
# Validation and extraction


def test_validate_clean_scene(client):
    response = client.post("/v1/validate", json={"scene": _scene_doc(GOOD_DOC_UNITS)})
    assert response.status_code == 200
    assert response.json() == {"violations": []}


def test_validate_reports_violations(client):
    doc = _scene_doc([Unit(0, 8, OBB(2, 2, 5, 4), 0), Unit(1, 8, OBB(4, 3, 5, 4), 0)])
    body = client.post("/v1/validate", json={"scene": doc}).json()
    kinds = {v["kind"] for v in body["violations"]}
    assert "overlap" in kinds
    for v in body["violations"]:
        assert set(v) == {"kind", "message", "unit_ids"}


def test_validate_rejects_malformed_document(client):
    response = client.post("/v1/validate", json={"scene": {"format": "nope"}})
    assert response.status_code == 422


def test_extract_returns_graph_document(client):
    response = client.post("/v1/extract", json={"scene": _scene_doc(GOOD_DOC_UNITS)})
    assert response.status_code == 200
    doc = response.json()
    assert len(doc["nodes"]) == 2
    assert {e["src"] for e in doc["edges"]} <= {0, 1}
    assert all(len(triplet) == 3 for triplet in doc["A"])


def test_extract_rejects_invalid_scene(client):
    doc = _scene_doc([Unit(0, 8, OBB(2, 2, 5, 4), 0), Unit(1, 8, OBB(4, 3, 5, 4), 0)])
    response = client.post("/v1/extract", json={"scene": doc})
    assert response.status_code == 422
    assert response.json()["detail"]["violations"]


# ---------------------------------------------------------------------------
# Recommendation


def test_recommend_response_shape(client):
    response = client.post("/v1/recommend", json={"scene": _scene_doc(GOOD_DOC_UNITS)})
    assert response.status_code == 200
    body = response.json()
    for key in ("heatmap", "display", "edges", "peak", "validity", "empty",
                "node_count", "checkpoint_id", "latency_ms"):
        assert key in body
    hm = body["heatmap"]
    assert hm["grid_w"] == 32 and hm["grid_h"] == 32 and hm["encoding"] == "f32le"
    values = np.frombuffer(base64.b64decode(hm["values_b64"]), dtype="<f4")
    assert values.shape == (32 * 32,)
    grid = values.reshape(32, 32)
    if not body["empty"]:
        assert grid.max() == pytest.approx(1.0)
        assert grid[tuple(body["peak"])] == grid.max()
    assert body["node_count"] == 2


def test_recommend_argmax_is_byte_identical(client):
    doc = _scene_doc(GOOD_DOC_UNITS)
    a = client.post("/v1/recommend", json={"scene": doc}).json()
    b = client.post("/v1/recommend", json={"scene": doc}).json()
    assert a["heatmap"]["values_b64"] == b["heatmap"]["values_b64"]
    assert a["display"]["values_b64"] == b["display"]["values_b64"]
    assert a["edges"] == b["edges"] and a["peak"] == b["peak"]


def test_recommend_rejects_zero_node_scene(client):
    response = client.post("/v1/recommend", json={"scene": _scene_doc([])})
    assert response.status_code == 422
    violations = response.json()["detail"]["violations"]
    assert violations[0]["kind"] == "empty_graph"


def test_recommend_rejects_invalid_scene(client):
    doc = _scene_doc([Unit(0, 8, OBB(2, 2, 5, 4), 0), Unit(0, 8, OBB(20, 2, 5, 4), 0)])
    response = client.post("/v1/recommend", json={"scene": doc})
    assert response.status_code == 422
    kinds = {v["kind"] for v in response.json()["detail"]["violations"]}
    assert "duplicate_id" in kinds


def test_recommend_rejects_unknown_mode(client):
    doc = _scene_doc(GOOD_DOC_UNITS)
    response = client.post(
        "/v1/recommend", json={"scene": doc, "options": {"mode": "beam"}}
    )
    assert response.status_code == 422


def test_recommend_oversized_graph_is_413(tmp_path):
    cfg = ModelConfig(**{**TINY.to_doc(), "visual_channels": TINY.visual_channels, "n_max": 4})
    path = tmp_path / "small.ckpt"
    save_checkpoint(path, LocationNet(cfg, seed=0), CAT, extra={})
    units = [Unit(i, 3, OBB(2 + 6 * i, 2, 1, 1), 0) for i in range(5)]
    with TestClient(create_app(ServiceConfig(checkpoint=str(path)))) as small:
        response = small.post("/v1/recommend", json={"scene": _scene_doc(units)})
        assert response.status_code == 413


def test_internal_error_returns_opaque_id(client):
    real = client.app.state.engine

    class Boom:
        catalog = real.catalog

        def recommend(self, *args, **kwargs):
            raise RuntimeError("wires crossed")

    lenient = TestClient(client.app, raise_server_exceptions=False)
    client.app.state.engine = Boom()
    try:
        response = lenient.post(
            "/v1/recommend", json={"scene": _scene_doc(GOOD_DOC_UNITS)}
        )
    finally:
        client.app.state.engine = real
    assert response.status_code == 500
    detail = response.json()["detail"]
    assert set(detail) == {"error_id"}
    assert "wires" not in str(detail)


def test_sample_mode_is_seed_deterministic(client):
    doc = _scene_doc(GOOD_DOC_UNITS)
    opts = {"mode": "sample", "seed": 5}
    a = client.post("/v1/recommend", json={"scene": doc, "options": opts}).json()
    b = client.post("/v1/recommend", json={"scene": doc, "options": opts}).json()
    assert a["heatmap"]["values_b64"] == b["heatmap"]["values_b64"]


# ---------------------------------------------------------------------------
# Golden agreement with library inference


def test_service_matches_library_bit_for_bit(client, checkpoint_path):
    engine = Recommender.from_checkpoint(checkpoint_path, CAT)
    checked = 0
    seed = 0
    while checked < 20:
        scene, _ = generate_scene(GeneratorConfig(), seed=seed)
        seed += 1
        doc = scene_to_doc(scene)
        response = client.post("/v1/recommend", json={"scene": doc})
        assert response.status_code == 200
        body = response.json()
        rec = engine.recommend(scene_from_doc(doc))
        expected = rec.heatmap.values.astype("<f4").tobytes(order="C")
        assert base64.b64decode(body["heatmap"]["values_b64"]) == expected
        display = rec.display.values.astype("<f4").tobytes(order="C")
        assert base64.b64decode(body["display"]["values_b64"]) == display
        assert body["edges"] == [{"node": j, "type": t} for j, t in rec.edges]
        assert body["peak"] == list(rec.peak)
        checked += 1


# ---------------------------------------------------------------------------
# Configuration


def test_service_config_validation():
    with pytest.raises(ValueError, match="checkpoint"):
        ServiceConfig(checkpoint="")
    with pytest.raises(ValueError, match="pool_size"):
        ServiceConfig(checkpoint="x", pool_size=0)


def test_load_service_config_file_and_env(tmp_path, monkeypatch):
    cfg_file = tmp_path / "svc.json"
    cfg_file.write_text('{"checkpoint": "a.ckpt", "port": 9000, "pool_size": 3}')
    monkeypatch.delenv(ENV_PORT, raising=False)
    monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
    cfg = load_service_config(cfg_file)
    assert (cfg.checkpoint, cfg.port, cfg.pool_size) == ("a.ckpt", 9000, 3)

    monkeypatch.setenv(ENV_PORT, "7777")
    monkeypatch.setenv(ENV_CHECKPOINT, "b.ckpt")
    cfg = load_service_config(cfg_file)
    assert (cfg.checkpoint, cfg.port) == ("b.ckpt", 7777)

    with pytest.raises(ValueError, match="checkpoint"):
        monkeypatch.delenv(ENV_CHECKPOINT)
        load_service_config(None)
