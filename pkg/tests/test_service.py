import hashlib
import json
import shutil
import time

import pytest
from fastapi.testclient import TestClient

from sketchmotion.models import LiveBackend
from sketchmotion.service import Store, create_app

API = "/api/v1"


def wait_for_plan(client, plan_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        response = client.get(f"{API}/plans/{plan_id}")
        if response.json().get("status") != "running":
            return response
        time.sleep(0.05)
    raise AssertionError(f"plan {plan_id} still running after {timeout}s")


def closed_port_backend():
    return LiveBackend("http://127.0.0.1:9", retries=0, retry_delay_s=0.0, timeout_s=2.0)


@pytest.fixture(scope="module")
def client(tmp_path_factory, fixture_dir):
    root = tmp_path_factory.mktemp("service")
    scenario_dir = root / "scenarios"
    scenario_dir.mkdir()
    shutil.copy(fixture_dir / "scenario_slide.json", scenario_dir / "slide.json")
    app = create_app(
        data_dir=root / "data",
        scenario_dirs=[scenario_dir],
        live_factory=closed_port_backend,
    )
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture(scope="module")
def scene_id(client, fixture_dir):
    files = {
        "image1": ("cam1.png", (fixture_dir / "scene_cam1.png").read_bytes(), "image/png"),
        "image2": ("cam2.png", (fixture_dir / "scene_cam2.png").read_bytes(), "image/png"),
        "calibration": ("calib.json", (fixture_dir / "calibration_fixture_a.json").read_bytes(), "application/json"),
    }
    response = client.post(f"{API}/scenes", files=files)
    assert response.status_code == 201, response.text
    doc = response.json()
    assert doc["diagnostics"] == []
    return doc["scene_id"]


@pytest.fixture(scope="module")
def instruction_id(client, fixture_dir):
    response = client.post(
        f"{API}/instructions", content=(fixture_dir / "instruction_slide.json").read_bytes()
    )
    assert response.status_code == 201, response.text
    return response.json()["instruction_id"]


@pytest.fixture(scope="module")
def slide_plan_body(fixture_dir, scene_id, instruction_id):
    config = json.loads((fixture_dir / "pipeline_config_slide.json").read_text())
    return {
        "scene_id": scene_id,
        "instruction_id": instruction_id,
        "backend": "scripted:slide",
        "config": config,
    }


@pytest.fixture(scope="module")
def finished_plan(client, slide_plan_body):
    response = client.post(f"{API}/plans", json=slide_plan_body)
    assert response.status_code == 202, response.text
    plan_id = response.json()["plan_id"]
    done = wait_for_plan(client, plan_id)
    assert done.json()["status"] == "done", done.text
    return plan_id


class TestHealth:
    def test_healthz(self, client):
        doc = client.get("/healthz").json()
        assert doc["status"] == "ok"
        assert "version" in doc


class TestScenes:
    def test_malformed_calibration(self, client, fixture_dir):
        files = {
            "image1": ("a.png", (fixture_dir / "scene_cam1.png").read_bytes(), "image/png"),
            "image2": ("b.png", (fixture_dir / "scene_cam2.png").read_bytes(), "image/png"),
            "calibration": ("c.json", b"{oops", "application/json"),
        }
        response = client.post(f"{API}/scenes", files=files)
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "ParseError"

    def test_wrong_view_count(self, client, fixture_dir):
        one_view = json.dumps(json.loads((fixture_dir / "calibration_fixture_a.json").read_text())[:1])
        files = {
            "image1": ("a.png", (fixture_dir / "scene_cam1.png").read_bytes(), "image/png"),
            "image2": ("b.png", (fixture_dir / "scene_cam2.png").read_bytes(), "image/png"),
            "calibration": ("c.json", one_view.encode(), "application/json"),
        }
        response = client.post(f"{API}/scenes", files=files)
        assert response.status_code == 400
        assert "exactly 2 views" in response.json()["error"]["message"]

    def test_undecodable_image(self, client, fixture_dir):
        files = {
            "image1": ("a.png", b"not a png", "image/png"),
            "image2": ("b.png", (fixture_dir / "scene_cam2.png").read_bytes(), "image/png"),
            "calibration": (
                "c.json",
                (fixture_dir / "calibration_fixture_a.json").read_bytes(),
                "application/json",
            ),
        }
        response = client.post(f"{API}/scenes", files=files)
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "InvalidInputError"


class TestInstructions:
    def test_rejects_malformed_body(self, client):
        response = client.post(f"{API}/instructions", content=b"[1, 2")
        assert response.status_code == 400

    def test_rejects_invalid_document(self, client):
        response = client.post(f"{API}/instructions", content=json.dumps({"strokes": []}).encode())
        assert response.status_code == 400


class TestPlanFlow:
    def test_unknown_scene_404(self, client, instruction_id):
        response = client.post(
            f"{API}/plans", json={"scene_id": "f" * 64, "instruction_id": instruction_id}
        )
        assert response.status_code == 404

    def test_unknown_instruction_404(self, client, scene_id):
        response = client.post(
            f"{API}/plans", json={"scene_id": scene_id, "instruction_id": "f" * 64}
        )
        assert response.status_code == 404

    def test_unknown_plan_404(self, client):
        assert client.get(f"{API}/plans/{'f' * 64}").status_code == 404
        assert client.get(f"{API}/plans/{'f' * 64}/file").status_code == 404

    def test_plan_file_matches_frozen_plan(self, client, finished_plan, golden_plan_bytes):
        response = client.get(f"{API}/plans/{finished_plan}/file")
        assert response.status_code == 200
        assert response.content == golden_plan_bytes

    def test_done_payload_structure(self, client, finished_plan):
        doc = client.get(f"{API}/plans/{finished_plan}").json()
        assert doc["status"] == "done"
        assert doc["plan"]["horizon"] == 20
        assert len(doc["trace"]) == 10
        overlays = doc["overlays"]
        assert sorted(overlays) == ["cam1", "cam2"]
        for view in overlays.values():
            assert len(view["trajectory"]) == 20
            assert len(view["pointed"]) == 3
            assert len(view["raw_polyline"]) >= 2

    def test_resubmission_is_idempotent(self, client, slide_plan_body, finished_plan):
        response = client.post(f"{API}/plans", json=slide_plan_body)
        assert response.status_code == 200
        assert response.json()["plan_id"] == finished_plan

    def test_concurrent_submission_conflicts(self, client, slide_plan_body, monkeypatch, finished_plan):
        import sketchmotion.service.app as app_module

        real = app_module.run_pipeline

        def slow(*args, **kwargs):
            time.sleep(0.6)
            return real(*args, **kwargs)

        monkeypatch.setattr(app_module, "run_pipeline", slow)
        body = dict(slide_plan_body, config=dict(slide_plan_body["config"], horizon=12))
        first = client.post(f"{API}/plans", json=body)
        assert first.status_code == 202
        plan_id = first.json()["plan_id"]
        assert plan_id != finished_plan
        second = client.post(f"{API}/plans", json=body)
        assert second.status_code == 409
        # drain the worker before the monkeypatch is undone
        wait_for_plan(client, plan_id)

    def test_failed_plan_reports_error_then_reruns(self, client, slide_plan_body):
        body = dict(slide_plan_body, backend="scripted:missing")
        first = client.post(f"{API}/plans", json=body)
        assert first.status_code == 202
        plan_id = first.json()["plan_id"]
        status = wait_for_plan(client, plan_id)
        assert status.status_code == 200
        doc = status.json()
        assert doc["status"] == "failed"
        assert doc["error"]["type"] == "ValidationError"
        assert client.get(f"{API}/plans/{plan_id}/file").status_code == 404
        again = client.post(f"{API}/plans", json=body)
        assert again.status_code == 202
        assert wait_for_plan(client, plan_id).json()["status"] == "failed"

    def test_transport_failure_maps_to_502(self, client, slide_plan_body):
        body = dict(slide_plan_body, backend="live")
        submitted = client.post(f"{API}/plans", json=body)
        assert submitted.status_code == 202
        plan_id = submitted.json()["plan_id"]
        status = wait_for_plan(client, plan_id)
        assert status.status_code == 502
        error = status.json()["error"]
        assert error["type"] == "PipelineStageError"
        assert error["cause"]["type"] == "TransportError"

    def test_bad_backend_label(self, client, slide_plan_body):
        body = dict(slide_plan_body, backend="oracle")
        submitted = client.post(f"{API}/plans", json=body)
        assert submitted.status_code == 202
        status = wait_for_plan(client, submitted.json()["plan_id"])
        assert status.json()["status"] == "failed"


class TestSamples:
    def test_deterministic_by_seed(self, client, finished_plan):
        body = {"n": 3, "seed": 5}
        first = client.post(f"{API}/plans/{finished_plan}/samples", json=body).json()
        second = client.post(f"{API}/plans/{finished_plan}/samples", json=body).json()
        assert first["samples"] == second["samples"]
        assert len(first["samples"]) == 3
        assert len(first["samples"][0]) == 20
        assert len(first["samples"][0][0]) == 3
        other = client.post(f"{API}/plans/{finished_plan}/samples", json={"n": 3, "seed": 6}).json()
        assert other["samples"] != first["samples"]

    def test_n_must_be_positive(self, client, finished_plan):
        response = client.post(f"{API}/plans/{finished_plan}/samples", json={"n": 0})
        assert response.status_code == 400
        assert response.json()["error"]["field"] == "n"

    def test_unknown_plan(self, client):
        response = client.post(f"{API}/plans/{'f' * 64}/samples", json={"n": 1})
        assert response.status_code == 404


class TestStore:
    def test_put_get_round_trip(self, tmp_path):
        store = Store(tmp_path)
        digest = store.put_object(b"payload")
        assert digest == hashlib.sha256(b"payload").hexdigest()
        assert store.get_object(digest) == b"payload"
        assert store.has_object(digest)

    def test_put_is_idempotent(self, tmp_path):
        store = Store(tmp_path)
        a = store.put_object(b"same")
        b = store.put_object(b"same")
        assert a == b
        assert len(list(store.objects.iterdir())) == 1

    def test_missing_object(self, tmp_path):
        store = Store(tmp_path)
        with pytest.raises(KeyError):
            store.get_object("f" * 64)
        assert not store.has_object("f" * 64)

    def test_index_updates_and_sessions(self, tmp_path):
        store = Store(tmp_path)
        assert store.session("s1") is None
        store.update_index(lambda index: index["sessions"].append({"id": "s1", "status": "running"}) or index)
        assert store.session("s1")["status"] == "running"
        reopened = Store(tmp_path)
        assert reopened.session("s1")["status"] == "running"
