import pytest
from fastapi.testclient import TestClient

from bladeqc import InspectionStore
from bladeqc.service import create_app
from bladeqc.workflow import Arm

from conftest import build_conversion_fixture_store
from fixtures_qc import find_job_id, manifest_for, pixel_rle_wire

SALT = "svc"


@pytest.fixture()
def client():
    store = InspectionStore(salt=SALT, clock=lambda: 1000)
    app = create_app(store=store)
    with TestClient(app) as c:
        c.store = store
        yield c


def setup_open_image(client, prefix="svc"):
    job_id = find_job_id(prefix, Arm.TREATMENT, SALT)
    client.post("/jobs", json=manifest_for(job_id, [f"{prefix}-img"])).raise_for_status()
    image_id = f"{prefix}-img"
    pred = {"image_id": image_id, "instances": [
        {"id": "p1", "score": 0.9, "mask": pixel_rle_wire(9), "frame": "native"},
        {"id": "p2", "score": 0.7, "mask": pixel_rle_wire(30), "frame": "native"},
    ]}
    r = client.post(f"/jobs/{job_id}/predictions", json=pred)
    assert r.status_code == 200
    clue_ids = [c["id"] for c in r.json()["data"]]
    client.post(f"/images/{image_id}/qc1/open", json={"timestamp": 0})
    return job_id, image_id, clue_ids


class TestEndpoints:
    def test_healthz(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200 and r.json() == {"data": {"status": "ok"}}

    def test_convert_returns_annotation(self, client):
        _, image_id, clue_ids = setup_open_image(client)
        r = client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={})
        assert r.status_code == 200
        data = r.json()["data"]
        assert data["provenance"] == {"kind": "clue_converted", "clue_id": clue_ids[0]}
        clues = client.get(f"/images/{image_id}/clues").json()["data"]
        statuses = {c["id"]: c["status"] for c in clues}
        assert statuses[clue_ids[0]] == "converted"

    def test_second_convert_is_409(self, client):
        _, image_id, clue_ids = setup_open_image(client)
        client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={})
        r = client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "conflict"

    def test_convert_with_polygon_is_modified(self, client):
        _, image_id, clue_ids = setup_open_image(client)
        r = client.post(
            f"/images/{image_id}/clues/{clue_ids[0]}/convert",
            json={"polygon": [1, 1, 5, 1, 5, 5, 1, 5]},
        )
        assert r.json()["data"]["provenance"]["kind"] == "clue_modified"

    def test_unknown_entity_is_404(self, client):
        assert client.get("/images/ghost/clues").status_code == 404
        assert client.post("/images/ghost/qc1/open", json={}).status_code == 404

    def test_illegal_transition_is_422(self, client):
        job_id = find_job_id("t422", Arm.TREATMENT, SALT)
        client.post("/jobs", json=manifest_for(job_id, ["t422-img"]))
        r = client.post("/images/t422-img/qc2/open", json={})
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "illegal_transition"

    def test_validation_is_400(self, client):
        _, image_id, _ = setup_open_image(client, "v400")
        r = client.post(f"/images/{image_id}/annotations", json={"polygon": [0, 0, 1]})
        assert r.status_code == 400

    def test_duplicate_job_conflict_is_409(self, client):
        job_id = find_job_id("dup", Arm.TREATMENT, SALT)
        client.post("/jobs", json=manifest_for(job_id, ["dup-1"]))
        r = client.post("/jobs", json=manifest_for(job_id, ["dup-1", "dup-2"]))
        assert r.status_code == 409

    def test_full_qc_cycle_and_missed_counter(self, client):
        _, image_id, clue_ids = setup_open_image(client, "cycle")
        client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={})
        client.post(f"/images/{image_id}/clues/{clue_ids[1]}/dismiss", json={})
        r = client.post(f"/images/{image_id}/qc1/close", json={"timestamp": 9000})
        assert r.status_code == 200
        client.post(f"/images/{image_id}/qc1/complete", json={})
        client.post(f"/images/{image_id}/qc2/open", json={"timestamp": 20000})
        r = client.post(f"/images/{image_id}/missed", json={})
        assert r.json()["data"]["misses"] == 1
        client.post(f"/images/{image_id}/qc2/close", json={"timestamp": 26000})
        r = client.post(f"/images/{image_id}/qc2/complete", json={})
        assert r.json()["data"]["stage"] == "QC2_DONE"

    def test_transitions_endpoint(self, client):
        r = client.get("/transitions")
        rows = r.json()["data"]["transitions"]
        assert {"state": "QC1_OPEN", "action": "clue_converted", "next": "QC1_OPEN",
                "guards": ["treatment_arm"]} in rows

    def test_eval_endpoint(self, client):
        body = {
            "images": [
                {
                    "image_id": "e1",
                    "frame": [100, 100],
                    "ground_truths": [[10, 10, 50, 10, 50, 50, 10, 50]],
                    "predictions": [
                        {"id": "p", "polygon": [10, 10, 50, 10, 50, 50, 10, 50], "score": 1.0}
                    ],
                }
            ],
            "iou_threshold": 0.5,
        }
        r = client.post("/eval", json=body)
        data = r.json()["data"]
        assert data["damage_recall"] == 1.0 and data["damage_precision"] == 1.0

    def test_idempotency_key_replays_without_new_event(self, client):
        _, image_id, clue_ids = setup_open_image(client, "idem")
        headers = {"Idempotency-Key": "abc"}
        first = client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={}, headers=headers)
        seq_after = max(j.last_seq for j in client.store.journals.values())
        second = client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={}, headers=headers)
        assert second.status_code == 200
        assert second.json() == first.json()
        assert max(j.last_seq for j in client.store.journals.values()) == seq_after
        # without the key the retry properly conflicts
        third = client.post(f"/images/{image_id}/clues/{clue_ids[0]}/convert", json={})
        assert third.status_code == 409

    def test_actor_header_recorded(self, client):
        job_id = find_job_id("actor", Arm.TREATMENT, SALT)
        client.post("/jobs", json=manifest_for(job_id, ["actor-img"]), headers={"X-Actor": "casey"})
        record = next(iter(client.store.journals[job_id]))
        assert record.actor == "casey"


class TestReportEndpoints:
    def test_conversion_report(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        with TestClient(create_app(store=store)) as client:
            r = client.get("/reports/conversion", params=[("job", j) for j in job_ids])
            rows = r.json()["data"]["rows"]
            assert [row["pct_converted"] for row in rows] == [97.3, 95.8, 100.0, 95.8, 95.8]

    def test_productivity_and_comparison(self, productivity_fixture_store):
        with TestClient(create_app(store=productivity_fixture_store)) as client:
            r = client.get("/reports/productivity", params={"arm": "treatment"})
            assert r.json()["data"]["avg_qc1_min_per_picture"] == pytest.approx(0.205)
            r = client.get("/reports/comparison")
            deltas = r.json()["data"]["deltas"]
            assert deltas["avg_qc1_min_per_picture"] == pytest.approx(-0.007)

    def test_empty_arm_is_404(self, client):
        r = client.get("/reports/productivity", params={"arm": "control"})
        assert r.status_code == 404


class TestRestartDeterminism:
    def test_get_endpoints_identical_after_replay(self, tmp_path):
        data_dir = tmp_path / "data"
        store, job_ids = build_conversion_fixture_store(data_dir=data_dir)
        paths = [
            "/healthz",
            "/transitions",
            "/reports/conversion",
            f"/images/{job_ids[0]}-img/clues",
            f"/images/{job_ids[0]}-img/annotations",
        ]
        with TestClient(create_app(store=store)) as client:
            before = {p: client.get(p).content for p in paths}
        restarted = InspectionStore.load(data_dir)
        assert restarted.canonical_state() == store.canonical_state()
        with TestClient(create_app(store=restarted)) as client:
            after = {p: client.get(p).content for p in paths}
        assert before == after
