"""HTTP service: endpoints, problem documents, jobs, monitor scheduler."""
import logging
import time

import pytest
from fastapi.testclient import TestClient

from conftest import at, fixed_clock, golden_case, make_vitals

from matec.config import ServiceConfig
from matec.domain import BackendError, to_interchange
from matec.news import evaluate_trend
from matec.orchestrator import SequentialIds
from matec.registry import default_registry
from matec.service import create_app


def build_client(tmp_path, backend=None, **config_overrides) -> TestClient:
    config = ServiceConfig(store_dir=str(tmp_path), **config_overrides)
    app = create_app(
        config,
        backend=backend,
        clock=fixed_clock,
        id_factory=SequentialIds("t"),
    )
    # 500s are produced by the handler and re-raised by the test transport,
    # so error-path tests need the raise suppressed
    return TestClient(app, raise_server_exceptions=False)


@pytest.fixture
def client(tmp_path):
    with build_client(tmp_path) as c:
        yield c


def post_case(client, case=None) -> str:
    case = case if case is not None else golden_case()
    response = client.post("/api/v1/cases", json=to_interchange(case))
    assert response.status_code == 201, response.text
    return response.json()["case_id"]


def wait_done(client, transcript_id: str, timeout_s: float = 15.0) -> dict:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        response = client.get(f"/api/v1/consultations/{transcript_id}")
        assert response.status_code == 200, response.text
        data = response.json()
        if data["status"] in ("complete", "failed"):
            return data
        time.sleep(0.02)
    raise AssertionError(f"consultation {transcript_id} did not finish")


def run_consultation(client, case_id: str = "case-77", **body) -> dict:
    payload = {"case_id": case_id, "question": "Assess this patient.", **body}
    response = client.post("/api/v1/consultations", json=payload)
    assert response.status_code == 202, response.text
    started = response.json()
    assert started["status"] == "pending"
    return wait_done(client, started["transcript_id"])


class ExplodingBackend:
    def __init__(self, exc: Exception):
        self.exc = exc

    def complete(self, req):
        raise self.exc


# -- cases -------------------------------------------------------------------------

class TestCases:
    def test_create_and_fetch_round_trip(self, client):
        case = golden_case()
        post_case(client, case)
        fetched = client.get("/api/v1/cases/case-77")
        assert fetched.status_code == 200
        assert fetched.json() == to_interchange(case)

    def test_missing_case_is_problem_document(self, client):
        response = client.get("/api/v1/cases/nope")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "case_not_found"
        assert "nope" in body["message"]
        assert set(body) == {"code", "message", "detail"}

    def test_malformed_case_body(self, client):
        payload = to_interchange(golden_case())
        payload["demographics"]["age"] = "forty"
        response = client.post("/api/v1/cases", json=payload)
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "invalid_case"
        assert any("age" in str(e.get("loc")) for e in body["detail"])

    def test_invariant_violations_reported(self, client):
        case = golden_case(vitals=(make_vitals(timestamp=at(11)), make_vitals(timestamp=at(9))))
        response = client.post("/api/v1/cases", json=to_interchange(case))
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "invalid_case"
        violations = body["detail"]["violations"]
        assert any("increasing" in v["message"] for v in violations)

    def test_wrong_schema_version_rejected(self, client):
        payload = to_interchange(golden_case())
        payload["schema_version"] = 99
        response = client.post("/api/v1/cases", json=payload)
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_case"

    def test_reposting_case_replaces_it(self, client):
        post_case(client)
        post_case(client, golden_case(chief_complaint="new complaint"))
        assert client.get("/api/v1/cases/case-77").json()["chief_complaint"] == "new complaint"


class TestVitalsAppend:
    def test_append_grows_series(self, client):
        post_case(client)
        obs = to_interchange(make_vitals(timestamp=at(13), heart_rate=130))
        response = client.post("/api/v1/cases/case-77/vitals", json=obs)
        assert response.status_code == 200
        assert len(response.json()["vitals"]) == 3
        assert client.get("/api/v1/cases/case-77").json()["vitals"][-1]["heart_rate"] == 130

    def test_non_monotonic_timestamp_rejected(self, client):
        post_case(client)
        obs = to_interchange(make_vitals(timestamp=at(10)))
        response = client.post("/api/v1/cases/case-77/vitals", json=obs)
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "non_monotonic_vitals"
        assert body["detail"]["last_timestamp"] == "2026-03-01T11:00:00Z"

    def test_invalid_vitals_body(self, client):
        post_case(client)
        response = client.post("/api/v1/cases/case-77/vitals", json={"heart_rate": 90})
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_vitals"

    def test_append_to_missing_case(self, client):
        obs = to_interchange(make_vitals(timestamp=at(13)))
        assert client.post("/api/v1/cases/nope/vitals", json=obs).status_code == 404


# -- consultations --------------------------------------------------------------------

class TestConsultations:
    def test_async_flow_completes(self, client):
        post_case(client)
        done = run_consultation(client)
        assert done["status"] == "complete"
        assert done["error"] is None
        transcript = done["transcript"]
        assert transcript["transcript_id"] == done["transcript_id"]
        assert transcript["synthesis"]["final_diagnosis"] == "sepsis due to endocarditis"
        assert len(transcript["responses"]) == 10
        assert transcript["verification"]["verdict"] == "clean"

    def test_template_flow(self, client):
        post_case(client)
        done = run_consultation(client, question=None, template_id="care_gap")
        transcript = done["transcript"]
        assert transcript["mode"] == "care_gap"
        assert "gaps in the current care plan" in transcript["question"]
        assert transcript["gap_report"]["summary"].startswith("15 care-gap findings")

    def test_question_and_template_is_ambiguous(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "question": "q", "template_id": "care_gap"})
        assert response.status_code == 422
        assert response.json()["code"] == "ambiguous_question"

    def test_neither_question_nor_template(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={"case_id": "case-77"})
        assert response.status_code == 422
        assert response.json()["code"] == "missing_question"

    def test_unknown_template(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "template_id": "surgical_debrief"})
        assert response.status_code == 422
        assert response.json()["code"] == "unknown_template"

    def test_unknown_mode_string(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "question": "q", "mode": "oracle"})
        assert response.status_code == 422
        assert response.json()["code"] == "bad_mode"

    def test_non_team_mode_rejected_up_front(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "question": "q", "mode": "specialist_consult"})
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "bad_mode"
        assert "own entry point" in body["message"]

    def test_unknown_team_role(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "question": "q", "team": ["hospitalist", "astrologer"]})
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "unknown_role"
        assert "astrologer" in body["message"]

    def test_team_of_only_the_senior_leaves_no_fan_out(self, client):
        post_case(client)
        response = client.post("/api/v1/consultations", json={
            "case_id": "case-77", "question": "q", "team": ["senior_physician"]})
        assert response.status_code == 422
        assert response.json()["code"] == "no_agents"

    def test_team_narrows_fan_out(self, client):
        post_case(client)
        done = run_consultation(client, team=["emergency_medicine", "hospitalist", "nurse"])
        roles = {r["role"] for r in done["transcript"]["responses"]}
        assert roles == {"emergency_medicine", "hospitalist", "nurse", "senior_physician"}

    def test_consultation_for_missing_case(self, client):
        response = client.post("/api/v1/consultations", json={"case_id": "nope", "question": "q"})
        assert response.status_code == 404

    def test_poll_unknown_consultation(self, client):
        response = client.get("/api/v1/consultations/t-9999")
        assert response.status_code == 404
        assert response.json()["code"] == "consultation_not_found"

    def test_missing_body_field_is_invalid_request(self, client):
        response = client.post("/api/v1/consultations", json={"question": "q"})
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "invalid_request"
        assert any("case_id" in str(e["loc"]) for e in body["detail"])

    def test_idempotency_key_replays_transcript_id(self, client):
        post_case(client)
        payload = {"case_id": "case-77", "question": "Assess."}
        first = client.post("/api/v1/consultations", json=payload,
                            headers={"Idempotency-Key": "k-1"})
        second = client.post("/api/v1/consultations", json=payload,
                             headers={"Idempotency-Key": "k-1"})
        assert first.status_code == second.status_code == 202
        assert first.json()["transcript_id"] == second.json()["transcript_id"]
        wait_done(client, first.json()["transcript_id"])
        replay = client.post("/api/v1/consultations", json=payload,
                             headers={"Idempotency-Key": "k-1"})
        assert replay.json()["status"] == "complete"
        distinct = client.post("/api/v1/consultations", json=payload,
                               headers={"Idempotency-Key": "k-2"})
        assert distinct.json()["transcript_id"] != first.json()["transcript_id"]

    def test_backend_error_marks_job_failed(self, tmp_path):
        with build_client(tmp_path, backend=ExplodingBackend(BackendError("llm down"))) as client:
            post_case(client)
            done = run_consultation(client)
            assert done["status"] == "failed"
            assert done["transcript"] is None
            assert done["error"]["code"] == "backend_unavailable"
            assert "llm down" in done["error"]["message"]

    def test_unexpected_error_marks_job_failed(self, tmp_path):
        with build_client(tmp_path, backend=ExplodingBackend(RuntimeError("boom"))) as client:
            post_case(client)
            done = run_consultation(client)
            assert done["status"] == "failed"
            assert done["error"]["code"] == "internal_error"


class TestFollowup:
    def test_followup_inherits_mode_and_links_parent(self, client):
        post_case(client)
        parent = run_consultation(client, question=None, template_id="care_gap")
        parent_id = parent["transcript_id"]
        response = client.post(f"/api/v1/consultations/{parent_id}/followup",
                               json={"question": "What changed overnight?"})
        assert response.status_code == 202
        child = wait_done(client, response.json()["transcript_id"])
        assert child["status"] == "complete"
        transcript = child["transcript"]
        assert transcript["mode"] == "care_gap"
        assert transcript["parent_transcript_id"] == parent_id
        assert transcript["question"] == "What changed overnight?"

    def test_followup_on_unknown_parent(self, client):
        response = client.post("/api/v1/consultations/t-404/followup", json={"question": "q"})
        assert response.status_code == 404

    def test_followup_empty_question(self, client):
        post_case(client)
        parent = run_consultation(client)
        response = client.post(
            f"/api/v1/consultations/{parent['transcript_id']}/followup",
            json={"question": "   "})
        assert response.status_code == 422
        assert response.json()["code"] == "missing_question"

    def test_followup_rejected_on_specialist_parent(self, client):
        post_case(client)
        consult = client.post("/api/v1/specialist-consults", json={
            "case_id": "case-77", "specialty": "Nephrologist", "question": "Renal input?"})
        parent_id = consult.json()["transcript_id"]
        response = client.post(f"/api/v1/consultations/{parent_id}/followup",
                               json={"question": "q"})
        assert response.status_code == 422
        assert response.json()["code"] == "bad_mode"


# -- catalog ------------------------------------------------------------------------------

class TestCatalog:
    def test_templates_served_verbatim(self, client):
        served = client.get("/api/v1/templates").json()["templates"]
        packaged = default_registry().list_templates()
        assert served == [
            {"id": t.template_id.value, "title": t.title, "body": t.body} for t in packaged
        ]
        assert [t["title"] for t in served] == [
            "Team Assessment", "Care Gap Analysis", "Differential Diagnosis Analysis",
            "Treatment Plan", "Antibiotic Management", "Pharmacy Assessment",
        ]

    def test_agent_roster_groups(self, client):
        body = client.get("/api/v1/agents").json()
        assert len(body["core"]) == 10
        assert len(body["support"]) == 2
        assert len(body["consult"]) == 33
        hospitalist = [a for a in body["core"] if a["role"] == "hospitalist"][0]
        assert set(hospitalist) == {"role", "display_name", "team", "reasoning_style", "charter"}
        assert {a["role"] for a in body["consult"]} >= {
            "specialist:Nephrologist", "specialist:Toxicologist"}


# -- specialist consults ---------------------------------------------------------------------

class TestSpecialistConsults:
    def test_synchronous_consult(self, client):
        post_case(client)
        response = client.post("/api/v1/specialist-consults", json={
            "case_id": "case-77", "specialty": "Cardiologist",
            "question": "Does the murmur change management?"})
        assert response.status_code == 200
        transcript = response.json()
        assert transcript["mode"] == "specialist_consult"
        assert [r["role"] for r in transcript["responses"]] == ["specialist:Cardiologist"]
        assert transcript["synthesis"] is None

    def test_unknown_specialty(self, client):
        post_case(client)
        response = client.post("/api/v1/specialist-consults", json={
            "case_id": "case-77", "specialty": "Astrologer", "question": "q"})
        assert response.status_code == 422
        assert response.json()["code"] == "unknown_specialty"

    def test_empty_question(self, client):
        post_case(client)
        response = client.post("/api/v1/specialist-consults", json={
            "case_id": "case-77", "specialty": "Cardiologist", "question": " "})
        assert response.status_code == 422
        assert response.json()["code"] == "missing_question"

    def test_sync_backend_error_is_503(self, tmp_path):
        with build_client(tmp_path, backend=ExplodingBackend(BackendError("down"))) as client:
            post_case(client)
            response = client.post("/api/v1/specialist-consults", json={
                "case_id": "case-77", "specialty": "Cardiologist", "question": "q"})
            assert response.status_code == 503
            assert response.json()["code"] == "backend_unavailable"

    def test_sync_unexpected_error_is_500(self, tmp_path):
        with build_client(tmp_path, backend=ExplodingBackend(RuntimeError("boom"))) as client:
            post_case(client)
            response = client.post("/api/v1/specialist-consults", json={
                "case_id": "case-77", "specialty": "Cardiologist", "question": "q"})
            assert response.status_code == 500
            body = response.json()
            assert body["code"] == "internal_error"
            assert "boom" not in body["message"]  # internals stay out of the envelope


# -- risk ----------------------------------------------------------------------------------

class TestRisk:
    def test_evaluate_latest_observation(self, client):
        post_case(client)
        response = client.post("/api/v1/risk/evaluate", json={"case_id": "case-77"})
        assert response.status_code == 200
        body = response.json()
        assert body["total"] == 10
        assert body["band"] == "high"
        assert body["subscores"]["respiration"] == 2

    def test_no_vitals_on_record(self, client):
        post_case(client, golden_case(case_id="empty-case", vitals=()))
        response = client.post("/api/v1/risk/evaluate", json={"case_id": "empty-case"})
        assert response.status_code == 422
        assert response.json()["code"] == "no_vitals"

    def test_series_per_observation(self, client):
        post_case(client)
        body = client.get("/api/v1/risk/case-77/series").json()
        assert body["series"] == [
            {"at": "2026-03-01T09:00:00Z", "total": 1, "band": "low"},
            {"at": "2026-03-01T11:00:00Z", "total": 10, "band": "high"},
        ]

    def test_series_missing_case(self, client):
        assert client.get("/api/v1/risk/nope/series").status_code == 404

    def test_alerts_empty_before_any_tick(self, client):
        post_case(client)
        body = client.get("/api/v1/risk/case-77/alerts").json()
        assert body == {"case_id": "case-77", "alerts": []}


class TestMonitorScheduler:
    def baseline_case(self, case_id="mon-1"):
        return golden_case(
            case_id=case_id,
            vitals=(make_vitals(timestamp=at(8)),),  # all-zero bands
        )

    def test_tick_alerts_once_per_escalation(self, client):
        post_case(client, self.baseline_case())
        # heart rate 131 scores 3: single-parameter low_medium band
        client.post("/api/v1/cases/mon-1/vitals",
                    json=to_interchange(make_vitals(timestamp=at(9), heart_rate=131)))
        rt = client.app.state.runtime
        assert rt.scheduler.tick() == 1
        assert rt.scheduler.tick() == 0  # idempotent re-tick
        alerts = client.get("/api/v1/risk/mon-1/alerts").json()["alerts"]
        assert len(alerts) == 1
        assert alerts[0]["previous_band"] == "low"
        assert alerts[0]["new_band"] == "low_medium"
        assert alerts[0]["at"] == "2026-03-01T09:00:00Z"
        assert "review" in alerts[0]["recommendation"]

    def test_new_escalation_raises_one_more_alert(self, client):
        post_case(client, self.baseline_case())
        client.post("/api/v1/cases/mon-1/vitals",
                    json=to_interchange(make_vitals(timestamp=at(9), heart_rate=131)))
        rt = client.app.state.runtime
        assert rt.scheduler.tick() == 1
        client.post("/api/v1/cases/mon-1/vitals",
                    json=to_interchange(make_vitals(
                        timestamp=at(10), respiration_rate=25, spo2=91, systolic_bp=90)))
        assert rt.scheduler.tick() == 1
        assert rt.scheduler.tick() == 0
        alerts = client.get("/api/v1/risk/mon-1/alerts").json()["alerts"]
        assert [(a["previous_band"], a["new_band"]) for a in alerts] == [
            ("low", "low_medium"), ("low_medium", "high")]

    def test_one_bad_case_does_not_block_the_rest(self, client, monkeypatch, caplog):
        post_case(client, self.baseline_case("bad-case"))
        client.post("/api/v1/cases/bad-case/vitals",
                    json=to_interchange(make_vitals(timestamp=at(9), heart_rate=131)))
        post_case(client, self.baseline_case("good-case"))
        client.post("/api/v1/cases/good-case/vitals",
                    json=to_interchange(make_vitals(timestamp=at(9), heart_rate=131)))

        def broken(series, case_id=""):
            if case_id == "bad-case":
                raise RuntimeError("synthetic evaluation failure")
            return evaluate_trend(series, case_id=case_id)

        monkeypatch.setattr("matec.service.evaluate_trend", broken)
        rt = client.app.state.runtime
        with caplog.at_level(logging.ERROR):
            assert rt.scheduler.tick() == 1
        assert "evaluation failed for case bad-case" in caplog.text
        assert client.get("/api/v1/risk/good-case/alerts").json()["alerts"]
        assert client.get("/api/v1/risk/bad-case/alerts").json()["alerts"] == []


# -- documents --------------------------------------------------------------------------------

class TestDocuments:
    def test_ingest_reports_chunk_count(self, client):
        body = "sepsis " * 400  # 2800 chars, stride 800: chunks at 0/800/1600/2400
        response = client.post("/api/v1/documents", json={
            "doc_id": "guide", "title": "Guide", "body": body})
        assert response.status_code == 200
        assert response.json() == {"doc_id": "guide", "chunks": 4}

    def test_empty_document(self, client):
        response = client.post("/api/v1/documents", json={
            "doc_id": "d", "title": "t", "body": "   "})
        assert response.status_code == 422
        assert response.json()["code"] == "empty_document"

    def test_bad_chunk_params(self, client):
        response = client.post("/api/v1/documents", json={
            "doc_id": "d", "title": "t", "body": "text",
            "chunk_size_chars": 100, "overlap_chars": 100})
        assert response.status_code == 422
        assert response.json()["code"] == "bad_chunk_params"

    def test_ingested_context_reaches_prompts(self, client):
        post_case(client)
        client.post("/api/v1/documents", json={
            "doc_id": "endo", "title": "Endocarditis",
            "body": "Endocarditis requires prolonged intravenous antibiotics and source imaging."})
        done = run_consultation(client)
        assert done["status"] == "complete"  # retrieval feeds prompts without breaking the round


# -- unit digest --------------------------------------------------------------------------------

class TestUnitDigest:
    def test_merges_latest_gap_reports_across_unit(self, client):
        post_case(client, golden_case(case_id="unit-a", unit_id="icu-9"))
        post_case(client, golden_case(case_id="unit-b", unit_id="icu-9"))
        post_case(client, golden_case(case_id="elsewhere", unit_id="icu-1"))
        run_consultation(client, case_id="unit-a", question=None, template_id="care_gap")
        run_consultation(client, case_id="unit-b", question=None, template_id="care_gap")
        run_consultation(client, case_id="elsewhere", question=None, template_id="care_gap")

        body = client.get("/api/v1/units/icu-9/gap-digest").json()
        assert body["unit_id"] == "icu-9"
        assert body["cases"] == ["unit-a", "unit-b"]
        report = body["report"]
        assert report["summary"] == (
            "15 care-gap findings (2 diagnosis, 6 treatment, 4 monitoring, 3 coordination)"
        )
        cultures = [f for f in report["categories"]["diagnosis"] if "blood cultures" in f["finding"]]
        assert cultures[0]["raised_by"] == ["emergency_medicine", "hospitalist"]

    def test_cases_without_gap_round_are_skipped(self, client):
        post_case(client, golden_case(case_id="unit-a", unit_id="icu-9"))
        post_case(client, golden_case(case_id="unit-b", unit_id="icu-9"))
        run_consultation(client, case_id="unit-a", question=None, template_id="care_gap")
        run_consultation(client, case_id="unit-b")  # team assessment, no gap report
        assert client.get("/api/v1/units/icu-9/gap-digest").json()["cases"] == ["unit-a"]

    def test_empty_unit(self, client):
        body = client.get("/api/v1/units/ghost/gap-digest").json()
        assert body["cases"] == []
        assert body["report"]["summary"] == (
            "0 care-gap findings (0 diagnosis, 0 treatment, 0 monitoring, 0 coordination)"
        )


# -- patient-facing text ---------------------------------------------------------------------------

class TestNavigatorAndDischarge:
    def test_navigator_text(self, client):
        post_case(client)
        done = run_consultation(client)
        response = client.post("/api/v1/navigator", json={
            "case_id": "case-77", "transcript_id": done["transcript_id"]})
        assert response.status_code == 200
        body = response.json()
        assert body["transcript_id"] == done["transcript_id"]
        assert "sepsis due to endocarditis" in body["text"]
        assert "CLAIM" not in body["text"]

    def test_navigator_requires_synthesis(self, client):
        post_case(client)
        consult = client.post("/api/v1/specialist-consults", json={
            "case_id": "case-77", "specialty": "Cardiologist", "question": "q"}).json()
        response = client.post("/api/v1/navigator", json={
            "case_id": "case-77", "transcript_id": consult["transcript_id"]})
        assert response.status_code == 422
        assert response.json()["code"] == "missing_synthesis"

    def test_navigator_unknown_transcript(self, client):
        post_case(client)
        response = client.post("/api/v1/navigator", json={
            "case_id": "case-77", "transcript_id": "t-404"})
        assert response.status_code == 404
        assert response.json()["code"] == "consultation_not_found"

    def test_discharge_summary_with_barriers(self, client):
        post_case(client)
        run_consultation(client)
        response = client.post("/api/v1/discharge", json={"case_id": "case-77"})
        assert response.status_code == 200
        text = response.json()["text"]
        assert "RECORD-FLAGGED BARRIERS:" in text
        assert "- housing: homeless" in text
        assert "- substance use: active" in text

    def test_discharge_requires_synthesized_consultation(self, client):
        post_case(client)
        response = client.post("/api/v1/discharge", json={"case_id": "case-77"})
        assert response.status_code == 422
        assert response.json()["code"] == "missing_synthesis"


# -- plumbing ----------------------------------------------------------------------------------------

class TestPlumbing:
    def test_healthz_unprefixed(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_transcripts_survive_restart(self, tmp_path):
        with build_client(tmp_path) as client:
            post_case(client)
            done = run_consultation(client)
            transcript_id = done["transcript_id"]
        with build_client(tmp_path) as client:
            again = client.get(f"/api/v1/consultations/{transcript_id}")
            assert again.status_code == 200
            assert again.json()["status"] == "complete"
            assert again.json()["transcript"] == done["transcript"]

    def test_injected_components_are_used(self, tmp_path):
        backend = ExplodingBackend(RuntimeError("never called"))
        config = ServiceConfig(store_dir=str(tmp_path))
        app = create_app(config, backend=backend)
        rt = app.state.runtime
        assert rt.backend is backend
        assert rt.orchestrator.backend is backend
        assert rt.orchestrator.persist == rt.store.put_transcript

    def test_configured_mock_fault_is_served(self, tmp_path):
        with build_client(
            tmp_path, mock_fault="fabricate:infectious_disease:heart_rate:40",
        ) as client:
            post_case(client)
            done = run_consultation(client)
            verification = done["transcript"]["verification"]
            assert verification["verdict"] == "flagged"
            assert len(verification["flags"]) == 1
            flag = verification["flags"][0]
            assert flag["claim"]["source_role"] == "infectious_disease"
            assert flag["record_value"] == "121"

    def test_bad_mock_fault_rejected_at_startup(self, tmp_path):
        with pytest.raises(Exception, match="unknown role"):
            ServiceConfig(store_dir=str(tmp_path), mock_fault="timeout:barista")
