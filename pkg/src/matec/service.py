"""HTTP surface over the consultation engine.

create_app wires the registry, completion backend, record store, retrieval
store, and orchestration pipeline into a FastAPI application. Consultations
run asynchronously (202 + poll); everything else is synchronous. All error
bodies are problem documents: {code, message, detail}.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass, field as dc_field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ValidationError

from .config import ServiceConfig
from .domain import (
    AgentRole,
    BackendError,
    ConsultationMode,
    DomainError,
    PatientCase,
    RoleKind,
    VitalSigns,
    case_from_interchange,
    to_interchange,
    validate_case,
)
from .gateway import (
    CompletionBackend,
    LiveBackend,
    MockBackend,
    default_script,
    parse_fault_spec,
)
from .news import compute_news, evaluate_trend
from .orchestrator import (
    SYNTHESIS_MODES,
    MissingSynthesis,
    Orchestrator,
    PipelineConfig,
    SynthesisBackendFailure,
    UnknownSpecialty,
    merge_gap_reports,
)
from .rag import BadChunkParams, EmptyDocument, RagStore
from .registry import Registry, UnknownTemplate, default_registry, load_registry
from .storage import EngineStore

__all__ = ["MonitorScheduler", "create_app"]

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"


# ---------------------------------------------------------------------------
# Problem documents
# ---------------------------------------------------------------------------

def problem(status_code: int, code: str, message: str, detail: Any = None) -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={"code": code, "message": message, "detail": detail},
    )


def _problem_body(code: str, message: str, detail: Any = None) -> dict[str, Any]:
    return {"code": code, "message": message, "detail": detail}


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------

class ConsultationBody(BaseModel):
    case_id: str
    question: Optional[str] = None
    template_id: Optional[str] = None
    mode: Optional[str] = None
    team: Optional[list[str]] = None


class FollowupBody(BaseModel):
    question: str


class SpecialistConsultBody(BaseModel):
    case_id: str
    specialty: str
    question: str


class RiskEvaluateBody(BaseModel):
    case_id: str


class DocumentBody(BaseModel):
    doc_id: str
    title: str
    body: str
    chunk_size_chars: int = 1000
    overlap_chars: int = 200


class NavigatorBody(BaseModel):
    case_id: str
    transcript_id: str


class DischargeBody(BaseModel):
    case_id: str


# ---------------------------------------------------------------------------
# Monitor scheduler
# ---------------------------------------------------------------------------

class MonitorScheduler:
    """Periodic NEWS2 trend evaluation over every stored case.

    tick() is synchronous and idempotent: alerts already persisted are not
    raised again. The background thread just calls tick() on an interval;
    tests call it directly.
    """

    def __init__(self, store: EngineStore):
        self.store = store
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def tick(self) -> int:
        new_alerts = 0
        for case_id in sorted(self.store.cases):
            case = self.store.get_case(case_id)
            if case is None or not case.vitals:
                continue
            try:
                alerts = evaluate_trend(case.vitals, case_id=case.case_id)
            except Exception:
                # one bad case must not block the rest of the unit
                logger.exception("monitor: evaluation failed for case %s", case_id)
                continue
            known = {
                (a.at, a.previous_band, a.new_band)
                for a in self.store.alerts_for_case(case_id)
            }
            for alert in alerts:
                if (alert.at, alert.previous_band, alert.new_band) not in known:
                    self.store.put_alert(alert)
                    new_alerts += 1
        return new_alerts

    def start(self, interval_s: float) -> None:
        if self._thread is not None:
            return
        self._stop.clear()

        def loop() -> None:
            while not self._stop.wait(interval_s):
                try:
                    self.tick()
                except Exception:
                    logger.exception("monitor: tick failed")

        self._thread = threading.Thread(target=loop, name="matec-monitor", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join(timeout=5.0)
        self._thread = None


# ---------------------------------------------------------------------------
# Runtime state
# ---------------------------------------------------------------------------

@dataclass
class _Job:
    status: str  # pending | complete | failed
    error: Optional[dict[str, Any]] = None


@dataclass
class EngineRuntime:
    config: ServiceConfig
    registry: Registry
    backend: CompletionBackend
    store: EngineStore
    rag: RagStore
    orchestrator: Orchestrator
    scheduler: MonitorScheduler
    executor: ThreadPoolExecutor
    jobs: dict[str, _Job] = dc_field(default_factory=dict)
    idempotency: dict[str, str] = dc_field(default_factory=dict)
    lock: threading.Lock = dc_field(default_factory=threading.Lock)


def _job_status(rt: EngineRuntime, transcript_id: str) -> str:
    if rt.store.get_transcript(transcript_id) is not None:
        return "complete"
    job = rt.jobs.get(transcript_id)
    return job.status if job is not None else "pending"


def _start_consultation(
    rt: EngineRuntime,
    case: PatientCase,
    question: str,
    mode: ConsultationMode,
    team_selector: Optional[Callable[[AgentRole], bool]],
    idempotency_key: Optional[str],
    parent_transcript_id: Optional[str] = None,
) -> JSONResponse:
    with rt.lock:
        if idempotency_key:
            existing = rt.idempotency.get(idempotency_key)
            if existing is not None:
                return JSONResponse(
                    status_code=202,
                    content={"transcript_id": existing, "status": _job_status(rt, existing)},
                )
        transcript_id = rt.orchestrator.id_factory()
        rt.jobs[transcript_id] = _Job(status="pending")
        if idempotency_key:
            rt.idempotency[idempotency_key] = transcript_id

    def run() -> None:
        try:
            rt.orchestrator.run_consultation(
                case,
                question,
                mode,
                team_selector,
                transcript_id=transcript_id,
                parent_transcript_id=parent_transcript_id,
            )
        except (BackendError, SynthesisBackendFailure) as exc:
            with rt.lock:
                rt.jobs[transcript_id] = _Job(
                    status="failed",
                    error=_problem_body("backend_unavailable", str(exc)),
                )
        except Exception as exc:
            logger.exception("consultation %s failed", transcript_id)
            with rt.lock:
                rt.jobs[transcript_id] = _Job(
                    status="failed",
                    error=_problem_body("internal_error", str(exc)),
                )
        else:
            with rt.lock:
                rt.jobs[transcript_id] = _Job(status="complete")

    rt.executor.submit(run)
    return JSONResponse(
        status_code=202,
        content={"transcript_id": transcript_id, "status": "pending"},
    )


def _iso_z(value: datetime) -> str:
    return value.isoformat().replace("+00:00", "Z")


# ---------------------------------------------------------------------------
# Application factory
# ---------------------------------------------------------------------------

def create_app(
    config: ServiceConfig,
    *,
    registry: Optional[Registry] = None,
    backend: Optional[CompletionBackend] = None,
    store: Optional[EngineStore] = None,
    rag: Optional[RagStore] = None,
    clock: Optional[Callable[[], datetime]] = None,
    id_factory: Optional[Callable[[], str]] = None,
    start_monitor: bool = False,
) -> FastAPI:
    """Build the service; keyword overrides exist for tests and the demo."""
    if registry is None:
        registry = (
            load_registry(Path(config.roster_path))
            if config.roster_path is not None
            else default_registry()
        )
    if backend is None:
        if config.backend == "live":
            backend = LiveBackend(config.live_base_url, config.live_model)
        else:
            fault = parse_fault_spec(config.mock_fault) if config.mock_fault else None
            backend = MockBackend(script=default_script(fault), seed=config.mock_seed)
    if store is None:
        store = EngineStore.open(config.store_dir)
    if rag is None:
        rag = RagStore(path=Path(config.store_dir) / "corpus.rag")

    orchestrator_kwargs: dict[str, Any] = {}
    if clock is not None:
        orchestrator_kwargs["clock"] = clock
    if id_factory is not None:
        orchestrator_kwargs["id_factory"] = id_factory
    orchestrator = Orchestrator(
        registry=registry,
        backend=backend,
        store=rag,
        config=PipelineConfig(
            parallelism=config.parallelism,
            agent_timeout_ms=config.agent_timeout_ms,
            retrieval_k=config.retrieval_k,
            max_tokens=config.max_tokens,
            synthesis_sees_all=config.synthesis_sees_all,
        ),
        persist=store.put_transcript,
        **orchestrator_kwargs,
    )

    rt = EngineRuntime(
        config=config,
        registry=registry,
        backend=backend,
        store=store,
        rag=rag,
        orchestrator=orchestrator,
        scheduler=MonitorScheduler(store),
        executor=ThreadPoolExecutor(max_workers=4, thread_name_prefix="matec-consult"),
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if start_monitor:
            rt.scheduler.start(config.monitor_interval_s)
        yield
        rt.scheduler.stop()
        rt.executor.shutdown(wait=False)

    app = FastAPI(title="matec", lifespan=lifespan)
    app.state.runtime = rt

    # -- error envelopes -----------------------------------------------------

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        detail = [
            {"loc": list(e.get("loc", ())), "msg": e.get("msg", ""), "type": e.get("type", "")}
            for e in exc.errors()
        ]
        return problem(422, "invalid_request", "request body failed validation", detail)

    @app.exception_handler(BackendError)
    async def on_backend_error(request: Request, exc: BackendError):
        return problem(503, "backend_unavailable", str(exc))

    @app.exception_handler(SynthesisBackendFailure)
    async def on_synthesis_failure(request: Request, exc: SynthesisBackendFailure):
        return problem(503, "backend_unavailable", str(exc))

    @app.exception_handler(Exception)
    async def on_unhandled(request: Request, exc: Exception):
        logger.exception("unhandled error on %s %s", request.method, request.url.path)
        return problem(500, "internal_error", "unexpected server error")

    # -- cases ----------------------------------------------------------------

    @app.post(API_PREFIX + "/cases", status_code=201)
    def create_case(payload: dict[str, Any]):
        try:
            case = case_from_interchange(payload)
        except ValidationError as exc:
            return problem(
                422,
                "invalid_case",
                "case body failed validation",
                exc.errors(include_url=False, include_input=False),
            )
        except DomainError as exc:
            return problem(422, "invalid_case", str(exc))
        report = validate_case(case)
        if not report.valid:
            return problem(
                422, "invalid_case", "case failed validation", to_interchange(report)
            )
        rt.store.put_case(case)  # re-POST with the same case_id replaces
        return {"case_id": case.case_id}

    @app.get(API_PREFIX + "/cases/{case_id}")
    def get_case(case_id: str):
        case = rt.store.get_case(case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {case_id!r}")
        return to_interchange(case)

    @app.post(API_PREFIX + "/cases/{case_id}/vitals")
    def append_vitals(case_id: str, payload: dict[str, Any]):
        case = rt.store.get_case(case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {case_id!r}")
        try:
            vitals = VitalSigns.model_validate(
                {k: v for k, v in payload.items() if k != "schema_version"}
            )
        except ValidationError as exc:
            return problem(422, "invalid_vitals", "vitals body failed validation", exc.errors(include_url=False, include_input=False))
        if case.vitals and vitals.timestamp <= case.vitals[-1].timestamp:
            return problem(
                422,
                "non_monotonic_vitals",
                "vitals timestamps must be strictly increasing",
                {"last_timestamp": _iso_z(case.vitals[-1].timestamp)},
            )
        updated = case.model_copy(update={"vitals": case.vitals + (vitals,)})
        report = validate_case(updated)
        if not report.valid:
            return problem(422, "invalid_vitals", "vitals failed validation", to_interchange(report))
        rt.store.put_case(updated)
        return to_interchange(updated)

    # -- consultations ---------------------------------------------------------

    @app.post(API_PREFIX + "/consultations")
    def create_consultation(
        body: ConsultationBody,
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        case = rt.store.get_case(body.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {body.case_id!r}")

        if body.template_id is not None and body.question is not None:
            return problem(
                422, "ambiguous_question", "supply either question or template_id, not both"
            )
        if body.template_id is not None:
            try:
                mode = ConsultationMode(body.template_id)
                question = rt.registry.instantiate_template(mode, case)
            except (ValueError, UnknownTemplate):
                return problem(422, "unknown_template", f"no template {body.template_id!r}")
        else:
            question = (body.question or "").strip()
            if not question:
                return problem(422, "missing_question", "question or template_id is required")
            try:
                mode = ConsultationMode(body.mode) if body.mode else ConsultationMode.TEAM_ASSESSMENT
            except ValueError:
                return problem(422, "bad_mode", f"unknown mode {body.mode!r}")
        if mode not in SYNTHESIS_MODES:
            return problem(422, "bad_mode", f"mode {mode.value} has its own entry point")

        # mode and team are validated here so the background job cannot fail
        # on caller mistakes
        team_selector: Optional[Callable[[AgentRole], bool]] = None
        if body.team is not None:
            known = {str(p.role) for p in rt.registry.core_team()}
            unknown = [name for name in body.team if name not in known]
            if unknown:
                return problem(422, "unknown_role", f"not core team roles: {unknown}")
            wanted = set(body.team)
            fan_out = [
                p.role
                for p in rt.registry.core_team()
                if p.role.kind is not RoleKind.SENIOR_PHYSICIAN and str(p.role) in wanted
            ]
            if not fan_out:
                return problem(422, "no_agents", "team selection excludes every fan-out agent")
            team_selector = lambda role: str(role) in wanted  # noqa: E731

        return _start_consultation(rt, case, question, mode, team_selector, idempotency_key)

    @app.get(API_PREFIX + "/consultations/{transcript_id}")
    def get_consultation(transcript_id: str):
        transcript = rt.store.get_transcript(transcript_id)
        if transcript is not None:
            return {
                "transcript_id": transcript_id,
                "status": "complete",
                "transcript": to_interchange(transcript),
                "error": None,
            }
        job = rt.jobs.get(transcript_id)
        if job is None:
            return problem(404, "consultation_not_found", f"no consultation {transcript_id!r}")
        return {
            "transcript_id": transcript_id,
            "status": job.status,
            "transcript": None,
            "error": job.error,
        }

    @app.post(API_PREFIX + "/consultations/{transcript_id}/followup")
    def followup(
        transcript_id: str,
        body: FollowupBody,
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        parent = rt.store.get_transcript(transcript_id)
        if parent is None:
            return problem(404, "consultation_not_found", f"no consultation {transcript_id!r}")
        case = rt.store.get_case(parent.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {parent.case_id!r}")
        question = body.question.strip()
        if not question:
            return problem(422, "missing_question", "question is required")
        if parent.mode is ConsultationMode.SPECIALIST_CONSULT:
            return problem(422, "bad_mode", "follow-up applies to team consultations")
        return _start_consultation(
            rt, case, question, parent.mode, None, idempotency_key,
            parent_transcript_id=parent.transcript_id,
        )

    # -- catalog ----------------------------------------------------------------

    @app.get(API_PREFIX + "/templates")
    def list_templates():
        return {
            "templates": [
                {"id": t.template_id.value, "title": t.title, "body": t.body}
                for t in rt.registry.list_templates()
            ]
        }

    @app.get(API_PREFIX + "/agents")
    def list_agents():
        def entry(profile):
            return {
                "role": str(profile.role),
                "display_name": profile.display_name,
                "team": profile.team.value,
                "reasoning_style": profile.reasoning_style.value,
                "charter": profile.charter,
            }

        return {
            "core": [entry(p) for p in rt.registry.core_team()],
            "support": [entry(p) for p in rt.registry.support_team()],
            "consult": [entry(p) for p in rt.registry.consult_roster()],
        }

    # -- specialist consults -----------------------------------------------------

    @app.post(API_PREFIX + "/specialist-consults")
    def specialist_consult(body: SpecialistConsultBody):
        case = rt.store.get_case(body.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {body.case_id!r}")
        question = body.question.strip()
        if not question:
            return problem(422, "missing_question", "question is required")
        try:
            transcript = rt.orchestrator.consult_specialist(body.specialty, case, question)
        except UnknownSpecialty as exc:
            return problem(422, "unknown_specialty", f"no specialist {str(exc)!r} on the roster")
        return to_interchange(transcript)

    # -- risk ---------------------------------------------------------------------

    @app.post(API_PREFIX + "/risk/evaluate")
    def risk_evaluate(body: RiskEvaluateBody):
        case = rt.store.get_case(body.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {body.case_id!r}")
        if not case.vitals:
            return problem(422, "no_vitals", f"case {body.case_id!r} has no vitals on record")
        result = compute_news(case.vitals[-1])
        return to_interchange(result)

    @app.get(API_PREFIX + "/risk/{case_id}/alerts")
    def risk_alerts(case_id: str):
        case = rt.store.get_case(case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {case_id!r}")
        return {
            "case_id": case_id,
            "alerts": [to_interchange(a) for a in rt.store.alerts_for_case(case_id)],
        }

    @app.get(API_PREFIX + "/risk/{case_id}/series")
    def risk_series(case_id: str):
        case = rt.store.get_case(case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {case_id!r}")
        series = []
        for vitals in case.vitals:
            result = compute_news(vitals)
            series.append(
                {"at": _iso_z(vitals.timestamp), "total": result.total, "band": result.band.value}
            )
        return {"case_id": case_id, "series": series}

    # -- documents ------------------------------------------------------------------

    @app.post(API_PREFIX + "/documents")
    def ingest_document(body: DocumentBody):
        try:
            chunks = rt.rag.ingest(
                body.doc_id,
                body.title,
                body.body,
                chunk_size_chars=body.chunk_size_chars,
                overlap_chars=body.overlap_chars,
            )
        except EmptyDocument:
            return problem(422, "empty_document", "document body is empty")
        except BadChunkParams as exc:
            return problem(422, "bad_chunk_params", str(exc))
        return {"doc_id": body.doc_id, "chunks": chunks}

    # -- unit digest -------------------------------------------------------------------

    @app.get(API_PREFIX + "/units/{unit_id}/gap-digest")
    def unit_gap_digest(unit_id: str):
        reports = []
        contributing = []
        for case in rt.store.cases_in_unit(unit_id):
            # latest care-gap round per case feeds the digest
            for transcript in reversed(rt.store.transcripts_for_case(case.case_id)):
                if transcript.mode is ConsultationMode.CARE_GAP and transcript.gap_report is not None:
                    reports.append(transcript.gap_report)
                    contributing.append(case.case_id)
                    break
        merged = merge_gap_reports(reports)
        return {"unit_id": unit_id, "cases": contributing, "report": to_interchange(merged)}

    # -- patient-facing text --------------------------------------------------------------

    @app.post(API_PREFIX + "/navigator")
    def navigator(body: NavigatorBody):
        case = rt.store.get_case(body.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {body.case_id!r}")
        transcript = rt.store.get_transcript(body.transcript_id)
        if transcript is None:
            return problem(404, "consultation_not_found", f"no consultation {body.transcript_id!r}")
        try:
            text = rt.orchestrator.navigator_explain(case, transcript)
        except MissingSynthesis:
            return problem(
                422, "missing_synthesis", f"transcript {body.transcript_id!r} has no synthesis"
            )
        return {"case_id": body.case_id, "transcript_id": body.transcript_id, "text": text}

    @app.post(API_PREFIX + "/discharge")
    def discharge(body: DischargeBody):
        case = rt.store.get_case(body.case_id)
        if case is None:
            return problem(404, "case_not_found", f"no case {body.case_id!r}")
        transcripts = rt.store.transcripts_for_case(body.case_id)
        try:
            text = rt.orchestrator.discharge_summary(case, transcripts)
        except MissingSynthesis:
            return problem(
                422, "missing_synthesis", f"case {body.case_id!r} has no synthesized consultation"
            )
        return {"case_id": body.case_id, "text": text}

    # -- liveness ----------------------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    return app
