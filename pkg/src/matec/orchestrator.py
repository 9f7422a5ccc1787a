"""The consultation pipeline: retrieve, fan out, synthesize, verify, aggregate.

One round per consultation: retrieved context grounds every prompt, the team
answers concurrently under bounded parallelism, the SeniorPhysician agent
synthesizes the doctors' inputs, and every machine-checkable claim is verified
against the patient record. Per-agent failures are data in the transcript,
never exceptions; the round only degrades (no synthesis, explicit marker) when
fewer than two doctor responses arrive intact.
"""
from __future__ import annotations

import math
import re
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Optional, Sequence

from .domain import (
    AgentResponse,
    AgentRole,
    Claim,
    ClaimSubject,
    ConsultationMode,
    DOCTOR_ROLES,
    DiagnosisItem,
    DivergencePoint,
    DomainError,
    FlagReason,
    GapCategory,
    GapFinding,
    GapReport,
    PatientCase,
    ResponseSections,
    ResponseStatus,
    RoleKind,
    SYNTHESIS_MODES,
    SynthesisReport,
    Transcript,
    Verdict,
    VerificationFlag,
    VerificationReport,
    fmt_num,
    render_case_summary,
)
from .gateway import (
    CompletionBackend,
    CompletionRequest,
    MODE_SYNTHESIS,
    default_temperature,
    parse_structured,
    render_structured,
)
from .news import compute_news
from .rag import RagStore, RetrievedChunk
from .registry import Registry, build_user_prompt


class NoAgentsAvailable(DomainError):
    pass


class UnknownSpecialty(DomainError):
    pass


class MissingSynthesis(DomainError):
    pass


class SynthesisBackendFailure(DomainError):
    pass


class BadMode(DomainError):
    pass


#: Numeric agreement tolerance: relative 2% or absolute 0.1, whichever larger.
REL_TOL = 0.02
ABS_TOL = 0.1

SYNTHESIS_QUESTION = (
    "Synthesize the team inputs above into a final diagnosis, areas of "
    "consensus and divergence, a comprehensive care plan, and next steps."
)


@dataclass(frozen=True)
class PipelineConfig:
    parallelism: int = 5
    agent_timeout_ms: int = 30_000
    retrieval_k: int = 4
    max_tokens: int = 1024
    #: False = the SeniorPhysician synthesizes over doctor responses only;
    #: True = over every Ok response.
    synthesis_sees_all: bool = False


class SequentialIds:
    """Deterministic id factory for reproducible runs."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self._n = 0

    def __call__(self) -> str:
        self._n += 1
        return f"{self.prefix}-{self._n:04d}"


def _uuid_factory() -> str:
    return uuid.uuid4().hex


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


# ---------------------------------------------------------------------------
# Normalization helpers
# ---------------------------------------------------------------------------

def _norm(text: str) -> str:
    return " ".join(text.casefold().split())


def _norm_finding(text: str) -> str:
    return _norm(text).rstrip(".")


#: Claim-name aliases for vital signs.
_VITAL_ALIASES = {
    "heart rate": "heart_rate", "hr": "heart_rate", "pulse": "heart_rate",
    "temperature": "temperature", "temp": "temperature",
    "respiration rate": "respiration_rate", "respiratory rate": "respiration_rate",
    "rr": "respiration_rate",
    "systolic bp": "systolic_bp", "sbp": "systolic_bp",
    "systolic blood pressure": "systolic_bp", "blood pressure": "systolic_bp",
    "spo2": "spo2", "oxygen saturation": "spo2", "o2 sat": "spo2",
}


def _within_tolerance(claimed: float, actual: float) -> bool:
    return abs(claimed - actual) <= max(REL_TOL * abs(actual), ABS_TOL)


# ---------------------------------------------------------------------------
# Synthesis-output grammar
# ---------------------------------------------------------------------------

_SYNTH_HEADING_RE = re.compile(
    r"^\s*(?:#{1,3}\s*)?\*{0,2}(FINAL DIAGNOSIS|CONSENSUS|DIVERGENCE|CARE PLAN|NEXT STEPS|CLAIMS)\*{0,2}\s*(?::\s*(.*))?$",
    re.IGNORECASE,
)
_BULLET_RE = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*(.+)$")


def parse_synthesis(text: str, role: AgentRole) -> tuple[Optional[SynthesisReport], tuple[Claim, ...]]:
    """Parse the five-section synthesis grammar plus the CLAIMS block.

    Returns (None, claims-so-far) when no FINAL DIAGNOSIS can be found; the
    caller records the response as malformed.
    """
    from .gateway import _parse_claim_line  # shared claim-line grammar

    section: Optional[str] = None
    final_lines: list[str] = []
    consensus: list[str] = []
    divergence: list[DivergencePoint] = []
    care_plan: list[str] = []
    next_steps: list[str] = []
    claims: list[Claim] = []

    def feed(line: str) -> None:
        bullet = _BULLET_RE.match(line)
        if section == "FINAL DIAGNOSIS":
            final_lines.append(line)
        elif section == "CONSENSUS" and bullet:
            consensus.append(bullet.group(1).strip())
        elif section == "DIVERGENCE" and bullet:
            point = _parse_divergence_line(bullet.group(1))
            if point is not None:
                divergence.append(point)
        elif section == "CARE PLAN" and bullet:
            care_plan.append(bullet.group(1).strip())
        elif section == "NEXT STEPS" and bullet:
            next_steps.append(bullet.group(1).strip())
        elif section == "CLAIMS":
            claim = _parse_claim_line(line, role)
            if claim is not None:
                claims.append(claim)

    for line in text.splitlines():
        heading = _SYNTH_HEADING_RE.match(line)
        if heading:
            section = heading.group(1).upper()
            if heading.group(2) and heading.group(2).strip():
                feed(heading.group(2))
            continue
        if section is not None:
            feed(line)

    final_diagnosis = " ".join(" ".join(final_lines).split())
    if not final_diagnosis:
        return None, tuple(claims)
    report = SynthesisReport(
        final_diagnosis=final_diagnosis,
        consensus=tuple(consensus),
        divergence=tuple(divergence),
        care_plan=tuple(care_plan),
        next_steps=tuple(next_steps),
    )
    return report, tuple(claims)


def _parse_divergence_line(payload: str) -> Optional[DivergencePoint]:
    topic, sep, rest = payload.partition("|")
    if not sep or not topic.strip():
        return None
    positions: dict[str, str] = {}
    for part in rest.split(";"):
        role_name, eq, position = part.partition("=")
        if eq and role_name.strip() and position.strip():
            positions[role_name.strip()] = position.strip()
    if not positions:
        return None
    return DivergencePoint(topic=topic.strip(), positions=positions)


def render_synthesis(report: SynthesisReport) -> str:
    """Text form of a synthesis report, used in follow-on prompts."""
    lines = ["FINAL DIAGNOSIS:", report.final_diagnosis]
    lines += ["", "CONSENSUS:"] + [f"- {c}" for c in report.consensus]
    lines += ["", "DIVERGENCE:"]
    for point in report.divergence:
        positions = "; ".join(f"{role}={text}" for role, text in sorted(point.positions.items()))
        lines.append(f"- {point.topic} | {positions}")
    lines += ["", "CARE PLAN:"] + [f"- {c}" for c in report.care_plan]
    lines += ["", "NEXT STEPS:"] + [f"- {s}" for s in report.next_steps]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify(
    synthesis: Optional[SynthesisReport],
    responses: Sequence[AgentResponse],
    case: PatientCase,
    context: Sequence[RetrievedChunk],
) -> VerificationReport:
    """Check every claim in Ok responses against the patient record.

    Vital/Lab/Medication claims match by normalized name with numeric
    tolerance; HistoryFact claims match by substring against the history,
    chief complaint, and retrieved context. The synthesis claims ride in the
    SeniorPhysician's response, so one pass covers them too.
    """
    del synthesis  # report text is advisory; claims live in the responses
    latest_vitals = case.latest_vitals() if case.vitals else None
    latest_labs: dict[str, float] = {}
    for lab in sorted(case.labs, key=lambda l: l.timestamp):
        latest_labs[_norm(lab.name)] = lab.value
    meds = {_norm(m.name): m for m in case.medications}
    history_haystack = _norm(
        " ".join([case.history, case.chief_complaint] + [c.chunk.text for c in context])
    )

    checked = 0
    flags: list[VerificationFlag] = []
    for response in responses:
        if response.status is not ResponseStatus.OK:
            continue
        for claim in response.sections.claims:
            checked += 1
            flag = _check_claim(claim, latest_vitals, latest_labs, meds, history_haystack)
            if flag is not None:
                flags.append(flag)
    verdict = Verdict.FLAGGED if flags else Verdict.CLEAN
    return VerificationReport(checked=checked, flags=tuple(flags), verdict=verdict)


def _check_claim(claim, latest_vitals, latest_labs, meds, history_haystack) -> Optional[VerificationFlag]:
    name = _norm(claim.name)
    if claim.subject is ClaimSubject.VITAL:
        field = _VITAL_ALIASES.get(name)
        if field is None or latest_vitals is None:
            return VerificationFlag(claim=claim, reason=FlagReason.NOT_IN_RECORD)
        actual = float(getattr(latest_vitals, field))
        return _numeric_flag(claim, actual)
    if claim.subject is ClaimSubject.LAB:
        if name not in latest_labs:
            return VerificationFlag(claim=claim, reason=FlagReason.NOT_IN_RECORD)
        return _numeric_flag(claim, latest_labs[name])
    if claim.subject is ClaimSubject.MEDICATION:
        order = meds.get(name)
        if order is None:
            return VerificationFlag(claim=claim, reason=FlagReason.NOT_IN_RECORD)
        if claim.numeric_value is not None:
            return _numeric_flag(claim, order.dose)
        rendered = _norm(f"{order.name} {fmt_num(order.dose)} {order.dose_unit} {order.route} {order.frequency}")
        if _norm(claim.asserted_value) in rendered:
            return None
        return VerificationFlag(
            claim=claim, reason=FlagReason.VALUE_MISMATCH, record_value=fmt_num(order.dose),
        )
    # HistoryFact
    if _norm(claim.asserted_value) in history_haystack:
        return None
    return VerificationFlag(claim=claim, reason=FlagReason.UNSUPPORTED_BY_CONTEXT)


def _numeric_flag(claim, actual: float) -> Optional[VerificationFlag]:
    if claim.numeric_value is None or not _within_tolerance(claim.numeric_value, actual):
        return VerificationFlag(
            claim=claim, reason=FlagReason.VALUE_MISMATCH, record_value=fmt_num(actual),
        )
    return None


# ---------------------------------------------------------------------------
# Care-gap aggregation
# ---------------------------------------------------------------------------

_GAP_LINE_RE = re.compile(r"^(diagnosis|treatment|monitoring|coordination)\s*:\s*(.+)$", re.IGNORECASE)


def aggregate_gaps(responses: Sequence[AgentResponse]) -> GapReport:
    """Collect "Category: finding" plan lines from Ok responses.

    Findings are deduplicated per category by normalized text; lines without a
    recognized category prefix land in Coordination (the documented catch-all).
    """
    buckets: dict[GapCategory, dict[str, tuple[str, list[AgentRole]]]] = {c: {} for c in GapCategory}
    for response in responses:
        if response.status is not ResponseStatus.OK:
            continue
        for line in response.sections.plan:
            match = _GAP_LINE_RE.match(line.strip())
            if match:
                category = GapCategory(match.group(1).casefold())
                finding = match.group(2).strip()
            else:
                category, finding = GapCategory.COORDINATION, line.strip()
            if not finding:
                continue
            key = _norm_finding(finding)
            if key in buckets[category]:
                buckets[category][key][1].append(response.role)
            else:
                buckets[category][key] = (finding, [response.role])
    categories = {
        category: tuple(
            GapFinding(finding=finding, raised_by=tuple(roles))
            for finding, roles in buckets[category].values()
        )
        for category in GapCategory
    }
    total = sum(len(v) for v in categories.values())
    counts = ", ".join(f"{len(categories[c])} {c.value}" for c in GapCategory)
    summary = f"{total} care-gap findings ({counts})"
    return GapReport(categories=categories, summary=summary)


def merge_gap_reports(reports: Sequence[GapReport]) -> GapReport:
    """Category-wise union of several gap reports.

    Findings equal under normalization collapse to one entry whose raised_by is
    the union of raising roles, first-seen order preserved.
    """
    buckets: dict[GapCategory, dict[str, tuple[str, list[AgentRole]]]] = {c: {} for c in GapCategory}
    for report in reports:
        for category, findings in report.categories.items():
            for item in findings:
                key = _norm_finding(item.finding)
                if key in buckets[category]:
                    roles = buckets[category][key][1]
                    for role in item.raised_by:
                        if role not in roles:
                            roles.append(role)
                else:
                    buckets[category][key] = (item.finding, list(item.raised_by))
    categories = {
        category: tuple(
            GapFinding(finding=finding, raised_by=tuple(roles))
            for finding, roles in buckets[category].values()
        )
        for category in GapCategory
    }
    total = sum(len(v) for v in categories.values())
    counts = ", ".join(f"{len(categories[c])} {c.value}" for c in GapCategory)
    summary = f"{total} care-gap findings ({counts})"
    return GapReport(categories=categories, summary=summary)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class Orchestrator:
    def __init__(
        self,
        registry: Registry,
        backend: CompletionBackend,
        store: Optional[RagStore] = None,
        config: PipelineConfig = PipelineConfig(),
        persist: Optional[Callable[[Transcript], None]] = None,
        clock: Callable[[], datetime] = _utc_now,
        id_factory: Callable[[], str] = _uuid_factory,
    ):
        self.registry = registry
        self.backend = backend
        self.store = store
        self.config = config
        self.persist = persist
        self.clock = clock
        self.id_factory = id_factory

    # -- public operations -----------------------------------------------------

    def run_consultation(
        self,
        case: PatientCase,
        question: str,
        mode: ConsultationMode,
        team_selector: Optional[Callable[[AgentRole], bool]] = None,
        transcript_id: Optional[str] = None,
        parent_transcript_id: Optional[str] = None,
    ) -> Transcript:
        if mode not in SYNTHESIS_MODES:
            raise BadMode(f"mode {mode.value} has its own entry point")
        if transcript_id is None:
            transcript_id = self.id_factory()
        context = self._retrieve(f"{question} {case.chief_complaint}")
        roles = [
            profile.role
            for profile in self.registry.core_team()
            if profile.role.kind is not RoleKind.SENIOR_PHYSICIAN
            and (team_selector is None or team_selector(profile.role))
        ]
        if not roles:
            raise NoAgentsAvailable("team selector excluded every agent")
        fan_responses = self._fan_out(roles, case, question, mode, context)

        ok_doctors = [
            r for r in fan_responses
            if r.status is ResponseStatus.OK and r.role in DOCTOR_ROLES
        ]
        synthesis: Optional[SynthesisReport] = None
        responses = list(fan_responses)
        degraded = len(ok_doctors) < 2
        if not degraded:
            senior_response, synthesis = self._synthesize_call(fan_responses, case, mode, context)
            responses.append(senior_response)
        verification = verify(synthesis, responses, case, context)
        # gap findings come from the team round; the synthesis care plan is
        # not itself a gap
        gap_report = aggregate_gaps(fan_responses) if mode is ConsultationMode.CARE_GAP else None
        transcript = Transcript(
            transcript_id=transcript_id,
            case_id=case.case_id,
            question=question,
            mode=mode,
            responses=tuple(responses),
            synthesis=synthesis,
            verification=verification,
            gap_report=gap_report,
            created_at=self.clock(),
            degraded_team=degraded,
            parent_transcript_id=parent_transcript_id,
        )
        if self.persist is not None:
            self.persist(transcript)
        return transcript

    def synthesize(self, responses: Sequence[AgentResponse], case: PatientCase) -> SynthesisReport:
        """Standalone synthesis over already-collected responses."""
        if not any(r.status is ResponseStatus.OK for r in responses):
            raise SynthesisBackendFailure("no Ok responses to synthesize")
        senior_response, synthesis = self._synthesize_call(
            list(responses), case, ConsultationMode.TEAM_ASSESSMENT, [],
        )
        if synthesis is None:
            raise SynthesisBackendFailure(
                f"senior agent returned {senior_response.status.value}"
            )
        return synthesis

    def consult_specialist(
        self,
        specialty: str,
        case: PatientCase,
        question: str,
        transcript_id: Optional[str] = None,
    ) -> Transcript:
        if not self.registry.has_specialty(specialty):
            raise UnknownSpecialty(specialty)
        role = AgentRole.specialist(specialty)
        if transcript_id is None:
            transcript_id = self.id_factory()
        context = self._retrieve(f"{question} {case.chief_complaint}")
        response = self._call_agent(
            role, case, question, ConsultationMode.SPECIALIST_CONSULT.value, context,
        )
        verification = verify(None, [response], case, context)
        transcript = Transcript(
            transcript_id=transcript_id,
            case_id=case.case_id,
            question=question,
            mode=ConsultationMode.SPECIALIST_CONSULT,
            responses=(response,),
            verification=verification,
            created_at=self.clock(),
        )
        if self.persist is not None:
            self.persist(transcript)
        return transcript

    def navigator_explain(self, case: PatientCase, transcript: Transcript) -> str:
        """Patient-facing plain-language explanation of a synthesized plan."""
        if transcript.synthesis is None:
            raise MissingSynthesis(transcript.transcript_id)
        return self._support_call(
            AgentRole.of(RoleKind.PATIENT_NAVIGATOR),
            case,
            transcript.synthesis,
            ConsultationMode.NAVIGATOR_EXPLAIN.value,
            "Explain the team's assessment and plan to the patient in plain language.",
        )

    def discharge_summary(self, case: PatientCase, transcripts: Sequence[Transcript]) -> str:
        """Case-manager discharge note; record-flagged barriers are always appended."""
        synthesized = [t for t in transcripts if t.synthesis is not None]
        if not synthesized:
            raise MissingSynthesis("no transcript with a synthesis")
        latest = max(synthesized, key=lambda t: t.created_at)
        text = self._support_call(
            AgentRole.of(RoleKind.CASE_MANAGER),
            case,
            latest.synthesis,
            ConsultationMode.DISCHARGE_SUMMARY.value,
            "Draft a discharge planning summary with barriers to discharge and home-health needs.",
        )
        barriers = _sdoh_barriers(case)
        if barriers:
            text += "\n\nRECORD-FLAGGED BARRIERS:\n" + "\n".join(f"- {b}" for b in barriers)
        return text

    # -- internals ---------------------------------------------------------------

    def _retrieve(self, query_text: str) -> list[RetrievedChunk]:
        if self.store is None or len(self.store) == 0:
            return []
        return self.store.query(query_text, self.config.retrieval_k)

    def _request(
        self, role: AgentRole, mode: str, system_prompt: str, user_prompt: str,
    ) -> CompletionRequest:
        return CompletionRequest(
            request_id=self.id_factory(),
            role=role,
            mode=mode,
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            max_tokens=self.config.max_tokens,
            temperature=default_temperature(role),
            timeout_ms=self.config.agent_timeout_ms,
        )

    def _user_prompt_for(
        self,
        role: AgentRole,
        case: PatientCase,
        question: str,
        context: Sequence[RetrievedChunk],
    ) -> str:
        prompt = build_user_prompt(case, question, context, None)
        if role.kind is RoleKind.RISK_PREDICTION and case.vitals:
            news = compute_news(case.latest_vitals())
            prompt += (
                f"\n\nRISK DATA:\nNEWS2 total: {news.total}\nRisk band: {news.band.value}"
            )
        return prompt

    def _fan_out(
        self,
        roles: Sequence[AgentRole],
        case: PatientCase,
        question: str,
        mode: ConsultationMode,
        context: Sequence[RetrievedChunk],
    ) -> list[AgentResponse]:
        # Requests are built serially so id assignment is deterministic, then
        # executed concurrently; results keep roster order regardless of
        # completion order.
        requests = [
            self._request(
                role, mode.value,
                self.registry.build_system_prompt(self.registry.profile_for(role)),
                self._user_prompt_for(role, case, question, context),
            )
            for role in roles
        ]
        workers = max(1, min(self.config.parallelism, len(requests)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(self.backend.complete, requests))
        responses = []
        for role, result in zip(roles, results):
            responses.append(_structured_response(role, result))
        return responses

    def _call_agent(
        self,
        role: AgentRole,
        case: PatientCase,
        question: str,
        mode: str,
        context: Sequence[RetrievedChunk],
    ) -> AgentResponse:
        profile = self.registry.profile_for(role)
        request = self._request(
            role, mode,
            self.registry.build_system_prompt(profile),
            self._user_prompt_for(role, case, question, context),
        )
        return _structured_response(role, self.backend.complete(request))

    def _support_call(
        self,
        role: AgentRole,
        case: PatientCase,
        synthesis: SynthesisReport,
        mode: str,
        question: str,
    ) -> str:
        profile = self.registry.profile_for(role)
        user_prompt = "\n\n".join([
            render_case_summary(case, None),
            "TEAM SYNTHESIS:\n" + render_synthesis(synthesis),
            "QUESTION:\n" + question,
        ])
        request = self._request(role, mode, self.registry.build_system_prompt(profile), user_prompt)
        result = self.backend.complete(request)
        if result.status is not ResponseStatus.OK:
            raise SynthesisBackendFailure(
                f"{role} call failed with status {result.status.value}"
            )
        return result.text

    def _synthesize_call(
        self,
        responses: Sequence[AgentResponse],
        case: PatientCase,
        mode: ConsultationMode,
        context: Sequence[RetrievedChunk],
    ) -> tuple[AgentResponse, Optional[SynthesisReport]]:
        role = AgentRole.of(RoleKind.SENIOR_PHYSICIAN)
        profile = self.registry.profile_for(role)
        included = [
            r for r in responses
            if r.status is ResponseStatus.OK
            and (self.config.synthesis_sees_all or r.role in DOCTOR_ROLES)
        ]
        blocks = [
            f"[{r.role}]\n{render_structured(r.sections)}" for r in included
        ]
        user_prompt = "\n\n".join(
            [render_case_summary(case, None), "TEAM INPUTS:"] + blocks
            + ["QUESTION:\n" + SYNTHESIS_QUESTION]
        )
        request = self._request(role, MODE_SYNTHESIS, self.registry.build_system_prompt(profile), user_prompt)
        result = self.backend.complete(request)
        if result.status is not ResponseStatus.OK:
            response = AgentResponse(
                role=role, sections=ResponseSections(), latency_ms=result.latency_ms,
                status=result.status,
            )
            return response, None
        synthesis, claims = parse_synthesis(result.text, role)
        if synthesis is None:
            response = AgentResponse(
                role=role, sections=ResponseSections(assessment=result.text.strip()),
                latency_ms=result.latency_ms, status=ResponseStatus.MALFORMED,
            )
            return response, None
        # the senior's own Ok response is part of the transcript, so it counts
        ok_roles = [r.role for r in responses if r.status is ResponseStatus.OK] + [role]
        synthesis = _backstop_synthesis(synthesis, responses, ok_roles)
        response = AgentResponse(
            role=role,
            sections=ResponseSections(
                assessment=synthesis.final_diagnosis,
                plan=synthesis.care_plan,
                claims=claims,
            ),
            latency_ms=result.latency_ms,
            status=ResponseStatus.OK,
        )
        return response, synthesis


def _structured_response(role: AgentRole, result) -> AgentResponse:
    if result.status is not ResponseStatus.OK:
        return AgentResponse(
            role=role, sections=ResponseSections(), latency_ms=result.latency_ms,
            status=result.status,
        )
    sections, parse_status = parse_structured(result.text, role)
    return AgentResponse(role=role, sections=sections, latency_ms=result.latency_ms, status=parse_status)


def _backstop_synthesis(
    synthesis: SynthesisReport,
    responses: Sequence[AgentResponse],
    ok_roles: Sequence[AgentRole],
) -> SynthesisReport:
    """Mechanical consensus/divergence guarantees behind the senior agent.

    Consensus: any diagnosis named in at least half the Ok doctors'
    differentials (rounded up) is appended if the agent omitted it.
    Divergence: differing top diagnoses across doctors become one explicit
    divergence point if the agent reported none on that topic.
    """
    doctor_sections = [
        r.sections for r in responses
        if r.status is ResponseStatus.OK and r.role in DOCTOR_ROLES
    ]
    doctor_roles = [
        r.role for r in responses
        if r.status is ResponseStatus.OK and r.role in DOCTOR_ROLES
    ]
    threshold = max(1, math.ceil(len(doctor_sections) / 2))

    counts: dict[str, str] = {}
    tally: dict[str, int] = {}
    for sections in doctor_sections:
        seen = set()
        for item in sections.differential:
            key = _norm(item.condition)
            if key in seen:
                continue
            seen.add(key)
            counts.setdefault(key, item.condition)
            tally[key] = tally.get(key, 0) + 1
    present = {_norm(entry) for entry in synthesis.consensus}
    additions = [
        counts[key] for key, n in tally.items() if n >= threshold and key not in present
    ]

    divergence = list(synthesis.divergence)
    tops = {
        str(role): sections.differential[0].condition
        for role, sections in zip(doctor_roles, doctor_sections)
        if sections.differential
    }
    if len({_norm(v) for v in tops.values()}) > 1 and not any(
        _norm(point.topic) == "primary diagnosis" for point in divergence
    ):
        divergence.append(DivergencePoint(topic="primary diagnosis", positions=tops))

    return SynthesisReport(
        final_diagnosis=synthesis.final_diagnosis,
        consensus=tuple(synthesis.consensus) + tuple(additions),
        divergence=tuple(divergence),
        care_plan=synthesis.care_plan,
        next_steps=synthesis.next_steps,
        contributing_roles=tuple(ok_roles),
    )


def _sdoh_barriers(case: PatientCase) -> list[str]:
    from .domain import Housing, SubstanceUse

    barriers = []
    if case.sdoh.housing is not Housing.STABLE:
        barriers.append(f"housing: {case.sdoh.housing.value}")
    if case.sdoh.substance_use is SubstanceUse.ACTIVE:
        barriers.append("substance use: active")
    return barriers
