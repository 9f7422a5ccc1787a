"""Completion backends and the structured-response grammar.

Two interchangeable backends sit behind one ``complete`` call: a live
chat-completions HTTP client for real deployments, and a scripted mock that is
a pure function of (request, script, seed). The mock reads patient facts back
out of the rendered case summary in the user prompt, so its answers stay
consistent with the record by construction; injected faults (fabricated
values, timeouts, malformed output) are how the verification layer is tested.

Transport failures are returned as statuses, not raised: a slow or broken
agent is data to the team round, never an exception that kills it.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Protocol

import httpx
from pydantic import field_validator

from .domain import (
    AgentRole,
    Claim,
    ClaimSubject,
    DiagnosisItem,
    FrozenModel,
    ResponseSections,
    ResponseStatus,
    RoleKind,
    fmt_num,
)

API_KEY_ENV = "MATEC_LLM_API_KEY"

#: Pseudo-mode used when the SeniorPhysician is called to synthesize, as
#: opposed to answering in the fan-out round.
MODE_SYNTHESIS = "synthesis"
MODE_WILDCARD = "*"


# ---------------------------------------------------------------------------
# Request / result
# ---------------------------------------------------------------------------

class CompletionRequest(FrozenModel):
    request_id: str
    role: AgentRole
    mode: str
    system_prompt: str
    user_prompt: str
    max_tokens: int = 1024
    temperature: float = 0.2
    timeout_ms: int = 30_000

    @field_validator("system_prompt", "user_prompt")
    @classmethod
    def _nonempty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("prompts must be nonempty")
        return value

    @field_validator("timeout_ms", "max_tokens")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("temperature")
    @classmethod
    def _temp_range(cls, value: float) -> float:
        if not 0.0 <= value <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        return value


class CompletionResult(FrozenModel):
    text: str
    status: ResponseStatus
    latency_ms: int
    detail: str = ""  # transport diagnostics; empty on success


class CompletionBackend(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResult: ...


# ---------------------------------------------------------------------------
# Sampling defaults
# ---------------------------------------------------------------------------

#: Synthesis and scoring favor determinism; the other roles keep a little
#: diversity. All values are configuration, not constants of the method.
DETERMINISTIC_ROLES = frozenset({RoleKind.SENIOR_PHYSICIAN, RoleKind.RISK_PREDICTION})


def default_temperature(role: AgentRole) -> float:
    return 0.0 if role.kind in DETERMINISTIC_ROLES else 0.2


# ---------------------------------------------------------------------------
# Structured-response grammar
# ---------------------------------------------------------------------------

_SUBJECT_LABEL = {
    ClaimSubject.VITAL: "Vital",
    ClaimSubject.LAB: "Lab",
    ClaimSubject.MEDICATION: "Medication",
    ClaimSubject.HISTORY_FACT: "HistoryFact",
}
_SUBJECT_FROM_LABEL = {
    "vital": ClaimSubject.VITAL,
    "lab": ClaimSubject.LAB,
    "medication": ClaimSubject.MEDICATION,
    "historyfact": ClaimSubject.HISTORY_FACT,
    "history_fact": ClaimSubject.HISTORY_FACT,
    "history fact": ClaimSubject.HISTORY_FACT,
}

# A heading is the bare keyword, or the keyword with a colon and optional
# inline content. A prose line that merely starts with the keyword does not
# match (the colon is required once any tail text is present).
_HEADING_RE = re.compile(
    r"^\s*(?:#{1,3}\s*)?\*{0,2}(ASSESSMENT|DIFFERENTIAL|PLAN|CLAIMS)\*{0,2}\s*(?::\s*(.*))?$",
    re.IGNORECASE,
)
_BULLET_RE = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*(.+)$")
_CLAIM_RE = re.compile(r"^\s*CLAIM\s*:\s*(.+)$", re.IGNORECASE)


def parse_structured(text: str, role: AgentRole) -> tuple[ResponseSections, ResponseStatus]:
    """Tolerant parse of the four-section response grammar.

    Missing CLAIMS or DIFFERENTIAL just yield empty lists; a text with no
    ASSESSMENT heading at all is Malformed. Unparseable bullet or claim lines
    are skipped rather than fatal.
    """
    section: Optional[str] = None
    saw_assessment = False
    assessment_lines: list[str] = []
    differential: list[DiagnosisItem] = []
    plan: list[str] = []
    claims: list[Claim] = []

    def feed(line: str) -> None:
        if section == "ASSESSMENT":
            assessment_lines.append(line)
        elif section == "DIFFERENTIAL":
            bullet = _BULLET_RE.match(line)
            if bullet:
                condition, _, reasoning = bullet.group(1).partition("|")
                if condition.strip():
                    differential.append(
                        DiagnosisItem(condition=condition.strip(), reasoning=reasoning.strip())
                    )
        elif section == "PLAN":
            bullet = _BULLET_RE.match(line)
            if bullet and bullet.group(1).strip():
                plan.append(bullet.group(1).strip())
        elif section == "CLAIMS":
            claim = _parse_claim_line(line, role)
            if claim is not None:
                claims.append(claim)

    for line in text.splitlines():
        heading = _HEADING_RE.match(line)
        if heading:
            section = heading.group(1).upper()
            saw_assessment = saw_assessment or section == "ASSESSMENT"
            inline = heading.group(2)
            if inline and inline.strip():
                feed(inline)
            continue
        if section is not None:
            feed(line)

    status = ResponseStatus.OK if saw_assessment else ResponseStatus.MALFORMED
    sections = ResponseSections(
        assessment="\n".join(assessment_lines).strip(),
        differential=tuple(differential),
        plan=tuple(plan),
        claims=tuple(claims),
    )
    return sections, status


def _parse_claim_line(line: str, role: AgentRole) -> Optional[Claim]:
    match = _CLAIM_RE.match(line)
    if not match:
        return None
    parts = match.group(1).split("|", 2)
    if len(parts) != 3:
        return None
    subject = _SUBJECT_FROM_LABEL.get(parts[0].strip().casefold())
    name = parts[1].strip()
    if subject is None or not name:
        return None
    return Claim(subject=subject, name=name, asserted_value=parts[2].strip(), source_role=role)


def render_structured(sections: ResponseSections) -> str:
    """Canonical renderer; ``parse_structured`` of its output is the identity.

    Holds for canonical-form sections: stripped single-line fields, no '|' in
    condition or claim names, and no heading- or CLAIM-shaped lines inside the
    assessment prose.
    """
    lines = ["ASSESSMENT:", sections.assessment]
    if sections.differential:
        lines += ["", "DIFFERENTIAL:"]
        for item in sections.differential:
            lines.append(f"- {item.condition} | {item.reasoning}" if item.reasoning else f"- {item.condition}")
    if sections.plan:
        lines += ["", "PLAN:"]
        lines += [f"- {step}" for step in sections.plan]
    if sections.claims:
        lines += ["", "CLAIMS:"]
        for claim in sections.claims:
            lines.append(f"CLAIM: {_SUBJECT_LABEL[claim.subject]}|{claim.name}|{claim.asserted_value}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Fault injection
# ---------------------------------------------------------------------------

class FaultKind(str, Enum):
    FABRICATE_VALUE = "fabricate_value"
    TIMEOUT = "timeout"
    MALFORMED_OUTPUT = "malformed_output"


@dataclass(frozen=True)
class Fault:
    """One injected failure, applied when the target role is called.

    FABRICATE_VALUE shifts the named record field by ``delta`` in the agent's
    CLAIM lines only; the surrounding prose stays truthful, which is exactly
    the failure shape the verification pass exists to catch.
    """

    kind: FaultKind
    target_role: AgentRole
    field: str = ""
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is FaultKind.FABRICATE_VALUE and not self.field.strip():
            raise ValueError("FABRICATE_VALUE needs a field name")


def parse_fault_spec(value: str) -> Fault:
    """Parse the textual fault form used by CLI flags and service config.

    Accepted shapes: ``timeout:<role>``, ``malformed:<role>``, and
    ``fabricate:<role>:<field>:<delta>``.
    """
    parts = value.split(":")
    kinds = {
        "timeout": FaultKind.TIMEOUT,
        "malformed": FaultKind.MALFORMED_OUTPUT,
        "fabricate": FaultKind.FABRICATE_VALUE,
    }
    if not parts or parts[0] not in kinds:
        raise ValueError(f"fault spec must start with one of {sorted(kinds)}: {value!r}")
    kind = kinds[parts[0]]
    # role strings may themselves contain a colon ("specialist:Nephrologist"),
    # so field and delta are taken from the end and the middle is the role
    if kind is FaultKind.FABRICATE_VALUE:
        if len(parts) < 4:
            raise ValueError(f"fabricate spec needs role:field:delta: {value!r}")
        try:
            delta = float(parts[-1])
        except ValueError:
            raise ValueError(f"bad delta {parts[-1]!r} in fault spec {value!r}") from None
        return Fault(kind=kind, target_role=_role_from_spec(":".join(parts[1:-2]), value),
                     field=parts[-2], delta=delta)
    if len(parts) < 2:
        raise ValueError(f"{parts[0]} spec needs exactly one role: {value!r}")
    return Fault(kind=kind, target_role=_role_from_spec(":".join(parts[1:]), value))


def _role_from_spec(role: str, spec: str) -> AgentRole:
    try:
        return AgentRole.model_validate(role)
    except Exception:
        raise ValueError(f"unknown role {role!r} in fault spec {spec!r}") from None


def _norm_name(name: str) -> str:
    return " ".join(name.replace("_", " ").replace("-", " ").casefold().split())


# ---------------------------------------------------------------------------
# Mock script
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MockScript:
    """Keyed response rules: (role string, mode string) -> template.

    Lookup order is exact pair, then (role, "*"), then ("*", mode), then
    ("*", "*"); the most specific rule wins.
    """

    rules: Mapping[tuple[str, str], str]
    fault: Optional[Fault] = None

    def rule_for(self, role: str, mode: str) -> str:
        for key in ((role, mode), (role, MODE_WILDCARD), (MODE_WILDCARD, mode), (MODE_WILDCARD, MODE_WILDCARD)):
            if key in self.rules:
                return self.rules[key]
        raise KeyError(f"no mock rule for role={role!r} mode={mode!r}")

    def has_rule(self, role: str, mode: str) -> bool:
        try:
            self.rule_for(role, mode)
        except KeyError:
            return False
        return True


# ---------------------------------------------------------------------------
# Case facts read back from the rendered summary
# ---------------------------------------------------------------------------

#: Headings that end the case-summary block inside a user prompt.
_SUMMARY_STOPS = ("REFERENCE CONTEXT:", "NO REFERENCE CONTEXT", "QUESTION:", "TEAM INPUTS:", "RISK DATA:")

_VITAL_PATTERNS = {
    "respiration rate": re.compile(r"^- Respiration rate: (\d+) /min$"),
    "spo2": re.compile(r"^- SpO2: (\d+) %"),
    "systolic bp": re.compile(r"^- Systolic BP: (\d+) mmHg$"),
    "heart rate": re.compile(r"^- Heart rate: (\d+) /min$"),
    "temperature": re.compile(r"^- Temperature: ([0-9.]+) C$"),
}
_CONSCIOUSNESS_RE = re.compile(r"^- Consciousness: (\S+)$")
_LAB_RE = re.compile(r"^- (\S+) (.+): (-?[0-9.]+) (\S+)$")
_MED_RE = re.compile(r"^- (.+?) ([0-9.]+) (\S+) (\S+) (\S+)$")
_NEWS_TOTAL_RE = re.compile(r"^NEWS2 total: (\d+)$", re.MULTILINE)
_NEWS_BAND_RE = re.compile(r"^Risk band: (.+)$", re.MULTILINE)


@dataclass
class CaseFacts:
    """What the mock knows: everything it can read back out of the prompt."""

    case_id: str = ""
    age: str = "unknown"
    sex: str = "unknown"
    chief_complaint: str = ""
    history: str = ""
    vitals: dict[str, float] = field(default_factory=dict)
    consciousness: str = ""
    labs: dict[str, float] = field(default_factory=dict)  # latest value per name
    medications: dict[str, float] = field(default_factory=dict)  # dose per name
    housing: str = "unknown"
    substance_use: str = "unknown"
    insurance: str = "unknown"
    news_total: str = "unknown"
    news_band: str = "unknown"


def parse_case_facts(user_prompt: str) -> CaseFacts:
    facts = CaseFacts()
    block: Optional[str] = None
    started = False
    for raw in user_prompt.splitlines():
        line = raw.rstrip()
        if line.startswith("PATIENT CASE "):
            facts.case_id = line.removeprefix("PATIENT CASE ").strip()
            started = True
            continue
        if not started:
            continue
        if any(line.startswith(stop) for stop in _SUMMARY_STOPS):
            break
        if line in ("HISTORY:", "LABS:", "MEDICATIONS:", "CURRENT PLAN:", "SDOH:") or line.startswith("VITALS"):
            block = line.split(" ")[0].rstrip(":")
            continue
        demo = re.match(r"^Age: (\d+) \| Sex: (\S+)$", line)
        if demo:
            facts.age, facts.sex = demo.group(1), demo.group(2)
            continue
        if line.startswith("Chief complaint: "):
            facts.chief_complaint = line.removeprefix("Chief complaint: ")
            continue
        if block == "HISTORY":
            facts.history = (facts.history + " " + line).strip() if facts.history else line
        elif block == "VITALS":
            for name, pattern in _VITAL_PATTERNS.items():
                match = pattern.match(line)
                if match:
                    facts.vitals[name] = float(match.group(1))
                    break
            else:
                match = _CONSCIOUSNESS_RE.match(line)
                if match:
                    facts.consciousness = match.group(1)
        elif block == "LABS":
            match = _LAB_RE.match(line)
            if match:
                # summary lines are sorted by timestamp, so the last write wins
                facts.labs[match.group(2)] = float(match.group(3))
        elif block == "MEDICATIONS":
            match = _MED_RE.match(line)
            if match:
                facts.medications[match.group(1)] = float(match.group(2))
        elif block == "SDOH":
            for attr, prefix in (("housing", "- Housing: "), ("substance_use", "- Substance use: "),
                                 ("insurance", "- Insurance: ")):
                if line.startswith(prefix):
                    setattr(facts, attr, line.removeprefix(prefix))
    total = _NEWS_TOTAL_RE.search(user_prompt)
    band = _NEWS_BAND_RE.search(user_prompt)
    if total:
        facts.news_total = total.group(1)
    if band:
        facts.news_band = band.group(1).strip()
    return facts


# ---------------------------------------------------------------------------
# Deterministic diagnosis heuristic
# ---------------------------------------------------------------------------

_DIAGNOSIS_CUES = (
    ("endocarditis", "sepsis due to endocarditis"),
    ("vegetation", "sepsis due to endocarditis"),
    ("intravenous drug", "sepsis due to endocarditis"),
    ("iv drug", "sepsis due to endocarditis"),
    ("murmur", "sepsis due to endocarditis"),
    ("pneumonia", "sepsis due to pneumonia"),
    ("productive cough", "sepsis due to pneumonia"),
    ("infiltrate", "sepsis due to pneumonia"),
    ("pyelonephritis", "urosepsis"),
    ("dysuria", "urosepsis"),
    ("urinary", "urosepsis"),
    ("cellulitis", "sepsis due to skin and soft tissue infection"),
    ("wound", "sepsis due to skin and soft tissue infection"),
    ("meningitis", "sepsis due to bacterial meningitis"),
    ("neck stiffness", "sepsis due to bacterial meningitis"),
)
DEFAULT_DIAGNOSIS = "sepsis, source undetermined"


def infer_diagnosis(facts: CaseFacts) -> str:
    haystack = f"{facts.chief_complaint} {facts.history}".casefold()
    for cue, diagnosis in _DIAGNOSIS_CUES:
        if cue in haystack:
            return diagnosis
    return DEFAULT_DIAGNOSIS


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------

_MALFORMED_TEXT = (
    "The patient appears acutely ill and the overall picture is concerning; "
    "additional evaluation should proceed without delay and the team will be "
    "updated as findings develop."
)

#: Claim emission order: vitals in summary order, then labs and medications in
#: record order, then one history fact.
_VITAL_CLAIM_ORDER = ("respiration rate", "spo2", "systolic bp", "heart rate", "temperature")


def _claims_block(role: AgentRole, facts: CaseFacts, fault: Optional[Fault]) -> str:
    def value_for(name: str, value: float) -> float:
        if (
            fault is not None
            and fault.kind is FaultKind.FABRICATE_VALUE
            and fault.target_role == role
            and _norm_name(fault.field) == _norm_name(name)
        ):
            return value + fault.delta
        return value

    lines = []
    for name in _VITAL_CLAIM_ORDER:
        if name in facts.vitals:
            lines.append(f"CLAIM: Vital|{name}|{fmt_num(value_for(name, facts.vitals[name]))}")
    for name, value in facts.labs.items():
        lines.append(f"CLAIM: Lab|{name}|{fmt_num(value_for(name, value))}")
    for name, dose in facts.medications.items():
        lines.append(f"CLAIM: Medication|{name}|{fmt_num(value_for(name, dose))}")
    if facts.history:
        first_clause = re.split(r"[.;]", facts.history)[0].strip()
        if first_clause:
            lines.append(f"CLAIM: HistoryFact|reported history|{first_clause}")
    return "\n".join(lines)


def _stable_latency(seed: int, role: str, mode: str) -> int:
    digest = hashlib.sha256(f"{seed}|{role}|{mode}".encode()).digest()
    return 180 + int.from_bytes(digest[:8], "big") % 240


class MockBackend:
    """Scripted backend: complete() is a pure function of (request, script, seed)."""

    backend_id = "mock"

    def __init__(self, script: Optional[MockScript] = None, seed: int = 0):
        self.script = script if script is not None else default_script()
        self.seed = seed

    def complete(self, req: CompletionRequest) -> CompletionResult:
        fault = self.script.fault
        targeted = fault is not None and fault.target_role == req.role
        if targeted and fault.kind is FaultKind.TIMEOUT:
            return CompletionResult(
                text="", status=ResponseStatus.TIMED_OUT, latency_ms=req.timeout_ms,
                detail="scripted timeout",
            )
        latency = _stable_latency(self.seed, str(req.role), req.mode)
        if targeted and fault.kind is FaultKind.MALFORMED_OUTPUT:
            return CompletionResult(text=_MALFORMED_TEXT, status=ResponseStatus.OK, latency_ms=latency)
        try:
            template = self.script.rule_for(str(req.role), req.mode)
        except KeyError as exc:
            return CompletionResult(
                text="", status=ResponseStatus.BACKEND_ERROR, latency_ms=latency, detail=str(exc),
            )
        facts = parse_case_facts(req.user_prompt)
        slots = {
            "age": facts.age,
            "sex": facts.sex,
            "chief_complaint": facts.chief_complaint or "the presenting complaint",
            "diagnosis": infer_diagnosis(facts),
            "heart_rate": _slot_num(facts.vitals.get("heart rate")),
            "temperature": _slot_num(facts.vitals.get("temperature")),
            "respiration_rate": _slot_num(facts.vitals.get("respiration rate")),
            "spo2": _slot_num(facts.vitals.get("spo2")),
            "systolic_bp": _slot_num(facts.vitals.get("systolic bp")),
            "consciousness": facts.consciousness or "unknown",
            "housing": facts.housing,
            "substance_use": facts.substance_use,
            "insurance": facts.insurance,
            "news_total": facts.news_total,
            "news_band": facts.news_band,
            "role_name": req.role.specialty or req.role.kind.value.replace("_", " "),
            "claims": _claims_block(req.role, facts, fault),
        }
        try:
            text = template.format_map(slots)
        except KeyError as exc:
            return CompletionResult(
                text="", status=ResponseStatus.BACKEND_ERROR, latency_ms=latency,
                detail=f"script slot {exc} has no value",
            )
        return CompletionResult(text=text, status=ResponseStatus.OK, latency_ms=latency)


def _slot_num(value: Optional[float]) -> str:
    return fmt_num(value) if value is not None else "unknown"


# ---------------------------------------------------------------------------
# Live backend
# ---------------------------------------------------------------------------

class LiveBackend:
    """Chat-completions HTTP client (system/user message array wire format).

    One retry on transport errors, none on timeouts: a slow agent must not
    stall the team round twice.
    """

    backend_id = "live"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        client: Optional[httpx.Client] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._client = client or httpx.Client()

    def complete(self, req: CompletionRequest) -> CompletionResult:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        timeout = httpx.Timeout(req.timeout_ms / 1000.0)
        started = time.monotonic()

        def elapsed_ms() -> int:
            return int((time.monotonic() - started) * 1000)

        for attempt in (1, 2):
            try:
                response = self._client.post(
                    f"{self.base_url}/chat/completions",
                    json=payload, headers=headers, timeout=timeout,
                )
            except httpx.TimeoutException:
                return CompletionResult(
                    text="", status=ResponseStatus.TIMED_OUT,
                    latency_ms=max(elapsed_ms(), req.timeout_ms), detail="timed out",
                )
            except httpx.TransportError as exc:
                if attempt == 1:
                    continue
                return CompletionResult(
                    text="", status=ResponseStatus.BACKEND_ERROR,
                    latency_ms=elapsed_ms(), detail=f"transport error: {exc}",
                )
            if response.status_code // 100 != 2:
                return CompletionResult(
                    text="", status=ResponseStatus.BACKEND_ERROR,
                    latency_ms=elapsed_ms(), detail=f"http {response.status_code}",
                )
            try:
                text = response.json()["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError):
                return CompletionResult(
                    text="", status=ResponseStatus.BACKEND_ERROR,
                    latency_ms=elapsed_ms(), detail="malformed completion body",
                )
            return CompletionResult(text=text, status=ResponseStatus.OK, latency_ms=elapsed_ms())
        raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Default script
# ---------------------------------------------------------------------------

_EM_DEFAULT = """\
ASSESSMENT:
{age}-year-old {sex} presenting with {chief_complaint}. Heart rate {heart_rate}, systolic BP {systolic_bp}, temperature {temperature} C: meets sepsis screening criteria in the emergency department. Working impression is {diagnosis}.

DIFFERENTIAL:
- {diagnosis} | presentation and recorded risk factors fit; supporting facts cited below
- community-acquired pneumonia | cannot be excluded without chest imaging

PLAN:
- Draw blood cultures from two separate sites before antibiotics
- Begin broad-spectrum antibiotics within the hour
- Give a 30 mL/kg crystalloid bolus and reassess perfusion after completion

CLAIMS:
{claims}"""

_HOSPITALIST_DEFAULT = """\
ASSESSMENT:
Admission review for {chief_complaint}. The vital-sign trend and laboratory picture support {diagnosis}; the patient needs inpatient management with structured reassessment.

DIFFERENTIAL:
- {diagnosis} | most consistent with the documented history
- acute pyelonephritis | no urinary symptoms in the recorded history

PLAN:
- Admit to a monitored bed
- Trend lactate and creatinine every six hours
- Reconcile home medications against current orders

CLAIMS:
{claims}"""

_ID_DEFAULT = """\
ASSESSMENT:
Infectious-disease review: the presentation is consistent with {diagnosis}. The empiric regimen should cover the suspected source until cultures return.

DIFFERENTIAL:
- {diagnosis} | source hypothesis best supported by the recorded history
- vertebral osteomyelitis | hematogenous seeding is possible; examine for focal spinal tenderness

PLAN:
- Obtain two sets of blood cultures before any antibiotic change
- Order echocardiography to evaluate the suspected source
- De-escalate antibiotics once susceptibilities return

CLAIMS:
{claims}"""

_CC_DEFAULT = """\
ASSESSMENT:
Hemodynamic review: heart rate {heart_rate} with systolic BP {systolic_bp} indicates early shock physiology; respiration rate {respiration_rate} and SpO2 {spo2}% need close observation. Consistent with {diagnosis}.

DIFFERENTIAL:
- {diagnosis} | physiology matches the team's working source hypothesis
- septic arthritis | consider if a focal joint becomes apparent on examination

PLAN:
- Reassess fluid responsiveness after each bolus
- Start norepinephrine if MAP stays below 65 after volume resuscitation
- Move to intensive care if the early-warning trend worsens

CLAIMS:
{claims}"""

_NURSE_DEFAULT = """\
ASSESSMENT:
Bedside status: temperature {temperature} C, heart rate {heart_rate}, respiration rate {respiration_rate}; the patient is {consciousness}. Escalating observation frequency per protocol.

DIFFERENTIAL:

PLAN:
- Hourly vital signs until the early-warning trend stabilizes
- Strict intake and output charting
- Notify the team if systolic BP falls below 90

CLAIMS:
{claims}"""

_PHARMACIST_DEFAULT = """\
ASSESSMENT:
Pharmacy review of the active orders. Weight-based dosing and renal function must be checked before the next antimicrobial dose; the medications cited below are from the current record.

DIFFERENTIAL:

PLAN:
- Verify dosing against renal function before the next scheduled dose
- Schedule drug-level monitoring where applicable
- Screen the regimen for interactions and duplications

CLAIMS:
{claims}"""

_SOCIAL_DEFAULT = """\
ASSESSMENT:
Psychosocial screen: housing status {housing}, substance use {substance_use}, insurance {insurance}. These social factors directly affect the safety of any discharge plan.

DIFFERENTIAL:

PLAN:
- Meet with the patient to assess support needs
- Engage community services for the identified social risk factors
- Document social risk factors in the shared care plan

CLAIMS:
{claims}"""

_QI_DEFAULT = """\
ASSESSMENT:
Bundle-compliance review: verifying that cultures, lactate measurement, antibiotics, and fluids are each completed and time-stamped within their required windows.

DIFFERENTIAL:

PLAN:
- Time-stamp each bundle element in the record
- Audit the antibiotic start time against the recognition clock
- Flag any missed bundle window to the team lead

CLAIMS:
{claims}"""

_RISK_DEFAULT = """\
ASSESSMENT:
Computed early-warning score: NEWS2 total {news_total}, risk band {news_band}. Thought: the score trend drives monitoring cadence. Action: recompute on each new observation set. Observation: the values cited below are from the current record.

DIFFERENTIAL:

PLAN:
- Recompute the early-warning score on every new vitals set
- Escalate monitoring per the risk-band recommendation

CLAIMS:
{claims}"""

_SENIOR_DEFAULT = """\
ASSESSMENT:
Senior review: the presentation supports {diagnosis}. Team inputs are consistent; verification of the cited facts follows.

DIFFERENTIAL:
- {diagnosis} | convergent impression across the team

PLAN:
- Proceed with the consensus care plan

CLAIMS:
{claims}"""

_SENIOR_SYNTHESIS = """\
FINAL DIAGNOSIS:
{diagnosis}

CONSENSUS:
- {diagnosis}
- Early blood cultures, lactate trending, and broad-spectrum antibiotics

DIVERGENCE:

CARE PLAN:
- Broad-spectrum antibiotics adjusted to the suspected source
- Source-control evaluation including targeted imaging
- Continued volume resuscitation with reassessment between boluses
- Antimicrobial dosing review against renal function

NEXT STEPS:
- Follow up culture results within 24 hours
- De-escalate antibiotics when susceptibilities return
- Reassess the early-warning trend at the configured cadence

CLAIMS:
{claims}"""

_SPECIALIST_CONSULT = """\
ASSESSMENT:
{role_name} consultation: from this specialty's standpoint the presentation is consistent with {diagnosis}. Focused recommendations follow.

DIFFERENTIAL:
- {diagnosis} | consistent with the consulting question

PLAN:
- Complete a focused workup of the suspected source from the {role_name} standpoint
- Report findings back to the primary team

CLAIMS:
{claims}"""

_NAVIGATOR_DEFAULT = """\
Hello - I'm your patient navigator, and I'm here to explain what your care team is doing.

Your team believes your illness is {diagnosis}. In plain terms, an infection has made you sick enough that your whole body is reacting to it, and the team is treating it seriously and quickly.

Here is what they are doing for you: they are giving you antibiotics to fight the infection, fluids to support your blood pressure, and they are checking your blood tests regularly to see how you are responding.

What happens next: the team will watch your test results over the next day, adjust your medicines based on what the laboratory finds, and talk with you about each step. Please ask your nurse or any team member whenever something is unclear - you are part of this team too."""

_CASE_MANAGER_DEFAULT = """\
DISCHARGE PLANNING SUMMARY

Clinical course: the team's working diagnosis is {diagnosis}. Discharge readiness depends on clinical stability and on resolving the practical barriers below.

Barriers to discharge:
- Housing status is recorded as {housing}
- Substance use is recorded as {substance_use}
- Insurance coverage is recorded as {insurance}

Home-health needs: arrange outpatient antibiotic administration if intravenous therapy continues, schedule an early follow-up visit, and confirm medication access under the patient's coverage before the day of discharge."""

#: Care-gap findings use the "Category: finding" plan-line grammar. Two pairs
#: of roles deliberately raise the same finding to exercise deduplication.
_GAP_PLANS = {
    RoleKind.EMERGENCY_MEDICINE: (
        "Diagnosis: blood cultures from two separate sites are not documented before antibiotics",
        "Treatment: time to first antibiotic dose is not recorded against the bundle clock",
    ),
    RoleKind.HOSPITALIST: (
        "Diagnosis: blood cultures from two separate sites are not documented before antibiotics",
        "Coordination: no documented handoff between the emergency department and the admitting service",
    ),
    RoleKind.INFECTIOUS_DISEASE: (
        "Diagnosis: echocardiography to evaluate the suspected source has not been ordered",
        "Treatment: empiric coverage has not been reviewed against local resistance data",
    ),
    RoleKind.CRITICAL_CARE: (
        "Monitoring: urine output is not tracked hourly",
        "Treatment: fluid responsiveness has not been reassessed after the initial bolus",
    ),
    RoleKind.NURSE: (
        "Monitoring: repeat lactate within six hours is not ordered",
        "Monitoring: vital-sign frequency was not increased despite the elevated early-warning score",
    ),
    RoleKind.PHARMACIST: (
        "Treatment: antimicrobial dosing has not been adjusted for renal function",
        "Treatment: no de-escalation review is scheduled pending culture results",
    ),
    RoleKind.SOCIAL_WORKER: (
        "Coordination: housing instability is not addressed in the disposition plan",
        "Coordination: no community-services referral is documented despite identified social risk",
    ),
    RoleKind.PATIENT_SAFETY_QI: (
        "Monitoring: repeat lactate within six hours is not ordered",
        "Treatment: three-hour bundle elements are not individually time-stamped",
    ),
    RoleKind.RISK_PREDICTION: (
        "Monitoring: the early-warning score is not recalculated on the configured cadence",
    ),
    RoleKind.SENIOR_PHYSICIAN: (
        "Coordination: the verified team plan has not been countersigned in the record",
    ),
}

_ROLE_DEFAULTS = {
    RoleKind.EMERGENCY_MEDICINE: _EM_DEFAULT,
    RoleKind.HOSPITALIST: _HOSPITALIST_DEFAULT,
    RoleKind.INFECTIOUS_DISEASE: _ID_DEFAULT,
    RoleKind.CRITICAL_CARE: _CC_DEFAULT,
    RoleKind.SENIOR_PHYSICIAN: _SENIOR_DEFAULT,
    RoleKind.NURSE: _NURSE_DEFAULT,
    RoleKind.PHARMACIST: _PHARMACIST_DEFAULT,
    RoleKind.SOCIAL_WORKER: _SOCIAL_DEFAULT,
    RoleKind.PATIENT_SAFETY_QI: _QI_DEFAULT,
    RoleKind.RISK_PREDICTION: _RISK_DEFAULT,
}

_DOCTOR_GAP_DIFFERENTIAL = {
    RoleKind.EMERGENCY_MEDICINE,
    RoleKind.HOSPITALIST,
    RoleKind.INFECTIOUS_DISEASE,
    RoleKind.CRITICAL_CARE,
}


def _gap_template(kind: RoleKind) -> str:
    parts = [
        "ASSESSMENT:",
        f"Care-gap review from the {kind.value.replace('_', ' ')} perspective for "
        "{chief_complaint}; working impression {diagnosis}.",
        "",
    ]
    if kind in _DOCTOR_GAP_DIFFERENTIAL:
        parts += ["DIFFERENTIAL:", "- {diagnosis} | unchanged working impression", ""]
    parts.append("PLAN:")
    parts += [f"- {finding}" for finding in _GAP_PLANS[kind]]
    parts += ["", "CLAIMS:", "{claims}"]
    return "\n".join(parts)


def default_script(fault: Optional[Fault] = None) -> MockScript:
    """The shipped script: a rule for every (core role, mode) pair plus the
    synthesis, specialist, and support-role entries."""
    rules: dict[tuple[str, str], str] = {}
    for kind, template in _ROLE_DEFAULTS.items():
        rules[(kind.value, MODE_WILDCARD)] = template
        rules[(kind.value, "care_gap")] = _gap_template(kind)
    rules[(RoleKind.SENIOR_PHYSICIAN.value, MODE_SYNTHESIS)] = _SENIOR_SYNTHESIS
    rules[(MODE_WILDCARD, "specialist_consult")] = _SPECIALIST_CONSULT
    rules[(RoleKind.PATIENT_NAVIGATOR.value, MODE_WILDCARD)] = _NAVIGATOR_DEFAULT
    rules[(RoleKind.CASE_MANAGER.value, MODE_WILDCARD)] = _CASE_MANAGER_DEFAULT
    return MockScript(rules=rules, fault=fault)
