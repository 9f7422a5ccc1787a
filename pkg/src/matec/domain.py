"""Shared clinical and consultation value types.

Everything here is an immutable value (frozen pydantic models), safe to share
between concurrent tasks. The wire format is JSON with ``schema_version: 1``
and snake_case field names; ``to_interchange`` / ``case_from_interchange`` /
``transcript_from_interchange`` handle the envelope.

Range and ordering rules are deliberately *not* enforced at construction time:
``validate_case`` reports them as data (a ``ValidationReport``) so callers can
surface every problem at once instead of failing on the first bad field.
"""
from __future__ import annotations

from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_serializer, model_validator

SCHEMA_VERSION = 1


class DomainError(Exception):
    """Base class for errors raised by the engine."""


class AsOfBeforeAllData(DomainError):
    """No vitals observation exists at or before the requested instant."""


class BackendError(DomainError):
    """A remote provider call failed (transport fault or non-2xx status)."""


def fmt_num(value: float) -> str:
    """Render a number without trailing zeros: 39.20 -> '39.2', 1500.0 -> '1500'."""
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-") else "0"


def as_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class Sex(str, Enum):
    FEMALE = "female"
    MALE = "male"
    OTHER = "other"
    UNKNOWN = "unknown"


class Consciousness(str, Enum):
    """ACVPU level; new-onset confusion maps to CONFUSION."""

    ALERT = "alert"
    CONFUSION = "confusion"
    VOICE = "voice"
    PAIN = "pain"
    UNRESPONSIVE = "unresponsive"


class SpO2Scale(str, Enum):
    SCALE1 = "scale1"
    SCALE2 = "scale2"  # hypercapnic respiratory failure


class Housing(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    HOMELESS = "homeless"
    UNKNOWN = "unknown"


class SubstanceUse(str, Enum):
    NONE = "none"
    ACTIVE = "active"
    IN_RECOVERY = "in_recovery"
    UNKNOWN = "unknown"


class Insurance(str, Enum):
    PRIVATE = "private"
    MEDICARE = "medicare"
    MEDICAID = "medicaid"
    UNINSURED = "uninsured"
    UNKNOWN = "unknown"


class ResponseStatus(str, Enum):
    OK = "ok"
    TIMED_OUT = "timed_out"
    MALFORMED = "malformed"
    BACKEND_ERROR = "backend_error"


class ConsultationMode(str, Enum):
    TEAM_ASSESSMENT = "team_assessment"
    CARE_GAP = "care_gap"
    DIFFERENTIAL_DX = "differential_dx"
    TREATMENT_PLAN = "treatment_plan"
    ANTIBIOTIC_MGMT = "antibiotic_mgmt"
    PHARMACY_ASSESSMENT = "pharmacy_assessment"
    SPECIALIST_CONSULT = "specialist_consult"
    NAVIGATOR_EXPLAIN = "navigator_explain"
    DISCHARGE_SUMMARY = "discharge_summary"


#: Modes whose transcripts carry a synthesis when the team quorum is met.
SYNTHESIS_MODES = (
    ConsultationMode.TEAM_ASSESSMENT,
    ConsultationMode.CARE_GAP,
    ConsultationMode.DIFFERENTIAL_DX,
    ConsultationMode.TREATMENT_PLAN,
    ConsultationMode.ANTIBIOTIC_MGMT,
    ConsultationMode.PHARMACY_ASSESSMENT,
)


class ClaimSubject(str, Enum):
    VITAL = "vital"
    LAB = "lab"
    MEDICATION = "medication"
    HISTORY_FACT = "history_fact"


# ---------------------------------------------------------------------------
# Agent roles
# ---------------------------------------------------------------------------

class RoleKind(str, Enum):
    EMERGENCY_MEDICINE = "emergency_medicine"
    HOSPITALIST = "hospitalist"
    INFECTIOUS_DISEASE = "infectious_disease"
    CRITICAL_CARE = "critical_care"
    SENIOR_PHYSICIAN = "senior_physician"
    NURSE = "nurse"
    PHARMACIST = "pharmacist"
    SOCIAL_WORKER = "social_worker"
    PATIENT_SAFETY_QI = "patient_safety_qi"
    RISK_PREDICTION = "risk_prediction"
    PATIENT_NAVIGATOR = "patient_navigator"
    CASE_MANAGER = "case_manager"
    SPECIALIST = "specialist"


class AgentRole(FrozenModel):
    """A team role. Specialists are parameterized by specialty name.

    Serialized as a plain string: ``"hospitalist"`` or ``"specialist:Nephrologist"``.
    """

    kind: RoleKind
    specialty: str = ""

    @model_validator(mode="before")
    @classmethod
    def _coerce_string(cls, value: Any) -> Any:
        if isinstance(value, str):
            if value.startswith("specialist:"):
                return {"kind": RoleKind.SPECIALIST, "specialty": value.split(":", 1)[1]}
            return {"kind": RoleKind(value)}
        return value

    @model_validator(mode="after")
    def _check_specialty(self) -> "AgentRole":
        if self.kind is RoleKind.SPECIALIST and not self.specialty:
            raise ValueError("specialist role requires a specialty name")
        if self.kind is not RoleKind.SPECIALIST and self.specialty:
            raise ValueError("only specialist roles carry a specialty name")
        return self

    @model_serializer
    def _as_string(self) -> str:
        if self.kind is RoleKind.SPECIALIST:
            return f"specialist:{self.specialty}"
        return self.kind.value

    def __str__(self) -> str:
        return self._as_string()

    @classmethod
    def of(cls, kind: RoleKind) -> "AgentRole":
        return cls(kind=kind)

    @classmethod
    def specialist(cls, specialty: str) -> "AgentRole":
        return cls(kind=RoleKind.SPECIALIST, specialty=specialty)


#: The four differential-generating doctor roles; the senior physician
#: synthesizes over their outputs rather than contributing a differential quorum vote.
DOCTOR_ROLES = (
    AgentRole.of(RoleKind.EMERGENCY_MEDICINE),
    AgentRole.of(RoleKind.HOSPITALIST),
    AgentRole.of(RoleKind.INFECTIOUS_DISEASE),
    AgentRole.of(RoleKind.CRITICAL_CARE),
)

#: Fan-out order of the ten-member core sepsis team.
CORE_TEAM_ROLES = DOCTOR_ROLES + (
    AgentRole.of(RoleKind.SENIOR_PHYSICIAN),
    AgentRole.of(RoleKind.NURSE),
    AgentRole.of(RoleKind.PHARMACIST),
    AgentRole.of(RoleKind.SOCIAL_WORKER),
    AgentRole.of(RoleKind.PATIENT_SAFETY_QI),
    AgentRole.of(RoleKind.RISK_PREDICTION),
)


# ---------------------------------------------------------------------------
# Clinical record
# ---------------------------------------------------------------------------

class VitalSigns(FrozenModel):
    timestamp: datetime
    respiration_rate: int
    spo2: int
    on_supplemental_oxygen: bool
    spo2_scale: SpO2Scale = SpO2Scale.SCALE1
    systolic_bp: int
    heart_rate: int
    consciousness: Consciousness
    temperature: float

    _utc = field_validator("timestamp")(as_utc)


class Demographics(FrozenModel):
    age: int
    sex: Sex


class LabResult(FrozenModel):
    name: str
    value: float
    unit: str
    timestamp: datetime

    _utc = field_validator("timestamp")(as_utc)


class MedicationOrder(FrozenModel):
    name: str
    dose: float
    dose_unit: str
    route: str
    frequency: str


class Sdoh(FrozenModel):
    housing: Housing = Housing.UNKNOWN
    substance_use: SubstanceUse = SubstanceUse.UNKNOWN
    insurance: Insurance = Insurance.UNKNOWN
    support: str = ""


class PatientCase(FrozenModel):
    case_id: str
    demographics: Demographics
    chief_complaint: str
    history: str = ""
    vitals: tuple[VitalSigns, ...] = ()
    labs: tuple[LabResult, ...] = ()
    medications: tuple[MedicationOrder, ...] = ()
    current_plan: Optional[str] = None
    sdoh: Sdoh = Sdoh()
    unit_id: Optional[str] = None

    def latest_vitals(self, as_of: Optional[datetime] = None) -> VitalSigns:
        """Most recent vitals at or before ``as_of`` (default: latest overall)."""
        candidates = self.vitals
        if as_of is not None:
            cutoff = as_utc(as_of)
            candidates = tuple(v for v in self.vitals if v.timestamp <= cutoff)
        if not candidates:
            raise AsOfBeforeAllData(f"case {self.case_id}: no vitals at or before the requested instant")
        return candidates[-1]


# ---------------------------------------------------------------------------
# Consultation record
# ---------------------------------------------------------------------------

class DiagnosisItem(FrozenModel):
    condition: str
    reasoning: str = ""


class Claim(FrozenModel):
    """A machine-checkable assertion extracted from an agent response."""

    subject: ClaimSubject
    name: str
    asserted_value: str
    numeric_value: Optional[float] = None
    source_role: AgentRole

    @model_validator(mode="after")
    def _fill_numeric(self) -> "Claim":
        if self.numeric_value is None:
            try:
                parsed = float(self.asserted_value.strip())
            except ValueError:
                return self
            object.__setattr__(self, "numeric_value", parsed)
        return self


class ResponseSections(FrozenModel):
    assessment: str = ""
    differential: tuple[DiagnosisItem, ...] = ()
    plan: tuple[str, ...] = ()
    claims: tuple[Claim, ...] = ()


class AgentResponse(FrozenModel):
    role: AgentRole
    sections: ResponseSections
    latency_ms: int
    status: ResponseStatus


class DivergencePoint(FrozenModel):
    topic: str
    positions: dict[str, str]  # role string -> stated position


class SynthesisReport(FrozenModel):
    final_diagnosis: str
    consensus: tuple[str, ...] = ()
    divergence: tuple[DivergencePoint, ...] = ()
    care_plan: tuple[str, ...] = ()
    next_steps: tuple[str, ...] = ()
    contributing_roles: tuple[AgentRole, ...] = ()

    @field_validator("contributing_roles")
    @classmethod
    def _canonical_order(cls, roles: tuple[AgentRole, ...]) -> tuple[AgentRole, ...]:
        return tuple(sorted(set(roles), key=str))


class FlagReason(str, Enum):
    NOT_IN_RECORD = "not_in_record"
    VALUE_MISMATCH = "value_mismatch"
    UNSUPPORTED_BY_CONTEXT = "unsupported_by_context"


class VerificationFlag(FrozenModel):
    claim: Claim
    reason: FlagReason
    record_value: Optional[str] = None  # set for VALUE_MISMATCH


class Verdict(str, Enum):
    CLEAN = "clean"
    FLAGGED = "flagged"


class VerificationReport(FrozenModel):
    checked: int
    flags: tuple[VerificationFlag, ...] = ()
    verdict: Verdict

    @model_validator(mode="after")
    def _verdict_matches(self) -> "VerificationReport":
        expected = Verdict.FLAGGED if self.flags else Verdict.CLEAN
        if self.verdict is not expected:
            raise ValueError("verdict must be flagged iff flags are present")
        return self


class GapCategory(str, Enum):
    DIAGNOSIS = "diagnosis"
    TREATMENT = "treatment"
    MONITORING = "monitoring"
    COORDINATION = "coordination"


class GapFinding(FrozenModel):
    finding: str
    raised_by: tuple[AgentRole, ...]

    @field_validator("raised_by")
    @classmethod
    def _canonical_order(cls, roles: tuple[AgentRole, ...]) -> tuple[AgentRole, ...]:
        return tuple(sorted(set(roles), key=str))


class GapReport(FrozenModel):
    categories: dict[GapCategory, tuple[GapFinding, ...]]
    summary: str


class Transcript(FrozenModel):
    transcript_id: str
    case_id: str
    question: str
    mode: ConsultationMode
    responses: tuple[AgentResponse, ...] = ()
    synthesis: Optional[SynthesisReport] = None
    verification: Optional[VerificationReport] = None
    gap_report: Optional[GapReport] = None
    created_at: datetime
    degraded_team: bool = False
    parent_transcript_id: Optional[str] = None

    _utc = field_validator("created_at")(as_utc)

    @model_validator(mode="after")
    def _one_response_per_role(self) -> "Transcript":
        roles = [str(r.role) for r in self.responses]
        if len(set(roles)) != len(roles):
            raise ValueError("at most one response per role")
        return self


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class Violation(FrozenModel):
    path: str
    message: str


class ValidationReport(FrozenModel):
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations


def _check_vitals(v: VitalSigns, path: str, out: list[Violation]) -> None:
    def bad(field: str, message: str) -> None:
        out.append(Violation(path=f"{path}.{field}", message=message))

    if not 0 <= v.spo2 <= 100:
        bad("spo2", f"spo2 must be within [0, 100], got {v.spo2}")
    if not 20.0 <= v.temperature <= 45.0:
        bad("temperature", f"temperature must be within [20.0, 45.0] C, got {fmt_num(v.temperature)}")
    if abs(v.temperature * 10 - round(v.temperature * 10)) > 1e-6:
        bad("temperature", "temperature must carry at most one decimal place")
    if v.respiration_rate < 0:
        bad("respiration_rate", "respiration rate must be >= 0")
    if v.heart_rate < 0:
        bad("heart_rate", "heart rate must be >= 0")
    if v.systolic_bp < 0:
        bad("systolic_bp", "systolic blood pressure must be >= 0")


def validate_case(case: PatientCase) -> ValidationReport:
    """Report every invariant violation in the case; empty report means valid."""
    out: list[Violation] = []
    if not case.case_id.strip():
        out.append(Violation(path="case_id", message="case_id must be nonempty"))
    if case.demographics.age < 0:
        out.append(Violation(path="demographics.age", message="age must be >= 0"))
    if not case.chief_complaint.strip():
        out.append(Violation(path="chief_complaint", message="chief complaint must be nonempty"))
    for i, vitals in enumerate(case.vitals):
        _check_vitals(vitals, f"vitals[{i}]", out)
        if i > 0 and vitals.timestamp <= case.vitals[i - 1].timestamp:
            out.append(
                Violation(
                    path=f"vitals[{i}].timestamp",
                    message="vitals timestamps must be strictly increasing",
                )
            )
    for i, lab in enumerate(case.labs):
        if not lab.name.strip():
            out.append(Violation(path=f"labs[{i}].name", message="lab name must be nonempty"))
        if not lab.unit.strip():
            out.append(Violation(path=f"labs[{i}].unit", message="lab unit must be nonempty"))
    for i, med in enumerate(case.medications):
        if not med.name.strip():
            out.append(Violation(path=f"medications[{i}].name", message="medication name must be nonempty"))
        if med.dose < 0:
            out.append(Violation(path=f"medications[{i}].dose", message="dose must be >= 0"))
    return ValidationReport(violations=tuple(out))


# ---------------------------------------------------------------------------
# Canonical case rendering
# ---------------------------------------------------------------------------

def _ts(value: datetime) -> str:
    return as_utc(value).isoformat().replace("+00:00", "Z")


def render_case_summary(case: PatientCase, as_of: datetime) -> str:
    """Deterministic text block inserted into every agent prompt.

    Shows the most recent vitals at or before ``as_of``, all labs sorted by
    (timestamp, name), all medication orders, and the SDOH block.
    Raises :class:`AsOfBeforeAllData` when vitals exist but none precede
    ``as_of``; a case with no vitals at all renders without the block.
    """
    vitals = case.latest_vitals(as_of) if case.vitals else None
    lines: list[str] = [
        f"PATIENT CASE {case.case_id}",
        f"Age: {case.demographics.age} | Sex: {case.demographics.sex.value}",
        f"Chief complaint: {case.chief_complaint}",
    ]
    if case.history.strip():
        lines.append("HISTORY:")
        lines.append(case.history.strip())
    if vitals is not None:
        oxygen = "on supplemental oxygen" if vitals.on_supplemental_oxygen else "on room air"
        scale = "2" if vitals.spo2_scale is SpO2Scale.SCALE2 else "1"
        lines += [
            f"VITALS (as of {_ts(vitals.timestamp)}):",
            f"- Respiration rate: {vitals.respiration_rate} /min",
            f"- SpO2: {vitals.spo2} % ({oxygen}, scale {scale})",
            f"- Systolic BP: {vitals.systolic_bp} mmHg",
            f"- Heart rate: {vitals.heart_rate} /min",
            f"- Consciousness: {vitals.consciousness.value}",
            f"- Temperature: {fmt_num(vitals.temperature)} C",
        ]
    if case.labs:
        lines.append("LABS:")
        for lab in sorted(case.labs, key=lambda l: (l.timestamp, l.name)):
            lines.append(f"- {_ts(lab.timestamp)} {lab.name}: {fmt_num(lab.value)} {lab.unit}")
    if case.medications:
        lines.append("MEDICATIONS:")
        for med in case.medications:
            lines.append(f"- {med.name} {fmt_num(med.dose)} {med.dose_unit} {med.route} {med.frequency}")
    if case.current_plan and case.current_plan.strip():
        lines.append("CURRENT PLAN:")
        lines.append(case.current_plan.strip())
    lines += [
        "SDOH:",
        f"- Housing: {case.sdoh.housing.value}",
        f"- Substance use: {case.sdoh.substance_use.value}",
        f"- Insurance: {case.sdoh.insurance.value}",
    ]
    if case.sdoh.support.strip():
        lines.append(f"- Support: {case.sdoh.support.strip()}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Interchange envelope
# ---------------------------------------------------------------------------

def to_interchange(model: BaseModel) -> dict[str, Any]:
    """Dump a value to its JSON-ready dict with the schema_version envelope."""
    payload = model.model_dump(mode="json")
    return {"schema_version": SCHEMA_VERSION, **payload}


def _from_interchange(data: dict[str, Any], model_type: type) -> Any:
    payload = dict(data)
    version = payload.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported schema_version {version!r}; this build reads version {SCHEMA_VERSION}")
    return model_type.model_validate(payload)


def case_from_interchange(data: dict[str, Any]) -> PatientCase:
    return _from_interchange(data, PatientCase)


def transcript_from_interchange(data: dict[str, Any]) -> Transcript:
    return _from_interchange(data, Transcript)
