"""Agent profiles, prompt scaffolding, and the question-template catalog.

The registry is built once from a JSON roster document (a packaged default
ships with the engine) and is read-only afterwards. System prompts are
rendered from a scaffold with four slots: role charter, shared team goals,
output-schema instruction, and reasoning-style directive.
"""
from __future__ import annotations

import json
import string
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict

from .domain import (
    AgentRole,
    CORE_TEAM_ROLES,
    ConsultationMode,
    DomainError,
    FrozenModel,
    PatientCase,
    RoleKind,
    SYNTHESIS_MODES,
    render_case_summary,
)
from .rag import RetrievedChunk


class UnresolvedSlot(DomainError):
    """A scaffold placeholder has no value."""


class UnknownTemplate(DomainError):
    pass


class UnknownRole(DomainError):
    pass


class RosterConfigError(DomainError):
    pass


class Team(str, Enum):
    CORE_SEPSIS = "core_sepsis"
    CONSULT_ROSTER = "consult_roster"
    SUPPORT = "support"


class ReasoningStyle(str, Enum):
    CHAIN_OF_THOUGHT = "chain_of_thought"
    REACT = "react"


DEFAULT_SCAFFOLD = """\
You are the {display_name} agent on a hospital sepsis care team.

ROLE:
{role_charter}

SHARED TEAM GOALS:
{shared_goals}

{output_schema}

REASONING STYLE:
{reasoning_style}"""

#: Machine-parsable section instruction; must appear exactly once per team prompt.
OUTPUT_SCHEMA_INSTRUCTION = """\
OUTPUT FORMAT - respond with exactly these sections:
ASSESSMENT:
<your clinical assessment in plain prose>
DIFFERENTIAL:
- <condition> | <reasoning>   (most likely first; omit lines if not applicable to your role)
PLAN:
- <one recommended step per line>
CLAIMS:
CLAIM: <Vital|Lab|Medication|HistoryFact>|<name>|<value>
List one CLAIM line for every patient-record fact your reasoning relies on."""

#: Patient-facing roles write prose; the claim schema is deliberately suppressed.
NARRATIVE_INSTRUCTION = """\
OUTPUT FORMAT:
Write plain, patient-friendly prose. Do not include section headings, schema
markers, or CLAIM lines."""

REASONING_DIRECTIVES = {
    ReasoningStyle.CHAIN_OF_THOUGHT: (
        "Reason step by step: lay out the evidence and work through it explicitly "
        "before stating conclusions."
    ),
    ReasoningStyle.REACT: (
        "Work in thought -> action -> observation loops: state a thought, name the "
        "action or tool you would use, record the observation, then continue until "
        "you can answer."
    ),
}


class AgentProfile(FrozenModel):
    role: AgentRole
    display_name: str
    charter: str
    team: Team
    reasoning_style: ReasoningStyle = ReasoningStyle.CHAIN_OF_THOUGHT
    system_prompt_scaffold: str = DEFAULT_SCAFFOLD


class PromptTemplate(FrozenModel):
    template_id: ConsultationMode
    title: str
    body: str


# -- roster document schema (unknown keys rejected) --------------------------

class _ProfileDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    role: str
    display_name: str
    charter: str
    reasoning_style: ReasoningStyle = ReasoningStyle.CHAIN_OF_THOUGHT
    scaffold: Optional[str] = None


class _SpecialistDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    specialty: str
    charter: Optional[str] = None
    reasoning_style: ReasoningStyle = ReasoningStyle.CHAIN_OF_THOUGHT


class _TemplateDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: ConsultationMode
    title: str
    body: str


class _RosterDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    schema_version: int
    shared_goals: str
    core_team: list[_ProfileDoc]
    support_team: list[_ProfileDoc]
    consult_roster: list[_SpecialistDoc]
    templates: list[_TemplateDoc]


def _specialist_charter(specialty: str) -> str:
    return (
        f"You provide {specialty.lower()} consultation to the sepsis care team. "
        "Answer the consult question from your specialty's perspective, state "
        "whether the findings change the working diagnosis, and recommend "
        "specialty-specific workup and management steps."
    )


class Registry:
    """Read-only roster of agent profiles plus the question-template catalog."""

    def __init__(self, profiles: Sequence[AgentProfile], templates: Sequence[PromptTemplate], shared_goals: str):
        self._profiles: dict[AgentRole, AgentProfile] = {}
        for profile in profiles:
            if profile.role in self._profiles:
                raise RosterConfigError(f"duplicate role {profile.role}")
            self._profiles[profile.role] = profile
        self._order = tuple(p.role for p in profiles)
        self._templates = {t.template_id: t for t in templates}
        self.shared_goals = shared_goals
        self._check_shape()

    def _check_shape(self) -> None:
        core = [r for r in self._order if self._profiles[r].team is Team.CORE_SEPSIS]
        if tuple(core) != CORE_TEAM_ROLES:
            raise RosterConfigError(
                "core team must contain exactly the ten core roles in canonical order"
            )
        missing = [m.value for m in SYNTHESIS_MODES if m not in self._templates]
        if missing:
            raise RosterConfigError(f"template catalog missing: {missing}")

    # -- lookups -------------------------------------------------------------

    def profile_for(self, role: AgentRole) -> AgentProfile:
        try:
            return self._profiles[role]
        except KeyError:
            raise UnknownRole(str(role)) from None

    def core_team(self) -> list[AgentProfile]:
        return [self._profiles[r] for r in self._order if self._profiles[r].team is Team.CORE_SEPSIS]

    def consult_roster(self) -> list[AgentProfile]:
        return [self._profiles[r] for r in self._order if self._profiles[r].team is Team.CONSULT_ROSTER]

    def support_team(self) -> list[AgentProfile]:
        return [self._profiles[r] for r in self._order if self._profiles[r].team is Team.SUPPORT]

    def all_profiles(self) -> list[AgentProfile]:
        return [self._profiles[r] for r in self._order]

    def has_specialty(self, specialty: str) -> bool:
        return AgentRole.specialist(specialty) in self._profiles

    # -- templates -----------------------------------------------------------

    def list_templates(self) -> list[PromptTemplate]:
        return [self._templates[m] for m in SYNTHESIS_MODES]

    def instantiate_template(self, template_id: ConsultationMode, case: PatientCase) -> str:
        if template_id not in self._templates:
            raise UnknownTemplate(f"no template for id {template_id!r}")
        body = self._templates[template_id].body
        return _render_slots(body, {"case_id": case.case_id, "chief_complaint": case.chief_complaint})

    # -- prompt construction ---------------------------------------------------

    def build_system_prompt(self, profile: AgentProfile) -> str:
        """Render the scaffold; every slot must resolve."""
        schema = (
            NARRATIVE_INSTRUCTION if profile.team is Team.SUPPORT else OUTPUT_SCHEMA_INSTRUCTION
        )
        slots = {
            "display_name": profile.display_name,
            "role_charter": profile.charter,
            "shared_goals": self.shared_goals,
            "output_schema": schema,
            "reasoning_style": REASONING_DIRECTIVES[profile.reasoning_style],
        }
        return _render_slots(profile.system_prompt_scaffold, slots)


def _render_slots(template: str, slots: dict[str, str]) -> str:
    try:
        return string.Formatter().vformat(template, (), slots)
    except (KeyError, IndexError) as exc:
        raise UnresolvedSlot(f"scaffold slot {exc} has no value") from exc


def build_user_prompt(
    case: PatientCase,
    question: str,
    context: Sequence[RetrievedChunk],
    as_of,
) -> str:
    """Case summary, then retrieved chunks in rank order, then the question."""
    if not question.strip():
        raise DomainError("question must be nonempty")
    parts = [render_case_summary(case, as_of), ""]
    if context:
        parts.append("REFERENCE CONTEXT:")
        for item in context:
            parts.append(f"[{item.rank}] (doc:{item.chunk.doc_id}#{item.chunk.ordinal}) {item.chunk.text.strip()}")
    else:
        parts.append("NO REFERENCE CONTEXT")
    parts += ["", "QUESTION:", question.strip()]
    return "\n".join(parts)


# -- loading ------------------------------------------------------------------

def _profile_from_doc(doc: _ProfileDoc, team: Team) -> AgentProfile:
    kind = RoleKind(doc.role)
    return AgentProfile(
        role=AgentRole.of(kind),
        display_name=doc.display_name,
        charter=doc.charter,
        team=team,
        reasoning_style=doc.reasoning_style,
        system_prompt_scaffold=doc.scaffold or DEFAULT_SCAFFOLD,
    )


def load_registry(path: Path | str) -> Registry:
    """Load a roster document from disk; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return _registry_from_raw(raw)


def _registry_from_raw(raw: dict) -> Registry:
    try:
        doc = _RosterDoc.model_validate(raw)
    except Exception as exc:
        raise RosterConfigError(f"bad roster document: {exc}") from exc
    if doc.schema_version != 1:
        raise RosterConfigError(f"unsupported roster schema_version {doc.schema_version}")
    profiles = [_profile_from_doc(p, Team.CORE_SEPSIS) for p in doc.core_team]
    profiles += [_profile_from_doc(p, Team.SUPPORT) for p in doc.support_team]
    for spec in doc.consult_roster:
        profiles.append(
            AgentProfile(
                role=AgentRole.specialist(spec.specialty),
                display_name=spec.specialty,
                charter=spec.charter or _specialist_charter(spec.specialty),
                team=Team.CONSULT_ROSTER,
                reasoning_style=spec.reasoning_style,
            )
        )
    templates = [
        PromptTemplate(template_id=t.id, title=t.title, body=t.body) for t in doc.templates
    ]
    return Registry(profiles, templates, doc.shared_goals)


def default_registry() -> Registry:
    """The packaged roster: 10 core agents, 2 support agents, 33 specialists."""
    raw = json.loads(
        resources.files("matec").joinpath("data/default_roster.json").read_text("utf-8")
    )
    return _registry_from_raw(raw)
