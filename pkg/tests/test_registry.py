"""Roster registry, prompt scaffolding, and the template catalog."""
import json
from datetime import timezone
from importlib import resources

import pytest

from matec.domain import (
    AgentRole,
    CORE_TEAM_ROLES,
    ConsultationMode,
    DomainError,
    RoleKind,
    SYNTHESIS_MODES,
)
from matec.rag import Chunk, RetrievedChunk
from matec.registry import (
    NARRATIVE_INSTRUCTION,
    OUTPUT_SCHEMA_INSTRUCTION,
    Registry,
    RosterConfigError,
    Team,
    UnknownRole,
    UnknownTemplate,
    UnresolvedSlot,
    build_user_prompt,
    default_registry,
    load_registry,
)

from conftest import FIXED_NOW, golden_case


def roster_raw() -> dict:
    return json.loads(
        resources.files("matec").joinpath("data/default_roster.json").read_text("utf-8")
    )


class TestDefaultShape:
    def test_team_sizes(self):
        reg = default_registry()
        assert len(reg.core_team()) == 10
        assert len(reg.consult_roster()) == 33
        assert len(reg.support_team()) == 2
        assert len(reg.all_profiles()) == 45

    def test_core_roles_canonical_order(self):
        reg = default_registry()
        assert tuple(p.role for p in reg.core_team()) == CORE_TEAM_ROLES

    def test_roles_unique(self):
        reg = default_registry()
        roles = [p.role for p in reg.all_profiles()]
        assert len(roles) == len(set(roles))

    def test_loading_twice_gives_equal_profiles(self):
        a = default_registry()
        b = default_registry()
        assert a.all_profiles() == b.all_profiles()
        assert a.list_templates() == b.list_templates()
        assert a.shared_goals == b.shared_goals

    def test_load_registry_from_file_matches_packaged(self, tmp_path):
        path = tmp_path / "roster.json"
        path.write_text(json.dumps(roster_raw()), encoding="utf-8")
        assert load_registry(path).all_profiles() == default_registry().all_profiles()

    def test_has_specialty(self):
        reg = default_registry()
        assert reg.has_specialty("Nephrologist")
        assert reg.has_specialty("Toxicologist")
        assert not reg.has_specialty("Astrologer")

    def test_profile_for_unknown_role(self):
        reg = default_registry()
        with pytest.raises(UnknownRole):
            reg.profile_for(AgentRole.specialist("Astrologer"))


class TestTemplateCatalog:
    TITLES = [
        "Team Assessment",
        "Care Gap Analysis",
        "Differential Diagnosis Analysis",
        "Treatment Plan",
        "Antibiotic Management",
        "Pharmacy Assessment",
    ]

    def test_six_templates_in_mode_order(self):
        templates = default_registry().list_templates()
        assert [t.template_id for t in templates] == list(SYNTHESIS_MODES)
        assert [t.title for t in templates] == self.TITLES

    def test_instantiate_care_gap(self):
        reg = default_registry()
        text = reg.instantiate_template(ConsultationMode.CARE_GAP, golden_case())
        assert "gaps in the current care plan" in text
        assert "diagnosis, treatment, monitoring, and care coordination" in text

    def test_instantiate_unknown_template(self):
        reg = default_registry()
        with pytest.raises(UnknownTemplate):
            reg.instantiate_template(ConsultationMode.SPECIALIST_CONSULT, golden_case())


class TestSystemPrompts:
    def test_senior_charter_covers_verification(self):
        reg = default_registry()
        prompt = reg.build_system_prompt(reg.profile_for(AgentRole.of(RoleKind.SENIOR_PHYSICIAN)))
        assert "verify facts against the patient record" in prompt
        assert "hallucination" in prompt
        assert "consensus and divergence" in prompt

    def test_prompt_rendering_is_deterministic(self):
        reg = default_registry()
        profile = reg.profile_for(AgentRole.of(RoleKind.NURSE))
        assert reg.build_system_prompt(profile) == reg.build_system_prompt(profile)

    @pytest.mark.parametrize(
        "kind,needle",
        [
            (RoleKind.NURSE, "nursing recommendations"),
            (RoleKind.PHARMACIST, "adverse drug effects"),
            (RoleKind.SOCIAL_WORKER, "SDOH"),
            (RoleKind.PATIENT_SAFETY_QI, "SEP-1"),
        ],
    )
    def test_charter_pins(self, kind, needle):
        reg = default_registry()
        assert needle in reg.build_system_prompt(reg.profile_for(AgentRole.of(kind)))

    def test_risk_prediction_uses_react_loops(self):
        reg = default_registry()
        prompt = reg.build_system_prompt(reg.profile_for(AgentRole.of(RoleKind.RISK_PREDICTION)))
        assert "thought -> action -> observation" in prompt

    def test_schema_instruction_exactly_once_per_core_prompt(self):
        reg = default_registry()
        for profile in reg.core_team():
            prompt = reg.build_system_prompt(profile)
            assert prompt.count(OUTPUT_SCHEMA_INSTRUCTION) == 1, profile.role
            assert "CLAIM: <Vital|Lab|Medication|HistoryFact>|<name>|<value>" in prompt

    def test_support_roles_write_prose(self):
        reg = default_registry()
        for profile in reg.support_team():
            prompt = reg.build_system_prompt(profile)
            assert NARRATIVE_INSTRUCTION in prompt
            assert OUTPUT_SCHEMA_INSTRUCTION not in prompt
            assert "CLAIM: <Vital|Lab|Medication|HistoryFact>|<name>|<value>" not in prompt

    def test_specialist_prompt_names_specialty(self):
        reg = default_registry()
        prompt = reg.build_system_prompt(reg.profile_for(AgentRole.specialist("Nephrologist")))
        assert "Nephrologist" in prompt
        assert "nephrologist consultation" in prompt
        assert OUTPUT_SCHEMA_INSTRUCTION in prompt

    def test_shared_goals_in_every_prompt(self):
        reg = default_registry()
        for profile in reg.all_profiles():
            assert reg.shared_goals in reg.build_system_prompt(profile)

    def test_unresolved_scaffold_slot(self):
        reg = default_registry()
        base = reg.profile_for(AgentRole.of(RoleKind.NURSE))
        broken = base.model_copy(update={"system_prompt_scaffold": "hi {no_such_slot}"})
        with pytest.raises(UnresolvedSlot):
            reg.build_system_prompt(broken)


def ctx(rank: int, doc_id: str, ordinal: int, text: str) -> RetrievedChunk:
    chunk = Chunk(doc_id=doc_id, ordinal=ordinal, text=text, vector=(0.0,), source_title=doc_id)
    return RetrievedChunk(chunk=chunk, score=1.0 / rank, rank=rank)


class TestUserPrompt:
    def test_no_context_marker(self):
        prompt = build_user_prompt(golden_case(), "What next?", [], FIXED_NOW)
        assert "NO REFERENCE CONTEXT" in prompt
        assert "REFERENCE CONTEXT:" not in prompt
        assert prompt.rstrip().endswith("QUESTION:\nWhat next?")

    def test_chunks_rendered_in_rank_order(self):
        context = [
            ctx(1, "abx", 0, "Give antibiotics within one hour."),
            ctx(2, "lactate", 2, "Remeasure lactate when elevated."),
            ctx(3, "cultures", 1, "Draw cultures before antibiotics."),
        ]
        prompt = build_user_prompt(golden_case(), "Plan?", context, FIXED_NOW)
        assert "REFERENCE CONTEXT:" in prompt
        i1 = prompt.index("[1] (doc:abx#0) Give antibiotics within one hour.")
        i2 = prompt.index("[2] (doc:lactate#2) Remeasure lactate when elevated.")
        i3 = prompt.index("[3] (doc:cultures#1) Draw cultures before antibiotics.")
        assert i1 < i2 < i3
        assert prompt.index("QUESTION:") > i3

    def test_case_summary_leads(self):
        case = golden_case()
        prompt = build_user_prompt(case, "Plan?", [], FIXED_NOW)
        assert prompt.startswith(f"PATIENT CASE {case.case_id}")

    def test_empty_question_rejected(self):
        with pytest.raises(DomainError):
            build_user_prompt(golden_case(), "   ", [], FIXED_NOW)


class TestRosterValidation:
    def test_duplicate_role_rejected(self):
        reg = default_registry()
        profiles = reg.all_profiles()
        with pytest.raises(RosterConfigError, match="duplicate role"):
            Registry(profiles + [profiles[0]], reg.list_templates(), reg.shared_goals)

    def test_missing_template_rejected(self):
        reg = default_registry()
        templates = [t for t in reg.list_templates() if t.template_id is not ConsultationMode.CARE_GAP]
        with pytest.raises(RosterConfigError, match="care_gap"):
            Registry(reg.all_profiles(), templates, reg.shared_goals)

    def test_core_roles_out_of_order_rejected(self):
        reg = default_registry()
        profiles = reg.all_profiles()
        profiles[0], profiles[1] = profiles[1], profiles[0]
        with pytest.raises(RosterConfigError, match="canonical order"):
            Registry(profiles, reg.list_templates(), reg.shared_goals)

    def test_unsupported_schema_version(self, tmp_path):
        raw = roster_raw()
        raw["schema_version"] = 2
        path = tmp_path / "roster.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(RosterConfigError, match="schema_version"):
            load_registry(path)

    def test_unknown_key_rejected(self, tmp_path):
        raw = roster_raw()
        raw["surprise"] = True
        path = tmp_path / "roster.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(RosterConfigError, match="bad roster document"):
            load_registry(path)
