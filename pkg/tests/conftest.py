"""Shared builders: a golden case whose mock-run outputs are frozen oracles."""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Optional

from matec.domain import (
    Consciousness,
    Demographics,
    Housing,
    Insurance,
    LabResult,
    MedicationOrder,
    PatientCase,
    Sdoh,
    SubstanceUse,
    VitalSigns,
)
from matec.gateway import MockBackend
from matec.orchestrator import Orchestrator, PipelineConfig, SequentialIds
from matec.registry import default_registry

FIXED_NOW = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


def fixed_clock() -> datetime:
    return FIXED_NOW


def at(hour: int, minute: int = 0) -> datetime:
    return datetime(2026, 3, 1, hour, minute, tzinfo=timezone.utc)


def make_vitals(**overrides) -> VitalSigns:
    base = dict(
        timestamp=at(11),
        respiration_rate=18,
        spo2=97,
        on_supplemental_oxygen=False,
        systolic_bp=120,
        heart_rate=75,
        consciousness=Consciousness.ALERT,
        temperature=37.0,
    )
    base.update(overrides)
    return VitalSigns(**base)


def golden_case(**overrides) -> PatientCase:
    """Two vitals observations, one lab, one medication, eight facts per agent.

    The latest observation (RR 24, SpO2 93, SBP 98, HR 121, T 39.2) is what
    mock agents claim against, so fabrication oracles below reference these
    numbers; the history's first clause is the mock HistoryFact claim.
    """
    base = dict(
        case_id="case-77",
        demographics=Demographics(age=41, sex="male"),
        chief_complaint="fever and back pain",
        history="Daily intravenous heroin use. New holosystolic murmur.",
        vitals=(
            make_vitals(timestamp=at(9), respiration_rate=18, spo2=97, systolic_bp=118,
                        heart_rate=96, temperature=37.8),
            make_vitals(timestamp=at(11), respiration_rate=24, spo2=93, systolic_bp=98,
                        heart_rate=121, temperature=39.2),
        ),
        labs=(LabResult(name="lactate", value=4.1, unit="mmol/L", timestamp=at(10, 30)),),
        medications=(
            MedicationOrder(name="vancomycin", dose=1500, dose_unit="mg", route="IV", frequency="q12h"),
        ),
        current_plan="Empiric vancomycin started. One set of blood cultures drawn.",
        sdoh=Sdoh(
            housing=Housing.HOMELESS,
            substance_use=SubstanceUse.ACTIVE,
            insurance=Insurance.UNINSURED,
            support="estranged from family",
        ),
        unit_id="icu-3",
    )
    base.update(overrides)
    return PatientCase(**base)


def make_orchestrator(
    backend: Optional[object] = None,
    seed: int = 0,
    prefix: str = "t",
    **config_overrides,
) -> Orchestrator:
    return Orchestrator(
        registry=default_registry(),
        backend=backend if backend is not None else MockBackend(seed=seed),
        config=PipelineConfig(**config_overrides),
        clock=fixed_clock,
        id_factory=SequentialIds(prefix),
    )
