"""Deterministic NEWS2 scoring, risk banding, and deterioration monitoring.

Implements the current NEWS2 chart (not the 2012 revision). Scale 2 applies
only when the observation is marked ``spo2_scale=SCALE2``. All functions are
pure; the service scheduler decides *when* to evaluate, this module decides
*what* the series says.
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence

from .domain import Consciousness, DomainError, FrozenModel, SpO2Scale, VitalSigns


class EmptySeries(DomainError):
    """evaluate_trend requires at least one observation."""


class RiskBand(str, Enum):
    LOW = "low"
    LOW_MEDIUM = "low_medium"
    MEDIUM = "medium"
    HIGH = "high"


#: Escalation order used by the monitor; alerts fire only on strict increases.
BAND_ORDER = {
    RiskBand.LOW: 0,
    RiskBand.LOW_MEDIUM: 1,
    RiskBand.MEDIUM: 2,
    RiskBand.HIGH: 3,
}


class NewsResult(FrozenModel):
    subscores: dict[str, int]
    total: int
    band: RiskBand
    scale_used: SpO2Scale


class MonitorAlert(FrozenModel):
    case_id: str
    at: str  # ISO 8601 UTC instant of the escalating observation
    previous_band: RiskBand
    new_band: RiskBand
    news: NewsResult
    recommendation: str


def _score_respiration(rate: int) -> int:
    if rate <= 8:
        return 3
    if rate <= 11:
        return 1
    if rate <= 20:
        return 0
    if rate <= 24:
        return 2
    return 3


def _score_spo2_scale1(spo2: int) -> int:
    if spo2 <= 91:
        return 3
    if spo2 <= 93:
        return 2
    if spo2 <= 95:
        return 1
    return 0


def _score_spo2_scale2(spo2: int, on_oxygen: bool) -> int:
    if spo2 <= 83:
        return 3
    if spo2 <= 85:
        return 2
    if spo2 <= 87:
        return 1
    if spo2 <= 92:
        return 0
    # 93 and above scores by oxygen: target range exceeded only matters on supplemental O2
    if not on_oxygen:
        return 0
    if spo2 <= 94:
        return 1
    if spo2 <= 96:
        return 2
    return 3


def _score_systolic_bp(sbp: int) -> int:
    if sbp <= 90:
        return 3
    if sbp <= 100:
        return 2
    if sbp <= 110:
        return 1
    if sbp <= 219:
        return 0
    return 3


def _score_heart_rate(hr: int) -> int:
    if hr <= 40:
        return 3
    if hr <= 50:
        return 1
    if hr <= 90:
        return 0
    if hr <= 110:
        return 1
    if hr <= 130:
        return 2
    return 3


def _score_temperature(temp: float) -> int:
    # One-decimal closed bands; domain validation pins temperature to one decimal.
    tenths = round(temp * 10)
    if tenths <= 350:
        return 3
    if tenths <= 360:
        return 1
    if tenths <= 380:
        return 0
    if tenths <= 390:
        return 1
    return 2


def compute_news(v: VitalSigns) -> NewsResult:
    """Score one observation against the NEWS2 chart for its SpO2 scale."""
    scale2 = v.spo2_scale is SpO2Scale.SCALE2
    subscores = {
        "respiration": _score_respiration(v.respiration_rate),
        "spo2": _score_spo2_scale2(v.spo2, v.on_supplemental_oxygen)
        if scale2
        else _score_spo2_scale1(v.spo2),
        "oxygen": 2 if v.on_supplemental_oxygen else 0,
        "systolic_bp": _score_systolic_bp(v.systolic_bp),
        "heart_rate": _score_heart_rate(v.heart_rate),
        "consciousness": 0 if v.consciousness is Consciousness.ALERT else 3,
        "temperature": _score_temperature(v.temperature),
    }
    total = sum(subscores.values())
    if total >= 7:
        band = RiskBand.HIGH
    elif total >= 5:
        band = RiskBand.MEDIUM
    elif any(s == 3 for s in subscores.values()):
        band = RiskBand.LOW_MEDIUM
    else:
        band = RiskBand.LOW
    return NewsResult(subscores=subscores, total=total, band=band, scale_used=v.spo2_scale)


RECOMMENDATIONS = {
    RiskBand.LOW: "Continue routine monitoring per ward protocol.",
    RiskBand.LOW_MEDIUM: (
        "Single-parameter red flag: request urgent ward-based review by a clinician "
        "competent to decide on escalation."
    ),
    RiskBand.MEDIUM: (
        "Escalate to urgent clinical review and increase observation frequency to at "
        "least hourly."
    ),
    RiskBand.HIGH: (
        "Emergency threshold reached: continuous monitoring and immediate assessment "
        "by a team with critical-care competencies."
    ),
}


def evaluate_trend(series: Sequence[VitalSigns], case_id: str = "") -> list[MonitorAlert]:
    """One alert per strict band escalation between consecutive observations.

    De-escalations and steady states emit nothing. The recommendation text is a
    fixed template keyed by the new band.
    """
    if not series:
        raise EmptySeries("vitals series must contain at least one observation")
    alerts: list[MonitorAlert] = []
    previous = compute_news(series[0])
    for vitals in series[1:]:
        current = compute_news(vitals)
        if BAND_ORDER[current.band] > BAND_ORDER[previous.band]:
            alerts.append(
                MonitorAlert(
                    case_id=case_id,
                    at=vitals.timestamp.isoformat().replace("+00:00", "Z"),
                    previous_band=previous.band,
                    new_band=current.band,
                    news=current,
                    recommendation=RECOMMENDATIONS[current.band],
                )
            )
        previous = current
    return alerts
