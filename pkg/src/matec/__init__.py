"""matec: multi-agent team-care engine for sepsis consultations."""

__version__ = "0.1.0"
