"""Command-line entry points: serve, ingest, stats, demo."""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from .config import ConfigError, ServiceConfig, load_config
from .domain import (
    AgentRole,
    ConsultationMode,
    PatientCase,
    case_from_interchange,
    to_interchange,
)
from .gateway import Fault, FaultKind, MockBackend, default_script
from .orchestrator import Orchestrator, PipelineConfig, SequentialIds
from .rag import RagStore
from .registry import default_registry
from .stats import format_survey_table, summarize_survey

# Fixed instant so demo transcripts are reproducible byte for byte.
_DEMO_CLOCK = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


@click.group()
def main() -> None:
    """Multi-agent team-care consultation engine."""


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="service config file (JSON); defaults apply when omitted",
)
def serve(config_path: Optional[str]) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(Path(config_path)) if config_path else ServiceConfig()
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(config, start_monitor=True)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--doc-id", default=None, help="document id; defaults to the file stem")
@click.option("--title", default=None, help="document title; defaults to the file stem")
@click.option("--store-dir", default="matec-store", show_default=True)
@click.option("--chunk-size", default=1000, show_default=True)
@click.option("--overlap", default=200, show_default=True)
def ingest(
    file: str,
    doc_id: Optional[str],
    title: Optional[str],
    store_dir: str,
    chunk_size: int,
    overlap: int,
) -> None:
    """Chunk and embed a reference document into the retrieval store."""
    path = Path(file)
    store = RagStore(path=Path(store_dir) / "corpus.rag")
    try:
        chunks = store.ingest(
            doc_id or path.stem,
            title or path.stem,
            path.read_text(),
            chunk_size_chars=chunk_size,
            overlap_chars=overlap,
        )
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{doc_id or path.stem}: {chunks} chunks ({len(store)} total in store)")


@main.command()
@click.option(
    "--input",
    "input_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="CSV of question,rating rows",
)
def stats(input_path: str) -> None:
    """Summarize survey ratings: median, distribution, and signed-rank test."""
    responses: dict[str, list[int]] = {}
    with open(input_path, newline="") as handle:
        for row in csv.reader(handle):
            if not row or len(row) < 2:
                continue
            question, rating = row[0].strip(), row[1].strip()
            if not rating.lstrip("-").isdigit():
                continue  # header or stray line
            responses.setdefault(question, []).append(int(rating))
    if not responses:
        raise click.ClickException("no (question, rating) rows found")
    try:
        click.echo(format_survey_table(summarize_survey(responses)))
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc


def _load_fixture(name: str) -> PatientCase:
    ref = resources.files("matec") / "fixtures" / f"{name}.json"
    if not ref.is_file():
        available = sorted(
            p.name.removesuffix(".json")
            for p in (resources.files("matec") / "fixtures").iterdir()
            if p.name.endswith(".json")
        )
        raise click.ClickException(f"no fixture named {name!r}; available: {', '.join(available)}")
    return case_from_interchange(json.loads(ref.read_text()))


def _parse_role(value: str) -> AgentRole:
    try:
        return AgentRole.model_validate(value)
    except Exception as exc:
        raise click.ClickException(f"unknown role {value!r}") from exc


@main.command()
@click.option("--case", "case_name", required=True, help="bundled fixture name, e.g. endocarditis")
@click.option("--seed", default=0, show_default=True, help="mock backend seed")
@click.option("--timeout-role", default=None, help="make one role time out, e.g. hospitalist")
@click.option(
    "--fabricate",
    default=None,
    help="inject a fabricated claim value as role:field:delta, e.g. infectious_disease:heart_rate:40",
)
def demo(
    case_name: str,
    seed: int,
    timeout_role: Optional[str],
    fabricate: Optional[str],
) -> None:
    """Run one mock consultation and print the transcript as JSON."""
    if timeout_role and fabricate:
        raise click.ClickException("choose one of --timeout-role / --fabricate")
    case = _load_fixture(case_name)
    fault: Optional[Fault] = None
    if timeout_role:
        fault = Fault(kind=FaultKind.TIMEOUT, target_role=_parse_role(timeout_role))
    if fabricate:
        parts = fabricate.split(":")
        if len(parts) != 3:
            raise click.ClickException("--fabricate expects role:field:delta")
        try:
            delta = float(parts[2])
        except ValueError:
            raise click.ClickException(f"bad delta {parts[2]!r}") from None
        fault = Fault(
            kind=FaultKind.FABRICATE_VALUE,
            target_role=_parse_role(parts[0]),
            field=parts[1],
            delta=delta,
        )
    registry = default_registry()
    orchestrator = Orchestrator(
        registry=registry,
        backend=MockBackend(script=default_script(fault), seed=seed),
        config=PipelineConfig(),
        clock=lambda: _DEMO_CLOCK,
        id_factory=SequentialIds("demo"),
    )
    question = registry.instantiate_template(ConsultationMode.TEAM_ASSESSMENT, case)
    transcript = orchestrator.run_consultation(case, question, ConsultationMode.TEAM_ASSESSMENT)
    click.echo(json.dumps(to_interchange(transcript), sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
