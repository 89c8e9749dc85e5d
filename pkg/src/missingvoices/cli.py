"""Operator entry points.

serve    run the HTTP service (optionally against a scripted mock provider)
replay   run the pipeline offline over a transcript file and write artifacts
analyze  summarize a survey CSV

Exit codes are a stable contract for scripts: 0 success, 2 input error,
3 pipeline error, 4 provider error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from .domain import (
    ValidationError,
    validate_assembly_context,
)
from .gateway import (
    CompletionRequest,
    GatewayError,
    StructuredOutputFailed,
    gateway_from_env,
)
from .prompts import (
    MissingBinding,
    build_question_prompt,
    build_reflection_prompt,
    build_stakeholder_prompt,
)
from .survey import BadRow, load_csv, summarize_items
from .transcript import BadLine, Transcript

EXIT_INPUT_ERROR = 2
EXIT_PIPELINE_ERROR = 3
EXIT_PROVIDER_ERROR = 4

STAGES = ("all", "stakeholders", "reflection", "question")


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Deliberation assistant: missing-stakeholder personas on demand."""


@main.command()
@click.option("--port", type=int, default=lambda: int(os.environ.get("PORT", "8000")), help="Listen port.")
@click.option(
    "--data-dir",
    type=click.Path(path_type=Path),
    default=lambda: Path(os.environ.get("DATA_DIR", "./data")),
    help="Directory for session snapshots.",
)
@click.option(
    "--mock-script",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Run against a scripted mock provider instead of the live API.",
)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port: int, data_dir: Path, mock_script: Optional[Path], host: str) -> None:
    """Run the session service until interrupted."""
    import uvicorn

    from .api import create_app
    from .service import SessionService

    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        _fail(EXIT_INPUT_ERROR, f"data dir {data_dir} is not writable: {exc}")
    try:
        gateway, config = gateway_from_env(mock_script)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(EXIT_INPUT_ERROR, f"cannot load mock script: {exc}")
    service = SessionService(
        gateway,
        data_dir=data_dir,
        model=config.model,
        request_timeout=config.timeout,
    )
    ui_dir = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    app = create_app(service, ui_dir=ui_dir if ui_dir.is_dir() else None)
    click.echo(f"serving on http://{host}:{port} (data dir: {data_dir})")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        # Snapshots are written on every mutation; this is belt-and-braces
        # for a clean SIGINT shutdown.
        service.persist_all()


def _load_replay_inputs(transcript_path: Path, context_path: Path):
    try:
        transcript = Transcript.from_jsonl(transcript_path.read_text(encoding="utf-8"))
    except OSError as exc:
        _fail(EXIT_INPUT_ERROR, f"cannot read transcript: {exc}")
    except BadLine as exc:
        _fail(EXIT_INPUT_ERROR, f"transcript {transcript_path}: {exc}")
    try:
        raw_context = json.loads(context_path.read_text(encoding="utf-8"))
        context = validate_assembly_context(raw_context)
    except OSError as exc:
        _fail(EXIT_INPUT_ERROR, f"cannot read context: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_INPUT_ERROR, f"context {context_path} is not valid JSON: {exc}")
    except ValidationError as exc:
        _fail(EXIT_INPUT_ERROR, f"context {context_path}: {exc}")
    return transcript, context


def _write_artifact(out_dir: Path, name: str, payload) -> None:
    path = out_dir / name
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {path}")


def _read_artifact(out_dir: Path, name: str, exit_message: str):
    path = out_dir / name
    if not path.exists():
        _fail(EXIT_PIPELINE_ERROR, exit_message)
    return json.loads(path.read_text(encoding="utf-8"))


@main.command()
@click.argument("transcript_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("context_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--stage", type=click.Choice(STAGES), default="all", show_default=True)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("./replay-out"),
    show_default=True,
    help="Directory for stage artifacts.",
)
@click.option(
    "--mock-script",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Scripted mock provider; omit to use the live API from LLM_* env vars.",
)
@click.option("--window-chars", type=int, default=24000, show_default=True)
def replay(
    transcript_path: Path,
    context_path: Path,
    stage: str,
    out_dir: Path,
    mock_script: Optional[Path],
    window_chars: int,
) -> None:
    """Run pipeline stages over a recorded transcript and write JSON artifacts.

    Stages build on each other: reflection reads personas.json from --out,
    question reads personas.json and reflection.json. Persona ids are
    deterministic (s1..s3) so mock runs are byte-reproducible.
    """
    from .domain import (
        validate_persona,
        validate_question,
        validate_reflection,
        validate_stakeholder_batch,
    )

    transcript, context = _load_replay_inputs(transcript_path, context_path)
    try:
        gateway, config = gateway_from_env(mock_script)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(EXIT_INPUT_ERROR, f"cannot load mock script: {exc}")
    out_dir.mkdir(parents=True, exist_ok=True)
    window = transcript.window(window_chars)

    def request(prompt) -> CompletionRequest:
        return CompletionRequest(prompt=prompt, model=config.model, timeout=config.timeout)

    try:
        if stage in ("all", "stakeholders"):
            prompt = build_stakeholder_prompt(context, window)
            personas, result = gateway.complete_structured(request(prompt), validate_stakeholder_batch)
            for i, persona in enumerate(personas, start=1):
                persona.id = f"s{i}"
            click.echo(f"stakeholders: 3 personas in {result.attempts} attempt(s)")
            _write_artifact(out_dir, "personas.json", [p.to_dict() for p in personas])

        if stage in ("all", "reflection"):
            raw_personas = _read_artifact(
                out_dir, "personas.json", "reflection stage requires personas.json; run --stage stakeholders first"
            )
            persona = validate_persona(raw_personas[0])
            prompt = build_reflection_prompt(persona, context, window)
            reflection, result = gateway.complete_structured(
                request(prompt), lambda raw: validate_reflection(raw, persona.id)
            )
            click.echo(f"reflection: persona {persona.id} in {result.attempts} attempt(s)")
            _write_artifact(out_dir, "reflection.json", reflection.to_dict())

        if stage in ("all", "question"):
            raw_personas = _read_artifact(
                out_dir, "personas.json", "question stage requires personas.json; run --stage stakeholders first"
            )
            persona = validate_persona(raw_personas[0])
            raw_reflection = _read_artifact(
                out_dir,
                "reflection.json",
                f"ReflectionMissing: persona {persona.id} has no reflection.json; run --stage reflection first",
            )
            from .domain import StakeholderReflection

            reflection = StakeholderReflection.from_dict(raw_reflection)
            prompt = build_question_prompt(persona, reflection, context, window, [])
            question, result = gateway.complete_structured(
                request(prompt), lambda raw: validate_question(raw, context, persona.id)
            )
            click.echo(f"question: persona {persona.id} in {result.attempts} attempt(s)")
            _write_artifact(out_dir, "question.json", question.to_dict())
    except StructuredOutputFailed as exc:
        _fail(EXIT_PIPELINE_ERROR, str(exc))
    except (MissingBinding, ValidationError) as exc:
        _fail(EXIT_PIPELINE_ERROR, str(exc))
    except GatewayError as exc:
        _fail(EXIT_PROVIDER_ERROR, str(exc))


@main.command()
@click.argument("survey_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the JSON report here as well as printing the table.",
)
def analyze(survey_path: Path, out_path: Optional[Path]) -> None:
    """Summarize a Likert survey CSV (respondent_id,item_id,phase,value)."""
    try:
        responses = load_csv(survey_path)
    except BadRow as exc:
        _fail(EXIT_INPUT_ERROR, f"{survey_path}: {exc}")
    except OSError as exc:
        _fail(EXIT_INPUT_ERROR, f"cannot read survey: {exc}")
    report = summarize_items(responses)
    click.echo(report.to_table())
    if out_path is not None:
        out_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
