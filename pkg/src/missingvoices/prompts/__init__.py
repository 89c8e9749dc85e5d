"""Prompt rendering for the three pipeline stages.

The system/user texts live as frozen template assets under templates/ with
{UPPER_CASE} placeholder markers. Rendering substitutes bindings in a single
pass over the template and records the output span of every substitution, so
tests can prove the surrounding template text survives byte-for-byte and that
binding values are never escaped or truncated here (transcript windowing
happens upstream).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

from ..domain import (
    AssemblyContext,
    Demographics,
    StakeholderPersona,
    StakeholderReflection,
)

_PLACEHOLDER_RE = re.compile(r"\{([A-Z][A-Z0-9_]*)\}")

EMPTY_QUESTIONS_PLACEHOLDER = "(none yet)"


class Stage(str, Enum):
    STAKEHOLDER_GENERATION = "stakeholder_generation"
    REFLECTION = "reflection"
    QUESTION = "question"


class MissingBinding(Exception):
    """A template placeholder has no binding value."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing binding for placeholder {{{name}}}")


@dataclass(frozen=True)
class Span:
    """Half-open [start, end) range of one substituted binding in the output."""

    start: int
    end: int
    name: str


@dataclass
class PromptPair:
    """Rendered system + user prompt for one pipeline stage."""

    system: str
    user: str
    stage: Stage
    system_spans: tuple[Span, ...] = field(default=())
    user_spans: tuple[Span, ...] = field(default=())


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Load a raw template asset (e.g. "stakeholders_user")."""
    return (
        resources.files("missingvoices.prompts")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


def render_template(template: str, bindings: dict[str, str]) -> tuple[str, tuple[Span, ...]]:
    """Substitute placeholders in one pass, returning text plus spans.

    Binding values are inserted verbatim; a value that itself contains a
    placeholder-shaped token is not re-substituted. Raises MissingBinding for
    any template placeholder absent from bindings, so no marker ever leaks
    into a prompt.
    """
    out: list[str] = []
    spans: list[Span] = []
    pos = 0
    length = 0
    for match in _PLACEHOLDER_RE.finditer(template):
        name = match.group(1)
        if name not in bindings or bindings[name] is None:
            raise MissingBinding(name)
        literal = template[pos : match.start()]
        out.append(literal)
        length += len(literal)
        value = bindings[name]
        out.append(value)
        spans.append(Span(length, length + len(value), name))
        length += len(value)
        pos = match.end()
    out.append(template[pos:])
    return "".join(out), tuple(spans)


def demographics_json(demographics: Demographics) -> str:
    """Pretty-print demographics with 2-space indent and fixed key order, so
    prompts are byte-stable across runs."""
    return json.dumps(demographics.to_dict(), indent=2)


def experts_text(context: AssemblyContext) -> str:
    parts = []
    for expert in context.experts:
        if expert.expertise:
            parts.append(f"{expert.name} ({expert.expertise})")
        else:
            parts.append(expert.name)
    return ", ".join(parts)


def questions_text(current_questions: list[str]) -> str:
    if not current_questions:
        return EMPTY_QUESTIONS_PLACEHOLDER
    return "\n".join(f"{i}. {q}" for i, q in enumerate(current_questions, start=1))


def reflection_text(reflection: StakeholderReflection) -> str:
    return (
        "Stakeholder Reflection:\n"
        f"Agrees with: {reflection.agree_explanation}\n"
        f"Disagrees with: {reflection.disagree_explanation}\n"
        f"Missing perspectives: {reflection.missing_perspectives}"
    )


def build_stakeholder_prompt(context: AssemblyContext, transcript_text: str) -> PromptPair:
    """Render the stakeholder-generation prompt pair.

    transcript_text may be empty (pre-discussion generation); the transcript
    section simply renders empty.
    """
    if not context.theme.strip():
        raise MissingBinding("THEME")
    system, system_spans = render_template(load_template("stakeholders_system"), {})
    user, user_spans = render_template(
        load_template("stakeholders_user"),
        {"THEME": context.theme, "TRANSCRIPT": transcript_text},
    )
    return PromptPair(
        system=system,
        user=user,
        stage=Stage.STAKEHOLDER_GENERATION,
        system_spans=system_spans,
        user_spans=user_spans,
    )


def build_reflection_prompt(
    persona: StakeholderPersona, context: AssemblyContext, transcript_text: str
) -> PromptPair:
    """Render the reflection prompt pair for one persona."""
    system, system_spans = render_template(load_template("reflection_system"), {})
    user, user_spans = render_template(
        load_template("reflection_user"),
        {
            "PERSONA_NAME": persona.name,
            "PERSONA_DESCRIPTION": persona.description,
            "DEMOGRAPHICS_JSON": demographics_json(persona.demographics),
            "TRANSCRIPT": transcript_text,
            "POLITICAL_LEANING": persona.demographics.political_leaning.value,
            "SUSTAINABILITY_INTEREST": persona.demographics.sustainability_interest.value,
        },
    )
    return PromptPair(
        system=system,
        user=user,
        stage=Stage.REFLECTION,
        system_spans=system_spans,
        user_spans=user_spans,
    )


def build_question_prompt(
    persona: StakeholderPersona,
    reflection: StakeholderReflection,
    context: AssemblyContext,
    transcript_text: str,
    current_questions: list[str],
) -> PromptPair:
    """Render the question prompt pair for one persona and its reflection."""
    if not context.experts:
        raise MissingBinding("EXPERTS")
    system, system_spans = render_template(load_template("question_system"), {})
    user, user_spans = render_template(
        load_template("question_user"),
        {
            "PERSONA_NAME": persona.name,
            "PERSONA_DESCRIPTION": persona.description,
            "DEMOGRAPHICS_JSON": demographics_json(persona.demographics),
            "REFLECTION_TEXT": reflection_text(reflection),
            "TRANSCRIPT": transcript_text,
            "CURRENT_QUESTIONS": questions_text(current_questions),
            "EXPERTS": experts_text(context),
        },
    )
    return PromptPair(
        system=system,
        user=user,
        stage=Stage.QUESTION,
        system_spans=system_spans,
        user_spans=user_spans,
    )
