"""Domain types and schema validators for the persona pipeline.

Every value exchanged between the pipeline stages, the HTTP API, and the
snapshot files is defined here. The validate_* functions are the single
chokepoint between raw model output and typed domain values: they either
return a canonicalized value or raise a ValidationError that names every
violated field path, so the gateway can ask the model to repair exactly
those fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

logger = logging.getLogger(__name__)

AGE_MIN = 16
AGE_MAX = 100

# Soft band around the requested ~150 words per reflection section. Model
# length compliance is unreliable, so out-of-band lengths warn, never reject.
WORDS_SOFT_MIN = 30
WORDS_SOFT_MAX = 400

# Issue kinds carried by ValidationError.
MISSING_FIELD = "missing_field"
EMPTY_FIELD = "empty_field"
BAD_ENUM = "bad_enum"
BAD_RANGE = "bad_range"
WRONG_COUNT = "wrong_count"
LOW_INTEREST_MISSING = "low_interest_missing"


class PoliticalLeaning(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"
    CENTER = "Center"


class SustainabilityInterest(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


@dataclass(frozen=True)
class Issue:
    """One violated constraint, anchored to a concrete field path."""

    kind: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class ValidationError(Exception):
    """Raised when a raw value does not satisfy the schema.

    Carries every issue found in one pass so a corrective re-prompt can name
    all violated fields at once.
    """

    def __init__(self, issues: list[Issue]):
        if not issues:
            raise ValueError("ValidationError requires at least one issue")
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))

    @property
    def paths(self) -> list[str]:
        return [i.path for i in self.issues]


@dataclass
class ExpertProfile:
    """One member of the expert panel the session may direct questions at."""

    name: str
    expertise: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "expertise": self.expertise}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExpertProfile":
        return cls(name=raw["name"], expertise=raw.get("expertise", ""))


@dataclass
class AssemblyContext:
    """Deliberation theme, expert roster, and a blurb describing the setting."""

    theme: str
    experts: list[ExpertProfile] = field(default_factory=list)
    setting_note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "theme": self.theme,
            "experts": [e.to_dict() for e in self.experts],
            "setting_note": self.setting_note,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "AssemblyContext":
        return cls(
            theme=raw["theme"],
            experts=[ExpertProfile.from_dict(e) for e in raw.get("experts", [])],
            setting_note=raw.get("setting_note", ""),
        )


@dataclass
class Demographics:
    """Seven-field demographics block attached to every generated persona."""

    age: int
    gender: str
    income: str
    education: str
    profession: str
    political_leaning: PoliticalLeaning
    sustainability_interest: SustainabilityInterest

    def to_dict(self) -> dict[str, Any]:
        # Key order is part of the wire format (prompts pretty-print this).
        return {
            "age": self.age,
            "gender": self.gender,
            "income": self.income,
            "education": self.education,
            "profession": self.profession,
            "political_leaning": self.political_leaning.value,
            "sustainability_interest": self.sustainability_interest.value,
        }


@dataclass
class StakeholderPersona:
    """A generated stakeholder bio. The id is assigned by the service, never
    taken from model output."""

    name: str
    description: str
    demographics: Demographics
    id: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "demographics": self.demographics.to_dict(),
        }


@dataclass
class StakeholderReflection:
    """First-person reflection of one persona on the live discussion."""

    persona_id: Optional[str]
    agree_explanation: str
    disagree_explanation: str
    missing_perspectives: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "persona_id": self.persona_id,
            "agree_explanation": self.agree_explanation,
            "disagree_explanation": self.disagree_explanation,
            "missing_perspectives": self.missing_perspectives,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "StakeholderReflection":
        return cls(
            persona_id=raw.get("persona_id"),
            agree_explanation=raw["agree_explanation"],
            disagree_explanation=raw["disagree_explanation"],
            missing_perspectives=raw["missing_perspectives"],
        )


@dataclass
class StakeholderQuestion:
    """A persona-voiced question for the expert panel.

    persona_id is None for facilitator-entered questions. expert_resolved is
    False when the named expert did not match the session roster; the question
    is kept either way and the flag surfaces in the UI.
    """

    persona_id: Optional[str]
    question: str
    explanation: str = ""
    expert: str = ""
    expert_resolved: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "persona_id": self.persona_id,
            "question": self.question,
            "explanation": self.explanation,
            "expert": self.expert,
            "expert_resolved": self.expert_resolved,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "StakeholderQuestion":
        return cls(
            persona_id=raw.get("persona_id"),
            question=raw["question"],
            explanation=raw.get("explanation", ""),
            expert=raw.get("expert", ""),
            expert_resolved=raw.get("expert_resolved", True),
        )


def _canonicalize_enum(value: Any, enum_cls: type, path: str, issues: list[Issue]):
    """Case-insensitive enum intake, canonicalized to title case."""
    allowed = [e.value for e in enum_cls]
    if not isinstance(value, str):
        issues.append(
            Issue(BAD_ENUM, path, f"got {value!r}, allowed one of {allowed}")
        )
        return None
    for member in enum_cls:
        if value.strip().lower() == member.value.lower():
            return member
    issues.append(Issue(BAD_ENUM, path, f"got {value!r}, allowed one of {allowed}"))
    return None


def _coerce_age(value: Any, path: str, issues: list[Issue]) -> Optional[int]:
    age: Optional[int] = None
    if isinstance(value, bool):
        pass
    elif isinstance(value, int):
        age = value
    elif isinstance(value, float) and value.is_integer():
        age = int(value)
    elif isinstance(value, str):
        try:
            age = int(value.strip())
        except ValueError:
            age = None
    if age is None:
        issues.append(Issue(BAD_RANGE, path, f"age must be an integer, got {value!r}"))
        return None
    if not AGE_MIN <= age <= AGE_MAX:
        issues.append(
            Issue(BAD_RANGE, path, f"age {age} outside [{AGE_MIN}, {AGE_MAX}]")
        )
        return None
    return age


def _require_text(
    raw: dict[str, Any], key: str, path: str, issues: list[Issue]
) -> Optional[str]:
    if key not in raw or raw[key] is None:
        issues.append(Issue(MISSING_FIELD, path, "required field is missing"))
        return None
    value = raw[key]
    if not isinstance(value, str):
        # Lenient intake for free-text fields: models occasionally emit
        # numbers (e.g. income as 40000).
        value = str(value)
    if not value.strip():
        issues.append(Issue(EMPTY_FIELD, path, "field is empty"))
        return None
    return value


def _validate_demographics(
    raw: Any, path: str, issues: list[Issue]
) -> Optional[Demographics]:
    if not isinstance(raw, dict):
        issues.append(Issue(MISSING_FIELD, path, "demographics must be a JSON object"))
        return None
    before = len(issues)

    age = None
    if "age" not in raw or raw["age"] is None:
        issues.append(Issue(MISSING_FIELD, f"{path}.age", "required field is missing"))
    else:
        age = _coerce_age(raw["age"], f"{path}.age", issues)

    gender = _require_text(raw, "gender", f"{path}.gender", issues)
    income = _require_text(raw, "income", f"{path}.income", issues)
    education = _require_text(raw, "education", f"{path}.education", issues)
    profession = _require_text(raw, "profession", f"{path}.profession", issues)

    leaning = None
    if "political_leaning" not in raw or raw["political_leaning"] is None:
        issues.append(
            Issue(MISSING_FIELD, f"{path}.political_leaning", "required field is missing")
        )
    else:
        leaning = _canonicalize_enum(
            raw["political_leaning"], PoliticalLeaning, f"{path}.political_leaning", issues
        )

    interest = None
    if "sustainability_interest" not in raw or raw["sustainability_interest"] is None:
        issues.append(
            Issue(
                MISSING_FIELD,
                f"{path}.sustainability_interest",
                "required field is missing",
            )
        )
    else:
        interest = _canonicalize_enum(
            raw["sustainability_interest"],
            SustainabilityInterest,
            f"{path}.sustainability_interest",
            issues,
        )

    if len(issues) > before:
        return None
    assert age is not None and leaning is not None and interest is not None
    return Demographics(
        age=age,
        gender=gender or "",
        income=income or "",
        education=education or "",
        profession=profession or "",
        political_leaning=leaning,
        sustainability_interest=interest,
    )


def _collect_persona(raw: Any, path: str, issues: list[Issue]) -> Optional[StakeholderPersona]:
    if not isinstance(raw, dict):
        issues.append(Issue(MISSING_FIELD, path, "persona must be a JSON object"))
        return None
    before = len(issues)
    prefix = f"{path}." if path else ""
    name = _require_text(raw, "name", f"{prefix}name", issues)
    description = _require_text(raw, "description", f"{prefix}description", issues)
    if "demographics" not in raw or raw["demographics"] is None:
        issues.append(
            Issue(MISSING_FIELD, f"{prefix}demographics", "required field is missing")
        )
        demographics = None
    else:
        demographics = _validate_demographics(
            raw["demographics"], f"{prefix}demographics", issues
        )
    if len(issues) > before or demographics is None:
        return None
    persona_id = raw.get("id")
    return StakeholderPersona(
        name=name or "",
        description=description or "",
        demographics=demographics,
        id=persona_id if isinstance(persona_id, str) else None,
    )


def validate_persona(raw: Any) -> StakeholderPersona:
    """Validate and canonicalize a single persona object.

    Enum casing is normalized to title case and a numeric-string age is
    coerced. Raises ValidationError listing every violated field.
    """
    issues: list[Issue] = []
    persona = _collect_persona(raw, "", issues)
    if issues or persona is None:
        raise ValidationError(issues)
    return persona


def validate_stakeholder_batch(raw: Any) -> list[StakeholderPersona]:
    """Validate a generated batch: a "stakeholders" array of exactly 3 valid
    personas, at least one of which has low sustainability interest."""
    issues: list[Issue] = []
    if not isinstance(raw, dict) or "stakeholders" not in raw:
        raise ValidationError(
            [Issue(MISSING_FIELD, "stakeholders", "required field is missing")]
        )
    entries = raw["stakeholders"]
    if not isinstance(entries, list):
        raise ValidationError(
            [Issue(MISSING_FIELD, "stakeholders", "stakeholders must be an array")]
        )
    if len(entries) != 3:
        issues.append(
            Issue(WRONG_COUNT, "stakeholders", f"expected 3 stakeholders, got {len(entries)}")
        )
    personas: list[StakeholderPersona] = []
    for i, entry in enumerate(entries):
        persona = _collect_persona(entry, f"stakeholders[{i}]", issues)
        if persona is not None:
            personas.append(persona)
    if len(personas) == len(entries) and not any(
        p.demographics.sustainability_interest is SustainabilityInterest.LOW
        for p in personas
    ):
        issues.append(
            Issue(
                LOW_INTEREST_MISSING,
                "stakeholders",
                "at least one stakeholder must have Low sustainability_interest",
            )
        )
    if issues:
        raise ValidationError(issues)
    return personas


def _word_count(text: str) -> int:
    return len(text.split())


def validate_reflection(raw: Any, persona_id: Optional[str]) -> StakeholderReflection:
    """Validate a reflection object: all three sections present and non-empty.

    Section lengths far from the requested ~150 words log a warning but do
    not reject; models drift on length too often for a hard bound.
    """
    issues: list[Issue] = []
    if not isinstance(raw, dict):
        raise ValidationError(
            [Issue(MISSING_FIELD, "agree_explanation", "response is not a JSON object")]
        )
    texts: dict[str, str] = {}
    for key in ("agree_explanation", "disagree_explanation", "missing_perspectives"):
        value = _require_text(raw, key, key, issues)
        if value is not None:
            texts[key] = value
    if issues:
        raise ValidationError(issues)
    for key, value in texts.items():
        words = _word_count(value)
        if not WORDS_SOFT_MIN <= words <= WORDS_SOFT_MAX:
            logger.warning(
                "reflection %s is %d words, outside the expected [%d, %d] band",
                key,
                words,
                WORDS_SOFT_MIN,
                WORDS_SOFT_MAX,
            )
    return StakeholderReflection(
        persona_id=persona_id,
        agree_explanation=texts["agree_explanation"],
        disagree_explanation=texts["disagree_explanation"],
        missing_perspectives=texts["missing_perspectives"],
    )


def resolve_expert(name: str, context: AssemblyContext) -> tuple[str, bool]:
    """Case-insensitively match an expert name against the session roster.

    Returns the canonical roster spelling and True on a match, or the
    original name and False when unresolved.
    """
    for expert in context.experts:
        if expert.name.strip().lower() == name.strip().lower():
            return expert.name, True
    return name, False


def validate_question(
    raw: Any, context: AssemblyContext, persona_id: Optional[str]
) -> StakeholderQuestion:
    """Validate a generated question and resolve its target expert.

    An expert name that matches no roster entry is kept but flagged
    unresolved; facilitators may still use the question.
    """
    issues: list[Issue] = []
    if not isinstance(raw, dict):
        raise ValidationError(
            [Issue(MISSING_FIELD, "question", "response is not a JSON object")]
        )
    question = _require_text(raw, "question", "question", issues)
    explanation = _require_text(raw, "explanation", "explanation", issues)
    if "expert" not in raw or raw["expert"] is None:
        issues.append(Issue(MISSING_FIELD, "expert", "required field is missing"))
        expert_raw = ""
    else:
        expert_raw = str(raw["expert"])
    if issues:
        raise ValidationError(issues)
    expert, resolved = resolve_expert(expert_raw, context)
    if not resolved:
        logger.warning("question names expert %r not on the session roster", expert_raw)
    return StakeholderQuestion(
        persona_id=persona_id,
        question=question or "",
        explanation=explanation or "",
        expert=expert,
        expert_resolved=resolved,
    )


def validate_assembly_context(raw: Any) -> AssemblyContext:
    """Validate a session context: non-empty theme, unique expert names.

    An empty expert roster is allowed; question generation is simply
    unavailable until experts exist.
    """
    issues: list[Issue] = []
    if not isinstance(raw, dict):
        raise ValidationError([Issue(MISSING_FIELD, "theme", "context must be a JSON object")])
    theme = _require_text(raw, "theme", "theme", issues)
    experts: list[ExpertProfile] = []
    raw_experts = raw.get("experts", [])
    if not isinstance(raw_experts, list):
        issues.append(Issue(MISSING_FIELD, "experts", "experts must be an array"))
        raw_experts = []
    seen: set[str] = set()
    for i, entry in enumerate(raw_experts):
        if not isinstance(entry, dict):
            issues.append(Issue(MISSING_FIELD, f"experts[{i}]", "expert must be a JSON object"))
            continue
        name = _require_text(entry, "name", f"experts[{i}].name", issues)
        if name is None:
            continue
        key = name.strip().lower()
        if key in seen:
            issues.append(
                Issue(BAD_ENUM, f"experts[{i}].name", f"duplicate expert name {name!r}")
            )
            continue
        seen.add(key)
        expertise = entry.get("expertise", "")
        experts.append(ExpertProfile(name=name, expertise=str(expertise) if expertise else ""))
    if issues:
        raise ValidationError(issues)
    setting_note = raw.get("setting_note", "")
    return AssemblyContext(
        theme=theme or "",
        experts=experts,
        setting_note=str(setting_note) if setting_note else "",
    )
