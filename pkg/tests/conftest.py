import copy
import json
import socket
import threading
import time
from contextlib import contextmanager
from pathlib import Path

import httpx
import pytest

from missingvoices.domain import (
    AssemblyContext,
    Demographics,
    ExpertProfile,
    PoliticalLeaning,
    StakeholderPersona,
    StakeholderReflection,
    SustainabilityInterest,
)
from missingvoices.gateway import Gateway, ScriptedProvider
from missingvoices.transcript import Transcript

FIXTURES = Path(__file__).parent / "fixtures"

# Reusable raw persona batch: 3 valid entries, first one Low interest.
VALID_BATCH = {
    "stakeholders": [
        {
            "name": "Marlene Kowalski",
            "description": "Supervises the campus heating plant; 23 years in facilities.",
            "demographics": {
                "age": 58,
                "gender": "Female",
                "income": "$62,000",
                "education": "High school diploma",
                "profession": "Facilities HVAC supervisor",
                "political_leaning": "Center",
                "sustainability_interest": "Low",
            },
        },
        {
            "name": "Hector Alvarez",
            "description": "Owns a small diner two blocks from the main gate.",
            "demographics": {
                "age": 47,
                "gender": "Male",
                "income": "$71,000",
                "education": "Associate degree",
                "profession": "Restaurant owner",
                "political_leaning": "Right",
                "sustainability_interest": "Medium",
            },
        },
        {
            "name": "Priya Natarajan",
            "description": "City transportation planner focused on transit access.",
            "demographics": {
                "age": 34,
                "gender": "Female",
                "income": "$88,000",
                "education": "Master of Urban Planning",
                "profession": "City transportation planner",
                "political_leaning": "Left",
                "sustainability_interest": "High",
            },
        },
    ]
}

VALID_REFLECTION = {
    "agree_explanation": " ".join(["agree"] * 60),
    "disagree_explanation": " ".join(["disagree"] * 60),
    "missing_perspectives": " ".join(["missing"] * 60),
}

VALID_QUESTION = {
    "question": "Who pays for retraining the facilities workforce?",
    "explanation": "Retrofit plans fail without operators who know the new systems.",
    "expert": "Dr. Amara Osei",
}


@pytest.fixture
def valid_batch_raw():
    return copy.deepcopy(VALID_BATCH)


@pytest.fixture
def valid_reflection_raw():
    return copy.deepcopy(VALID_REFLECTION)


@pytest.fixture
def valid_question_raw():
    return copy.deepcopy(VALID_QUESTION)


@pytest.fixture
def context():
    return AssemblyContext(
        theme="What should the university prioritize to reach net zero?",
        experts=[
            ExpertProfile(name="Dr. Amara Osei", expertise="renewable energy systems"),
            ExpertProfile(name="Prof. Daniel Reyes", expertise="environmental economics"),
        ],
        setting_note="breakout group of undergraduates",
    )


@pytest.fixture
def persona():
    return StakeholderPersona(
        id="p1",
        name="Marlene Kowalski",
        description="Supervises the campus heating plant; 23 years in facilities.",
        demographics=Demographics(
            age=58,
            gender="Female",
            income="$62,000",
            education="High school diploma",
            profession="Facilities HVAC supervisor",
            political_leaning=PoliticalLeaning.CENTER,
            sustainability_interest=SustainabilityInterest.LOW,
        ),
    )


@pytest.fixture
def reflection():
    return StakeholderReflection(
        persona_id="p1",
        agree_explanation=VALID_REFLECTION["agree_explanation"],
        disagree_explanation=VALID_REFLECTION["disagree_explanation"],
        missing_perspectives=VALID_REFLECTION["missing_perspectives"],
    )


@pytest.fixture
def fixture_transcript():
    return Transcript.from_jsonl((FIXTURES / "transcript.jsonl").read_text())


def scripted_gateway(responses=None, by_stage=None) -> Gateway:
    return Gateway(ScriptedProvider(responses=responses, by_stage=by_stage))


def stage_script(batch=None, reflection=None, question=None) -> dict:
    """Stage-keyed script from raw dicts (serialized as bare JSON)."""
    script = {}
    if batch is not None:
        script["stakeholder_generation"] = [json.dumps(b) if not isinstance(b, str) else b for b in batch]
    if reflection is not None:
        script["reflection"] = [json.dumps(r) if not isinstance(r, str) else r for r in reflection]
    if question is not None:
        script["question"] = [json.dumps(q) if not isinstance(q, str) else q for q in question]
    return script


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


@contextmanager
def run_server(app):
    """Run the app under a real uvicorn server in a background thread.

    TestClient cannot exercise long-lived event streams cleanly, so SSE and
    concurrency tests talk to an actual socket.
    """
    import uvicorn

    port = free_port()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    for _ in range(200):
        try:
            httpx.get(f"{base}/healthz", timeout=1.0)
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("server did not come up")
    try:
        yield base
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def read_sse_events(base: str, session_id: str, count: int, timeout: float = 10.0) -> list[dict]:
    """Collect the next `count` events from the session stream."""
    events: list[dict] = []
    with httpx.stream(
        "GET", f"{base}/sessions/{session_id}/events", timeout=timeout
    ) as response:
        for line in response.iter_lines():
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: ") :]))
                if len(events) >= count:
                    break
    return events


# -- acceptance reporting: one pass/fail line per criterion -----------------

_acceptance_results: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or item.fspath.basename != "test_acceptance.py":
        return
    label = (item.function.__doc__ or item.name).strip().splitlines()[0]
    _acceptance_results.append((item.name, label, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, label, outcome in _acceptance_results:
        terminalreporter.write_line(f"[{outcome:>6}] {label}")
