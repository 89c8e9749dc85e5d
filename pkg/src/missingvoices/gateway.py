"""Provider-agnostic chat-completion gateway with structured-output enforcement.

Two providers ship: an OpenAI-compatible HTTP adapter (any base URL serving
the chat-completions wire shape) and a deterministic scripted mock for
offline runs and replay tests. complete_structured() is the pipeline's
workhorse: it loops completion -> JSON extraction -> schema validation, and
on a validation failure re-issues the request with a corrective message
naming the violated fields. Transport failures are never retried here.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Protocol

import httpx

from .domain import ValidationError
from .prompts import PromptPair, Stage

DEFAULT_MODEL = "gpt-4o"
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_OUTPUT_TOKENS = 2048
DEFAULT_TIMEOUT_SECS = 60.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 8

_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_-]+)?\s*\n?(.*?)```", re.DOTALL)


class GatewayError(Exception):
    """Base class for gateway failures."""


class CompletionTimeout(GatewayError):
    """The provider did not answer within the request timeout."""


class TransportError(GatewayError):
    """The provider was unreachable or the connection failed."""


class ProviderError(GatewayError):
    """The provider answered with an error status."""

    def __init__(self, status: int, body_excerpt: str):
        self.status = status
        self.body_excerpt = body_excerpt
        super().__init__(f"provider returned {status}: {body_excerpt}")


class ScriptExhausted(GatewayError):
    """The scripted mock ran out of queued responses."""


class NoJsonFound(GatewayError):
    """No parseable JSON object in the model output."""


class StructuredOutputFailed(GatewayError):
    """All attempts produced output that failed extraction or validation."""

    def __init__(self, last_error: Exception, attempts: int):
        self.last_error = last_error
        self.attempts = attempts
        super().__init__(f"no valid structured output after {attempts} attempts: {last_error}")


@dataclass
class CompletionRequest:
    prompt: PromptPair
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    timeout: float = DEFAULT_TIMEOUT_SECS

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class CompletionResult:
    raw_text: str
    attempts: int
    latency: float
    provider: str


class Provider(Protocol):
    name: str

    def send(self, messages: list[dict[str, str]], request: CompletionRequest) -> str:
        """Return raw completion text for an ordered message list."""
        ...


class ScriptedProvider:
    """Deterministic mock: pops responses from a queue, optionally per stage.

    Replaying the same script against the same requests yields identical
    results, which makes offline acceptance runs byte-reproducible.
    """

    name = "mock"

    def __init__(
        self,
        responses: Optional[list[str]] = None,
        by_stage: Optional[dict[str, list[str]]] = None,
    ):
        self._lock = threading.Lock()
        self._queue: list[str] = list(responses or [])
        self._by_stage: dict[str, list[str]] = {k: list(v) for k, v in (by_stage or {}).items()}
        self.calls: list[list[dict[str, str]]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        """Load a script: either a JSON array of responses or an object
        keyed by stage name ("stakeholder_generation", "reflection",
        "question"), each holding an array. String entries are used verbatim;
        object entries are serialized, which keeps fixtures readable."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))

        def coerce(entries: list[Any]) -> list[str]:
            return [e if isinstance(e, str) else json.dumps(e) for e in entries]

        if isinstance(raw, list):
            return cls(responses=coerce(raw))
        if isinstance(raw, dict):
            known = {stage.value for stage in Stage}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown stage keys in script: {sorted(unknown)}")
            return cls(by_stage={k: coerce(v) for k, v in raw.items()})
        raise ValueError("script must be a JSON array or a stage-keyed object")

    def send(self, messages: list[dict[str, str]], request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(messages)
            queue = self._by_stage.get(request.prompt.stage.value)
            if queue is None:
                queue = self._queue
            if not queue:
                raise ScriptExhausted(
                    f"no scripted response left for stage {request.prompt.stage.value!r}"
                )
            return queue.pop(0)


class OpenAIChatProvider:
    """Live adapter speaking the OpenAI-compatible chat-completions shape.

    Pointing base_url at any compatible server (and picking the model name)
    is how alternative model backends are selected; there is no per-provider
    code beyond this adapter.
    """

    name = "openai-compat"

    def __init__(self, base_url: str, api_key: str = ""):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key

    def send(self, messages: list[dict[str, str]], request: CompletionRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=request.timeout,
            )
        except httpx.TimeoutException as exc:
            raise CompletionTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code >= 400:
            raise ProviderError(response.status_code, response.text[:500])
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise ProviderError(response.status_code, response.text[:500]) from exc
        return content or ""


@dataclass
class GatewayConfig:
    """Environment-driven configuration for the live adapter."""

    api_key: str = ""
    base_url: str = "https://api.openai.com/v1"
    model: str = DEFAULT_MODEL
    timeout: float = DEFAULT_TIMEOUT_SECS

    @classmethod
    def from_env(cls, env: Optional[dict[str, str]] = None) -> "GatewayConfig":
        env = dict(os.environ) if env is None else env
        return cls(
            api_key=env.get("LLM_API_KEY", ""),
            base_url=env.get("LLM_BASE_URL", "https://api.openai.com/v1"),
            model=env.get("LLM_MODEL", DEFAULT_MODEL),
            timeout=float(env.get("LLM_TIMEOUT_SECS", str(DEFAULT_TIMEOUT_SECS))),
        )


def _balanced_object_spans(text: str):
    """Yield candidate top-level {...} spans, string- and escape-aware."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : i + 1]
                    break
        start = text.find("{", start + 1)


def extract_json(raw_text: str) -> dict[str, Any]:
    """Pull the first parseable JSON object out of model text.

    Handles bare JSON, markdown code fences, and prose-wrapped output via a
    balanced-brace scan. Anything concatenated after the first object is
    ignored. Raises NoJsonFound when nothing parses.
    """
    if raw_text:
        stripped = raw_text.strip()
        try:
            value = json.loads(stripped)
            if isinstance(value, dict):
                return value
        except json.JSONDecodeError:
            pass
        for block in _FENCE_RE.findall(raw_text):
            try:
                value = json.loads(block.strip())
                if isinstance(value, dict):
                    return value
            except json.JSONDecodeError:
                continue
        for candidate in _balanced_object_spans(raw_text):
            try:
                value = json.loads(candidate)
                if isinstance(value, dict):
                    return value
            except json.JSONDecodeError:
                continue
    raise NoJsonFound("no parseable JSON object in model output")


def _corrective_message(error: Exception) -> str:
    if isinstance(error, ValidationError):
        problems = "\n".join(f"- {issue.path}: {issue.message}" for issue in error.issues)
        return (
            "The previous response did not match the required schema. "
            "Problems found:\n"
            f"{problems}\n"
            "Respond again with only a corrected JSON object and no other text."
        )
    return (
        "The previous response did not contain a parseable JSON object. "
        "Respond again with only the JSON object and no other text."
    )


class Gateway:
    """Shared completion front-end. Safe to use from many threads; the number
    of in-flight provider calls is bounded."""

    def __init__(self, provider: Provider, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.provider = provider
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _send(self, messages: list[dict[str, str]], request: CompletionRequest) -> str:
        with self._slots:
            return self.provider.send(messages, request)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        """One raw completion: system and user messages sent in order."""
        messages = [
            {"role": "system", "content": request.prompt.system},
            {"role": "user", "content": request.prompt.user},
        ]
        started = time.monotonic()
        raw = self._send(messages, request)
        return CompletionResult(
            raw_text=raw,
            attempts=1,
            latency=time.monotonic() - started,
            provider=self.provider.name,
        )

    def complete_structured(
        self,
        request: CompletionRequest,
        validator: Callable[[Any], Any],
        max_retries: int = DEFAULT_MAX_RETRIES,
    ) -> tuple[Any, CompletionResult]:
        """Loop complete -> extract_json -> validator until a value passes.

        Each validation failure appends the bad output plus a corrective user
        message naming the violated fields, then retries, up to max_retries
        extra attempts. Transport-level errors propagate immediately and are
        never answered with corrective messages.
        """
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        messages = [
            {"role": "system", "content": request.prompt.system},
            {"role": "user", "content": request.prompt.user},
        ]
        started = time.monotonic()
        last_error: Optional[Exception] = None
        raw = ""
        for attempt in range(1, max_retries + 2):
            raw = self._send(messages, request)
            try:
                value = validator(extract_json(raw))
            except (NoJsonFound, ValidationError) as exc:
                last_error = exc
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": _corrective_message(exc)},
                ]
                continue
            result = CompletionResult(
                raw_text=raw,
                attempts=attempt,
                latency=time.monotonic() - started,
                provider=self.provider.name,
            )
            return value, result
        assert last_error is not None
        raise StructuredOutputFailed(last_error, max_retries + 1)


def gateway_from_env(
    mock_script: Optional[str | Path] = None,
    config: Optional[GatewayConfig] = None,
) -> tuple[Gateway, GatewayConfig]:
    """Build a gateway: scripted mock when a script path is given, otherwise
    the live adapter configured from LLM_* environment variables."""
    config = config or GatewayConfig.from_env()
    if mock_script is not None:
        provider: Provider = ScriptedProvider.from_file(mock_script)
    else:
        provider = OpenAIChatProvider(base_url=config.base_url, api_key=config.api_key)
    return Gateway(provider), config
