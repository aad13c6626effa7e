"""Text-generation backends: a minimal HTTP completion client and a scripted mock.

The wire protocol is a single JSON POST:

    request:  {"model", "prompt", "top_k", "top_p", "max_new_tokens", "temperature"}
    response: {"text": "<continuation>"}

An API credential, when present in the ``EVENTDISTILL_API_KEY`` environment
variable, is sent as a bearer header. Transport retries (network faults,
timeouts, HTTP errors) are separate from the generation loop's semantic
retries and use exponential backoff.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from .prompts import PromptText, final_question

logger = logging.getLogger(__name__)

API_KEY_ENV = "EVENTDISTILL_API_KEY"

VERDICT_YES = "yes"
VERDICT_NO = "no"
VERDICT_UNPARSEABLE = "unparseable"


class BackendError(Exception):
    """Base class for completion-backend failures."""


class TransportError(BackendError):
    """The request could not be completed after transport retries."""


class BackendTimeout(TransportError):
    """The endpoint did not answer within the configured timeout."""


class MalformedResponseError(BackendError):
    """The endpoint answered, but not with the expected JSON shape."""


class ScriptExhaustedError(BackendError):
    """A scripted backend ran out of (or never had) a response for this call."""


@dataclass(frozen=True)
class SamplingParams:
    """Decoding parameters forwarded verbatim to the backend."""

    top_k: int = 50
    top_p: float = 0.95
    max_new_tokens: int = 32
    temperature: float = 1.0

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be a positive integer")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be a positive integer")
        if self.temperature < 0.0:
            raise ValueError("temperature must be non-negative")

    def as_dict(self) -> dict:
        return {
            "top_k": self.top_k,
            "top_p": self.top_p,
            "max_new_tokens": self.max_new_tokens,
            "temperature": self.temperature,
        }


@dataclass
class BackendConfig:
    """Configuration for either backend kind.

    ``kind`` is "http" (requires ``endpoint_url``) or "scripted" (requires
    ``script``: a response list consumed in order, or a final-question ->
    response mapping).
    """

    kind: str
    endpoint_url: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries_transport: int = 2
    transport_backoff: float = 0.5
    script: list[str] | dict[str, str] | None = None
    transcript_path: str = ""

    def __post_init__(self):
        if self.kind not in ("http", "scripted"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint_url:
            raise ValueError("http backend requires endpoint_url")
        if self.kind == "scripted" and self.script is None:
            raise ValueError("scripted backend requires a script")


@dataclass(frozen=True)
class Completion:
    """One generated continuation (prompt echo already stripped)."""

    text: str
    latency_ms: float
    backend_id: str


class _TranscriptWriter:
    """Appends one JSON record per completion; replayable via script_from_transcript."""

    def __init__(self, path: str):
        self._path = path
        self._lock = threading.Lock()

    def record(self, prompt: PromptText, completion: Completion) -> None:
        row = {
            "prompt": prompt.text,
            "text": completion.text,
            "latency_ms": completion.latency_ms,
            "backend_id": completion.backend_id,
        }
        line = json.dumps(row, ensure_ascii=False) + "\n"
        with self._lock, open(self._path, "a", encoding="utf-8") as fh:
            fh.write(line)


def script_from_transcript(path: str) -> list[str]:
    """Response texts of a logged transcript, in call order, for scripted replay."""
    responses = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                responses.append(json.loads(line)["text"])
    return responses


class ScriptedBackend:
    """Deterministic mock: replays a response list, or maps final questions to responses.

    Calls are serialized internally so list consumption has a total order even
    under concurrent use.
    """

    def __init__(self, cfg: BackendConfig):
        if cfg.kind != "scripted":
            raise ValueError("ScriptedBackend requires kind='scripted'")
        self._cfg = cfg
        self._lock = threading.Lock()
        self._cursor = 0
        self.backend_id = cfg.model_name or "scripted"
        self._transcript = _TranscriptWriter(cfg.transcript_path) if cfg.transcript_path else None

    def complete(self, prompt: PromptText, params: SamplingParams) -> Completion:
        script = self._cfg.script
        with self._lock:
            if isinstance(script, dict):
                question = final_question(prompt.text)
                if question not in script:
                    raise ScriptExhaustedError(
                        f"no scripted response for question {question!r}"
                    )
                text = script[question]
            else:
                if self._cursor >= len(script):
                    raise ScriptExhaustedError(
                        f"script exhausted after {self._cursor} response(s)"
                    )
                text = script[self._cursor]
                self._cursor += 1
        completion = Completion(text=text, latency_ms=0.0, backend_id=self.backend_id)
        if self._transcript is not None:
            self._transcript.record(prompt, completion)
        return completion


class HttpBackend:
    """Thin client for the JSON completion protocol described in the module docstring."""

    def __init__(self, cfg: BackendConfig, sleep=time.sleep):
        if cfg.kind != "http":
            raise ValueError("HttpBackend requires kind='http'")
        self._cfg = cfg
        self._sleep = sleep
        self.backend_id = cfg.model_name or cfg.endpoint_url
        self._transcript = _TranscriptWriter(cfg.transcript_path) if cfg.transcript_path else None

    def _request(self, body: bytes) -> dict:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(
            self._cfg.endpoint_url, data=body, headers=headers, method="POST"
        )
        with urllib.request.urlopen(request, timeout=self._cfg.timeout) as response:
            payload = response.read()
        try:
            decoded = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedResponseError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(decoded, dict) or not isinstance(decoded.get("text"), str):
            raise MalformedResponseError("response JSON must carry a string 'text' field")
        return decoded

    def complete(self, prompt: PromptText, params: SamplingParams) -> Completion:
        body = json.dumps(
            {"model": self._cfg.model_name, "prompt": prompt.text, **params.as_dict()}
        ).encode("utf-8")
        attempts = self._cfg.max_retries_transport + 1
        last_error: Exception | None = None
        started = time.perf_counter()
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._cfg.transport_backoff * 2 ** (attempt - 1))
            try:
                decoded = self._request(body)
            except MalformedResponseError:
                raise
            except TimeoutError as exc:
                last_error = exc
                logger.warning("backend timeout (attempt %d/%d)", attempt + 1, attempts)
                continue
            except (urllib.error.URLError, OSError) as exc:
                if isinstance(getattr(exc, "reason", None), TimeoutError):
                    last_error = exc
                    logger.warning("backend timeout (attempt %d/%d)", attempt + 1, attempts)
                    continue
                last_error = exc
                logger.warning(
                    "backend transport error (attempt %d/%d): %s", attempt + 1, attempts, exc
                )
                continue
            latency_ms = (time.perf_counter() - started) * 1000.0
            text = decoded["text"]
            if text.startswith(prompt.text):
                text = text[len(prompt.text) :]
            completion = Completion(
                text=text, latency_ms=latency_ms, backend_id=self.backend_id
            )
            if self._transcript is not None:
                self._transcript.record(prompt, completion)
            return completion
        if isinstance(last_error, TimeoutError) or isinstance(
            getattr(last_error, "reason", None), TimeoutError
        ):
            raise BackendTimeout(f"no response within {self._cfg.timeout}s") from last_error
        raise TransportError(f"transport failed after {attempts} attempt(s): {last_error}")


def make_backend(cfg: BackendConfig, sleep=time.sleep):
    """Instantiate the backend described by ``cfg``."""
    if cfg.kind == "scripted":
        return ScriptedBackend(cfg)
    return HttpBackend(cfg, sleep=sleep)


def parse_yes_no(completion: Completion) -> tuple[str, str]:
    """Classify a judging response as yes/no/unparseable plus its justification.

    The first alphabetic token decides the verdict (case-insensitive); the
    justification is whatever follows the first period.
    """
    text = completion.text.strip()
    token = ""
    for ch in text:
        if ch.isalpha():
            token += ch
        elif token:
            break
    verdict = token.lower()
    if verdict not in (VERDICT_YES, VERDICT_NO):
        return VERDICT_UNPARSEABLE, text
    if "." in text:
        justification = text.split(".", 1)[1].strip()
    else:
        justification = text[len(token) :].strip(" .,:;!-\t")
    return verdict, justification
