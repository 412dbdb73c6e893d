"""Uniform interface to the frozen generative model.

Three interchangeable backends sit behind ``generate``:

* SCRIPTED — a pure function of the prompt text, driven by marker rules or a
  user-supplied callable. Used for tests and policy training.
* REPLAY — content-addressed cache of recorded completions, keyed by the
  SHA-256 of prompt text plus model name. Reproducible CI without network.
* REMOTE — OpenAI-style chat-completions endpoint with retry/backoff and a
  bound on in-flight requests.

``extract_code`` turns a raw completion into candidate source by stripping
prose and code fences.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from .tasks import Prompt
from .verifier import CandidateSource

API_KEY_ENV = "P2S_API_KEY"


class GatewayError(Exception):
    pass


class BackendUnavailable(GatewayError):
    """Remote backend failed after exhausting its retry budget."""


class ReplayMiss(GatewayError):
    def __init__(self, key: str):
        super().__init__(f"no recorded completion for key {key}")
        self.key = key


class GatewayTimeout(GatewayError):
    pass


class BackendKind(Enum):
    SCRIPTED = "scripted"
    REPLAY = "replay"
    REMOTE = "remote"


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind
    endpoint: str | None = None
    model_name: str | None = None
    max_tokens: int = 2048
    temperature: float = 0.2
    timeout_s: int = 120
    max_retries: int = 2
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind is BackendKind.REMOTE and (not self.endpoint or not self.model_name):
            raise ValueError("REMOTE backend requires endpoint and model_name")
        if self.max_tokens <= 0 or self.timeout_s <= 0:
            raise ValueError("max_tokens and timeout_s must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class Completion:
    raw_text: str
    backend_id: str
    latency_ms: int = 0
    truncated: bool = False


@dataclass(frozen=True)
class ScriptedRule:
    """Emit ``response`` when ``marker`` occurs in the prompt text."""

    marker: str
    response: str


class ScriptedBackend:
    """Deterministic backend: completion is a pure function of prompt text.

    ``script`` is either a list of ScriptedRule (first matching marker wins,
    ``default`` returned when none match) or a callable mapping prompt text
    to completion text.
    """

    def __init__(
        self,
        script: list[ScriptedRule] | Callable[[str], str],
        default: str = "",
        backend_id: str = "scripted",
    ):
        self._script = script
        self._default = default
        self.backend_id = backend_id

    def generate(self, prompt: Prompt) -> Completion:
        if not prompt.text:
            raise GatewayError("prompt text is empty")
        if callable(self._script):
            text = self._script(prompt.text)
        else:
            text = self._default
            for rule in self._script:
                if rule.marker in prompt.text:
                    text = rule.response
                    break
        return Completion(raw_text=text, backend_id=self.backend_id, latency_ms=0)


def replay_key(prompt_text: str, model_name: str | None) -> str:
    """Cache key: SHA-256 over prompt text plus model name."""
    payload = prompt_text + (model_name or "")
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayBackend:
    """Serves completions recorded under ``<store>/<sha256>.json``."""

    def __init__(self, store: str | Path, model_name: str | None = None):
        self._store = Path(store)
        self._model_name = model_name
        self.backend_id = "replay"

    def _path(self, key: str) -> Path:
        return self._store / f"{key}.json"

    def store(self, prompt: Prompt, completion: Completion) -> Path:
        """Record a completion so later generate calls replay it."""
        key = replay_key(prompt.text, self._model_name)
        self._store.mkdir(parents=True, exist_ok=True)
        path = self._path(key)
        path.write_text(
            json.dumps({"prompt_sha": key, "completion": completion.raw_text}, indent=2),
            encoding="utf-8",
        )
        return path

    def generate(self, prompt: Prompt) -> Completion:
        if not prompt.text:
            raise GatewayError("prompt text is empty")
        key = replay_key(prompt.text, self._model_name)
        path = self._path(key)
        if not path.is_file():
            raise ReplayMiss(key)
        data = json.loads(path.read_text(encoding="utf-8"))
        return Completion(raw_text=data["completion"], backend_id=self.backend_id, latency_ms=0)


class RemoteBackend:
    """OpenAI-style chat-completions client.

    Request body: ``{"model": …, "messages": [{"role": "user", "content":
    …}], "max_tokens": N, "temperature": T}``; the completion is read from
    ``choices[0].message.content``. Transient failures (connection errors,
    HTTP 429/5xx) are retried with exponential backoff up to
    ``cfg.max_retries`` times; a bearer token is taken from $P2S_API_KEY.
    """

    def __init__(self, cfg: BackendConfig, backoff_s: float = 0.5, session=None):
        if cfg.kind is not BackendKind.REMOTE:
            raise ValueError("RemoteBackend requires a REMOTE config")
        import requests

        self._cfg = cfg
        self._backoff_s = backoff_s
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self.backend_id = f"remote:{cfg.model_name}"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(self, prompt: Prompt) -> Completion:
        import requests

        if not prompt.text:
            raise GatewayError("prompt text is empty")
        cfg = self._cfg
        body = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
            "max_tokens": cfg.max_tokens,
            "temperature": cfg.temperature,
        }
        attempts = cfg.max_retries + 1
        last_error: Exception | None = None
        timed_out = False
        started = time.monotonic()
        for attempt in range(attempts):
            if attempt:
                time.sleep(self._backoff_s * (2 ** (attempt - 1)))
            try:
                with self._slots:
                    resp = self._session.post(
                        cfg.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=cfg.timeout_s,
                    )
            except requests.Timeout as exc:
                last_error, timed_out = exc, True
                continue
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = GatewayError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            payload = resp.json()
            try:
                content = payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed response: {exc}") from exc
            finish = payload.get("choices", [{}])[0].get("finish_reason")
            latency = int((time.monotonic() - started) * 1000)
            return Completion(
                raw_text=content,
                backend_id=self.backend_id,
                latency_ms=latency,
                truncated=finish == "length",
            )
        if timed_out:
            raise GatewayTimeout(f"remote backend timed out after {attempts} attempts") from last_error
        raise BackendUnavailable(
            f"remote backend unavailable after {attempts} attempts: {last_error}"
        ) from last_error


def make_backend(cfg: BackendConfig, **kwargs):
    """Instantiate the backend named by ``cfg.kind``.

    SCRIPTED expects ``script`` (and optional ``default``) in kwargs; REPLAY
    expects ``store``.
    """
    if cfg.kind is BackendKind.SCRIPTED:
        return ScriptedBackend(kwargs["script"], default=kwargs.get("default", ""))
    if cfg.kind is BackendKind.REPLAY:
        return ReplayBackend(kwargs["store"], model_name=cfg.model_name)
    return RemoteBackend(cfg, **kwargs)


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.DOTALL)


def extract_code(completion: Completion) -> CandidateSource:
    """Extract candidate source from a completion.

    First fenced code block wins when fences exist; otherwise the whole
    trimmed text. A completion with no non-whitespace content yields the
    explicit EMPTY source — a value, not an error, because the reward
    function must see empty outputs.
    """
    m = _FENCE_RE.search(completion.raw_text)
    if m:
        text = m.group(1)
    else:
        # No parseable fence block; drop any stray fence delimiters so the
        # extracted source never carries them.
        text = completion.raw_text.replace("```", "")
    text = text.strip("\n").strip()
    if not text:
        return CandidateSource(text="", is_empty=True)
    return CandidateSource(text=text, is_empty=False)
