"""Chat-completion access: live HTTP, mock, and record/replay providers.

Requests are fingerprinted by a stable hash so a cassette recorded once can
answer the same prompts forever; acceptance runs use replay + temperature 0
and never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import requests

from .errors import CassetteMissError, GatewayError, InputError, ProviderError

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
RETRY_MAX_ATTEMPTS = 5
RETRY_JITTER = 0.2  # uniform +/-20%
DEFAULT_TIMEOUT_SECONDS = 60.0


@dataclass(frozen=True)
class ChatRequest:
    user_text: str
    system_text: str = ""
    temperature: float = 0.0
    max_tokens: int = 512
    model_id: str = "offline-fixture"

    def __post_init__(self):
        if not self.user_text:
            raise InputError("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InputError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise InputError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    provider_id: str = "mock"


def fingerprint(request: ChatRequest) -> str:
    """Stable across processes: sha256 over the canonical request fields."""
    payload = json.dumps(
        {
            "model_id": request.model_id,
            "system_text": request.system_text,
            "user_text": request.user_text,
            "temperature": float(request.temperature),
        },
        sort_keys=True,
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Cassette:
    """Map request-fingerprint -> ChatResponse, stored as JSON Lines."""

    def __init__(self):
        self.entries: dict[str, ChatResponse] = {}
        self._requests: dict[str, dict] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def put(self, request: ChatRequest, response: ChatResponse) -> str:
        fp = fingerprint(request)
        self.entries[fp] = response
        self._requests[fp] = {
            "model_id": request.model_id,
            "system_text": request.system_text,
            "user_text": request.user_text,
            "temperature": request.temperature,
        }
        return fp

    def get(self, request: ChatRequest) -> ChatResponse | None:
        return self.entries.get(fingerprint(request))

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        cassette = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                fp = obj["fingerprint"]
                if fp in cassette.entries:
                    raise GatewayError(
                        f"duplicate fingerprint {fp} at {path}:{lineno}"
                    )
                cassette.entries[fp] = ChatResponse(**obj["response"])
                cassette._requests[fp] = obj.get("request", {})
        return cassette

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for fp in self.entries:
                fh.write(self._line(fp))

    def _line(self, fp: str) -> str:
        resp = self.entries[fp]
        return (
            json.dumps(
                {
                    "fingerprint": fp,
                    "request": self._requests.get(fp, {}),
                    "response": {
                        "text": resp.text,
                        "prompt_tokens": resp.prompt_tokens,
                        "completion_tokens": resp.completion_tokens,
                        "provider_id": resp.provider_id,
                    },
                },
                ensure_ascii=False,
            )
            + "\n"
        )


class MockProvider:
    """Canned fingerprint->text map, or a fixed echo when no map is given."""

    provider_id = "mock"

    def __init__(self, canned: dict[str, str] | None = None, echo: bool = True):
        self.canned = canned or {}
        self.echo = echo
        self.calls: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        fp = fingerprint(request)
        if fp in self.canned:
            text = self.canned[fp]
        elif self.echo:
            text = request.user_text
        else:
            raise ProviderError(f"mock has no canned answer for {fp}")
        return ChatResponse(text=text, provider_id=self.provider_id)


class ReplayProvider:
    """Answers only from a cassette; a miss is an error, never a network call."""

    provider_id = "replay"

    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayProvider":
        return cls(Cassette.load(path))

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.cassette.get(request)
        if response is None:
            raise CassetteMissError(fingerprint(request))
        return response


class RecordProvider:
    """Delegates to a live provider and appends each exchange to a cassette."""

    provider_id = "record"

    def __init__(self, inner, cassette_path: str | Path):
        self.inner = inner
        self.cassette_path = Path(cassette_path)
        self.cassette = (
            Cassette.load(cassette_path)
            if self.cassette_path.exists()
            else Cassette()
        )
        self._write_lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        cached = self.cassette.get(request)
        if cached is not None:
            return cached
        response = self.inner.complete(request)
        fp = self.cassette.put(request, response)
        with self._write_lock, open(self.cassette_path, "a", encoding="utf-8") as fh:
            fh.write(self.cassette._line(fp))
        return response


def retry_with_backoff(
    call: Callable[[], "requests.Response"],
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
    max_attempts: int = RETRY_MAX_ATTEMPTS,
) -> "requests.Response":
    """Retry 429/5xx with 1,2,4,8,16s backoff (+/-20% jitter when rng given)."""
    last_status = None
    for attempt in range(max_attempts):
        try:
            response = call()
        except requests.RequestException as e:
            raise ProviderError(f"transport failure: {e}") from e
        if response.status_code == 429 or response.status_code >= 500:
            last_status = response.status_code
            if attempt == max_attempts - 1:
                break
            wait = RETRY_BASE_SECONDS * (RETRY_FACTOR**attempt)
            if rng is not None:
                wait *= 1.0 + rng.uniform(-RETRY_JITTER, RETRY_JITTER)
            sleep(wait)
            continue
        return response
    raise ProviderError(f"gave up after {max_attempts} attempts (last status {last_status})")


class LiveProvider:
    """JSON-over-HTTPS chat completions (OpenAI-compatible wire shape).

    The API key comes from the environment only; it is never read from or
    written to configuration files.
    """

    provider_id = "live"

    def __init__(
        self,
        endpoint_url: str,
        model_id: str,
        api_key_env: str = "LLM_API_KEY",
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.endpoint_url = endpoint_url
        self.model_id = model_id
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session or requests.Session()
        self._sleep = sleep
        self._rng = random.Random() if rng is None else rng

    def complete(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {
            "model": request.model_id or self.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        def call():
            try:
                return self.session.post(
                    self.endpoint_url, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as e:
                raise requests.RequestException(f"timeout after {self.timeout}s") from e

        response = retry_with_backoff(call, sleep=self._sleep, rng=self._rng)
        if response.status_code != 200:
            raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
        except (KeyError, IndexError, ValueError) as e:
            raise ProviderError(f"unexpected response shape: {e}") from e
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            provider_id=self.provider_id,
        )


def complete(provider, request: ChatRequest) -> ChatResponse:
    """Uniform entry point over any provider handle."""
    return provider.complete(request)


class RateLimiter:
    """Token bucket, capacity one burst token; callers block, never fail.

    Over any one-second window the number of grants stays within
    ceil(rate) + 1.
    """

    def __init__(
        self,
        permits_per_second: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if permits_per_second <= 0:
            raise InputError("permits_per_second must be > 0")
        self.rate = float(permits_per_second)
        self._clock = clock
        self._sleep = sleep
        self._tokens = 1.0
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        # 1e-9 slack keeps refill arithmetic from busy-spinning on the
        # representation error of 1/rate.
        with self._lock:
            while True:
                now = self._clock()
                self._tokens = min(1.0, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0 - 1e-9:
                    self._tokens = max(0.0, self._tokens - 1.0)
                    return
                self._sleep((1.0 - self._tokens) / self.rate)

    def __call__(self) -> None:
        self.acquire()
