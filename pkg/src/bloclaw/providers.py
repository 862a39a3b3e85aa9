"""Model providers: the remote-HTTP client and the scripted replay stand-in."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Protocol


class ProviderError(RuntimeError):
    """The provider could not produce a completion."""


class ModelProvider(Protocol):
    def complete(self, system_prompt: str, history: list[dict]) -> str: ...


class ReplayProvider:
    """Deterministic stand-in: returns canned responses in order.

    Exhausting the script raises, which surfaces as a provider error —
    a replay that needs more turns than scripted is a test bug.
    """

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self._cursor = 0
        self.calls: list[tuple[str, int]] = []

    @classmethod
    def from_file(cls, path: Path | str) -> "ReplayProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
            raise ValueError("replay script must be a JSON list of response strings")
        return cls(data)

    def complete(self, system_prompt: str, history: list[dict]) -> str:
        if self._cursor >= len(self._responses):
            raise ProviderError(
                f"replay script exhausted after {len(self._responses)} responses"
            )
        self.calls.append((system_prompt[:80], len(history)))
        response = self._responses[self._cursor]
        self._cursor += 1
        return response


class HttpProvider:
    """Chat-completions style HTTP provider.

    The API key is read from the environment variable named in config, so
    secrets never sit in config files.
    """

    def __init__(self, endpoint: str, key_env: str = "", model: str = "default", timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.key_env = key_env
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, system_prompt: str, history: list[dict]) -> str:
        import httpx

        messages = [{"role": "system", "content": system_prompt}]
        for message in history:
            role = message["role"]
            # Observations ride along as user-visible context with explicit
            # provenance, since chat APIs have no observation role.
            if role == "observation":
                messages.append(
                    {"role": "user", "content": f"[observation]\n{message['text']}"}
                )
            else:
                messages.append({"role": role, "content": message["text"]})
        headers = {"content-type": "application/json"}
        if self.key_env:
            key = os.environ.get(self.key_env, "")
            if key:
                headers["authorization"] = f"Bearer {key}"
        try:
            response = httpx.post(
                self.endpoint,
                json={"model": self.model, "messages": messages},
                headers=headers,
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except Exception as exc:
            raise ProviderError(f"provider call failed: {exc}") from exc
