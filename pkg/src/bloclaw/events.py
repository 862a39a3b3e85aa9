"""Server events streamed to viewport clients.

Every turn's stream satisfies the grammar
``token_delta* (directive_parsed (artifact_ready|viewport_update)*)?
turn_error? turn_done`` and ends with exactly one turn_done. Event
payloads carry no timestamps or random ids, so a replayed turn serializes
byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

EVENT_TOKEN_DELTA = "token_delta"
EVENT_DIRECTIVE_PARSED = "directive_parsed"
EVENT_ARTIFACT_READY = "artifact_ready"
EVENT_VIEWPORT_UPDATE = "viewport_update"
EVENT_TURN_ERROR = "turn_error"
EVENT_TURN_DONE = "turn_done"

_GRAMMAR_ORDER = {
    EVENT_TOKEN_DELTA: 0,
    EVENT_DIRECTIVE_PARSED: 1,
    EVENT_ARTIFACT_READY: 2,
    EVENT_VIEWPORT_UPDATE: 2,
    EVENT_TURN_ERROR: 3,
    EVENT_TURN_DONE: 4,
}


@dataclass(frozen=True)
class ServerEvent:
    type: str
    data: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"type": self.type, **self.data}, ensure_ascii=True, sort_keys=True
        )


def token_delta(text: str) -> ServerEvent:
    return ServerEvent(EVENT_TOKEN_DELTA, {"text": text})


def directive_parsed(action: str, slots: list[str], track: str) -> ServerEvent:
    return ServerEvent(
        EVENT_DIRECTIVE_PARSED, {"action": action, "slots": slots, "track": track}
    )


def artifact_ready(artifact_id: str, kind: str) -> ServerEvent:
    return ServerEvent(EVENT_ARTIFACT_READY, {"artifact_id": artifact_id, "kind": kind})


def viewport_update(payload: dict[str, Any]) -> ServerEvent:
    return ServerEvent(EVENT_VIEWPORT_UPDATE, payload)


def turn_error(category: str, message: str) -> ServerEvent:
    return ServerEvent(EVENT_TURN_ERROR, {"category": category, "message": message})


def turn_done(reply: str = "") -> ServerEvent:
    return ServerEvent(EVENT_TURN_DONE, {"reply": reply})


def check_stream_grammar(events: list[ServerEvent]) -> None:
    """Assert one turn's events satisfy the stream grammar; raises ValueError."""
    if not events or events[-1].type != EVENT_TURN_DONE:
        raise ValueError("turn stream must end with turn_done")
    if sum(1 for e in events if e.type == EVENT_TURN_DONE) != 1:
        raise ValueError("exactly one turn_done per turn")
    if sum(1 for e in events if e.type == EVENT_DIRECTIVE_PARSED) > 1:
        raise ValueError("at most one directive_parsed per turn")
    if sum(1 for e in events if e.type == EVENT_TURN_ERROR) > 1:
        raise ValueError("at most one turn_error per turn")
    stage = 0
    for event in events:
        nxt = _GRAMMAR_ORDER.get(event.type)
        if nxt is None:
            raise ValueError(f"unknown event type {event.type}")
        if event.type in (EVENT_ARTIFACT_READY, EVENT_VIEWPORT_UPDATE):
            if stage < 1:
                raise ValueError(f"{event.type} before directive_parsed")
        if nxt < stage:
            raise ValueError(f"{event.type} out of order (stage {stage})")
        stage = max(stage, nxt)
