"""Append-only event log with JSON-lines persistence.

One event per line, sequence numbers strictly increasing.  The log is the
single durable artifact of a deployment: replaying it rebuilds the full
service state, and truncating it at any line boundary leaves a valid
prefix.  A trailing partial line (a crash mid-write) is ignored on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Event":
        raw = json.loads(line)
        return cls(seq=raw["seq"], ts=raw["ts"], kind=raw["kind"], payload=raw["payload"])


class EventLog:
    """In-memory event sequence, optionally mirrored to a JSONL file."""

    def __init__(self, path: Path | str | None = None):
        self._events: list[Event] = []
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            if self._path.exists():
                self._events = load_events(self._path)
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self._path.open("a", encoding="utf-8")

    def append(self, kind: str, payload: dict, ts: float) -> Event:
        event = Event(seq=len(self._events) + 1, ts=ts, kind=kind, payload=payload)
        self._events.append(event)
        if self._fh is not None:
            self._fh.write(event.to_json() + "\n")
            self._fh.flush()
        return event

    def events(self) -> list[Event]:
        return list(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def load_events(path: Path | str) -> list[Event]:
    """Read all complete events; a partial trailing line is dropped."""
    events: list[Event] = []
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    complete, trailing = lines[:-1], lines[-1]
    for line in complete:
        if line.strip():
            events.append(Event.from_json(line))
    if trailing.strip():
        try:
            events.append(Event.from_json(trailing))
        except json.JSONDecodeError:
            pass  # crash mid-write: ignore the torn tail
    for i, event in enumerate(events, start=1):
        if event.seq != i:
            raise ValueError(f"event log corrupt: expected seq {i}, found {event.seq}")
    return events
