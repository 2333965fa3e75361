"""Asynchronous room/table matchmaking.

A room groups tables of one game at one presentation.  Arriving sessions
are seated as Player 2 at a table holding a pending first move when one
exists, otherwise as Player 1 at an empty table.  Seed moves pre-fill a
configurable number of tables so early arrivals can join "ongoing" games;
trials played against seeds are flagged and excluded by default analysis.

The matchmaker is an event-sourced aggregate: every mutation happens by
applying an event record, and a fresh instance replaying the same events
reaches the same state.  Live operations draw random choices, wrap them
in an event, apply it, and hand the event to the caller for logging.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .games import Action, BimatrixGame, Role, Transformation, payoff

HUMAN = "human"
AGENT = "agent"
SEED = "seed"

EMPTY = "empty"
AWAITING_PLAYER2 = "awaiting_player2"
RESOLVED = "resolved"


class RoomFullError(Exception):
    pass


class StaleSeatError(Exception):
    pass


class DuplicateMoveError(Exception):
    pass


class Seat(NamedTuple):
    session_id: str
    room_id: str
    table_id: str
    role: Role


@dataclass
class PendingMove:
    action: Action
    source: str
    session_id: str | None


@dataclass
class Table:
    table_id: str
    room_id: str
    label: str
    transformation: Transformation
    status: str = EMPTY
    pending: PendingMove | None = None
    seats: dict[Role, str] = field(default_factory=dict)


@dataclass
class Room:
    room_id: str
    label: str
    transformation: Transformation
    tables: dict[str, Table] = field(default_factory=dict)
    seed_policy: int = 0


@dataclass(frozen=True)
class Resolution:
    """A completed table: both moves, canonical payoffs, and provenance."""

    room_id: str
    table_id: str
    label: str
    transformation: str
    a1: Action
    a2: Action
    u1: int
    u2: int
    p1_source: str
    p2_source: str
    p1_session: str | None
    p2_session: str | None


def laplace_smoothed(history: Sequence[Action]) -> tuple[Fraction, Fraction]:
    """(P(action 0), P(action 1)) with add-one smoothing, exact rationals."""
    n = len(history)
    ones = sum(history)
    p1 = Fraction(ones + 1, n + 2)
    return (1 - p1, p1)


def estimate_bonus_p1(game: BimatrixGame, a1: Action, history: Sequence[Action]) -> Fraction:
    """Expected Player-1 points for a1 against the smoothed Player-2 record.

    The history holds canonical Player-2 actions previously observed for
    this game; an empty history yields the uniform prior.
    """
    p0, p1 = laplace_smoothed(history)
    return p0 * payoff(game, a1, 0).u1 + p1 * payoff(game, a1, 1).u1


class Matchmaker:
    """All rooms plus the cross-room single-live-seat registry.

    A sink callable, when given, receives every applied event while the
    state lock is held, so the captured stream is in application order
    and replaying it reproduces the state exactly.
    """

    def __init__(self, games: dict[str, BimatrixGame], sink=None):
        self._games = dict(games)
        self.rooms: dict[str, Room] = {}
        self.live_seats: dict[str, Seat] = {}
        self.resolutions: list[Resolution] = []
        self._p2_history: dict[str, list[Action]] = {}
        self._p2_history_by_presentation: dict[tuple[str, str], list[Action]] = {}
        self._lock = threading.RLock()
        self._sink = sink

    def game(self, label: str) -> BimatrixGame:
        return self._games[label]

    # -- live operations ---------------------------------------------------

    def open_room(
        self,
        room_id: str,
        label: str,
        transformation: Transformation,
        n_tables: int,
        seed_policy: int,
        rng: random.Random,
    ) -> tuple[Room, dict]:
        if n_tables < 1:
            raise ValueError("n_tables must be >= 1")
        if not 0 <= seed_policy <= n_tables:
            raise ValueError("seed_policy must be between 0 and n_tables")
        if label not in self._games:
            raise KeyError(f"unknown game label {label}")
        with self._lock:
            if room_id in self.rooms:
                raise ValueError(f"room {room_id} already exists")
            seed_moves = [[f"{room_id}/t{i:04d}", rng.randrange(2)] for i in range(seed_policy)]
            event = {
                "kind": "room_opened",
                "room_id": room_id,
                "label": label,
                "transformation": transformation.value,
                "n_tables": n_tables,
                "seed_policy": seed_policy,
                "seed_moves": seed_moves,
            }
            self.apply(event)
            return self.rooms[room_id], event

    def choose_seat(self, room_id: str, session_id: str, rng: random.Random) -> tuple[str, Role]:
        """Pick a table and role without applying: prefer joining a pending
        game as Player 2, never against the session's own first move."""
        with self._lock:
            if session_id in self.live_seats:
                raise StaleSeatError(f"session {session_id} already holds a seat")
            room = self.rooms[room_id]
            joinable = [
                t
                for t in room.tables.values()
                if t.status == AWAITING_PLAYER2
                and Role.PLAYER2 not in t.seats
                and (t.pending is None or t.pending.session_id != session_id)
            ]
            if joinable:
                table = joinable[rng.randrange(len(joinable))]
                return table.table_id, Role.PLAYER2
            empty = [
                t
                for t in room.tables.values()
                if t.status == EMPTY and Role.PLAYER1 not in t.seats
            ]
            if not empty:
                raise RoomFullError(f"no seatable table in room {room_id}")
            table = empty[rng.randrange(len(empty))]
            return table.table_id, Role.PLAYER1

    def has_capacity(self, room_id: str) -> bool:
        """Whether at least one table in the room can still seat someone."""
        with self._lock:
            room = self.rooms[room_id]
            for t in room.tables.values():
                if t.status == EMPTY and Role.PLAYER1 not in t.seats:
                    return True
                if t.status == AWAITING_PLAYER2 and Role.PLAYER2 not in t.seats:
                    return True
            return False

    def seat(self, room_id: str, session_id: str, rng: random.Random) -> tuple[Seat, dict]:
        """Seat a session, preferring tables that await a Player 2."""
        with self._lock:
            table_id, role = self.choose_seat(room_id, session_id, rng)
            event = {
                "kind": "seated",
                "room_id": room_id,
                "table_id": table_id,
                "session_id": session_id,
                "role": role.value,
            }
            return self.apply(event), event

    def reseat(self, room_id: str, session_id: str, rng: random.Random) -> tuple[Seat, dict]:
        """Same contract as seat; the previous seat must have been released."""
        return self.seat(room_id, session_id, rng)

    def submit_move(self, seat: Seat, action: Action, source: str = HUMAN):
        """Either park a Player-1 move or resolve the table with Player 2's.

        Returns ((outcome, resolution_or_none), event).
        """
        if action not in (0, 1):
            raise ValueError("action must be 0 or 1")
        with self._lock:
            live = self.live_seats.get(seat.session_id)
            if live != seat:
                raise StaleSeatError(f"seat {seat} is not live")
            table = self.rooms[seat.room_id].tables[seat.table_id]
            if seat.role is Role.PLAYER1 and table.status != EMPTY:
                raise DuplicateMoveError(f"table {table.table_id} already has a first move")
            if seat.role is Role.PLAYER2 and table.status != AWAITING_PLAYER2:
                raise DuplicateMoveError(f"table {table.table_id} is not awaiting Player 2")
            event = {
                "kind": "move_submitted",
                "room_id": seat.room_id,
                "table_id": seat.table_id,
                "session_id": seat.session_id,
                "role": seat.role.value,
                "action": action,
                "source": source,
            }
            return self.apply(event), event

    def release_seat(self, session_id: str) -> tuple[None, dict]:
        """Free an abandoned seat; a parked Player-1 move stays on the table."""
        with self._lock:
            if session_id not in self.live_seats:
                raise StaleSeatError(f"session {session_id} holds no seat")
            event = {"kind": "seat_released", "session_id": session_id}
            return self.apply(event), event

    # -- event application (also the replay path) ---------------------------

    def apply(self, event: dict):
        kind = event["kind"]
        with self._lock:
            if kind == "room_opened":
                result = self._apply_room_opened(event)
            elif kind == "seated":
                result = self._apply_seated(event)
            elif kind == "move_submitted":
                result = self._apply_move_submitted(event)
            elif kind == "seat_released":
                result = self._apply_seat_released(event)
            else:
                raise ValueError(f"unknown matchmaking event kind {kind}")
            if self._sink is not None:
                self._sink(event)
            return result

    def _apply_room_opened(self, event: dict) -> Room:
        room = Room(
            room_id=event["room_id"],
            label=event["label"],
            transformation=Transformation(event["transformation"]),
            seed_policy=event["seed_policy"],
        )
        for i in range(event["n_tables"]):
            tid = f"{room.room_id}/t{i:04d}"
            room.tables[tid] = Table(tid, room.room_id, room.label, room.transformation)
        for tid, action in event["seed_moves"]:
            table = room.tables[tid]
            table.pending = PendingMove(action, SEED, None)
            table.status = AWAITING_PLAYER2
        self.rooms[room.room_id] = room
        return room

    def _apply_seated(self, event: dict) -> Seat:
        table = self.rooms[event["room_id"]].tables[event["table_id"]]
        role = Role(event["role"])
        if role in table.seats:
            raise StaleSeatError(f"{table.table_id} already seats a {role.value}")
        seat = Seat(event["session_id"], event["room_id"], event["table_id"], role)
        table.seats[role] = seat.session_id
        self.live_seats[seat.session_id] = seat
        return seat

    def _apply_move_submitted(self, event: dict):
        table = self.rooms[event["room_id"]].tables[event["table_id"]]
        role = Role(event["role"])
        session_id = event["session_id"]
        action = event["action"]
        table.seats.pop(role, None)
        self.live_seats.pop(session_id, None)
        if role is Role.PLAYER1:
            table.pending = PendingMove(action, event["source"], session_id)
            table.status = AWAITING_PLAYER2
            return ("pending", None)
        pending = table.pending
        assert pending is not None, "player 2 move on a table with no first move"
        game = self._games[table.label]
        cell = payoff(game, pending.action, action)
        resolution = Resolution(
            room_id=table.room_id,
            table_id=table.table_id,
            label=table.label,
            transformation=table.transformation.value,
            a1=pending.action,
            a2=action,
            u1=cell.u1,
            u2=cell.u2,
            p1_source=pending.source,
            p2_source=event["source"],
            p1_session=pending.session_id,
            p2_session=session_id,
        )
        table.status = RESOLVED
        table.seats.clear()
        self.resolutions.append(resolution)
        self._p2_history.setdefault(table.label, []).append(action)
        self._p2_history_by_presentation.setdefault(
            (table.label, table.transformation.value), []
        ).append(action)
        return ("resolved", resolution)

    def _apply_seat_released(self, event: dict) -> None:
        seat = self.live_seats.pop(event["session_id"], None)
        if seat is not None:
            table = self.rooms[seat.room_id].tables[seat.table_id]
            table.seats.pop(seat.role, None)
        return None

    # -- queries -------------------------------------------------------------

    def p2_history(self, label: str, transformation: str | None = None) -> list[Action]:
        """Past canonical Player-2 actions for a game, pooled by default."""
        with self._lock:
            if transformation is None:
                return list(self._p2_history.get(label, []))
            return list(self._p2_history_by_presentation.get((label, transformation), []))

    def pending_p1_sessions(self) -> set[str]:
        out = set()
        for room in self.rooms.values():
            for table in room.tables.values():
                if table.status == AWAITING_PLAYER2 and table.pending and table.pending.session_id:
                    out.add(table.pending.session_id)
        return out

    def snapshot(self) -> dict:
        """Canonical state view for replay-equality checks."""
        with self._lock:
            return {
                "rooms": {
                    rid: {
                        "label": room.label,
                        "transformation": room.transformation.value,
                        "tables": {
                            tid: {
                                "status": t.status,
                                "pending": (
                                    [t.pending.action, t.pending.source, t.pending.session_id]
                                    if t.pending
                                    else None
                                ),
                                "seats": {r.value: s for r, s in sorted(t.seats.items(), key=lambda kv: kv[0].value)},
                            }
                            for tid, t in sorted(room.tables.items())
                        },
                    }
                    for rid, room in sorted(self.rooms.items())
                },
                "live_seats": {
                    s: [seat.room_id, seat.table_id, seat.role.value]
                    for s, seat in sorted(self.live_seats.items())
                },
                "resolutions": [tuple(r.__dict__.values()) for r in self.resolutions],
                "p2_history": {k: list(v) for k, v in sorted(self._p2_history.items())},
            }


def replay(games: dict[str, BimatrixGame], events: Iterable[dict]) -> Matchmaker:
    """Rebuild a matchmaker from its event stream."""
    mm = Matchmaker(games)
    for event in events:
        mm.apply(event)
    return mm
