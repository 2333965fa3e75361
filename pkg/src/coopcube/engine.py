"""Event-sourced experiment engine: staged sessions over matchmaking rooms.

Every state change is an event appended to the log and applied through a
single dispatcher; replaying the log rebuilds the exact live state, which
is what the export and audit paths rely on.  Random choices (condition
ties, table picks, presentation draws) happen while handling a command
and are recorded inside the events, so replay never consults an RNG.
"""

from __future__ import annotations

import threading
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import matchmaking
from .agents import Condition, conditions_for_space
from .analysis import AnalysisConfig, PreferenceRecord, Trial, report
from .eventlog import Event, EventLog
from .games import (
    ALL_TRANSFORMATIONS,
    Role,
    Transformation,
    canonical_to_displayed,
    displayed_to_canonical,
    viewer_presentation,
)
from .matchmaking import HUMAN, Matchmaker, RoomFullError
from .seeding import child_rng
from .space import GameSpace, verify_space

STAGES = ("tutorial", "quiz", "stage1", "stage2", "choice", "stage4", "survey", "done")
PLAY_STAGES = ("stage1", "stage2", "stage4")

GAME_COLORS = ("#4477aa", "#ee7733")  # first game vs second game


class UnknownSessionError(Exception):
    pass


class WrongStageError(Exception):
    pass


class InvalidChoiceError(Exception):
    pass


class DuplicateSubmissionError(Exception):
    pass


class ServiceNotReadyError(Exception):
    pass


@dataclass
class EngineConfig:
    rounds_per_stage: int = 6
    tables_per_room: int = 64
    seeds_per_room: int = 2
    seat_timeout: float = 600.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds_per_stage < 1:
            raise ValueError("rounds_per_stage must be >= 1")
        if not 0 <= self.seeds_per_room <= self.tables_per_room:
            raise ValueError("seeds_per_room must fit in tables_per_room")


@dataclass
class RoundState:
    round_token: str
    stage: str
    label: str
    role: Role
    transformation: Transformation
    room_id: str
    table_id: str


@dataclass
class SessionState:
    session_id: str
    condition_id: str
    stage: str = "tutorial"
    rounds_done: int = 0
    round_counter: int = 0
    bonus: Fraction = Fraction(0)
    choice: str | None = None
    current_round: RoundState | None = None
    reveal: dict | None = None
    outcomes: dict[str, dict] = field(default_factory=dict)  # round_token -> outcome
    abandoned: bool = False
    dropped: bool = False
    last_active: float = 0.0
    survey: dict | None = None


class Engine:
    """The deployable core behind the HTTP service and the exports."""

    def __init__(
        self,
        space: GameSpace,
        config: EngineConfig | None = None,
        log: EventLog | None = None,
        clock: Callable[[], float] = _time.time,
        analysis_config: AnalysisConfig | None = None,
    ):
        self.space = space
        self.config = config or EngineConfig()
        self.clock = clock
        self.log = log if log is not None else EventLog()
        self.analysis_config = analysis_config or AnalysisConfig(seed=self.config.seed)
        check = verify_space(space)
        if not check.ok:
            raise ServiceNotReadyError(
                "space fails verification: " + "; ".join(check.lines())
            )
        self.games = {str(fv): g for fv, g in space.games.items()}
        self.conditions: dict[str, Condition] = {
            c.condition_id: c for c in conditions_for_space(space)
        }
        self.matchmaker = Matchmaker(self.games)
        self.sessions: dict[str, SessionState] = {}
        self.trials: list[Trial] = []
        self.preferences: list[PreferenceRecord] = []
        self._assignment_counts: dict[str, int] = {cid: 0 for cid in self.conditions}
        self._current_rooms: dict[tuple[str, str], str] = {}
        self._room_generation: dict[tuple[str, str], int] = {}
        self._pending_round_meta: dict[str, dict] = {}  # table_id -> player-1 round info
        self._rng = child_rng(self.config.seed, "engine")
        self._lock = threading.RLock()
        for event in self.log.events():  # warm start from an existing log
            self._apply(event)

    # -- command helpers -----------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> Event:
        event = self.log.append(kind, payload, ts=self.clock())
        self._apply(event)
        return event

    def _session(self, session_id: str) -> SessionState:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def _reclaim_idle(self) -> None:
        """Release seats of sessions idle past the timeout (lazy sweep)."""
        now = self.clock()
        stale = [
            s
            for s in self.sessions.values()
            if s.current_round is not None
            and not s.abandoned
            and now - s.last_active > self.config.seat_timeout
        ]
        for s in stale:
            self._emit("seat_released", {"session_id": s.session_id})
            self._emit("session_abandoned", {"session_id": s.session_id})

    def _open_room(self, label: str, transformation: Transformation) -> str:
        """Open the next room generation for a game at a presentation."""
        generation = self._room_generation.get((label, transformation.value), 0)
        room_id = f"{label}@{transformation.value}#{generation}"
        seed_moves = [
            [f"{room_id}/t{i:04d}", self._rng.randrange(2)]
            for i in range(self.config.seeds_per_room)
        ]
        self._emit(
            "room_opened",
            {
                "room_id": room_id,
                "label": label,
                "transformation": transformation.value,
                "n_tables": self.config.tables_per_room,
                "seed_policy": self.config.seeds_per_room,
                "seed_moves": seed_moves,
            },
        )
        return room_id

    def _room_for(self, label: str, transformation: Transformation) -> str:
        """Current room with free capacity, opening a fresh one if needed."""
        room_id = self._current_rooms.get((label, transformation.value))
        if room_id is not None and self.matchmaker.has_capacity(room_id):
            return room_id
        return self._open_room(label, transformation)

    def _seat_for_round(self, session: SessionState, stage: str, label: str) -> None:
        transformation = self._rng.choice(ALL_TRANSFORMATIONS)
        room_id = self._room_for(label, transformation)
        try:
            table_id, role = self.matchmaker.choose_seat(room_id, session.session_id, self._rng)
        except RoomFullError:
            # The only free table held this session's own pending move.
            room_id = self._open_room(label, transformation)
            table_id, role = self.matchmaker.choose_seat(room_id, session.session_id, self._rng)
        token = f"{session.session_id}:r{session.round_counter:03d}"
        self._emit(
            "seated",
            {
                "room_id": room_id,
                "table_id": table_id,
                "session_id": session.session_id,
                "role": role.value,
                "stage": stage,
                "label": label,
                "round_token": token,
            },
        )

    def _stage_game(self, session: SessionState, stage: str) -> str:
        condition = self.conditions[session.condition_id]
        if stage == "stage1":
            return str(condition.pair.low)
        if stage == "stage2":
            return str(condition.pair.high)
        if stage == "stage4":
            assert session.choice is not None
            return session.choice
        raise WrongStageError(stage)

    def _advance_stage(self, session: SessionState) -> None:
        next_stage = STAGES[STAGES.index(session.stage) + 1]
        self._emit(
            "stage_advanced", {"session_id": session.session_id, "stage": next_stage}
        )
        if next_stage in PLAY_STAGES:
            self._seat_for_round(session, next_stage, self._stage_game(session, next_stage))

    # -- commands --------------------------------------------------------------

    def create_session(self) -> dict:
        """Assign the least-populated condition and start at the tutorial."""
        with self._lock:
            self._reclaim_idle()
            lowest = min(self._assignment_counts.values())
            tied = sorted(
                cid for cid, n in self._assignment_counts.items() if n == lowest
            )
            condition_id = tied[self._rng.randrange(len(tied))]
            session_id = f"s{len(self.sessions) + 1:06d}"
            self._emit(
                "session_created",
                {"session_id": session_id, "condition_id": condition_id},
            )
            return {
                "session_id": session_id,
                "stage": "tutorial",
                "tutorial": "intro/how-to-read-the-board",
                "rounds_per_stage": self.config.rounds_per_stage,
            }

    def advance(self, session_id: str) -> dict:
        """Acknowledge a pass-through screen (tutorial or quiz)."""
        with self._lock:
            self._reclaim_idle()
            session = self._session(session_id)
            if session.stage not in ("tutorial", "quiz"):
                raise WrongStageError(f"cannot advance from {session.stage}")
            self._advance_stage(session)
            return self.get_state(session_id)

    def submit_action(self, session_id: str, action: int, round_token: str) -> dict:
        """One play-stage move: resolve or park it, credit the bonus, reseat."""
        with self._lock:
            self._reclaim_idle()
            session = self._session(session_id)
            if round_token in session.outcomes:  # idempotent retry
                return session.outcomes[round_token]
            if session.stage not in PLAY_STAGES or session.abandoned or session.dropped:
                raise WrongStageError(f"session is in {session.stage}")
            rnd = session.current_round
            if rnd is None or rnd.round_token != round_token:
                raise DuplicateSubmissionError(f"no open round for token {round_token}")
            if action not in (0, 1):
                raise InvalidChoiceError(f"action must be 0 or 1, got {action}")

            canonical = displayed_to_canonical(rnd.transformation, rnd.role, action)
            game = self.games[rnd.label]
            bonus = None
            if rnd.role is Role.PLAYER1:
                estimate = matchmaking.estimate_bonus_p1(
                    game, canonical, self.matchmaker.p2_history(rnd.label)
                )
                bonus = str(estimate)
            self._emit(
                "move_submitted",
                {
                    "room_id": rnd.room_id,
                    "table_id": rnd.table_id,
                    "session_id": session_id,
                    "role": rnd.role.value,
                    "action": canonical,
                    "source": HUMAN,
                    "displayed_action": action,
                    "round_token": round_token,
                    "stage": rnd.stage,
                    "bonus": bonus,
                },
            )
            resolution = None
            if rnd.role is Role.PLAYER2:
                resolution = self.matchmaker.resolutions[-1]
                self._emit_trial_resolved(resolution, rnd, session)

            if session.rounds_done >= self.config.rounds_per_stage:
                self._advance_stage(session)
            else:
                self._seat_for_round(session, session.stage, rnd.label)

            outcome = {
                "status": "resolved" if resolution else "pending",
                "round_token": round_token,
                "reveal": session.reveal,
                "bonus": float(session.bonus),
                "stage": session.stage,
            }
            session.outcomes[round_token] = outcome
            return outcome

    def _emit_trial_resolved(
        self, resolution: matchmaking.Resolution, rnd: RoundState, session: SessionState
    ) -> None:
        ts = self.clock()
        rows = []
        p2_row = {
            "trial_id": f"{resolution.table_id}/p2",
            "session_id": session.session_id,
            "condition_id": session.condition_id,
            "game_label": resolution.label,
            "transformation": resolution.transformation,
            "role_of_session": Role.PLAYER2.value,
            "a1": resolution.a1,
            "a2": resolution.a2,
            "u1": resolution.u1,
            "u2": resolution.u2,
            "p1_source": resolution.p1_source,
            "p2_source": resolution.p2_source,
            "stage": rnd.stage,
            "timestamp": ts,
        }
        rows.append(p2_row)
        meta = self._pending_round_meta.get(resolution.table_id)
        if resolution.p1_session is not None and meta is not None:
            p1_session = self.sessions[resolution.p1_session]
            rows.append(
                {
                    **p2_row,
                    "trial_id": f"{resolution.table_id}/p1",
                    "session_id": resolution.p1_session,
                    "condition_id": p1_session.condition_id,
                    "role_of_session": Role.PLAYER1.value,
                    "stage": meta["stage"],
                }
            )
        reveal = self._build_reveal(resolution, rnd.role)
        self._emit(
            "trial_resolved",
            {
                "table_id": resolution.table_id,
                "rows": rows,
                "p2_session": session.session_id,
                "p2_bonus": resolution.u2,
                "reveal": reveal,
            },
        )

    def _build_reveal(self, resolution: matchmaking.Resolution, role: Role) -> dict:
        """Everything the resolving player gets to see, in display coordinates."""
        t = Transformation(resolution.transformation)
        game = self.games[resolution.label]
        board = viewer_presentation(game, role, t).board
        if t.transpose:
            row = canonical_to_displayed(t, Role.PLAYER2, resolution.a2)
            col = canonical_to_displayed(t, Role.PLAYER1, resolution.a1)
        else:
            row = canonical_to_displayed(t, Role.PLAYER1, resolution.a1)
            col = canonical_to_displayed(t, Role.PLAYER2, resolution.a2)
        cell = board.cells[row][col]
        points = resolution.u2 if role is Role.PLAYER2 else resolution.u1
        return {
            "status": "resolved",
            "cell": [row, col],
            "cell_payoffs": [cell.u1, cell.u2],
            "your_points": points,
            "your_role": role.value,
        }

    def submit_preference(self, session_id: str, chosen: str) -> dict:
        with self._lock:
            self._reclaim_idle()
            session = self._session(session_id)
            if session.stage != "choice":
                raise WrongStageError(f"session is in {session.stage}")
            pair = self.conditions[session.condition_id].pair
            if chosen not in (str(pair.low), str(pair.high)):
                raise InvalidChoiceError(f"{chosen} is not one of the offered games")
            self._emit(
                "preference_chosen",
                {
                    "session_id": session_id,
                    "condition_id": session.condition_id,
                    "low": str(pair.low),
                    "high": str(pair.high),
                    "chosen": chosen,
                },
            )
            self._advance_stage(session)
            return {"stage": session.stage, "chosen": chosen}

    def submit_survey(self, session_id: str, answers: dict) -> dict:
        with self._lock:
            session = self._session(session_id)
            if session.stage != "survey":
                raise WrongStageError(f"session is in {session.stage}")
            self._emit("survey_submitted", {"session_id": session_id, "answers": answers})
            return {"stage": session.stage}

    def drop_session(self, session_id: str, reason: str = "technical_error") -> None:
        """Flag a session as dropped; its trials stay, its preference does not."""
        with self._lock:
            session = self._session(session_id)
            if session.current_round is not None:
                self._emit("seat_released", {"session_id": session_id})
            self._emit("session_dropped", {"session_id": session_id, "reason": reason})

    # -- read-only views --------------------------------------------------------

    def get_state(self, session_id: str) -> dict:
        with self._lock:
            session = self._session(session_id)
            condition = self.conditions[session.condition_id]
            state: dict = {
                "session_id": session.session_id,
                "stage": session.stage,
                "round": session.rounds_done + 1 if session.stage in PLAY_STAGES else None,
                "rounds_per_stage": self.config.rounds_per_stage,
                "bonus": float(session.bonus),
                "reveal": session.reveal,
                "abandoned": session.abandoned,
            }
            rnd = session.current_round
            if rnd is not None:
                shown = viewer_presentation(self.games[rnd.label], rnd.role, rnd.transformation)
                pair = condition.pair
                color_index = 0 if rnd.label == str(pair.low) else 1
                state["board"] = {
                    "cells": [[list(c) for c in row] for row in shown.board.cells],
                    "chooses": shown.chooses,
                    "color": GAME_COLORS[color_index],
                    "round_token": rnd.round_token,
                }
            if session.stage == "choice":
                t = condition.choice_transformation
                options = []
                for index, label in enumerate((condition.pair.low, condition.pair.high)):
                    board = viewer_presentation(self.games[str(label)], Role.PLAYER1, t).board
                    options.append(
                        {
                            "label": str(label),
                            "cells": [[list(c) for c in row] for row in board.cells],
                            "color": GAME_COLORS[index],
                        }
                    )
                state["choice"] = {"options": options}
            return state

    def export_trials(self) -> str:
        from .analysis import trials_to_csv

        with self._lock:
            return trials_to_csv(self.trials)

    def export_preferences(self) -> str:
        from .analysis import preferences_to_csv

        with self._lock:
            kept = [p for p in self.preferences if not self.sessions[p.session_id].dropped]
            return preferences_to_csv(kept)

    def export_summary(self) -> dict:
        with self._lock:
            kept = [p for p in self.preferences if not self.sessions[p.session_id].dropped]
            return report(self.trials, kept, self.space, self.analysis_config)

    def state_digest(self) -> dict:
        """Canonical state view for replay-equality checks."""
        with self._lock:
            return {
                "sessions": {
                    sid: {
                        "condition": s.condition_id,
                        "stage": s.stage,
                        "rounds_done": s.rounds_done,
                        "round_counter": s.round_counter,
                        "bonus": str(s.bonus),
                        "choice": s.choice,
                        "round": (
                            [s.current_round.round_token, s.current_round.table_id,
                             s.current_round.role.value]
                            if s.current_round
                            else None
                        ),
                        "reveal": s.reveal,
                        "abandoned": s.abandoned,
                        "dropped": s.dropped,
                    }
                    for sid, s in sorted(self.sessions.items())
                },
                "matchmaker": self.matchmaker.snapshot(),
                "trials": [t.trial_id for t in self.trials],
                "preferences": [(p.session_id, p.chosen) for p in self.preferences],
                "assignments": dict(sorted(self._assignment_counts.items())),
            }

    # -- event application (the replay path) -------------------------------------

    def _apply(self, event: Event) -> None:
        kind, p = event.kind, event.payload
        if kind == "session_created":
            self.sessions[p["session_id"]] = SessionState(
                session_id=p["session_id"],
                condition_id=p["condition_id"],
                last_active=event.ts,
            )
            self._assignment_counts[p["condition_id"]] += 1
        elif kind == "stage_advanced":
            session = self.sessions[p["session_id"]]
            session.stage = p["stage"]
            session.rounds_done = 0
            session.last_active = event.ts
        elif kind == "room_opened":
            self.matchmaker.apply(p | {"kind": kind})
            key = (p["label"], p["transformation"])
            self._current_rooms[key] = p["room_id"]
            self._room_generation[key] = self._room_generation.get(key, 0) + 1
        elif kind == "seated":
            seat = self.matchmaker.apply(p | {"kind": kind})
            session = self.sessions[p["session_id"]]
            room = self.matchmaker.rooms[p["room_id"]]
            session.current_round = RoundState(
                round_token=p["round_token"],
                stage=p["stage"],
                label=p["label"],
                role=Role(p["role"]),
                transformation=room.transformation,
                room_id=p["room_id"],
                table_id=p["table_id"],
            )
            session.last_active = event.ts
        elif kind == "move_submitted":
            self.matchmaker.apply(
                {
                    "kind": kind,
                    "room_id": p["room_id"],
                    "table_id": p["table_id"],
                    "session_id": p["session_id"],
                    "role": p["role"],
                    "action": p["action"],
                    "source": p["source"],
                }
            )
            session = self.sessions[p["session_id"]]
            session.current_round = None
            session.rounds_done += 1
            session.round_counter += 1
            session.last_active = event.ts
            if p["role"] == Role.PLAYER1.value:
                self._pending_round_meta[p["table_id"]] = {
                    "session": p["session_id"],
                    "stage": p["stage"],
                }
                if p["bonus"] is not None:
                    session.bonus += Fraction(p["bonus"])
                session.reveal = {
                    "status": "pending",
                    "your_role": Role.PLAYER1.value,
                    "bonus_estimate": float(Fraction(p["bonus"])) if p["bonus"] else None,
                }
        elif kind == "trial_resolved":
            self.trials.extend(Trial(**row) for row in p["rows"])
            session = self.sessions[p["p2_session"]]
            session.bonus += p["p2_bonus"]
            session.reveal = p["reveal"]
            self._pending_round_meta.pop(p["table_id"], None)
        elif kind == "preference_chosen":
            session = self.sessions[p["session_id"]]
            session.choice = p["chosen"]
            session.last_active = event.ts
            self.preferences.append(
                PreferenceRecord(
                    session_id=p["session_id"],
                    condition_id=p["condition_id"],
                    low=p["low"],
                    high=p["high"],
                    chosen=p["chosen"],
                    timestamp=event.ts,
                )
            )
        elif kind == "survey_submitted":
            session = self.sessions[p["session_id"]]
            session.survey = p["answers"]
            session.stage = "done"
        elif kind == "seat_released":
            if p["session_id"] in self.matchmaker.live_seats:
                self.matchmaker.apply({"kind": kind, "session_id": p["session_id"]})
            session = self.sessions[p["session_id"]]
            session.current_round = None
        elif kind == "session_abandoned":
            self.sessions[p["session_id"]].abandoned = True
        elif kind == "session_dropped":
            self.sessions[p["session_id"]].dropped = True
        else:
            raise ValueError(f"unknown engine event kind {kind}")


def replay_engine(
    space: GameSpace,
    events: list[Event],
    config: EngineConfig | None = None,
    analysis_config: AnalysisConfig | None = None,
) -> Engine:
    """Rebuild an engine from an event stream (e.g. a recovered log)."""
    engine = Engine(space, config=config, analysis_config=analysis_config)
    for event in events:
        engine._apply(event)
    return engine
