"""Randomized operation fuzzing of the engine with replay-equality checks."""

import random
from collections import Counter

from coopcube.engine import (
    DuplicateSubmissionError,
    Engine,
    EngineConfig,
    InvalidChoiceError,
    UnknownSessionError,
    WrongStageError,
    replay_engine,
)
from coopcube.matchmaking import RoomFullError

EXPECTED_REJECTIONS = (
    WrongStageError,
    InvalidChoiceError,
    DuplicateSubmissionError,
    UnknownSessionError,
    RoomFullError,
)


class EngineFuzzer:
    def __init__(self, space, n_ops: int, seed: int, clock):
        self.space = space
        self.n_ops = n_ops
        self.rng = random.Random(seed)
        self.clock = clock
        self.config = EngineConfig(seed=seed, tables_per_room=16, seeds_per_room=2,
                                   seat_timeout=300.0)
        self.engine = Engine(space, self.config, clock=clock)
        self.session_ids: list[str] = []

    def random_session(self) -> str:
        if not self.session_ids or self.rng.random() < 0.02:
            return f"ghost{self.rng.randrange(100)}"
        # Bias toward a recent cohort so sessions progress through stages.
        if self.rng.random() < 0.8:
            recent = self.session_ids[-24:]
            return self.rng.choice(recent)
        return self.rng.choice(self.session_ids)

    def step(self) -> None:
        engine, rng = self.engine, self.rng
        op = rng.random()
        try:
            if op < 0.04 or not self.session_ids:
                info = engine.create_session()
                self.session_ids.append(info["session_id"])
            elif op < 0.20:
                engine.advance(self.random_session())
            elif op < 0.75:
                sid = self.random_session()
                session = engine.sessions.get(sid)
                if session is not None and session.stage in ("tutorial", "quiz") and rng.random() < 0.8:
                    engine.advance(sid)
                    return
                if session is not None and session.current_round is not None and rng.random() < 0.9:
                    token = session.current_round.round_token
                else:
                    token = f"bogus:{rng.randrange(10)}"
                engine.submit_action(sid, rng.randrange(2), token)
            elif op < 0.87:
                sid = self.random_session()
                session = engine.sessions.get(sid)
                if session is not None and rng.random() < 0.8:
                    pair = engine.conditions[session.condition_id].pair
                    label = str(pair.high if rng.random() < 0.5 else pair.low)
                else:
                    label = "777"
                engine.submit_preference(sid, label)
            elif op < 0.94:
                engine.submit_survey(self.random_session(), {"k": "v"})
            elif op < 0.96:
                engine.drop_session(self.random_session())
            else:
                # Mostly small jumps; the rare big one triggers abandonment sweeps.
                jump = 600.0 if rng.random() < 0.1 else rng.choice((1.0, 5.0, 30.0))
                self.clock.tick(jump)
        except EXPECTED_REJECTIONS:
            pass
        self.clock.tick(0.25)

    def run(self) -> Engine:
        for _ in range(self.n_ops):
            self.step()
        return self.engine

    def check_invariants(self) -> None:
        engine = self.engine
        # Trials only in play stages and never more than rounds_per_stage
        # rows per session per stage.
        per_stage: Counter = Counter()
        for t in engine.trials:
            assert t.stage in ("stage1", "stage2", "stage4"), t
            per_stage[(t.session_id, t.stage)] += 1
        assert all(n <= self.config.rounds_per_stage for n in per_stage.values())
        # Replay equality over the full log.
        rebuilt = replay_engine(self.space, engine.log.events(), self.config)
        assert rebuilt.state_digest() == engine.state_digest()
        # Exports are byte-deterministic across replays.
        assert rebuilt.export_trials() == engine.export_trials()
        assert rebuilt.export_preferences() == engine.export_preferences()
        # Truncating at any event boundary yields a replayable prefix.
        events = engine.log.events()
        for _ in range(10):
            cut = self.rng.randrange(len(events) + 1)
            replay_engine(self.space, events[:cut], self.config)
