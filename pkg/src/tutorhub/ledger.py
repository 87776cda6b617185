"""Append-only conversation log and analytics aggregation.

Single-file sqlite store (":memory:" for tests) behind a small class so the
backend stays swappable. Every chat turn lands here before the gateway
acknowledges it; rows are never mutated or deleted — only payload text can
be blanked by the retention sweep, keeping aggregates intact. Percentiles
use the nearest-rank definition so aggregation is exactly recomputable from
raw rows.

Schema (field-for-field against the conversation-log contract):
  conversations: conversation_id, user_id, user_role, input_mode, agent_id,
                 group_id, opened_at, closed_at, feedback_rating, feedback_at
  turns:         conversation_id, turn_index (gapless), speaker, payload,
                 state_at_emit, model_used, latency_ms, unit_count,
                 curriculum strand/sub_strand/indicator, audio_ref, created_at
"""

from __future__ import annotations

import math
import sqlite3
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .curriculum import CurriculumRef

RETENTION_DAYS = 90


class LedgerError(Exception):
    """Base class for ledger failures."""


class UnknownConversation(LedgerError):
    pass


class ClosedConversation(LedgerError):
    pass


class OutOfRange(LedgerError):
    pass


class InvalidTurn(LedgerError):
    pass


_SCHEMA = """
CREATE TABLE IF NOT EXISTS conversations (
    conversation_id TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    user_role TEXT NOT NULL,
    input_mode TEXT NOT NULL CHECK (input_mode IN ('voice', 'text')),
    agent_id TEXT NOT NULL,
    group_id TEXT,
    opened_at REAL NOT NULL,
    closed_at REAL,
    feedback_rating INTEGER CHECK (feedback_rating BETWEEN 1 AND 5),
    feedback_at REAL
);
CREATE TABLE IF NOT EXISTS turns (
    conversation_id TEXT NOT NULL,
    turn_index INTEGER NOT NULL,
    speaker TEXT NOT NULL CHECK (speaker IN ('User', 'Agent', 'System')),
    payload TEXT NOT NULL,
    state_at_emit TEXT NOT NULL,
    model_used TEXT,
    latency_ms INTEGER CHECK (latency_ms >= 0),
    unit_count INTEGER,
    curriculum_strand TEXT,
    curriculum_sub_strand TEXT,
    curriculum_indicator TEXT,
    audio_ref TEXT,
    created_at REAL NOT NULL,
    PRIMARY KEY (conversation_id, turn_index),
    FOREIGN KEY (conversation_id) REFERENCES conversations(conversation_id)
);
CREATE INDEX IF NOT EXISTS idx_turns_created ON turns(created_at);
"""


@dataclass(frozen=True)
class TurnLog:
    conversation_id: str
    turn_index: int
    speaker: str
    payload: str
    state_at_emit: str
    model_used: Optional[str]
    latency_ms: Optional[int]
    unit_count: Optional[int]
    curriculum_reference: Optional[CurriculumRef]
    audio_ref: Optional[str]
    created_at: float


@dataclass(frozen=True)
class AnalyticsSnapshot:
    window_start: float
    window_end: float
    turn_count: int
    latency_p50_ms: int
    latency_p95_ms: int
    latency_max_ms: int
    unit_totals: dict[str, int]
    feedback_mean: Optional[float]

    def to_payload(self) -> dict:
        return {
            "window_start": self.window_start,
            "window_end": self.window_end,
            "turn_count": self.turn_count,
            "latency_p50_ms": self.latency_p50_ms,
            "latency_p95_ms": self.latency_p95_ms,
            "latency_max_ms": self.latency_max_ms,
            "unit_totals": dict(sorted(self.unit_totals.items())),
            "feedback_mean": self.feedback_mean,
        }


def nearest_rank(values: list[int], pct: float) -> int:
    if not values:
        return 0
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


class LedgerStore:
    """All writes commit before returning; per-store lock keeps turn_index gapless."""

    def __init__(self, path: str = ":memory:", clock: Callable[[], float] = time.time):
        self._clock = clock
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        if path != ":memory:":
            self._conn.execute("PRAGMA journal_mode=WAL;")
        self._conn.executescript(_SCHEMA)
        self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- conversations --------------------------------------------------------

    def open_conversation(
        self,
        conversation_id: str,
        user_id: str,
        user_role: str,
        input_mode: str,
        agent_id: str,
        group_id: Optional[str] = None,
    ) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO conversations (conversation_id, user_id, user_role, "
                "input_mode, agent_id, group_id, opened_at) VALUES (?,?,?,?,?,?,?)",
                (
                    conversation_id,
                    user_id,
                    user_role,
                    input_mode,
                    agent_id,
                    group_id,
                    self._clock(),
                ),
            )
            self._conn.commit()

    def close_conversation(self, conversation_id: str) -> None:
        with self._lock:
            self._require_open(conversation_id)
            self._conn.execute(
                "UPDATE conversations SET closed_at = ? WHERE conversation_id = ?",
                (self._clock(), conversation_id),
            )
            self._conn.commit()

    def conversation_owner(self, conversation_id: str) -> str:
        row = self._conn.execute(
            "SELECT user_id FROM conversations WHERE conversation_id = ?",
            (conversation_id,),
        ).fetchone()
        if row is None:
            raise UnknownConversation(f"unknown conversation: {conversation_id}")
        return row[0]

    def _require_open(self, conversation_id: str) -> None:
        row = self._conn.execute(
            "SELECT closed_at FROM conversations WHERE conversation_id = ?",
            (conversation_id,),
        ).fetchone()
        if row is None:
            raise UnknownConversation(f"unknown conversation: {conversation_id}")
        if row[0] is not None:
            raise ClosedConversation(f"conversation closed: {conversation_id}")

    # -- turns ------------------------------------------------------------------

    def log_turn(
        self,
        conversation_id: str,
        speaker: str,
        payload: str,
        state_at_emit: str,
        model_used: Optional[str] = None,
        latency_ms: Optional[int] = None,
        unit_count: Optional[int] = None,
        curriculum_reference: Optional[CurriculumRef] = None,
        audio_ref: Optional[str] = None,
    ) -> TurnLog:
        if (
            speaker == "Agent"
            and state_at_emit in ("Generating", "Delivered")
            and (model_used is None or latency_ms is None)
        ):
            raise InvalidTurn(
                f"agent turns at state {state_at_emit} require model_used and latency_ms"
            )
        if latency_ms is not None and latency_ms < 0:
            raise InvalidTurn("latency_ms must be non-negative")
        with self._lock:
            self._require_open(conversation_id)
            row = self._conn.execute(
                "SELECT COALESCE(MAX(turn_index), -1) FROM turns WHERE conversation_id = ?",
                (conversation_id,),
            ).fetchone()
            turn_index = row[0] + 1
            created_at = self._clock()
            ref = curriculum_reference
            self._conn.execute(
                "INSERT INTO turns VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    conversation_id,
                    turn_index,
                    speaker,
                    payload,
                    state_at_emit,
                    model_used,
                    latency_ms,
                    unit_count,
                    ref.strand if ref else None,
                    ref.sub_strand if ref else None,
                    ref.learning_indicator if ref else None,
                    audio_ref,
                    created_at,
                ),
            )
            self._conn.commit()
        return TurnLog(
            conversation_id,
            turn_index,
            speaker,
            payload,
            state_at_emit,
            model_used,
            latency_ms,
            unit_count,
            curriculum_reference,
            audio_ref,
            created_at,
        )

    def transcript(self, conversation_id: str) -> list[TurnLog]:
        if (
            self._conn.execute(
                "SELECT 1 FROM conversations WHERE conversation_id = ?",
                (conversation_id,),
            ).fetchone()
            is None
        ):
            raise UnknownConversation(f"unknown conversation: {conversation_id}")
        rows = self._conn.execute(
            "SELECT * FROM turns WHERE conversation_id = ? ORDER BY turn_index",
            (conversation_id,),
        ).fetchall()
        return [self._row_to_turn(row) for row in rows]

    @staticmethod
    def _row_to_turn(row) -> TurnLog:
        ref = None
        if row[8] is not None:
            ref = CurriculumRef(row[8], row[9], row[10])
        return TurnLog(
            conversation_id=row[0],
            turn_index=row[1],
            speaker=row[2],
            payload=row[3],
            state_at_emit=row[4],
            model_used=row[5],
            latency_ms=row[6],
            unit_count=row[7],
            curriculum_reference=ref,
            audio_ref=row[11],
            created_at=row[12],
        )

    def delivered_turns(self, conversation_id: str) -> list[TurnLog]:
        return [
            t for t in self.transcript(conversation_id) if t.state_at_emit == "Delivered"
        ]

    # -- feedback ---------------------------------------------------------------

    def submit_feedback(self, conversation_id: str, rating: int) -> None:
        """Last rating wins, stamped with the submission time."""
        if not isinstance(rating, int) or not 1 <= rating <= 5:
            raise OutOfRange(f"rating must be an integer in 1..5, got {rating!r}")
        with self._lock:
            if (
                self._conn.execute(
                    "SELECT 1 FROM conversations WHERE conversation_id = ?",
                    (conversation_id,),
                ).fetchone()
                is None
            ):
                raise UnknownConversation(f"unknown conversation: {conversation_id}")
            self._conn.execute(
                "UPDATE conversations SET feedback_rating = ?, feedback_at = ? "
                "WHERE conversation_id = ?",
                (rating, self._clock(), conversation_id),
            )
            self._conn.commit()

    # -- analytics ----------------------------------------------------------------

    def aggregate(self, window_start: float, window_end: float) -> AnalyticsSnapshot:
        """Exact aggregation over raw rows in [window_start, window_end)."""
        turn_rows = self._conn.execute(
            "SELECT latency_ms, unit_count, model_used FROM turns "
            "WHERE created_at >= ? AND created_at < ?",
            (window_start, window_end),
        ).fetchall()
        latencies = [row[0] for row in turn_rows if row[0] is not None]
        unit_totals: dict[str, int] = {}
        for _, units, model in turn_rows:
            if units is not None and model is not None:
                unit_totals[model] = unit_totals.get(model, 0) + units
        ratings = [
            row[0]
            for row in self._conn.execute(
                "SELECT feedback_rating FROM conversations "
                "WHERE feedback_at >= ? AND feedback_at < ? AND feedback_rating IS NOT NULL",
                (window_start, window_end),
            ).fetchall()
        ]
        return AnalyticsSnapshot(
            window_start=window_start,
            window_end=window_end,
            turn_count=len(turn_rows),
            latency_p50_ms=nearest_rank(latencies, 50),
            latency_p95_ms=nearest_rank(latencies, 95),
            latency_max_ms=max(latencies) if latencies else 0,
            unit_totals=unit_totals,
            feedback_mean=sum(ratings) / len(ratings) if ratings else None,
        )

    # -- retention ----------------------------------------------------------------

    def prune_payloads(self, before: float) -> int:
        """Blank payload text older than the cutoff; rows and metrics remain."""
        with self._lock:
            cursor = self._conn.execute(
                "UPDATE turns SET payload = '' WHERE created_at < ? AND payload != ''",
                (before,),
            )
            self._conn.commit()
            return cursor.rowcount

    # -- export ---------------------------------------------------------------------

    def export_transcript(self, conversation_id: str) -> dict:
        """Structured transcript document for one conversation."""
        turns = self.transcript(conversation_id)
        row = self._conn.execute(
            "SELECT user_id, user_role, input_mode, agent_id, group_id, opened_at "
            "FROM conversations WHERE conversation_id = ?",
            (conversation_id,),
        ).fetchone()
        return {
            "conversation_id": conversation_id,
            "user_id": row[0],
            "user_role": row[1],
            "input_mode": row[2],
            "agent_id": row[3],
            "group_id": row[4],
            "opened_at": row[5],
            "turns": [
                {
                    "turn_index": t.turn_index,
                    "speaker": t.speaker,
                    "payload": t.payload,
                    "state_at_emit": t.state_at_emit,
                    "model_used": t.model_used,
                    "latency_ms": t.latency_ms,
                    "curriculum_reference": (
                        t.curriculum_reference.path() if t.curriculum_reference else None
                    ),
                }
                for t in turns
            ],
        }
