"""Confirm-before-generate conversation state machine.

Each session walks clarify → summarize → confirm/revise → generate. The
transition function is pure and total over legal (state, event) pairs, and
the machine's one hard safety property is structural: the only edge into
Generating is a Confirm event accepted in AwaitingConfirmation, so nothing
can be generated that the user has not explicitly confirmed.

Sessions are immutable records; ``advance`` returns a new session plus the
actions the caller must perform (ask a question, run an inference, deliver a
response). Question text for clarifications comes from an injectable
``clarifier`` so the machine itself stays deterministic and enumerable.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Union

from .curriculum import CurriculumItem
from .prompts import PromptContext, compose

CLARIFICATION_BUDGET = 2
REVISION_CAP = 3
IDLE_TIMEOUT_S = 30 * 60


class DialogueError(Exception):
    """Base class for dialogue failures."""


class IllegalTransition(DialogueError):
    """Event not legal for the current state; the session is unchanged."""


class RevisionCapExceeded(DialogueError):
    """Revise beyond the cap; the session stays in AwaitingConfirmation."""


class DialogueState(str, Enum):
    AWAITING_INPUT = "AwaitingInput"
    CLARIFYING = "Clarifying"
    SUMMARIZING = "Summarizing"
    AWAITING_CONFIRMATION = "AwaitingConfirmation"
    GENERATING = "Generating"
    DELIVERED = "Delivered"
    FAILED = "Failed"


TERMINAL_STATES = (DialogueState.DELIVERED, DialogueState.FAILED)


# --- events -----------------------------------------------------------------


@dataclass(frozen=True)
class UserUtterance:
    text: str
    voice: bool = False


@dataclass(frozen=True)
class ClarificationAnswer:
    text: str
    complete: bool = False  # user signalled there is nothing more to clarify


@dataclass(frozen=True)
class SummaryReady:
    text: str


@dataclass(frozen=True)
class Confirm:
    pass


@dataclass(frozen=True)
class Revise:
    text: str


@dataclass(frozen=True)
class ModelResponse:
    text: str


@dataclass(frozen=True)
class ProviderFailure:
    reason: str


DialogueEvent = Union[
    UserUtterance,
    ClarificationAnswer,
    SummaryReady,
    Confirm,
    Revise,
    ModelResponse,
    ProviderFailure,
]


# --- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class AskClarification:
    question: str


@dataclass(frozen=True)
class RequestSummary:
    pass


@dataclass(frozen=True)
class PresentSummary:
    text: str


@dataclass(frozen=True)
class RequestGeneration:
    pass


@dataclass(frozen=True)
class DeliverResponse:
    text: str


@dataclass(frozen=True)
class ReportError:
    reason: str


DialogueAction = Union[
    AskClarification,
    RequestSummary,
    PresentSummary,
    RequestGeneration,
    DeliverResponse,
    ReportError,
]


@dataclass(frozen=True)
class TurnRecord:
    speaker: str  # User | Agent | System
    text: str
    state: DialogueState


@dataclass(frozen=True)
class DialogueSession:
    session_id: str
    conversation_id: str
    agent_id: str
    user_id: str
    state: DialogueState = DialogueState.AWAITING_INPUT
    input_mode: str = "text"
    group_id: Optional[str] = None
    transcript: tuple[TurnRecord, ...] = ()
    clarification_budget_remaining: int = CLARIFICATION_BUDGET
    revision_count: int = 0
    revision_notes: tuple[str, ...] = ()
    last_event_at: float = 0.0

    def user_text(self) -> str:
        """Everything the user has supplied so far, in order."""
        parts = [t.text for t in self.transcript if t.speaker == "User"]
        parts.extend(self.revision_notes)
        return " ".join(parts)


def new_session(
    agent_id: str,
    user_id: str,
    input_mode: str = "text",
    group_id: Optional[str] = None,
    clarification_budget: int = CLARIFICATION_BUDGET,
    now: float = 0.0,
) -> DialogueSession:
    """Fresh session in AwaitingInput. Existence/authorization checks on the
    agent and user belong to the caller (the gateway wires those modules)."""
    return DialogueSession(
        session_id=f"s-{secrets.token_hex(8)}",
        conversation_id=f"c-{secrets.token_hex(8)}",
        agent_id=agent_id,
        user_id=user_id,
        input_mode=input_mode,
        group_id=group_id,
        clarification_budget_remaining=clarification_budget,
        last_event_at=now,
    )


Clarifier = Callable[[DialogueSession], str]


def default_clarifier(session: DialogueSession) -> str:
    """Deterministic fallback clarification question."""
    return (
        "Could you say a little more about what the learners should be able "
        "to do by the end, so I can match the right learning indicator?"
    )


def expire_if_idle(session: DialogueSession, now: float) -> DialogueSession:
    """Sessions idle past the timeout fail before processing anything new."""
    if session.state in TERMINAL_STATES:
        return session
    if session.last_event_at and now - session.last_event_at > IDLE_TIMEOUT_S:
        return replace(
            session,
            state=DialogueState.FAILED,
            transcript=session.transcript
            + (TurnRecord("System", "session timed out", DialogueState.FAILED),),
            last_event_at=now,
        )
    return session


def advance(
    session: DialogueSession,
    event: DialogueEvent,
    clarifier: Clarifier = default_clarifier,
    now: Optional[float] = None,
) -> tuple[DialogueSession, list[DialogueAction]]:
    """Apply one event; returns the successor session and emitted actions.

    Raises IllegalTransition (session unchanged) for events that are not
    legal in the current state, and RevisionCapExceeded when Revise would
    pass the cap (the session stays in AwaitingConfirmation).
    """
    state = session.state
    stamp = {} if now is None else {"last_event_at": now}

    if isinstance(event, ProviderFailure):
        failed = replace(
            session,
            state=DialogueState.FAILED,
            transcript=session.transcript
            + (TurnRecord("System", f"provider failure: {event.reason}", DialogueState.FAILED),),
            **stamp,
        )
        return failed, [ReportError(event.reason)]

    if state is DialogueState.AWAITING_INPUT and isinstance(event, UserUtterance):
        turn = TurnRecord("User", event.text, state)
        if session.clarification_budget_remaining > 0:
            nxt = replace(
                session,
                state=DialogueState.CLARIFYING,
                transcript=session.transcript + (turn,),
                clarification_budget_remaining=session.clarification_budget_remaining - 1,
                **stamp,
            )
            question = clarifier(nxt)
            nxt = replace(
                nxt,
                transcript=nxt.transcript
                + (TurnRecord("Agent", question, DialogueState.CLARIFYING),),
            )
            return nxt, [AskClarification(question)]
        nxt = replace(
            session,
            state=DialogueState.SUMMARIZING,
            transcript=session.transcript + (turn,),
            **stamp,
        )
        return nxt, [RequestSummary()]

    if state is DialogueState.CLARIFYING and isinstance(event, ClarificationAnswer):
        turn = TurnRecord("User", event.text, state)
        if session.clarification_budget_remaining > 0 and not event.complete:
            nxt = replace(
                session,
                transcript=session.transcript + (turn,),
                clarification_budget_remaining=session.clarification_budget_remaining - 1,
                **stamp,
            )
            question = clarifier(nxt)
            nxt = replace(
                nxt,
                transcript=nxt.transcript
                + (TurnRecord("Agent", question, DialogueState.CLARIFYING),),
            )
            return nxt, [AskClarification(question)]
        nxt = replace(
            session,
            state=DialogueState.SUMMARIZING,
            transcript=session.transcript + (turn,),
            **stamp,
        )
        return nxt, [RequestSummary()]

    if state is DialogueState.SUMMARIZING and isinstance(event, SummaryReady):
        nxt = replace(
            session,
            state=DialogueState.AWAITING_CONFIRMATION,
            transcript=session.transcript
            + (TurnRecord("Agent", event.text, DialogueState.AWAITING_CONFIRMATION),),
            **stamp,
        )
        return nxt, [PresentSummary(event.text)]

    if state is DialogueState.AWAITING_CONFIRMATION and isinstance(event, Confirm):
        nxt = replace(
            session,
            state=DialogueState.GENERATING,
            transcript=session.transcript
            + (TurnRecord("User", "[confirmed]", DialogueState.GENERATING),),
            **stamp,
        )
        return nxt, [RequestGeneration()]

    if state is DialogueState.AWAITING_CONFIRMATION and isinstance(event, Revise):
        if session.revision_count + 1 > REVISION_CAP:
            raise RevisionCapExceeded(
                f"revision cap of {REVISION_CAP} reached for {session.session_id}"
            )
        nxt = replace(
            session,
            state=DialogueState.SUMMARIZING,
            transcript=session.transcript
            + (TurnRecord("User", event.text, DialogueState.SUMMARIZING),),
            revision_count=session.revision_count + 1,
            revision_notes=session.revision_notes + (event.text,),
            **stamp,
        )
        return nxt, [RequestSummary()]

    if state is DialogueState.GENERATING and isinstance(event, ModelResponse):
        nxt = replace(
            session,
            state=DialogueState.DELIVERED,
            transcript=session.transcript
            + (TurnRecord("Agent", event.text, DialogueState.DELIVERED),),
            **stamp,
        )
        return nxt, [DeliverResponse(event.text)]

    raise IllegalTransition(
        f"event {type(event).__name__} is not legal in state {state.value}"
    )


def build_summary_request(session: DialogueSession, ctx: PromptContext):
    """Composed prompt for the summary inference; embeds the full
    clarification Q&A and any revision notes verbatim via the history window."""
    history = tuple((t.speaker, t.text) for t in session.transcript[-12:])
    summary_ctx = replace(ctx, history_window=history)
    return compose(summary_ctx)


def validated_clarifier(
    generate: Callable[[DialogueSession], str],
    hits: Sequence[tuple[CurriculumItem, float]],
) -> Clarifier:
    """Wrap a model-backed question generator with the curriculum check:
    the question must cite at least one retrieved ref path or indicator,
    otherwise a deterministic template built from the top hit is used."""

    def clarify(session: DialogueSession) -> str:
        try:
            question = generate(session)
        except Exception:
            question = ""
        if question and hits:
            for item, _ in hits:
                if item.ref().path() in question or item.learning_indicator in question:
                    return question
        if hits:
            top = hits[0][0]
            return (
                f"To ground this in {top.ref().path()}, what should the "
                "learners do or produce by the end of the activity?"
            )
        return question or default_clarifier(session)

    return clarify


# --- transcript replay format ------------------------------------------------

_EVENT_TYPES = {
    "UserUtterance": UserUtterance,
    "ClarificationAnswer": ClarificationAnswer,
    "SummaryReady": SummaryReady,
    "Confirm": Confirm,
    "Revise": Revise,
    "ModelResponse": ModelResponse,
    "ProviderFailure": ProviderFailure,
}


def dump_events(events: Sequence[DialogueEvent]) -> str:
    """Ordered event log, one JSON object per line: {"event": name, ...fields}."""
    lines = []
    for event in events:
        entry = {"event": type(event).__name__}
        entry.update(vars(event))
        lines.append(json.dumps(entry, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def load_events(text: str) -> list[DialogueEvent]:
    events = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            cls = _EVENT_TYPES[entry.pop("event")]
            events.append(cls(**entry))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DialogueError(f"bad replay line {line_no}: {exc}") from exc
    return events
