"""Stable machine error codes: every module error maps to exactly one code.

The code set is closed; anything unmapped is a 500 INTERNAL, which the test
suite treats as a bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import agents, collab, curriculum, dialogue, identity, ledger, router, voice
from ..prompts import InvalidContext, PromptError
from .frames import FrameError


@dataclass(frozen=True)
class ApiError(Exception):
    code: str
    http_status: int
    message: str
    detail: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


# exception class -> (code, http status). Order matters: subclasses first.
_MAPPING: list[tuple[type, tuple[str, int]]] = [
    (identity.DuplicateHandle, ("DUPLICATE_HANDLE", 409)),
    (identity.InvalidCredentials, ("INVALID_CREDENTIALS", 401)),
    (identity.ExpiredToken, ("EXPIRED_TOKEN", 401)),
    (identity.InvalidToken, ("INVALID_TOKEN", 401)),
    (identity.Unauthorized, ("UNAUTHORIZED", 403)),
    (curriculum.MalformedDocument, ("MALFORMED_DOCUMENT", 400)),
    (curriculum.EmptyQuery, ("EMPTY_QUERY", 400)),
    (curriculum.UnknownRef, ("UNKNOWN_REF", 404)),
    (curriculum.UnknownId, ("UNKNOWN_ID", 404)),
    (agents.UnknownAgent, ("UNKNOWN_AGENT", 404)),
    (agents.InvalidConfig, ("INVALID_CONFIG", 400)),
    (agents.UnknownCurriculumScope, ("UNKNOWN_CURRICULUM_SCOPE", 400)),
    (dialogue.IllegalTransition, ("ILLEGAL_TRANSITION", 409)),
    (dialogue.RevisionCapExceeded, ("REVISION_CAP_EXCEEDED", 409)),
    (router.NoFeasibleProvider, ("NO_FEASIBLE_PROVIDER", 503)),
    (router.AllProvidersFailed, ("PROVIDER_FAILED", 502)),
    (router.UnknownProvider, ("UNKNOWN_PROVIDER", 404)),
    (collab.InvalidPasskey, ("INVALID_PASSKEY", 403)),
    (collab.RevokedPasskey, ("REVOKED_PASSKEY", 403)),
    (collab.GroupFull, ("GROUP_FULL", 409)),
    (collab.UnknownGroup, ("UNKNOWN_GROUP", 404)),
    (ledger.UnknownConversation, ("UNKNOWN_CONVERSATION", 404)),
    (ledger.ClosedConversation, ("CLOSED_CONVERSATION", 409)),
    (ledger.OutOfRange, ("OUT_OF_RANGE", 400)),
    (ledger.InvalidTurn, ("INVALID_TURN", 400)),
    (voice.UnreadableAudio, ("UNREADABLE_AUDIO", 400)),
    (voice.UnknownProfile, ("UNKNOWN_PROFILE", 404)),
    (voice.ConsentMissing, ("CONSENT_MISSING", 403)),
    (voice.SampleTooShort, ("SAMPLE_TOO_SHORT", 400)),
    (voice.SampleTooLong, ("SAMPLE_TOO_LONG", 400)),
    (voice.EmptyReference, ("EMPTY_REFERENCE", 400)),
    (voice.VoiceProviderFailure, ("PROVIDER_FAILED", 502)),
    (InvalidContext, ("INVALID_CONTEXT", 400)),
    (PromptError, ("PROMPT_CONFIG_ERROR", 400)),
    (FrameError, ("BAD_FRAME", 400)),
]

ERROR_CODES = sorted(
    {code for _, (code, _) in _MAPPING}
    | {"NOT_FOUND", "NOT_IMPLEMENTED", "BAD_REQUEST", "PAYLOAD_TOO_LARGE",
       "SESSION_TIMEOUT", "UNKNOWN_SESSION", "BACKPRESSURE_OVERFLOW",
       "BAD_SEQUENCE", "INTERNAL"}
)


def map_exception(exc: Exception) -> ApiError:
    if isinstance(exc, ApiError):
        return exc
    for exc_type, (code, status) in _MAPPING:
        if isinstance(exc, exc_type):
            return ApiError(code=code, http_status=status, message=str(exc))
    return ApiError(code="INTERNAL", http_status=500, message=str(exc))


def not_found(path: str) -> ApiError:
    return ApiError("NOT_FOUND", 404, f"no such route: {path}")


def not_implemented(feature: str) -> ApiError:
    return ApiError("NOT_IMPLEMENTED", 501, f"{feature} is planned but not available")


def bad_request(message: str) -> ApiError:
    return ApiError("BAD_REQUEST", 400, message)
