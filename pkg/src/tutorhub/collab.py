"""Passkey-scoped group sessions with a hard five-member cap.

A group is unlocked by a high-entropy passkey: 26 characters over the
32-symbol Crockford alphabet (no I, L, O, U), about 130 bits. Only a digest
of the key is stored, lookups hash the probe and compare digests in constant
time, and membership mutation is serialized per group so no interleaving of
joins can ever push a group past five humans (the creator counts, the AI
agent does not).
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .identity import Role, Unauthorized, User

PASSKEY_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
PASSKEY_LENGTH = 26
MAX_MEMBERS = 5


class CollabError(Exception):
    """Base class for collaboration failures."""


class InvalidPasskey(CollabError):
    pass


class RevokedPasskey(CollabError):
    pass


class GroupFull(CollabError):
    pass


class UnknownGroup(CollabError):
    pass


def mint_passkey() -> str:
    return "".join(secrets.choice(PASSKEY_ALPHABET) for _ in range(PASSKEY_LENGTH))


def _digest(key_text: str) -> bytes:
    return hashlib.sha256(key_text.encode("utf-8")).digest()


@dataclass(frozen=True)
class Passkey:
    """Returned once at mint time; the service retains only the digest."""

    key_text: str
    group_id: str
    issued_at: float
    revoked: bool = False


@dataclass
class Group:
    group_id: str
    creator_id: str
    agent_id: str
    members: set[str]
    created_at: float
    student_created: bool = False
    conversation_ids: list[str] = field(default_factory=list)
    max_members: int = MAX_MEMBERS


@dataclass
class _PasskeyRecord:
    digest: bytes
    group_id: str
    issued_at: float
    revoked: bool = False


class GroupService:
    def __init__(self, clock: Callable[[], float] = time.time):
        self._clock = clock
        self._registry_lock = threading.Lock()
        self._groups: dict[str, Group] = {}
        self._group_locks: dict[str, threading.Lock] = {}
        self._passkeys: dict[bytes, _PasskeyRecord] = {}
        self._dummy_digest = _digest(mint_passkey())

    def create_group(self, creator: User, agent_id: str) -> tuple[Group, Passkey]:
        """New group with the creator as sole member plus a fresh passkey.
        Peer-led groups by student teachers are allowed but flagged."""
        now = self._clock()
        group = Group(
            group_id=f"g-{secrets.token_hex(8)}",
            creator_id=creator.user_id,
            agent_id=agent_id,
            members={creator.user_id},
            created_at=now,
            student_created=creator.role is Role.STUDENT_TEACHER,
        )
        key_text = mint_passkey()
        record = _PasskeyRecord(
            digest=_digest(key_text), group_id=group.group_id, issued_at=now
        )
        with self._registry_lock:
            self._groups[group.group_id] = group
            self._group_locks[group.group_id] = threading.Lock()
            self._passkeys[record.digest] = record
        return group, Passkey(
            key_text=key_text, group_id=group.group_id, issued_at=now
        )

    def get_group(self, group_id: str) -> Group:
        group = self._groups.get(group_id)
        if group is None:
            raise UnknownGroup(f"unknown group: {group_id}")
        return group

    def _lookup_passkey(self, key_text: str) -> _PasskeyRecord:
        probe = _digest(key_text)
        record = self._passkeys.get(probe)
        if record is None or not hmac.compare_digest(probe, record.digest):
            # burn a comparison so misses cost the same as hits
            hmac.compare_digest(probe, self._dummy_digest)
            raise InvalidPasskey("passkey not recognized")
        return record

    def join_group(self, user_id: str, key_text: str) -> Group:
        """Validated, idempotent, capacity-safe join."""
        record = self._lookup_passkey(key_text)
        if record.revoked:
            raise RevokedPasskey("passkey has been revoked")
        group = self.get_group(record.group_id)
        with self._group_locks[group.group_id]:
            if user_id in group.members:
                return group
            if len(group.members) >= group.max_members:
                raise GroupFull(
                    f"group {group.group_id} already has {group.max_members} members"
                )
            group.members.add(user_id)
        return group

    def revoke_passkey(self, caller: User, group_id: str) -> None:
        """Creator or administrator invalidates the key; members remain."""
        group = self.get_group(group_id)
        if caller.user_id != group.creator_id and caller.role is not Role.ADMINISTRATOR:
            raise Unauthorized("only the creator or an administrator may revoke")
        with self._registry_lock:
            for record in self._passkeys.values():
                if record.group_id == group_id:
                    record.revoked = True

    def attach_conversation(self, group_id: str, conversation_id: str) -> None:
        group = self.get_group(group_id)
        with self._group_locks[group_id]:
            if conversation_id not in group.conversation_ids:
                group.conversation_ids.append(conversation_id)

    def can_oversee(self, caller: User, group_id: str) -> bool:
        group = self.get_group(group_id)
        if caller.role is Role.ADMINISTRATOR:
            return True
        if caller.user_id == group.creator_id:
            return True
        return caller.role is Role.TEACHER and caller.user_id in group.members

    def oversight_view(self, caller: User, group_id: str, ledger) -> dict:
        """Read-only transcripts plus per-member turn counts for the group."""
        group = self.get_group(group_id)
        if not self.can_oversee(caller, group_id):
            raise Unauthorized(
                "oversight requires the creator, a teacher member, or an administrator"
            )
        transcripts = {}
        counts: dict[str, int] = {member: 0 for member in group.members}
        for conversation_id in group.conversation_ids:
            turns = ledger.transcript(conversation_id)
            transcripts[conversation_id] = turns
            owner = ledger.conversation_owner(conversation_id)
            for turn in turns:
                if turn.speaker == "User" and owner in counts:
                    counts[owner] += 1
        return {
            "group_id": group_id,
            "members": sorted(group.members),
            "transcripts": transcripts,
            "participation": counts,
        }
