"""User accounts, signed bearer tokens, and the role/action permission matrix.

Three roles exist: Teacher, StudentTeacher, Administrator. Authority flows
from a static permission matrix (administrators may do everything, student
teachers may not author agents, view analytics, or administer anything).
Tokens are HMAC-signed structured payloads with minimal claims; credentials
are stored only as salted scrypt digests.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional


class IdentityError(Exception):
    """Base class for identity failures."""


class DuplicateHandle(IdentityError):
    pass


class Unauthorized(IdentityError):
    pass


class InvalidCredentials(IdentityError):
    pass


class InvalidToken(IdentityError):
    pass


class ExpiredToken(InvalidToken):
    pass


class Role(str, Enum):
    TEACHER = "Teacher"
    STUDENT_TEACHER = "StudentTeacher"
    ADMINISTRATOR = "Administrator"


ACTIONS = (
    "create_agent",
    "chat",
    "create_group",
    "join_group",
    "view_group_transcripts",
    "view_analytics",
    "admin_curriculum",
    "admin_users",
    "admin_logs",
)

_ADMIN_ACTIONS = ("admin_curriculum", "admin_users", "admin_logs")
_STUDENT_DENIED = ("create_agent", "view_analytics") + _ADMIN_ACTIONS

PERMISSION_MATRIX: dict[tuple[Role, str], bool] = {}
for _action in ACTIONS:
    PERMISSION_MATRIX[(Role.ADMINISTRATOR, _action)] = True
    PERMISSION_MATRIX[(Role.TEACHER, _action)] = _action not in _ADMIN_ACTIONS
    PERMISSION_MATRIX[(Role.STUDENT_TEACHER, _action)] = _action not in _STUDENT_DENIED


@dataclass(frozen=True)
class User:
    user_id: str
    handle: str
    role: Role
    institution: str
    created_at: float


@dataclass(frozen=True)
class AccessToken:
    """Verified claims extracted from a bearer token."""

    user_id: str
    role: Role
    issued_at: int
    expires_at: int


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")


def _unb64(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + padding)


class IdentityService:
    """Registration, authentication, and authorization against the matrix.

    ``clock`` is injectable so expiry behaviour is testable. scrypt cost
    parameters are constructor arguments; tests may lower them, deployments
    should not.
    """

    TOKEN_PREFIX = "v1"

    def __init__(
        self,
        signing_key: Optional[bytes] = None,
        token_ttl_s: int = 8 * 3600,
        clock: Callable[[], float] = time.time,
        scrypt_n: int = 2**14,
        scrypt_r: int = 8,
    ) -> None:
        self._key = signing_key or secrets.token_bytes(32)
        self.token_ttl_s = token_ttl_s
        self._clock = clock
        self._scrypt_n = scrypt_n
        self._scrypt_r = scrypt_r
        self._lock = threading.Lock()
        self._users: dict[str, User] = {}  # by user_id
        self._by_handle: dict[str, str] = {}
        self._digests: dict[str, tuple[bytes, bytes]] = {}  # user_id -> (salt, digest)
        # Burned on unknown-handle logins so their timing matches bad-secret ones.
        self._dummy_salt = secrets.token_bytes(16)
        self._dummy_digest = self._digest("*", self._dummy_salt)

    def _digest(self, secret: str, salt: bytes) -> bytes:
        return hashlib.scrypt(
            secret.encode("utf-8"),
            salt=salt,
            n=self._scrypt_n,
            r=self._scrypt_r,
            p=1,
        )

    def bootstrap_admin(self, handle: str, secret: str, institution: str = "") -> User:
        """Seed the first administrator from deployment configuration."""
        with self._lock:
            existing = self._by_handle.get(handle)
            if existing is not None:
                return self._users[existing]
        return self._register(handle, secret, Role.ADMINISTRATOR, institution)

    def register(
        self,
        handle: str,
        secret: str,
        role: Role,
        actor: Optional[AccessToken] = None,
        institution: str = "",
    ) -> User:
        if role is Role.ADMINISTRATOR:
            if actor is None or actor.role is not Role.ADMINISTRATOR:
                raise Unauthorized("only an administrator may create administrators")
        return self._register(handle, secret, role, institution)

    def _register(self, handle: str, secret: str, role: Role, institution: str) -> User:
        handle = handle.strip()
        if not handle:
            raise IdentityError("handle must be non-empty")
        salt = secrets.token_bytes(16)
        digest = self._digest(secret, salt)
        with self._lock:
            if handle in self._by_handle:
                raise DuplicateHandle(f"handle already registered: {handle}")
            user = User(
                user_id=f"u-{secrets.token_hex(8)}",
                handle=handle,
                role=role,
                institution=institution,
                created_at=self._clock(),
            )
            self._users[user.user_id] = user
            self._by_handle[handle] = user.user_id
            self._digests[user.user_id] = (salt, digest)
        return user

    def get_user(self, user_id: str) -> User:
        try:
            return self._users[user_id]
        except KeyError:
            raise IdentityError(f"unknown user: {user_id}") from None

    def list_users(self) -> list[User]:
        with self._lock:
            return sorted(self._users.values(), key=lambda u: u.handle)

    def authenticate(self, handle: str, secret: str) -> str:
        """Return a signed bearer token; wrong secret and unknown handle are
        indistinguishable in both error and timing class."""
        user_id = self._by_handle.get(handle.strip())
        if user_id is None:
            self._digest(secret, self._dummy_salt)
            raise InvalidCredentials("invalid handle or secret")
        salt, expected = self._digests[user_id]
        candidate = self._digest(secret, salt)
        if not hmac.compare_digest(candidate, expected):
            raise InvalidCredentials("invalid handle or secret")
        return self.issue_token(self._users[user_id])

    def issue_token(self, user: User) -> str:
        issued = int(self._clock())
        payload = {
            "sub": user.user_id,
            "role": user.role.value,
            "iat": issued,
            "exp": issued + self.token_ttl_s,
        }
        body = _b64(
            json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        )
        sig = _b64(hmac.new(self._key, body.encode("ascii"), hashlib.sha256).digest())
        return f"{self.TOKEN_PREFIX}.{body}.{sig}"

    def verify(self, token_text: str) -> AccessToken:
        try:
            prefix, body, sig = token_text.split(".")
        except ValueError:
            raise InvalidToken("malformed token") from None
        if prefix != self.TOKEN_PREFIX:
            raise InvalidToken(f"unknown token version: {prefix}")
        try:
            body_bytes = body.encode("ascii")
        except UnicodeEncodeError:
            raise InvalidToken("token must be ASCII") from None
        expected = _b64(hmac.new(self._key, body_bytes, hashlib.sha256).digest())
        if not hmac.compare_digest(expected, sig):
            raise InvalidToken("bad signature")
        try:
            payload = json.loads(_unb64(body))
            token = AccessToken(
                user_id=payload["sub"],
                role=Role(payload["role"]),
                issued_at=int(payload["iat"]),
                expires_at=int(payload["exp"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidToken(f"bad payload: {exc}") from None
        if self._clock() >= token.expires_at:
            raise ExpiredToken("token expired")
        return token

    def authorize(self, token: AccessToken | str, action: str) -> tuple[bool, str]:
        """(allowed, reason); reason is empty when allowed."""
        if isinstance(token, str):
            token = self.verify(token)
        if action not in ACTIONS:
            return False, f"unknown action: {action}"
        if PERMISSION_MATRIX[(token.role, action)]:
            return True, ""
        return False, f"role {token.role.value} may not {action}"

    def require(self, token: AccessToken | str, action: str) -> AccessToken:
        if isinstance(token, str):
            token = self.verify(token)
        allowed, reason = self.authorize(token, action)
        if not allowed:
            raise Unauthorized(reason)
        return token
