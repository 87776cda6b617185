"""Teacher-authored assistant configurations and their lifecycle.

An agent pins a focus area (subject + grade level), a tone, a language, an
optional voice profile, and a guardrail set that always contains the
platform defaults plus a scope rule snapshotted from the current corpus.
Deletion is soft so conversation records keep resolving their agent.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .curriculum import CurriculumIndex, GradeLevel
from .identity import Role, Unauthorized, User
from .prompts import (
    GuardrailRule,
    RuleKind,
    SUPPORTED_LANGUAGES,
    build_scope_rule,
    platform_default_rules,
)
from .textnorm import normalize

TONE_MAX_CHARS = 500


class AgentError(Exception):
    """Base class for agent failures."""


class UnknownAgent(AgentError):
    pass


class InvalidConfig(AgentError):
    def __init__(self, reasons: list[str]):
        super().__init__("; ".join(reasons))
        self.reasons = list(reasons)


class UnknownCurriculumScope(AgentError):
    pass


@dataclass(frozen=True)
class AgentDraft:
    display_name: str
    subject: str
    grade_level: GradeLevel
    tone_descriptor: str = "clear, warm, encouraging"
    language: str = "en"
    guardrails: tuple[GuardrailRule, ...] = ()
    voice_profile_id: Optional[str] = None


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    owner_id: str
    display_name: str
    subject: str
    grade_level: GradeLevel
    tone_descriptor: str
    guardrails: tuple[GuardrailRule, ...]
    language: str
    voice_profile_id: Optional[str]
    created_at: float
    updated_at: float
    deleted: bool = False


def validate_config(draft: AgentDraft) -> list[str]:
    """Every violation, not just the first; empty list means valid."""
    reasons = []
    if not draft.display_name.strip():
        reasons.append("display_name must be non-empty")
    if not isinstance(draft.grade_level, GradeLevel):
        reasons.append(f"grade_level must be one of {[g.value for g in GradeLevel]}")
    if draft.language not in SUPPORTED_LANGUAGES:
        reasons.append(
            f"language must be one of {list(SUPPORTED_LANGUAGES)}, got {draft.language!r}"
        )
    if len(draft.tone_descriptor) > TONE_MAX_CHARS:
        reasons.append(f"tone_descriptor exceeds {TONE_MAX_CHARS} characters")
    if not draft.subject.strip():
        reasons.append("subject must be non-empty")
    return reasons


class AgentRegistry:
    """In-memory agent store bound to a corpus for scope validation."""

    def __init__(
        self,
        corpus_index: Callable[[], CurriculumIndex],
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._corpus_index = corpus_index
        self._clock = clock
        self._lock = threading.Lock()
        self._agents: dict[str, AgentConfig] = {}

    def _scope_items(self, subject: str, grade_level: GradeLevel):
        subject_key = normalize(subject)
        return [
            item
            for item in self._corpus_index().items()
            if normalize(item.subject) == subject_key and item.grade_level is grade_level
        ]

    def create_agent(self, owner: User, draft: AgentDraft) -> AgentConfig:
        if owner.role not in (Role.TEACHER, Role.ADMINISTRATOR):
            raise Unauthorized(f"role {owner.role.value} may not create agents")
        reasons = validate_config(draft)
        if reasons:
            raise InvalidConfig(reasons)
        scope_items = self._scope_items(draft.subject, draft.grade_level)
        if not scope_items:
            raise UnknownCurriculumScope(
                f"no curriculum items for {draft.subject} / {draft.grade_level.value}"
            )
        guardrails = self._merge_guardrails(draft, scope_items)
        now = self._clock()
        agent = AgentConfig(
            agent_id=f"a-{secrets.token_hex(8)}",
            owner_id=owner.user_id,
            display_name=draft.display_name.strip(),
            subject=draft.subject.strip(),
            grade_level=draft.grade_level,
            tone_descriptor=draft.tone_descriptor,
            guardrails=guardrails,
            language=draft.language,
            voice_profile_id=draft.voice_profile_id,
            created_at=now,
            updated_at=now,
        )
        with self._lock:
            self._agents[agent.agent_id] = agent
        return agent

    def _merge_guardrails(self, draft: AgentDraft, scope_items) -> tuple[GuardrailRule, ...]:
        merged: dict[str, GuardrailRule] = {}
        for rule in platform_default_rules():
            merged[rule.rule_id] = rule
        scope_rule = build_scope_rule(draft.subject, draft.grade_level, scope_items)
        merged[scope_rule.rule_id] = scope_rule
        for rule in draft.guardrails:
            merged.setdefault(rule.rule_id, rule)
        return tuple(merged.values())

    def get(self, agent_id: str, include_deleted: bool = False) -> AgentConfig:
        agent = self._agents.get(agent_id)
        if agent is None or (agent.deleted and not include_deleted):
            raise UnknownAgent(f"unknown agent: {agent_id}")
        return agent

    def list_agents(self, caller: User) -> list[AgentConfig]:
        with self._lock:
            agents = [a for a in self._agents.values() if not a.deleted]
        if caller.role is Role.ADMINISTRATOR:
            return sorted(agents, key=lambda a: a.created_at)
        return sorted(
            (a for a in agents if a.owner_id == caller.user_id),
            key=lambda a: a.created_at,
        )

    def update_agent(self, caller: User, agent_id: str, **changes) -> AgentConfig:
        """Last write wins; agent_id and owner_id are immutable."""
        for immutable in ("agent_id", "owner_id", "created_at"):
            if immutable in changes:
                raise InvalidConfig([f"{immutable} is immutable"])
        with self._lock:
            agent = self._agents.get(agent_id)
            if agent is None or agent.deleted:
                raise UnknownAgent(f"unknown agent: {agent_id}")
            if caller.role is not Role.ADMINISTRATOR and agent.owner_id != caller.user_id:
                raise Unauthorized("only the owner or an administrator may update")
            updated_at = max(self._clock(), agent.updated_at + 1e-6)
            updated = replace(agent, updated_at=updated_at, **changes)
            self._agents[agent_id] = updated
        return updated

    def delete_agent(self, caller: User, agent_id: str) -> None:
        """Soft delete: the tombstone keeps ledger references resolvable."""
        with self._lock:
            agent = self._agents.get(agent_id)
            if agent is None or agent.deleted:
                raise UnknownAgent(f"unknown agent: {agent_id}")
            if caller.role is not Role.ADMINISTRATOR and agent.owner_id != caller.user_id:
                raise Unauthorized("only the owner or an administrator may delete")
            self._agents[agent_id] = replace(
                agent, deleted=True, updated_at=max(self._clock(), agent.updated_at + 1e-6)
            )

    def export_agent(self, agent_id: str) -> str:
        """Shareable text document for moving an agent between deployments.

        Scope-rule catalogs are deployment-specific, so only teacher-added
        rules travel; the importing side rebuilds defaults and scope.
        """
        agent = self.get(agent_id)
        default_ids = {r.rule_id for r in platform_default_rules()} | {"agent.scope"}
        extra_rules = [
            {
                "rule_id": r.rule_id,
                "description": r.description,
                "kind": r.kind.value,
                "pattern": r.pattern,
                "trigger": r.trigger,
                "required": r.required,
            }
            for r in agent.guardrails
            if r.rule_id not in default_ids
        ]
        return json.dumps(
            {
                "display_name": agent.display_name,
                "subject": agent.subject,
                "grade_level": agent.grade_level.value,
                "tone_descriptor": agent.tone_descriptor,
                "language": agent.language,
                "guardrails": extra_rules,
            },
            ensure_ascii=False,
            indent=2,
        )

    def import_agent(self, owner: User, document: str) -> AgentConfig:
        try:
            raw = json.loads(document)
            draft = AgentDraft(
                display_name=raw["display_name"],
                subject=raw["subject"],
                grade_level=GradeLevel(raw["grade_level"]),
                tone_descriptor=raw.get("tone_descriptor", ""),
                language=raw.get("language", "en"),
                guardrails=tuple(
                    GuardrailRule(
                        rule_id=r["rule_id"],
                        description=r.get("description", ""),
                        kind=RuleKind(r["kind"]),
                        pattern=r.get("pattern", ""),
                        trigger=r.get("trigger", ""),
                        required=r.get("required", ""),
                    )
                    for r in raw.get("guardrails", [])
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidConfig([f"unparseable agent document: {exc}"]) from exc
        return self.create_agent(owner, draft)


PLATFORM_ASSISTANT_SEEDS = (
    AgentDraft(
        display_name="Early Grade Assistant",
        subject="Mathematics",
        grade_level=GradeLevel.EARLY_GRADE,
        tone_descriptor="playful, patient, bilingual English and Twi support",
        language="en",
    ),
    AgentDraft(
        display_name="Upper Primary Assistant",
        subject="Science",
        grade_level=GradeLevel.UPPER_PRIMARY,
        tone_descriptor="inquiry-led, cooperative, hands-on",
        language="en",
    ),
    AgentDraft(
        display_name="JHS Subject Specialist",
        subject="Mathematics",
        grade_level=GradeLevel.JHS,
        tone_descriptor="focused, rigorous, exam-aware",
        language="en",
    ),
)


def seed_platform_agents(registry: AgentRegistry, owner: User) -> list[AgentConfig]:
    """Create the leveled platform assistants whose scope the corpus covers."""
    created = []
    for draft in PLATFORM_ASSISTANT_SEEDS:
        try:
            created.append(registry.create_agent(owner, draft))
        except UnknownCurriculumScope:
            continue
    return created
