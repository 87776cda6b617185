"""System-level prompt layer: deterministic composition and guardrail checks.

A composed prompt is an ordered list of layered segments — master
instruction set, context modifiers, response-format rules, then optional
voice and web-search instructions — fingerprinted so identical inputs always
produce identical prompts. Guardrail rules are declarative and matched
deterministically (token-sequence containment after normalization), never
by a learned classifier, so every verdict is auditable.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Optional, Protocol, Sequence

from .curriculum import CurriculumItem, GradeLevel
from .textnorm import normalize, tokenize

SUPPORTED_LANGUAGES = ("en", "tw", "dag", "ee")
HISTORY_WINDOW_BOUND = 12
PAUSE_MARKER = "[pause]"

MASTER_RULESET_VERSION = "platform/v1"
MASTER_TEXT = (
    "You are a teaching assistant operating under teacher-in-the-loop "
    "authority: the supervising educator always has the final word. "
    "Disclose that you are an AI assistant whenever your identity comes up. "
    "Stay faithful to the indicated curriculum scope and never invent "
    "curriculum references."
)


class PromptError(Exception):
    """Base class for prompt-layer failures."""


class InvalidContext(PromptError):
    """The prompt context violates its invariants."""


class PromptLayerKind(IntEnum):
    """Segment kinds; compilation order is exactly this enum order."""

    MASTER = 0
    CONTEXT_MODIFIER = 1
    RESPONSE_FORMAT = 2
    VOICE_INSTRUCTION = 3
    WEB_SEARCH_INSTRUCTION = 4


class RuleKind(str, Enum):
    FORBIDDEN_TOPIC = "ForbiddenTopic"
    REQUIRED_DISCLOSURE = "RequiredDisclosure"
    SCOPE_BOUND = "ScopeBound"


@dataclass(frozen=True)
class GuardrailRule:
    """One declarative constraint checked against candidate outputs.

    ForbiddenTopic fires when ``pattern`` occurs in the output.
    RequiredDisclosure fires when ``trigger`` occurs but ``required`` does not.
    ScopeBound fires when the output cites a curriculum path whose catalog
    entry lies outside the rule's subject/grade scope; the catalog maps a
    normalized (strand, sub_strand, indicator) key to its (subject, grade).
    All matching is contiguous token-sequence containment after case folding
    and punctuation stripping.
    """

    rule_id: str
    description: str
    kind: RuleKind
    pattern: str = ""
    trigger: str = ""
    required: str = ""
    subject: str = ""
    grade_level: Optional[GradeLevel] = None
    catalog: tuple[tuple[tuple[str, str, str], tuple[str, str]], ...] = ()


def platform_default_rules() -> tuple[GuardrailRule, ...]:
    """The non-negotiable baseline every agent's rule set must include."""
    return (
        GuardrailRule(
            rule_id="platform.forbid.corporal-punishment",
            description="Never recommend caning or other corporal punishment.",
            kind=RuleKind.FORBIDDEN_TOPIC,
            pattern="cane the learners",
        ),
        GuardrailRule(
            rule_id="platform.forbid.exam-malpractice",
            description="Never help obtain or leak live examination papers.",
            kind=RuleKind.FORBIDDEN_TOPIC,
            pattern="leak the exam",
        ),
        GuardrailRule(
            rule_id="platform.disclose.ai-identity",
            description="Must not claim to be human.",
            kind=RuleKind.REQUIRED_DISCLOSURE,
            trigger="i am a human",
            required="ai",
        ),
    )


def build_scope_rule(
    subject: str,
    grade_level: GradeLevel,
    items: Iterable[CurriculumItem],
    rule_id: str = "agent.scope",
) -> GuardrailRule:
    """Scope-bound rule whose catalog snapshots the given corpus items."""
    catalog = tuple(
        (item.ref().match_key(), (normalize(item.subject), item.grade_level.value))
        for item in items
    )
    return GuardrailRule(
        rule_id=rule_id,
        description=f"Cited curriculum must stay within {subject} / {grade_level.value}.",
        kind=RuleKind.SCOPE_BOUND,
        subject=subject,
        grade_level=grade_level,
        catalog=catalog,
    )


class AgentLike(Protocol):
    """The slice of an agent configuration the composer needs."""

    agent_id: str
    display_name: str
    subject: str
    grade_level: GradeLevel
    tone_descriptor: str
    language: str
    guardrails: tuple[GuardrailRule, ...]


@dataclass(frozen=True)
class LocaleVars:
    language: str
    grade_level: GradeLevel
    subject: str
    cultural_markers: tuple[str, ...] = ()


@dataclass(frozen=True)
class PromptContext:
    agent: AgentLike
    curriculum_hits: tuple[tuple[CurriculumItem, float], ...] = ()
    history_window: tuple[tuple[str, str], ...] = ()  # (speaker, text)
    locale_vars: Optional[LocaleVars] = None
    voice_enabled: bool = False
    web_search_enabled: bool = False

    def locale(self) -> LocaleVars:
        if self.locale_vars is not None:
            return self.locale_vars
        return LocaleVars(
            language=self.agent.language,
            grade_level=self.agent.grade_level,
            subject=self.agent.subject,
        )


@dataclass(frozen=True)
class ComposedPrompt:
    segments: tuple[tuple[PromptLayerKind, str], ...]
    provenance: tuple[str, ...]
    fingerprint: str

    @property
    def text(self) -> str:
        return "\n\n".join(seg_text for _, seg_text in self.segments)

    def segment(self, kind: PromptLayerKind) -> Optional[str]:
        for seg_kind, seg_text in self.segments:
            if seg_kind is kind:
                return seg_text
        return None


@dataclass(frozen=True)
class PromptConfig:
    """Deployment-tunable prompt constants; defaults ship with the platform."""

    master_text: str = MASTER_TEXT
    version: str = MASTER_RULESET_VERSION
    cultural_markers: tuple[str, ...] = ()
    extra_rules: tuple[GuardrailRule, ...] = ()


DEFAULT_CONFIG = PromptConfig()


def load_prompt_config(text: str) -> PromptConfig:
    """Parse the prompt config grammar: a JSON object with optional keys
    ``master_text`` (string), ``version`` (string), ``cultural_markers``
    (array of strings), and ``guardrails`` (array of rule objects with
    ``rule_id``, ``description``, ``kind`` and the kind's data fields).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PromptError(f"unparseable prompt config: {exc}") from exc
    if not isinstance(raw, dict):
        raise PromptError("prompt config must be a JSON object")
    rules = []
    for entry in raw.get("guardrails", []):
        try:
            rules.append(
                GuardrailRule(
                    rule_id=entry["rule_id"],
                    description=entry.get("description", ""),
                    kind=RuleKind(entry["kind"]),
                    pattern=entry.get("pattern", ""),
                    trigger=entry.get("trigger", ""),
                    required=entry.get("required", ""),
                )
            )
        except (KeyError, ValueError) as exc:
            raise PromptError(f"bad guardrail entry {entry!r}: {exc}") from exc
    return PromptConfig(
        master_text=raw.get("master_text", MASTER_TEXT),
        version=raw.get("version", MASTER_RULESET_VERSION),
        cultural_markers=tuple(raw.get("cultural_markers", ())),
        extra_rules=tuple(rules),
    )


def format_response_instructions(ctx: PromptContext) -> str:
    """Output-structure rules; voice mode asks for short sentences and pauses."""
    if ctx.voice_enabled:
        return (
            "Respond in short spoken sentences. Insert the pause marker "
            f"{PAUSE_MARKER} between ideas so text-to-speech can breathe. "
            "Avoid tables, bullets, and long enumerations."
        )
    return (
        "Structure the response as clear stepwise text: a short opening, "
        "numbered steps where a procedure is involved, and a one-line recap."
    )


def _voice_instructions(ctx: PromptContext) -> str:
    locale = ctx.locale()
    return (
        f"Voice parameters: pause marker {PAUSE_MARKER}; moderate pace; "
        f"emphasis on key curriculum terms; primary language '{locale.language}'. "
        "Pronounce local names and terms respectfully; spell unfamiliar "
        "acronyms letter by letter."
    )


def _web_search_instructions() -> str:
    return (
        "If external facts are required beyond the supplied curriculum "
        "context, request retrieval by emitting a line 'SEARCH: <query>' and "
        "wait for results instead of guessing. Cite retrieved sources inline."
    )


def compose(ctx: PromptContext, config: PromptConfig = DEFAULT_CONFIG) -> ComposedPrompt:
    """Compile the layered prompt document for one inference call.

    Deterministic: identical context and config yield an identical
    fingerprint. Segment order is fixed by PromptLayerKind; the voice and
    web-search segments are present exactly when their flags are set.
    """
    locale = ctx.locale()
    if locale.language not in SUPPORTED_LANGUAGES:
        raise InvalidContext(f"unknown language tag: {locale.language!r}")
    if len(ctx.history_window) > HISTORY_WINDOW_BOUND:
        raise InvalidContext(
            f"history window of {len(ctx.history_window)} exceeds bound "
            f"{HISTORY_WINDOW_BOUND}"
        )

    agent = ctx.agent
    master_lines = [
        config.master_text,
        f"Assistant persona: {agent.display_name} for {agent.subject} "
        f"({agent.grade_level.value}).",
        f"Tone: {agent.tone_descriptor}",
        "Ethical boundaries:",
    ]
    master_lines.extend(f"- {rule.description}" for rule in agent.guardrails)
    master = "\n".join(master_lines)

    context_lines = [
        f"Language: {locale.language}. Grade level: {locale.grade_level.value}. "
        f"Subject: {locale.subject}.",
    ]
    markers = tuple(locale.cultural_markers) + tuple(config.cultural_markers)
    if markers:
        context_lines.append("Cultural markers to draw on (verbatim, never invent):")
        context_lines.extend(f"- {marker}" for marker in markers)
    if ctx.curriculum_hits:
        context_lines.append("Ground every answer in these curriculum indicators:")
        for item, score in ctx.curriculum_hits:
            context_lines.append(f"- {item.ref().path()} (relevance {score:.4f})")
    if ctx.history_window:
        context_lines.append("Conversation so far:")
        context_lines.extend(
            f"{speaker}: {text}" for speaker, text in ctx.history_window
        )
    context_modifier = "\n".join(context_lines)

    segments: list[tuple[PromptLayerKind, str]] = [
        (PromptLayerKind.MASTER, master),
        (PromptLayerKind.CONTEXT_MODIFIER, context_modifier),
        (PromptLayerKind.RESPONSE_FORMAT, format_response_instructions(ctx)),
    ]
    provenance = [
        f"master:{config.version};agent:{agent.agent_id}",
        f"context:hits={len(ctx.curriculum_hits)};history={len(ctx.history_window)}",
        f"format:voice={ctx.voice_enabled}",
    ]
    if ctx.voice_enabled:
        segments.append((PromptLayerKind.VOICE_INSTRUCTION, _voice_instructions(ctx)))
        provenance.append("voice:defaults")
    if ctx.web_search_enabled:
        segments.append(
            (PromptLayerKind.WEB_SEARCH_INSTRUCTION, _web_search_instructions())
        )
        provenance.append("websearch:defaults")

    basis = "\x1e".join(f"{kind.name}\x1f{text}" for kind, text in segments)
    fingerprint = hashlib.sha256(basis.encode("utf-8")).hexdigest()
    return ComposedPrompt(
        segments=tuple(segments),
        provenance=tuple(provenance),
        fingerprint=fingerprint,
    )


@dataclass(frozen=True)
class Verdict:
    passed: bool
    violations: tuple[str, ...] = ()


def _contains_tokens(haystack: list[str], needle: str) -> bool:
    """Contiguous token-subsequence containment; empty needles never match."""
    pattern = tokenize(needle)
    if not pattern:
        return False
    span = len(pattern)
    return any(
        haystack[i : i + span] == pattern
        for i in range(len(haystack) - span + 1)
    )


_ARROW_SPACING = re.compile(r"\s*→\s*")


def _canonical_citation_text(text: str) -> str:
    """Normalize text for path matching: ASCII arrows unified, spacing fixed."""
    unified = text.replace("->", "→")
    return _ARROW_SPACING.sub(f" → ", normalize(unified))


def find_cited_paths(
    text: str, triples: Iterable[tuple[str, str, str]]
) -> list[tuple[str, str, str]]:
    """Which of the known normalized (strand, sub_strand, indicator) triples
    are cited arrow-style in the text. Citation detection is anchored on the
    known paths, so surrounding prose never corrupts a match."""
    haystack = _canonical_citation_text(text)
    cited = []
    for triple in triples:
        needle = " → ".join(triple)
        if needle in haystack:
            cited.append(triple)
    return cited


def check_guardrails(candidate_output: str, rules: Sequence[GuardrailRule]) -> Verdict:
    """Pure verdict over (text, rules); violations listed in rule order."""
    if not rules:
        raise ValueError("guardrail rule set must be non-empty")
    tokens = tokenize(candidate_output)
    violations: list[str] = []
    for rule in rules:
        if rule.kind is RuleKind.FORBIDDEN_TOPIC:
            if _contains_tokens(tokens, rule.pattern):
                violations.append(rule.rule_id)
        elif rule.kind is RuleKind.REQUIRED_DISCLOSURE:
            if _contains_tokens(tokens, rule.trigger) and not _contains_tokens(
                tokens, rule.required
            ):
                violations.append(rule.rule_id)
        elif rule.kind is RuleKind.SCOPE_BOUND:
            catalog = dict(rule.catalog)
            subject_key = normalize(rule.subject)
            grade_value = rule.grade_level.value if rule.grade_level else None
            for triple in find_cited_paths(candidate_output, catalog):
                if catalog[triple] != (subject_key, grade_value):
                    violations.append(rule.rule_id)
                    break
    return Verdict(passed=not violations, violations=tuple(violations))


def dump_prompt(composed: ComposedPrompt) -> str:
    """Serialize a composed prompt for audit logs; stable across runs."""
    lines = [f"fingerprint: {composed.fingerprint}"]
    for (kind, text), source in zip(composed.segments, composed.provenance):
        lines.append(f"--- {kind.name} [{source}] ---")
        lines.append(text)
    return "\n".join(lines) + "\n"
