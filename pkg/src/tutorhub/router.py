"""Cost/latency-aware provider selection with ordered fallback.

Selection is a pure function: filter to feasible providers (healthy and the
request fits the context window), order by (cost per unit, latency EWMA,
priority rank, provider id), take the head and keep the tail as the
fallback chain. Outcomes feed back into per-provider latency EWMAs and a
consecutive-failure health gate.

Real model services live behind the small ``send`` adapter interface as
out-of-tree plugins; in-tree adapters are a deterministic mock (a pure
function of the prompt text, so whole conversations replay byte-for-byte)
and fault-injection wrappers for testing fallback.
"""

from __future__ import annotations

import hashlib
import math
import secrets
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Protocol

from .prompts import ComposedPrompt

EWMA_ALPHA = 0.2
UNHEALTHY_AFTER = 3


class RouterError(Exception):
    """Base class for routing failures."""


class UnknownProvider(RouterError):
    pass


class NoFeasibleProvider(RouterError):
    pass


class AllProvidersFailed(RouterError):
    def __init__(self, attempts: list[tuple[str, str]]):
        detail = "; ".join(f"{pid}: {err}" for pid, err in attempts)
        super().__init__(f"all providers failed: {detail}")
        self.attempts = attempts


class AdapterFailure(RouterError):
    """An adapter could not produce a response for this attempt."""


class Purpose(str, Enum):
    CLARIFICATION = "Clarification"
    SUMMARY = "Summary"
    GENERATION = "Generation"
    AGENT_PROBE = "AgentProbe"


def estimate_units(text: str) -> int:
    """Documented provider-agnostic proxy: ceil(len(text) / 4), minimum 1."""
    return max(1, math.ceil(len(text) / 4))


@dataclass(frozen=True)
class ProviderProfile:
    provider_id: str
    max_context_units: int
    cost_per_unit: float
    latency_ewma_ms: float = 0.0
    healthy: bool = True
    priority_rank: int = 0
    consecutive_failures: int = 0
    model_label: str = "model"

    def model_used(self) -> str:
        return f"{self.provider_id}/{self.model_label}"

    def __post_init__(self):
        if self.max_context_units <= 0:
            raise ValueError("max_context_units must be positive")
        if self.cost_per_unit < 0 or self.latency_ewma_ms < 0:
            raise ValueError("cost and latency must be non-negative")


@dataclass(frozen=True)
class InferenceRequest:
    request_id: str
    fingerprint: str
    text: str
    estimated_units: int
    purpose: Purpose
    deadline_ms: Optional[int] = None


@dataclass(frozen=True)
class InferenceResponse:
    request_id: str
    provider_id: str
    text: str
    latency_ms: float
    unit_count: int


@dataclass(frozen=True)
class RoutingDecision:
    provider_id: str
    fallback_chain: tuple[str, ...]

    def attempt_order(self) -> tuple[str, ...]:
        return (self.provider_id,) + self.fallback_chain


def make_request(
    composed: ComposedPrompt, purpose: Purpose, deadline_ms: Optional[int] = None
) -> InferenceRequest:
    return InferenceRequest(
        request_id=f"r-{secrets.token_hex(8)}",
        fingerprint=composed.fingerprint,
        text=composed.text,
        estimated_units=estimate_units(composed.text),
        purpose=purpose,
        deadline_ms=deadline_ms,
    )


def select_provider(
    request: InferenceRequest, profiles: Iterable[ProviderProfile]
) -> RoutingDecision:
    """Pure, registration-order independent selection over a profile snapshot."""
    feasible = [
        p
        for p in profiles
        if p.healthy and request.estimated_units <= p.max_context_units
    ]
    if not feasible:
        raise NoFeasibleProvider(
            f"no healthy provider fits {request.estimated_units} units"
        )
    feasible.sort(
        key=lambda p: (p.cost_per_unit, p.latency_ewma_ms, p.priority_rank, p.provider_id)
    )
    return RoutingDecision(
        provider_id=feasible[0].provider_id,
        fallback_chain=tuple(p.provider_id for p in feasible[1:]),
    )


class Adapter(Protocol):
    def send(self, prompt_text: str, max_units: int) -> tuple[str, int]:
        """Return (response text, unit count) or raise AdapterFailure."""
        ...


class DeterministicMockAdapter:
    """Template echo keyed on the prompt digest; pure function of its input.

    Echoes the most recent user line when the prompt embeds a conversation,
    which keeps mock summaries and responses legible in end-to-end runs."""

    def __init__(self, label: str = "mock"):
        self.label = label

    def send(self, prompt_text: str, max_units: int) -> tuple[str, int]:
        digest = hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()
        lines = [line for line in prompt_text.splitlines() if line.strip()]
        user_lines = [
            line
            for line in lines
            if line.startswith("User: ") and not line[6:].startswith("[")
        ]
        echo = user_lines[-1][6:][:120] if user_lines else (lines[-1][:120] if lines else "")
        text = f"[{self.label} {digest[:10]}] {echo}"
        return text, estimate_units(text)


class AlwaysFailAdapter:
    def __init__(self, reason: str = "scripted failure"):
        self.reason = reason

    def send(self, prompt_text: str, max_units: int) -> tuple[str, int]:
        raise AdapterFailure(self.reason)


class FaultInjectionAdapter:
    """Fails the first ``fail_times`` sends, then delegates to the inner adapter."""

    def __init__(self, fail_times: int, inner: Optional[Adapter] = None):
        self.remaining = fail_times
        self.inner = inner or DeterministicMockAdapter()
        self._lock = threading.Lock()

    def send(self, prompt_text: str, max_units: int) -> tuple[str, int]:
        with self._lock:
            if self.remaining > 0:
                self.remaining -= 1
                raise AdapterFailure("injected fault")
        return self.inner.send(prompt_text, max_units)


def build_adapter(name: str) -> Adapter:
    """Adapter factory for config files: 'mock', 'mock:<label>', 'failing',
    'flaky:<n>' (n injected faults before the mock succeeds)."""
    if name == "mock":
        return DeterministicMockAdapter()
    if name.startswith("mock:"):
        return DeterministicMockAdapter(label=name.split(":", 1)[1])
    if name == "failing":
        return AlwaysFailAdapter()
    if name.startswith("flaky:"):
        return FaultInjectionAdapter(int(name.split(":", 1)[1]))
    raise RouterError(f"unknown adapter: {name}")


class ProviderRegistry:
    """Profiles plus adapters; outcome recording is an atomic read-modify-write."""

    def __init__(
        self,
        alpha: float = EWMA_ALPHA,
        unhealthy_after: int = UNHEALTHY_AFTER,
        clock: Callable[[], float] = time.perf_counter,
    ):
        self.alpha = alpha
        self.unhealthy_after = unhealthy_after
        self._clock = clock
        self._lock = threading.Lock()
        self._profiles: dict[str, ProviderProfile] = {}
        self._adapters: dict[str, Adapter] = {}

    def register(self, profile: ProviderProfile, adapter: Adapter) -> None:
        with self._lock:
            self._profiles[profile.provider_id] = profile
            self._adapters[profile.provider_id] = adapter

    def profiles(self) -> list[ProviderProfile]:
        with self._lock:
            return list(self._profiles.values())

    def get_profile(self, provider_id: str) -> ProviderProfile:
        try:
            return self._profiles[provider_id]
        except KeyError:
            raise UnknownProvider(f"unknown provider: {provider_id}") from None

    def record_outcome(
        self, provider_id: str, latency_ms: float, success: bool
    ) -> ProviderProfile:
        with self._lock:
            profile = self._profiles.get(provider_id)
            if profile is None:
                raise UnknownProvider(f"unknown provider: {provider_id}")
            ewma = self.alpha * latency_ms + (1 - self.alpha) * profile.latency_ewma_ms
            if success:
                updated = replace(
                    profile, latency_ewma_ms=ewma, consecutive_failures=0, healthy=True
                )
            else:
                failures = profile.consecutive_failures + 1
                updated = replace(
                    profile,
                    latency_ewma_ms=ewma,
                    consecutive_failures=failures,
                    healthy=failures < self.unhealthy_after and profile.healthy,
                )
            self._profiles[provider_id] = updated
            return updated

    def select(self, request: InferenceRequest) -> RoutingDecision:
        return select_provider(request, self.profiles())

    def invoke_with_fallback(
        self, decision: RoutingDecision, request: InferenceRequest
    ) -> InferenceResponse:
        """Try the chain in order; every attempt's outcome is recorded."""
        attempts: list[tuple[str, str]] = []
        for provider_id in decision.attempt_order():
            adapter = self._adapters.get(provider_id)
            if adapter is None:
                attempts.append((provider_id, "no adapter registered"))
                continue
            max_units = self.get_profile(provider_id).max_context_units
            started = self._clock()
            try:
                text, unit_count = adapter.send(request.text, max_units)
            except AdapterFailure as exc:
                latency = (self._clock() - started) * 1000.0
                self.record_outcome(provider_id, latency, success=False)
                attempts.append((provider_id, str(exc)))
                continue
            latency = (self._clock() - started) * 1000.0
            self.record_outcome(provider_id, latency, success=True)
            return InferenceResponse(
                request_id=request.request_id,
                provider_id=provider_id,
                text=text,
                latency_ms=latency,
                unit_count=unit_count,
            )
        raise AllProvidersFailed(attempts)
