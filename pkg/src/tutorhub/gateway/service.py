"""Transport-agnostic gateway: route operations and chat-turn orchestration.

One chat turn runs exactly this pipeline: map the client frame to a dialogue
event, advance the state machine, and for each emitted action retrieve
curriculum context, compose the layered prompt, invoke the provider chain,
log the turn durably, and only then emit frames — in action order. The
ledger write precedes the frame so nothing is acknowledged that was not
recorded. Module errors surface as coded Error frames; a provider failure
fails its session without touching any other session.
"""

from __future__ import annotations

import base64
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .. import dialogue
from ..agents import AgentConfig, AgentDraft, AgentRegistry
from ..collab import GroupService
from ..curriculum import CurriculumService, EmptyQuery, GradeLevel
from ..identity import AccessToken, IdentityService, Role, Unauthorized
from ..ledger import LedgerStore
from ..prompts import (
    LocaleVars,
    PromptConfig,
    PromptContext,
    check_guardrails,
    compose,
)
from ..router import (
    AllProvidersFailed,
    NoFeasibleProvider,
    ProviderRegistry,
    Purpose,
    make_request,
)
from ..textnorm import normalize
from ..voice import ConsentRecord, MediaStore, SynthesisRequest, VoiceService
from .errors import ApiError, bad_request, map_exception
from .frames import FrameKind, StreamFrame

MAX_HITS = 5
WITHHELD_NOTICE = (
    "The generated answer was withheld because it violated the agent's "
    "guardrails. The supervising teacher can review this conversation in the "
    "activity log."
)


@dataclass
class Services:
    """Composition root handed to every transport."""

    curriculum: CurriculumService
    identity: IdentityService
    agents: AgentRegistry
    groups: GroupService
    ledger: LedgerStore
    voice: VoiceService
    providers: ProviderRegistry
    media: MediaStore
    prompt_config: PromptConfig = field(default_factory=PromptConfig)
    cultural_markers: tuple[str, ...] = ()


@dataclass
class SessionRuntime:
    session: dialogue.DialogueSession
    claims: AccessToken
    agent: AgentConfig
    hits: list = field(default_factory=list)
    outbound_seq: int = 0
    inbound_seq: int = 0
    last_model_meta: Optional[tuple[str, int, int]] = None  # (model_used, ms, units)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ChatGateway:
    def __init__(
        self,
        services: Services,
        wall_clock: Callable[[], float] = time.time,
        timer: Callable[[], float] = time.perf_counter,
    ):
        self.s = services
        self._wall = wall_clock
        self._timer = timer
        self._sessions: dict[str, SessionRuntime] = {}
        self._sessions_lock = threading.Lock()

    # ------------------------------------------------------------------ users

    def register_user(self, body: dict, actor_token: Optional[str] = None) -> dict:
        try:
            role = Role(body.get("role", "StudentTeacher"))
        except ValueError:
            raise bad_request(f"unknown role: {body.get('role')!r}")
        actor = self.s.identity.verify(actor_token) if actor_token else None
        user = self.s.identity.register(
            handle=str(body.get("handle", "")),
            secret=str(body.get("secret", "")),
            role=role,
            actor=actor,
            institution=str(body.get("institution", "")),
        )
        return {"user_id": user.user_id, "handle": user.handle, "role": user.role.value}

    def login(self, body: dict) -> dict:
        token = self.s.identity.authenticate(
            str(body.get("handle", "")), str(body.get("secret", ""))
        )
        claims = self.s.identity.verify(token)
        return {
            "token": token,
            "user_id": claims.user_id,
            "role": claims.role.value,
            "expires_at": claims.expires_at,
        }

    def whoami(self, token: str) -> dict:
        claims = self.s.identity.verify(token)
        user = self.s.identity.get_user(claims.user_id)
        return {"user_id": user.user_id, "handle": user.handle, "role": user.role.value}

    # ------------------------------------------------------------------ agents

    def _agent_payload(self, agent: AgentConfig) -> dict:
        return {
            "agent_id": agent.agent_id,
            "owner_id": agent.owner_id,
            "display_name": agent.display_name,
            "subject": agent.subject,
            "grade_level": agent.grade_level.value,
            "tone_descriptor": agent.tone_descriptor,
            "language": agent.language,
            "voice_profile_id": agent.voice_profile_id,
            "guardrails": [r.rule_id for r in agent.guardrails],
        }

    def list_agents(self, token: str) -> dict:
        claims = self.s.identity.verify(token)
        caller = self.s.identity.get_user(claims.user_id)
        return {"agents": [self._agent_payload(a) for a in self.s.agents.list_agents(caller)]}

    def create_agent(self, token: str, body: dict) -> dict:
        claims = self.s.identity.require(token, "create_agent")
        caller = self.s.identity.get_user(claims.user_id)
        try:
            grade = GradeLevel.parse(str(body.get("grade_level", "")))
        except ValueError:
            raise bad_request(f"invalid grade_level: {body.get('grade_level')!r}")
        draft = AgentDraft(
            display_name=str(body.get("display_name", "")),
            subject=str(body.get("subject", "")),
            grade_level=grade,
            tone_descriptor=str(body.get("tone_descriptor", "clear and supportive")),
            language=str(body.get("language", "en")),
            voice_profile_id=body.get("voice_profile_id"),
        )
        return self._agent_payload(self.s.agents.create_agent(caller, draft))

    # -------------------------------------------------------------- curriculum

    def curriculum_search(
        self,
        token: str,
        query: str,
        subject: Optional[str] = None,
        grade: Optional[str] = None,
    ) -> dict:
        self.s.identity.verify(token)
        grade_level = GradeLevel.parse(grade) if grade else None
        hits = self.s.curriculum.search(query, subject=subject, grade_level=grade_level)
        items = []
        for hit in hits:
            item = self.s.curriculum.get(hit.item_id)
            items.append(
                {
                    "item_id": hit.item_id,
                    "score": hit.score,
                    "matched_terms": list(hit.matched_terms),
                    "subject": item.subject,
                    "grade_level": item.grade_level.value,
                    "path": item.ref().path(),
                    "learning_indicator": item.learning_indicator,
                }
            )
        return {"hits": items}

    def curriculum_tree(self, token: str) -> dict:
        """Strand → sub-strand → indicator drill-down for the browser view."""
        self.s.identity.verify(token)
        tree: dict = {}
        for item in self.s.curriculum.index.items():
            grade = tree.setdefault(item.grade_level.value, {})
            subject = grade.setdefault(item.subject, {})
            strand = subject.setdefault(item.strand, {})
            strand.setdefault(item.sub_strand, []).append(
                {
                    "item_id": item.item_id,
                    "learning_indicator": item.learning_indicator,
                    "core_competency": item.core_competency,
                }
            )
        return {"tree": tree, "item_count": len(self.s.curriculum.index)}

    def ingest_curriculum(self, token: str, document_text: str) -> dict:
        self.s.identity.require(token, "admin_curriculum")
        summary = self.s.curriculum.ingest(document_text)
        return {
            "item_count": summary.item_count,
            "rejected_count": summary.rejected_count,
            "rejection_reasons": summary.rejection_reasons,
        }

    def export_curriculum(self, token: str, item_ids: list[str]) -> str:
        self.s.identity.verify(token)
        return self.s.curriculum.export(item_ids)

    # ---------------------------------------------------------------- analytics

    def analytics(self, token: str, start: float, end: float) -> dict:
        self.s.identity.require(token, "view_analytics")
        return self.s.ledger.aggregate(start, end).to_payload()

    def admin_users(self, token: str) -> dict:
        self.s.identity.require(token, "admin_users")
        return {
            "users": [
                {"user_id": u.user_id, "handle": u.handle, "role": u.role.value}
                for u in self.s.identity.list_users()
            ]
        }

    def admin_log(self, token: str, conversation_id: str) -> dict:
        self.s.identity.require(token, "admin_logs")
        return self.s.ledger.export_transcript(conversation_id)

    # ------------------------------------------------------------------ groups

    def create_group(self, token: str, body: dict) -> dict:
        claims = self.s.identity.require(token, "create_group")
        caller = self.s.identity.get_user(claims.user_id)
        agent = self.s.agents.get(str(body.get("agent_id", "")))
        group, passkey = self.s.groups.create_group(caller, agent.agent_id)
        return {
            "group_id": group.group_id,
            "agent_id": group.agent_id,
            "members": sorted(group.members),
            "student_created": group.student_created,
            "passkey": passkey.key_text,
        }

    def join_group(self, token: str, body: dict) -> dict:
        claims = self.s.identity.require(token, "join_group")
        group = self.s.groups.join_group(claims.user_id, str(body.get("passkey", "")))
        return {
            "group_id": group.group_id,
            "agent_id": group.agent_id,
            "members": sorted(group.members),
        }

    def group_oversight(self, token: str, group_id: str) -> dict:
        claims = self.s.identity.require(token, "view_group_transcripts")
        caller = self.s.identity.get_user(claims.user_id)
        view = self.s.groups.oversight_view(caller, group_id, self.s.ledger)
        view["transcripts"] = {
            cid: [
                {
                    "turn_index": t.turn_index,
                    "speaker": t.speaker,
                    "payload": t.payload,
                    "state_at_emit": t.state_at_emit,
                }
                for t in turns
            ]
            for cid, turns in view["transcripts"].items()
        }
        return view

    # ---------------------------------------------------------------- sessions

    def open_session(self, token: str, body: dict) -> dict:
        claims = self.s.identity.require(token, "chat")
        agent = self.s.agents.get(str(body.get("agent_id", "")))
        input_mode = body.get("input_mode", "text")
        if input_mode not in ("text", "voice"):
            raise bad_request(f"input_mode must be text or voice, got {input_mode!r}")
        group_id = body.get("group_id")
        if group_id is not None:
            group = self.s.groups.get_group(group_id)
            if claims.user_id not in group.members:
                raise Unauthorized("join the group before opening a session in it")
        session = dialogue.new_session(
            agent_id=agent.agent_id,
            user_id=claims.user_id,
            input_mode=input_mode,
            group_id=group_id,
            now=self._wall(),
        )
        user = self.s.identity.get_user(claims.user_id)
        self.s.ledger.open_conversation(
            conversation_id=session.conversation_id,
            user_id=claims.user_id,
            user_role=user.role.value,
            input_mode=input_mode,
            agent_id=agent.agent_id,
            group_id=group_id,
        )
        if group_id is not None:
            self.s.groups.attach_conversation(group_id, session.conversation_id)
        runtime = SessionRuntime(session=session, claims=claims, agent=agent)
        with self._sessions_lock:
            self._sessions[session.session_id] = runtime
        return {
            "session_id": session.session_id,
            "conversation_id": session.conversation_id,
            "agent_id": agent.agent_id,
            "state": session.state.value,
            "group_id": group_id,
        }

    def session_state(self, token: str, session_id: str) -> dict:
        runtime = self._runtime_for(token, session_id)
        return {
            "session_id": session_id,
            "state": runtime.session.state.value,
            "revision_count": runtime.session.revision_count,
        }

    def _runtime_for(self, token: str, session_id: str) -> SessionRuntime:
        claims = self.s.identity.verify(token)
        runtime = self._sessions.get(session_id)
        if runtime is None:
            raise ApiError("UNKNOWN_SESSION", 404, f"no such session: {session_id}")
        if runtime.claims.user_id != claims.user_id:
            raise Unauthorized("session belongs to another user")
        return runtime

    # ----------------------------------------------------------- chat pipeline

    def handle_client_frame(self, token: str, frame: StreamFrame) -> list[StreamFrame]:
        """Process one inbound frame; returns outbound frames in action order."""
        runtime = self._runtime_for(token, frame.session_id)
        with runtime.lock:
            if frame.seq != runtime.inbound_seq:
                return [
                    self._emit(
                        runtime,
                        FrameKind.ERROR,
                        {
                            "code": "BAD_SEQUENCE",
                            "message": f"expected seq {runtime.inbound_seq}, got {frame.seq}",
                        },
                    )
                ]
            runtime.inbound_seq += 1
            if frame.kind is FrameKind.HEARTBEAT:
                return [self._emit(runtime, FrameKind.HEARTBEAT, {})]
            try:
                event, preface = self._frame_to_event(runtime, frame)
                return list(preface) + self._process_event(runtime, event)
            except Exception as exc:
                error = map_exception(exc)
                return [
                    self._emit(
                        runtime,
                        FrameKind.ERROR,
                        {"code": error.code, "message": error.message},
                    )
                ]

    def _frame_to_event(self, runtime: SessionRuntime, frame: StreamFrame):
        """Map one client frame to exactly one dialogue event."""
        kind, payload = frame.kind, frame.payload
        if kind is FrameKind.CLIENT_TURN:
            text = str(payload.get("text", ""))
            if not text.strip():
                raise bad_request("ClientTurn requires non-empty text")
            if runtime.session.state is dialogue.DialogueState.CLARIFYING:
                return (
                    dialogue.ClarificationAnswer(
                        text, complete=bool(payload.get("complete", False))
                    ),
                    [],
                )
            return dialogue.UserUtterance(text), []
        if kind is FrameKind.CONFIRM:
            return dialogue.Confirm(), []
        if kind is FrameKind.REVISE:
            text = str(payload.get("text", ""))
            if not text.strip():
                raise bad_request("Revise requires non-empty text")
            return dialogue.Revise(text), []
        if kind is FrameKind.VOICE_CHUNK:
            return self._voice_chunk_to_event(runtime, payload)
        raise bad_request(f"clients may not send {kind.value} frames")

    def _voice_chunk_to_event(self, runtime: SessionRuntime, payload: dict):
        try:
            audio = base64.b64decode(str(payload.get("audio_b64", "")), validate=True)
        except Exception:
            raise bad_request("VoiceChunk requires base64 audio_b64")
        handle = self.s.media.save(audio)
        result = self.s.voice.transcribe(handle, payload.get("language", "en"))
        self.s.ledger.log_turn(
            runtime.session.conversation_id,
            "System",
            f"asr transcript ({result.confidence:.2f} confidence)",
            runtime.session.state.value,
            latency_ms=int(round(result.processing_ms)),
            audio_ref=handle,
        )
        ack = self._emit(
            runtime,
            FrameKind.VOICE_CHUNK,
            {
                "transcript": result.transcript,
                "confidence": result.confidence,
                "audio_duration_ms": result.audio_duration_ms,
            },
        )
        if runtime.session.state is dialogue.DialogueState.CLARIFYING:
            return dialogue.ClarificationAnswer(result.transcript), [ack]
        return dialogue.UserUtterance(result.transcript, voice=True), [ack]

    # -- internals ---------------------------------------------------------

    def _emit(self, runtime: SessionRuntime, kind: FrameKind, payload: dict) -> StreamFrame:
        frame = StreamFrame(
            kind=kind,
            session_id=runtime.session.session_id,
            seq=runtime.outbound_seq,
            payload=payload,
        )
        runtime.outbound_seq += 1
        return frame

    def _locale(self, agent: AgentConfig) -> LocaleVars:
        return LocaleVars(
            language=agent.language,
            grade_level=agent.grade_level,
            subject=agent.subject,
            cultural_markers=self.s.cultural_markers,
        )

    def _prompt_ctx(self, runtime: SessionRuntime) -> PromptContext:
        session = runtime.session
        return PromptContext(
            agent=runtime.agent,
            curriculum_hits=tuple(runtime.hits),
            history_window=tuple(
                (t.speaker, t.text) for t in session.transcript[-12:]
            ),
            locale_vars=self._locale(runtime.agent),
            voice_enabled=session.input_mode == "voice",
        )

    def _refresh_hits(self, runtime: SessionRuntime, new_text: str) -> None:
        combined = f"{runtime.session.user_text()} {new_text}".strip()
        if not normalize(combined):
            return
        agent = runtime.agent
        try:
            hits = self.s.curriculum.search(
                combined, subject=agent.subject, grade_level=agent.grade_level
            )[:MAX_HITS]
        except EmptyQuery:
            hits = []
        runtime.hits = [(self.s.curriculum.get(h.item_id), h.score) for h in hits]

    def _top_ref(self, runtime: SessionRuntime):
        return runtime.hits[0][0].ref() if runtime.hits else None

    def _invoke(self, runtime: SessionRuntime, purpose: Purpose):
        composed = compose(self._prompt_ctx(runtime), self.s.prompt_config)
        request = make_request(composed, purpose)
        decision = self.s.providers.select(request)
        response = self.s.providers.invoke_with_fallback(decision, request)
        model_used = self.s.providers.get_profile(response.provider_id).model_used()
        runtime.last_model_meta = (
            model_used,
            int(round(response.latency_ms)),
            response.unit_count,
        )
        return response, model_used

    def _question_generator(self, runtime: SessionRuntime):
        def generate(_session) -> str:
            response, _ = self._invoke(runtime, Purpose.CLARIFICATION)
            return response.text

        return generate

    def _process_event(self, runtime: SessionRuntime, event) -> list[StreamFrame]:
        turn_started = self._timer()
        now = self._wall()
        runtime.session = dialogue.expire_if_idle(runtime.session, now)
        if runtime.session.state is dialogue.DialogueState.FAILED and not isinstance(
            event, dialogue.ProviderFailure
        ):
            timed_out = runtime.session.transcript and (
                runtime.session.transcript[-1].text == "session timed out"
            )
            code = "SESSION_TIMEOUT" if timed_out else "ILLEGAL_TRANSITION"
            return [
                self._emit(
                    runtime,
                    FrameKind.ERROR,
                    {"code": code, "message": "session is no longer active"},
                )
            ]

        if isinstance(event, (dialogue.UserUtterance, dialogue.ClarificationAnswer, dialogue.Revise)):
            self._refresh_hits(runtime, event.text)
            user_payload = event.text
        else:
            user_payload = None

        clarifier = dialogue.validated_clarifier(
            self._question_generator(runtime), runtime.hits
        )
        pre_state = runtime.session.state
        try:
            session, actions = dialogue.advance(
                runtime.session, event, clarifier=clarifier, now=now
            )
        except (dialogue.IllegalTransition, dialogue.RevisionCapExceeded) as exc:
            error = map_exception(exc)
            return [
                self._emit(
                    runtime,
                    FrameKind.ERROR,
                    {"code": error.code, "message": error.message},
                )
            ]
        runtime.session = session
        if user_payload is not None:
            self.s.ledger.log_turn(
                session.conversation_id,
                "User",
                user_payload,
                pre_state.value,
                curriculum_reference=self._top_ref(runtime),
            )
        return self._dispatch_actions(runtime, actions, turn_started)

    def _dispatch_actions(
        self, runtime: SessionRuntime, actions, turn_started: float
    ) -> list[StreamFrame]:
        frames: list[StreamFrame] = []
        for action in actions:
            if isinstance(action, dialogue.AskClarification):
                meta = runtime.last_model_meta
                self.s.ledger.log_turn(
                    runtime.session.conversation_id,
                    "Agent",
                    action.question,
                    dialogue.DialogueState.CLARIFYING.value,
                    model_used=meta[0] if meta else None,
                    latency_ms=meta[1] if meta else None,
                    unit_count=meta[2] if meta else None,
                    curriculum_reference=self._top_ref(runtime),
                )
                frames.append(
                    self._emit(
                        runtime,
                        FrameKind.CLARIFICATION_QUESTION,
                        {"text": action.question},
                    )
                )
            elif isinstance(action, dialogue.RequestSummary):
                frames.extend(self._run_inference_step(runtime, Purpose.SUMMARY, turn_started))
            elif isinstance(action, dialogue.RequestGeneration):
                frames.extend(
                    self._run_inference_step(runtime, Purpose.GENERATION, turn_started)
                )
            elif isinstance(action, dialogue.PresentSummary):
                meta = runtime.last_model_meta
                self.s.ledger.log_turn(
                    runtime.session.conversation_id,
                    "Agent",
                    action.text,
                    dialogue.DialogueState.AWAITING_CONFIRMATION.value,
                    model_used=meta[0] if meta else None,
                    latency_ms=meta[1] if meta else None,
                    unit_count=meta[2] if meta else None,
                    curriculum_reference=self._top_ref(runtime),
                )
                frames.append(
                    self._emit(
                        runtime,
                        FrameKind.SUMMARY_FOR_CONFIRMATION,
                        {
                            "text": action.text,
                            "revision_count": runtime.session.revision_count,
                        },
                    )
                )
            elif isinstance(action, dialogue.DeliverResponse):
                frames.extend(self._deliver(runtime, action, turn_started))
            elif isinstance(action, dialogue.ReportError):
                self.s.ledger.log_turn(
                    runtime.session.conversation_id,
                    "System",
                    action.reason,
                    dialogue.DialogueState.FAILED.value,
                )
                frames.append(
                    self._emit(
                        runtime,
                        FrameKind.ERROR,
                        {"code": "PROVIDER_FAILED", "message": action.reason},
                    )
                )
        return frames

    def _run_inference_step(
        self, runtime: SessionRuntime, purpose: Purpose, turn_started: float
    ) -> list[StreamFrame]:
        try:
            response, model_used = self._invoke(runtime, purpose)
        except (AllProvidersFailed, NoFeasibleProvider) as exc:
            session, actions = dialogue.advance(
                runtime.session, dialogue.ProviderFailure(str(exc)), now=self._wall()
            )
            runtime.session = session
            return self._dispatch_actions(runtime, actions, turn_started)

        if purpose is Purpose.SUMMARY:
            event = dialogue.SummaryReady(response.text)
        else:
            text = response.text
            verdict = check_guardrails(text, runtime.agent.guardrails)
            if not verdict.passed:
                self.s.ledger.log_turn(
                    runtime.session.conversation_id,
                    "System",
                    f"guardrail violations: {', '.join(verdict.violations)}",
                    runtime.session.state.value,
                )
                text = WITHHELD_NOTICE
            event = dialogue.ModelResponse(text)
        session, actions = dialogue.advance(runtime.session, event, now=self._wall())
        runtime.session = session
        return self._dispatch_actions(runtime, actions, turn_started)

    def _deliver(
        self, runtime: SessionRuntime, action: dialogue.DeliverResponse, turn_started: float
    ) -> list[StreamFrame]:
        meta = runtime.last_model_meta
        model_used = meta[0] if meta else "unknown/unknown"
        unit_count = meta[2] if meta else None
        total_ms = int(round((self._timer() - turn_started) * 1000.0))
        ref = self._top_ref(runtime)
        frames = []
        audio_payload = {}
        if runtime.session.input_mode == "voice":
            voice_key = runtime.agent.voice_profile_id or "default"
            synthesis = self.s.voice.synthesize(
                SynthesisRequest(text=action.text, voice=voice_key)
            )
            self.s.ledger.log_turn(
                runtime.session.conversation_id,
                "System",
                "tts synthesis",
                runtime.session.state.value,
                latency_ms=int(round(synthesis.processing_ms)),
                audio_ref=synthesis.audio_handle,
            )
            audio_payload = {
                "audio_handle": synthesis.audio_handle,
                "watermark_id": synthesis.watermark_id,
            }
        self.s.ledger.log_turn(
            runtime.session.conversation_id,
            "Agent",
            action.text,
            dialogue.DialogueState.DELIVERED.value,
            model_used=model_used,
            latency_ms=total_ms,
            unit_count=unit_count,
            curriculum_reference=ref,
        )
        frames.append(
            self._emit(
                runtime,
                FrameKind.AGENT_RESPONSE,
                {
                    "text": action.text,
                    "model_used": model_used,
                    "latency_ms": total_ms,
                    "curriculum_reference": ref.path() if ref else None,
                    **audio_payload,
                },
            )
        )
        if runtime.session.input_mode == "voice" and audio_payload:
            frames.append(self._emit(runtime, FrameKind.VOICE_CHUNK, audio_payload))
        return frames

    # ------------------------------------------------------------------ probe

    def probe_agent(self, token: str, body: dict) -> dict:
        """One-shot generative request outside any dialogue session."""
        claims = self.s.identity.require(token, "chat")
        agent = self.s.agents.get(str(body.get("agent_id", "")))
        text = str(body.get("text", "")).strip()
        if not text:
            raise bad_request("probe requires text")
        hits = []
        try:
            found = self.s.curriculum.search(
                text, subject=agent.subject, grade_level=agent.grade_level
            )[:MAX_HITS]
            hits = [(self.s.curriculum.get(h.item_id), h.score) for h in found]
        except EmptyQuery:
            pass
        ctx = PromptContext(
            agent=agent,
            curriculum_hits=tuple(hits),
            history_window=(("User", text),),
            locale_vars=self._locale(agent),
        )
        composed = compose(ctx, self.s.prompt_config)
        request = make_request(composed, Purpose.AGENT_PROBE)
        decision = self.s.providers.select(request)
        response = self.s.providers.invoke_with_fallback(decision, request)
        return {
            "text": response.text,
            "provider_id": response.provider_id,
            "latency_ms": response.latency_ms,
            "fingerprint": composed.fingerprint,
        }

    # --------------------------------------------------------------- feedback

    def submit_feedback(self, token: str, body: dict) -> dict:
        self.s.identity.verify(token)
        conversation_id = str(body.get("conversation_id", ""))
        rating = body.get("rating")
        if not isinstance(rating, int) or isinstance(rating, bool):
            raise bad_request("rating must be an integer")
        self.s.ledger.submit_feedback(conversation_id, rating)
        return {"stored": True}

    # ------------------------------------------------------------------ voice

    def upload_audio(self, token: str, data: bytes) -> dict:
        self.s.identity.verify(token)
        if not data:
            raise bad_request("empty audio upload")
        return {"handle": self.s.media.save(data)}

    def create_voice_profile(self, token: str, body: dict) -> dict:
        claims = self.s.identity.verify(token)
        owner = self.s.identity.get_user(claims.user_id)
        consent = ConsentRecord(
            granted=bool(body.get("consent_granted", False)),
            timestamp=self._wall(),
            statement=str(body.get("consent_statement", "")),
        )
        profile = self.s.voice.create_voice_profile(
            owner, str(body.get("sample_handle", "")), consent
        )
        return {
            "profile_id": profile.profile_id,
            "watermark_id": profile.watermark_id,
            "sample_duration_ms": profile.sample_duration_ms,
        }

    def voice_input(self, token: str, body: dict) -> dict:
        """REST mirror of the voice-input stream: audio in, frames out."""
        session_id = str(body.get("session_id", ""))
        runtime = self._runtime_for(token, session_id)
        frame = StreamFrame(
            kind=FrameKind.VOICE_CHUNK,
            session_id=session_id,
            seq=runtime.inbound_seq,
            payload={
                "audio_b64": body.get("audio_b64", ""),
                "language": body.get("language", "en"),
            },
        )
        frames = self.handle_client_frame(token, frame)
        return {"frames": [self._frame_payload(f) for f in frames]}

    @staticmethod
    def _frame_payload(frame: StreamFrame) -> dict:
        return {
            "kind": frame.kind.value,
            "session": frame.session_id,
            "seq": frame.seq,
            "payload": frame.payload,
        }
