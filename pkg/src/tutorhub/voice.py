"""Provider-abstracted speech layer: transcribe, synthesize, voice profiles, WER.

Real ASR/TTS engines live behind tiny adapter interfaces as out-of-tree
plugins; the in-tree adapters are deterministic mocks so voice flows replay
exactly. Voice cloning ships as a contract only: profiles require explicit
consent, sample durations between two and three minutes, encrypted embedding
storage, and a watermark id stamped on every synthesis from a profile voice
(mock audio carries a fixed preamble byte pattern as the stand-in watermark).

Mock audio convention: 16 kHz, 16-bit mono PCM, i.e. 32 bytes per
millisecond. Adapters for real containers would probe headers instead.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol

from .identity import Role, Unauthorized, User
from .textnorm import tokenize

BYTES_PER_MS = 32
SAMPLE_MIN_MS = 120_000
SAMPLE_MAX_MS = 180_000
WATERMARK_PREAMBLE = b"WM01"


class VoiceError(Exception):
    """Base class for voice failures."""


class UnreadableAudio(VoiceError):
    pass


class UnknownProfile(VoiceError):
    pass


class ConsentMissing(VoiceError):
    pass


class SampleTooShort(VoiceError):
    pass


class SampleTooLong(VoiceError):
    pass


class EmptyReference(VoiceError):
    pass


class VoiceProviderFailure(VoiceError):
    pass


# --- word error rate ----------------------------------------------------------


def compute_wer(reference: str, hypothesis: str) -> float:
    """(substitutions + deletions + insertions) / reference word count.

    Minimum edit distance over normalized word tokens (case folded,
    punctuation stripped), rolling-row DP.
    """
    ref = tokenize(reference)
    hyp = tokenize(hypothesis)
    if not ref:
        raise EmptyReference("reference has no word tokens")
    previous = list(range(len(hyp) + 1))
    for i, ref_word in enumerate(ref, 1):
        current = [i] + [0] * len(hyp)
        for j, hyp_word in enumerate(hyp, 1):
            cost = 0 if ref_word == hyp_word else 1
            current[j] = min(
                previous[j] + 1,      # deletion
                current[j - 1] + 1,   # insertion
                previous[j - 1] + cost,  # substitution / match
            )
        previous = current
    return previous[-1] / len(ref)


# --- media handles --------------------------------------------------------------


class MediaStore:
    """Opaque handles over audio files in a configured media directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def save(self, data: bytes, suffix: str = "pcm") -> str:
        handle = f"m-{hashlib.sha256(data).hexdigest()[:16]}.{suffix}"
        path = self.directory / handle
        if not path.exists():
            path.write_bytes(data)
        return handle

    def read(self, handle: str) -> bytes:
        path = self.directory / Path(handle).name
        if not path.is_file():
            raise UnreadableAudio(f"no such audio handle: {handle}")
        data = path.read_bytes()
        if not data:
            raise UnreadableAudio(f"audio handle is empty: {handle}")
        return data

    def duration_ms(self, data: bytes) -> int:
        return len(data) // BYTES_PER_MS


# --- adapters --------------------------------------------------------------------


class AsrAdapter(Protocol):
    def transcribe(self, audio: bytes, language_hint: str) -> tuple[str, float]:
        """(transcript, confidence) or raise VoiceProviderFailure."""
        ...


class TtsAdapter(Protocol):
    def synthesize(self, text: str, voice_key: str, language: str) -> bytes:
        ...


class MockAsrAdapter:
    """Scripted transcripts keyed by audio fingerprint; unscripted audio maps
    to a deterministic fingerprint-derived transcript."""

    def __init__(self, script: Optional[dict[str, str]] = None):
        self.script = dict(script or {})

    @staticmethod
    def fingerprint(audio: bytes) -> str:
        return hashlib.sha256(audio).hexdigest()

    def add_script(self, audio: bytes, transcript: str) -> None:
        self.script[self.fingerprint(audio)] = transcript

    def transcribe(self, audio: bytes, language_hint: str) -> tuple[str, float]:
        fp = self.fingerprint(audio)
        if fp in self.script:
            return self.script[fp], 1.0
        return f"audio {fp[:8]}", 0.9


class MockTtsAdapter:
    """Deterministic byte pattern from (text, voice, language)."""

    def synthesize(self, text: str, voice_key: str, language: str) -> bytes:
        basis = f"{voice_key}\x1f{language}\x1f{text}".encode("utf-8")
        digest = hashlib.sha256(basis).digest()
        duration_ms = 180 + 45 * max(1, len(tokenize(text)))
        body_len = duration_ms * BYTES_PER_MS
        body = (digest * (body_len // len(digest) + 1))[:body_len]
        return body


class FailingAsrAdapter:
    def transcribe(self, audio: bytes, language_hint: str) -> tuple[str, float]:
        raise VoiceProviderFailure("scripted ASR failure")


# --- profile encryption -------------------------------------------------------------


def _keystream_xor(key: bytes, nonce: bytes, data: bytes) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < len(data):
        block = hmac.new(key, nonce + counter.to_bytes(8, "big"), hashlib.sha256).digest()
        out.extend(block)
        counter += 1
    return bytes(a ^ b for a, b in zip(data, out))


def encrypt_blob(key: bytes, plaintext: bytes) -> bytes:
    nonce = secrets.token_bytes(16)
    return nonce + _keystream_xor(key, nonce, plaintext)


def decrypt_blob(key: bytes, blob: bytes) -> bytes:
    nonce, ciphertext = blob[:16], blob[16:]
    return _keystream_xor(key, nonce, ciphertext)


# --- domain types ----------------------------------------------------------------------


@dataclass(frozen=True)
class AsrResult:
    transcript: str
    language_tag: str
    confidence: float
    audio_duration_ms: int
    processing_ms: float


@dataclass(frozen=True)
class ConsentRecord:
    granted: bool
    timestamp: float
    statement: str = ""


@dataclass(frozen=True)
class VoiceProfile:
    profile_id: str
    owner_id: str
    consent_granted: bool
    consent_at: float
    sample_duration_ms: int
    embedding_blob: bytes
    watermark_id: str


@dataclass(frozen=True)
class SynthesisRequest:
    text: str
    voice: str = "default"  # "default" or a profile_id
    language_tag: str = "en"
    honor_pause_markers: bool = True


@dataclass(frozen=True)
class SynthesisResult:
    audio_handle: str
    duration_ms: int
    processing_ms: float
    voice: str
    watermark_id: Optional[str] = None


# --- service ------------------------------------------------------------------------------


class VoiceService:
    def __init__(
        self,
        media: MediaStore,
        asr: Optional[AsrAdapter] = None,
        tts: Optional[TtsAdapter] = None,
        encryption_key: Optional[bytes] = None,
        clock: Callable[[], float] = time.perf_counter,
    ):
        self.media = media
        self.asr = asr or MockAsrAdapter()
        self.tts = tts or MockTtsAdapter()
        self._key = encryption_key or secrets.token_bytes(32)
        self._clock = clock
        self._lock = threading.Lock()
        self._profiles: dict[str, VoiceProfile] = {}

    # transcription

    def transcribe(self, audio_handle: str, language_hint: str = "en") -> AsrResult:
        audio = self.media.read(audio_handle)
        started = self._clock()
        transcript, confidence = self.asr.transcribe(audio, language_hint)
        processing_ms = (self._clock() - started) * 1000.0
        if not transcript and confidence > 0:
            confidence = 0.0
        return AsrResult(
            transcript=transcript,
            language_tag=language_hint,
            confidence=confidence,
            audio_duration_ms=self.media.duration_ms(audio),
            processing_ms=processing_ms,
        )

    # synthesis

    def synthesize(self, request: SynthesisRequest) -> SynthesisResult:
        watermark_id = None
        voice_key = "default"
        if request.voice != "default":
            profile = self.get_profile(request.voice)
            if not profile.consent_granted:
                raise ConsentMissing(
                    f"profile {profile.profile_id} has no recorded consent"
                )
            watermark_id = profile.watermark_id
            voice_key = profile.profile_id
        started = self._clock()
        audio = self.tts.synthesize(request.text, voice_key, request.language_tag)
        if watermark_id is not None:
            audio = WATERMARK_PREAMBLE + audio
        processing_ms = (self._clock() - started) * 1000.0
        handle = self.media.save(audio)
        return SynthesisResult(
            audio_handle=handle,
            duration_ms=self.media.duration_ms(audio),
            processing_ms=processing_ms,
            voice=request.voice,
            watermark_id=watermark_id,
        )

    # profiles

    def create_voice_profile(
        self, owner: User, sample_handle: str, consent: ConsentRecord
    ) -> VoiceProfile:
        if owner.role not in (Role.TEACHER, Role.ADMINISTRATOR):
            raise Unauthorized(f"role {owner.role.value} may not create voice profiles")
        if not consent.granted:
            raise ConsentMissing("explicit consent is required before cloning a voice")
        sample = self.media.read(sample_handle)
        duration = self.media.duration_ms(sample)
        if duration < SAMPLE_MIN_MS:
            raise SampleTooShort(f"{duration} ms is under the {SAMPLE_MIN_MS} ms minimum")
        if duration > SAMPLE_MAX_MS:
            raise SampleTooLong(f"{duration} ms is over the {SAMPLE_MAX_MS} ms maximum")
        profile_id = f"vp-{secrets.token_hex(8)}"
        # stand-in embedding: a digest of the sample, encrypted at rest
        embedding = encrypt_blob(self._key, hashlib.sha256(sample).digest())
        profile = VoiceProfile(
            profile_id=profile_id,
            owner_id=owner.user_id,
            consent_granted=True,
            consent_at=consent.timestamp,
            sample_duration_ms=duration,
            embedding_blob=embedding,
            watermark_id=f"wm-{hashlib.sha256(profile_id.encode()).hexdigest()[:12]}",
        )
        with self._lock:
            self._profiles[profile_id] = profile
        return profile

    def get_profile(self, profile_id: str) -> VoiceProfile:
        profile = self._profiles.get(profile_id)
        if profile is None:
            raise UnknownProfile(f"unknown voice profile: {profile_id}")
        return profile

    def revoke_consent(self, owner: User, profile_id: str) -> VoiceProfile:
        with self._lock:
            profile = self.get_profile(profile_id)
            if owner.user_id != profile.owner_id and owner.role is not Role.ADMINISTRATOR:
                raise Unauthorized("only the profile owner or an administrator may revoke")
            updated = VoiceProfile(
                profile_id=profile.profile_id,
                owner_id=profile.owner_id,
                consent_granted=False,
                consent_at=profile.consent_at,
                sample_duration_ms=profile.sample_duration_ms,
                embedding_blob=profile.embedding_blob,
                watermark_id=profile.watermark_id,
            )
            self._profiles[profile_id] = updated
        return updated
