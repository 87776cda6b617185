"""Deployment configuration: one JSON file plus environment overrides.

Config file grammar (all keys optional):

    {
      "host": "127.0.0.1", "port": 8764,
      "media_dir": "media", "ledger_path": "ledger.db",
      "corpus_path": "curriculum.json",
      "prompt_config_path": "prompts.json",
      "admin_handle": "root", "admin_secret": "...",
      "signing_key_hex": "...", "token_ttl_s": 28800,
      "cultural_markers": ["..."],
      "providers": [{"provider_id": "mock-primary", "max_context_units": 16000,
                     "cost_per_unit": 1.0, "priority_rank": 0,
                     "adapter": "mock", "model_label": "echo-1"}]
    }

Environment overrides: TUTORHUB_HOST, TUTORHUB_PORT, TUTORHUB_MEDIA_DIR,
TUTORHUB_LEDGER_PATH, TUTORHUB_CORPUS, TUTORHUB_ADMIN_HANDLE,
TUTORHUB_ADMIN_SECRET, TUTORHUB_SIGNING_KEY (hex).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from ..agents import AgentRegistry, seed_platform_agents
from ..collab import GroupService
from ..curriculum import CurriculumService
from ..identity import IdentityService
from ..ledger import LedgerStore
from ..prompts import PromptConfig, load_prompt_config
from ..router import ProviderProfile, ProviderRegistry, build_adapter
from ..voice import MediaStore, VoiceService
from .service import ChatGateway, Services

DEFAULT_PROVIDERS = (
    {
        "provider_id": "mock-primary",
        "max_context_units": 16000,
        "cost_per_unit": 1.0,
        "priority_rank": 0,
        "adapter": "mock",
        "model_label": "echo-1",
    },
)


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8764
    media_dir: str = "media"
    ledger_path: str = ":memory:"
    corpus_path: Optional[str] = None
    prompt_config_path: Optional[str] = None
    admin_handle: str = "root"
    admin_secret: str = "change-me-now"
    signing_key_hex: Optional[str] = None
    token_ttl_s: int = 8 * 3600
    scrypt_n: int = 2**14
    cultural_markers: tuple[str, ...] = ()
    providers: tuple[dict, ...] = DEFAULT_PROVIDERS


def load_config(
    path: Optional[str] = None, env: Mapping[str, str] = os.environ
) -> GatewayConfig:
    raw: dict = {}
    config_path = path or env.get("TUTORHUB_CONFIG")
    if config_path:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    cfg = GatewayConfig(
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8764)),
        media_dir=raw.get("media_dir", "media"),
        ledger_path=raw.get("ledger_path", ":memory:"),
        corpus_path=raw.get("corpus_path"),
        prompt_config_path=raw.get("prompt_config_path"),
        admin_handle=raw.get("admin_handle", "root"),
        admin_secret=raw.get("admin_secret", "change-me-now"),
        signing_key_hex=raw.get("signing_key_hex"),
        token_ttl_s=int(raw.get("token_ttl_s", 8 * 3600)),
        scrypt_n=int(raw.get("scrypt_n", 2**14)),
        cultural_markers=tuple(raw.get("cultural_markers", ())),
        providers=tuple(raw.get("providers", DEFAULT_PROVIDERS)),
    )
    cfg.host = env.get("TUTORHUB_HOST", cfg.host)
    cfg.port = int(env.get("TUTORHUB_PORT", cfg.port))
    cfg.media_dir = env.get("TUTORHUB_MEDIA_DIR", cfg.media_dir)
    cfg.ledger_path = env.get("TUTORHUB_LEDGER_PATH", cfg.ledger_path)
    cfg.corpus_path = env.get("TUTORHUB_CORPUS", cfg.corpus_path)
    cfg.admin_handle = env.get("TUTORHUB_ADMIN_HANDLE", cfg.admin_handle)
    cfg.admin_secret = env.get("TUTORHUB_ADMIN_SECRET", cfg.admin_secret)
    cfg.signing_key_hex = env.get("TUTORHUB_SIGNING_KEY", cfg.signing_key_hex)
    return cfg


def build_services(cfg: GatewayConfig) -> Services:
    """Construct every module, ingest the configured corpus, seed the
    bootstrap admin and the three leveled platform assistants."""
    curriculum = CurriculumService()
    if cfg.corpus_path:
        curriculum.ingest(Path(cfg.corpus_path).read_text(encoding="utf-8"))
    identity = IdentityService(
        signing_key=bytes.fromhex(cfg.signing_key_hex) if cfg.signing_key_hex else None,
        token_ttl_s=cfg.token_ttl_s,
        scrypt_n=cfg.scrypt_n,
    )
    agents = AgentRegistry(lambda: curriculum.index)
    groups = GroupService()
    ledger = LedgerStore(cfg.ledger_path)
    media = MediaStore(cfg.media_dir)
    voice = VoiceService(media)
    providers = ProviderRegistry()
    for entry in cfg.providers:
        providers.register(
            ProviderProfile(
                provider_id=entry["provider_id"],
                max_context_units=int(entry.get("max_context_units", 16000)),
                cost_per_unit=float(entry.get("cost_per_unit", 1.0)),
                latency_ewma_ms=float(entry.get("latency_ewma_ms", 0.0)),
                priority_rank=int(entry.get("priority_rank", 0)),
                model_label=entry.get("model_label", "model"),
            ),
            build_adapter(entry.get("adapter", "mock")),
        )
    prompt_config = PromptConfig(cultural_markers=cfg.cultural_markers)
    if cfg.prompt_config_path:
        prompt_config = load_prompt_config(
            Path(cfg.prompt_config_path).read_text(encoding="utf-8")
        )
    services = Services(
        curriculum=curriculum,
        identity=identity,
        agents=agents,
        groups=groups,
        ledger=ledger,
        voice=voice,
        providers=providers,
        media=media,
        prompt_config=prompt_config,
        cultural_markers=cfg.cultural_markers,
    )
    admin = identity.bootstrap_admin(cfg.admin_handle, cfg.admin_secret)
    if len(curriculum.index):
        seed_platform_agents(agents, admin)
    return services


def build_gateway(cfg: GatewayConfig) -> ChatGateway:
    return ChatGateway(build_services(cfg))
