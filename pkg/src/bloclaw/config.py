"""Runtime configuration, loaded from a JSON file or BLOCLAW_CONFIG."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_CONFIG = "BLOCLAW_CONFIG"


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = ""
    key_env: str = "BLOCLAW_PROVIDER_KEY"
    model: str = "default"


@dataclass(frozen=True)
class SandboxConfig:
    timeout_s: float = 30.0
    memory_cap_bytes: int = 1 << 30
    allow_network: bool = False


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    fold_endpoint: str = "https://api.esmatlas.com/foldSequence/v1/pdb/"
    archive_url_template: str = "https://files.rcsb.org/download/{pdb_id}.pdb"
    skills_dir: str = "skills"
    workspace_root: str = "workspaces"
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    context_budget_tokens: int = 4_000
    capability_budget_tokens: int = 2_000
    follow_up_reply: bool = True

    @classmethod
    def load(cls, path: Path | str | None = None) -> "AppConfig":
        """Load from an explicit path, else BLOCLAW_CONFIG, else defaults."""
        if path is None:
            env_path = os.environ.get(ENV_CONFIG)
            if not env_path:
                return cls()
            path = env_path
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        provider = ProviderConfig(**raw.pop("provider", {}))
        sandbox = SandboxConfig(**raw.pop("sandbox", {}))
        return cls(provider=provider, sandbox=sandbox, **raw)
