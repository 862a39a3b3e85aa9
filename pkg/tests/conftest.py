"""Shared wiring for session-level tests: replay provider, fixture gateway."""

from __future__ import annotations

from pathlib import Path

import pytest

from bloclaw.config import AppConfig, SandboxConfig
from bloclaw.gateway import FixtureTransport, GatewayConfig, ScienceGateway
from bloclaw.providers import ReplayProvider
from bloclaw.registry import CapabilityRegistry
from bloclaw.sandbox import SandboxSupervisor
from bloclaw.session import SessionService

FIXTURES = Path(__file__).parent / "fixtures" / "gateway"

GATEWAY_CONFIG = GatewayConfig(
    fold_endpoint="https://fold.test/v1/pdb",
    archive_url_template="https://archive.test/download/{pdb_id}.pdb",
    retry_attempts=3,
    backoff_s=0.0,
)


@pytest.fixture(scope="session")
def shared_supervisor():
    return SandboxSupervisor()


def make_service(
    tmp_path: Path,
    responses: list[str],
    supervisor: SandboxSupervisor,
    follow_up: bool = False,
) -> SessionService:
    config = AppConfig(
        skills_dir=str(tmp_path / "skills"),
        workspace_root=str(tmp_path / "workspaces"),
        sandbox=SandboxConfig(timeout_s=60.0),
        follow_up_reply=follow_up,
    )
    provider = ReplayProvider(responses)
    registry = CapabilityRegistry(config.skills_dir)
    gateway = ScienceGateway(
        config=GATEWAY_CONFIG,
        transport=FixtureTransport(FIXTURES),
        probe_runner=lambda name, args: supervisor.run_probe(
            name, args, tmp_path / "workspaces" / "gateway"
        ).artifacts,
    )
    return SessionService(config, provider, supervisor, gateway, registry)
