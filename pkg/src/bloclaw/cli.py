"""Command line entrypoints: serve, bench, repl."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig


def build_service(config: AppConfig, provider=None):
    from .gateway import GatewayConfig, HttpxTransport, ScienceGateway
    from .providers import HttpProvider, ReplayProvider
    from .registry import CapabilityRegistry
    from .sandbox import SandboxSupervisor
    from .session import SessionService

    if provider is None:
        if config.provider.endpoint:
            provider = HttpProvider(
                config.provider.endpoint,
                key_env=config.provider.key_env,
                model=config.provider.model,
            )
        else:
            provider = ReplayProvider([])
    supervisor = SandboxSupervisor(allow_network=config.sandbox.allow_network)
    registry = CapabilityRegistry(config.skills_dir)
    gateway = ScienceGateway(
        config=GatewayConfig(
            fold_endpoint=config.fold_endpoint,
            archive_url_template=config.archive_url_template,
        ),
        transport=HttpxTransport(),
        probe_runner=lambda name, args: supervisor.run_probe(
            name, args, Path(config.workspace_root) / "gateway"
        ).artifacts,
    )
    return SessionService(config, provider, supervisor, gateway, registry)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    config = AppConfig.load(args.config)
    service = build_service(config)
    app = create_app(service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench.runner import format_report, run_bench

    report = run_bench(args.suite, n=args.n, seed=args.seed)
    print(format_report(report))
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


def cmd_repl(args: argparse.Namespace) -> int:
    """Interactive loop against a scripted replay provider."""
    from .providers import ReplayProvider

    config = AppConfig.load(args.config)
    provider = ReplayProvider.from_file(args.replay) if args.replay else None
    service = build_service(config, provider=provider)
    session = service.create_session()
    print(f"session {session.id} ready; EOF to quit")
    try:
        for line in sys.stdin:
            text = line.strip()
            if not text:
                continue
            events = service.handle_user_message(session.id, text)
            for event in events:
                print(event.to_json())
    except KeyboardInterrupt:
        pass
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bloclaw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--config", default=None, help="config JSON path")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.set_defaults(func=cmd_serve)

    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument("suite", choices=["routing", "sandbox", "intake"])
    bench.add_argument("--n", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=7)
    bench.add_argument("--out", default=None, help="write machine-readable report")
    bench.set_defaults(func=cmd_bench)

    repl = sub.add_parser("repl", help="drive a session from stdin")
    repl.add_argument("--replay", default=None, help="JSON list of canned responses")
    repl.add_argument("--config", default=None)
    repl.set_defaults(func=cmd_repl)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
