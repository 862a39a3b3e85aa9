"""Worker entrypoint: ``python -m bloclaw_worker <script_path>``.

Executes one instrumented script in a fresh namespace, then sweeps for
figures on every exit path. A user exception prints its traceback to
stderr and exits nonzero; the sweep still runs first, so artifacts created
before the crash are not lost.
"""

from __future__ import annotations

import os
import sys
import traceback

from . import shims


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m bloclaw_worker <script_path>", file=sys.stderr)
        return 2
    script_path = argv[0]
    try:
        with open(script_path, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return 2

    workspace = os.environ.get("BLOCLAW_WORKSPACE")
    if workspace:
        try:
            os.chdir(workspace)
        except OSError as exc:
            print(f"cannot enter workspace: {exc}", file=sys.stderr)
            return 2

    shims.apply_display_overrides()
    namespace: dict = {"__name__": "__main__", "__file__": script_path}
    status = 0
    try:
        code = compile(source, script_path, "exec")
        exec(code, namespace)
    except SystemExit as exc:
        status = int(exc.code) if isinstance(exc.code, int) else (0 if exc.code is None else 1)
    except BaseException:
        traceback.print_exc()
        status = 1
    finally:
        try:
            shims.sweep_and_emit(namespace)
        except Exception:
            traceback.print_exc()
            status = status or 1
        try:
            sys.stdout.flush()
        except Exception:
            pass
    return status


if __name__ == "__main__":
    sys.exit(main())
