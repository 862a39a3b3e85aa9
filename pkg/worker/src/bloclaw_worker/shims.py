"""Display-call overrides and the end-of-run figure sweep.

Patches are applied lazily through an import hook so that scripts which
never touch a graphics runtime pay nothing and produce byte-identical
stdout to an uninstrumented run. Both capture paths share one ledger of
figure identities, so a figure serializes at most once no matter how many
routes would reach it.
"""

from __future__ import annotations

import base64
import importlib.abc
import importlib.machinery
import io
import os
import sys
import traceback

from .records import (
    EMITTER,
    KIND_HTML,
    KIND_RASTER,
    KIND_STDERR,
    ORIGIN_SHOW,
    ORIGIN_SWEEP,
)

_PATCH_TARGETS = {
    "matplotlib",
    "matplotlib.pyplot",
    "plotly.io",
    "plotly.basedatatypes",
}

_applied = False
_captured_ids: set[int] = set()


class CaptureLedger:
    """Tracks figure identities already serialized this execution."""

    @staticmethod
    def claim(fig) -> bool:
        """True exactly once per figure object."""
        key = id(fig)
        if key in _captured_ids:
            return False
        _captured_ids.add(key)
        return True


def _figure_to_png_b64(fig) -> str:
    buf = io.BytesIO()
    canvas = getattr(fig, "canvas", None)
    if canvas is None or not hasattr(canvas, "print_figure"):
        from matplotlib.backends.backend_agg import FigureCanvasAgg

        FigureCanvasAgg(fig)
    fig.savefig(buf, format="png", dpi=100)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _plotly_to_html(fig) -> str:
    # include_plotlyjs=True inlines the whole library: the payload must
    # render with no external fetches.
    return fig.to_html(include_plotlyjs=True, full_html=True)


def capture_matplotlib_figure(fig, origin: str) -> None:
    if not CaptureLedger.claim(fig):
        return
    try:
        EMITTER.emit(KIND_RASTER, origin, _figure_to_png_b64(fig))
    except Exception:
        EMITTER.emit_error(f"figure serialization failed: {traceback.format_exc(limit=2)}", origin)


def capture_plotly_figure(fig, origin: str) -> None:
    if not CaptureLedger.claim(fig):
        return
    try:
        EMITTER.emit(KIND_HTML, origin, _plotly_to_html(fig))
    except Exception:
        EMITTER.emit_error(f"figure serialization failed: {traceback.format_exc(limit=2)}", origin)


# ---------------------------------------------------------------------------
# Patch bodies
# ---------------------------------------------------------------------------


def _patch_matplotlib(module) -> None:
    try:
        module.use("Agg", force=True)
    except Exception:
        pass


def _patch_pyplot(plt) -> None:
    if getattr(plt, "__bloclaw_patched__", False):
        return

    def _show(*args, **kwargs):
        for num in plt.get_fignums():
            capture_matplotlib_figure(plt.figure(num), ORIGIN_SHOW)
        return None

    plt.show = _show
    plt.__bloclaw_patched__ = True


def _patch_plotly_io(pio) -> None:
    if getattr(pio, "__bloclaw_patched__", False):
        return

    def _show(fig, *args, **kwargs):
        capture_plotly_figure(fig, ORIGIN_SHOW)
        return None

    pio.show = _show
    try:
        pio.renderers.default = "json"
    except Exception:
        pass
    pio.__bloclaw_patched__ = True


def _patch_plotly_base(module) -> None:
    base_figure = getattr(module, "BaseFigure", None)
    if base_figure is None or getattr(base_figure, "__bloclaw_patched__", False):
        return

    def _show(self, *args, **kwargs):
        capture_plotly_figure(self, ORIGIN_SHOW)
        return None

    base_figure.show = _show
    base_figure.__bloclaw_patched__ = True


_PATCHES = {
    "matplotlib": _patch_matplotlib,
    "matplotlib.pyplot": _patch_pyplot,
    "plotly.io": _patch_plotly_io,
    "plotly.basedatatypes": _patch_plotly_base,
}


class _PatchingLoader(importlib.abc.Loader):
    def __init__(self, inner):
        self._inner = inner

    def create_module(self, spec):
        return self._inner.create_module(spec)

    def exec_module(self, module):
        self._inner.exec_module(module)
        patch = _PATCHES.get(module.__name__)
        if patch is not None:
            try:
                patch(module)
            except Exception:
                EMITTER.emit(
                    KIND_STDERR,
                    "stream",
                    f"[shims] patch for {module.__name__} failed:\n{traceback.format_exc(limit=2)}",
                )


class _PatchingFinder(importlib.abc.MetaPathFinder):
    def find_spec(self, fullname, path, target=None):
        if fullname not in _PATCH_TARGETS:
            return None
        for finder in sys.meta_path:
            if finder is self:
                continue
            spec = finder.find_spec(fullname, path, target)
            if spec is not None and spec.loader is not None:
                spec.loader = _PatchingLoader(spec.loader)
                return spec
        return None


def apply_display_overrides() -> None:
    """Install the lazy patch hook (and patch anything already imported).

    Idempotent: double injection leaves a single hook, so one show call
    still produces one record. Nothing is imported eagerly; a script with
    no graphics never loads a graphics runtime.
    """
    global _applied
    EMITTER.install()
    if _applied:
        return
    os.environ.setdefault("MPLBACKEND", "Agg")
    sys.meta_path.insert(0, _PatchingFinder())
    for name, patch in _PATCHES.items():
        module = sys.modules.get(name)
        if module is not None:
            patch(module)
    if os.environ.get("BLOCLAW_NO_NETWORK") == "1":
        _block_sockets()
    if os.environ.get("BLOCLAW_WORKSPACE_ONLY") == "1":
        workspace = os.environ.get("BLOCLAW_WORKSPACE")
        if workspace:
            _guard_writes(workspace)
    _applied = True


def sweep_and_emit(namespace: dict) -> None:
    """Serialize every live figure not yet captured.

    Covers the script's global namespace and each runtime's own figure
    registry; runs on every exit path including after an exception. A
    serialization failure on one figure never blocks the rest.
    """
    plt = sys.modules.get("matplotlib.pyplot")
    if plt is not None:
        try:
            for num in list(plt.get_fignums()):
                capture_matplotlib_figure(plt.figure(num), ORIGIN_SWEEP)
        except Exception:
            EMITTER.emit_error(f"pyplot sweep failed: {traceback.format_exc(limit=2)}", ORIGIN_SWEEP)

    mpl_figure = sys.modules.get("matplotlib.figure")
    plotly_base = sys.modules.get("plotly.basedatatypes")
    figure_cls = getattr(mpl_figure, "Figure", None) if mpl_figure else None
    plotly_cls = getattr(plotly_base, "BaseFigure", None) if plotly_base else None
    if figure_cls is None and plotly_cls is None:
        return
    for value in list(namespace.values()):
        try:
            if figure_cls is not None and isinstance(value, figure_cls):
                capture_matplotlib_figure(value, ORIGIN_SWEEP)
            elif plotly_cls is not None and isinstance(value, plotly_cls):
                capture_plotly_figure(value, ORIGIN_SWEEP)
        except Exception:
            EMITTER.emit_error(f"sweep failed on object: {traceback.format_exc(limit=2)}", ORIGIN_SWEEP)


# ---------------------------------------------------------------------------
# Optional execution guards (defense in depth, not a security boundary)
# ---------------------------------------------------------------------------


def _block_sockets() -> None:
    import socket

    real_socket = socket.socket

    class _DeniedSocket(real_socket):
        def __init__(self, *args, **kwargs):
            raise PermissionError("network access is disabled inside the sandbox")

    def _denied(*args, **kwargs):
        raise PermissionError("network access is disabled inside the sandbox")

    socket.socket = _DeniedSocket  # type: ignore[misc]
    socket.create_connection = _denied


def _guard_writes(workspace: str) -> None:
    """Deny file writes outside the workspace subtree.

    Library scratch space stays legal because the supervisor points TMPDIR
    and MPLCONFIGDIR inside the workspace.
    """
    import builtins

    root = os.path.realpath(workspace)
    real_open = builtins.open

    def _checked_open(file, mode="r", *args, **kwargs):
        if isinstance(file, (str, os.PathLike)) and any(m in str(mode) for m in "wxa+"):
            path = os.path.realpath(os.fspath(file))
            if path != root and not path.startswith(root + os.sep):
                raise PermissionError(f"write outside workspace denied: {file}")
        return real_open(file, mode, *args, **kwargs)

    builtins.open = _checked_open
