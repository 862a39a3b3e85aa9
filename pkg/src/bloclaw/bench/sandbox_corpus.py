"""Sandbox behavior corpus: scripts exercising the capture guarantees.

Three behavior rows: scripts that call the display function, scripts that
build a figure and never save or show it, and scripts that leave an
interactive figure in a variable without writing HTML. Success per row is
at least one figure artifact of the right kind in the execution report.
"""

from __future__ import annotations

import random

ROW_DISPLAY_CALL = "display_call"
ROW_FORGOTTEN_SAVE = "forgotten_save"
ROW_INTERACTIVE_NO_HTML = "interactive_no_html"

BEHAVIOR_ROWS = (ROW_DISPLAY_CALL, ROW_FORGOTTEN_SAVE, ROW_INTERACTIVE_NO_HTML)

_MPL_BODIES = [
    "plt.plot({xs}, {ys})\nplt.title('trend')",
    "plt.bar(['a', 'b', 'c'], {ys3})",
    "plt.scatter({xs}, {ys})",
    "plt.hist({ys}, bins=4)",
    "fig, ax = plt.subplots()\nax.plot({xs}, {ys})\nax.set_xlabel('step')",
]

_FORGOTTEN_BODIES = [
    "fig, ax = plt.subplots()\nax.plot({xs}, {ys})",
    "fig = plt.figure()\nplt.plot({xs}, {ys})",
    "from matplotlib.figure import Figure\nfig = Figure()\nax = fig.subplots()\nax.bar(['x', 'y'], {ys2})",
    "fig, axes = plt.subplots(2, 1)\naxes[0].plot({xs})\naxes[1].scatter({xs}, {ys})",
]

_PLOTLY_BODIES = [
    "fig = go.Figure(data=go.Scatter(x={xs}, y={ys}))",
    "fig = go.Figure(data=go.Bar(x=['a', 'b', 'c'], y={ys3}))",
    "fig = go.Figure(data=go.Heatmap(z=[{ys3}, {ys3}]))",
    "chart = go.Figure(data=go.Scatter(x={xs}, y={ys}, mode='markers'))",
]


def _data(rng: random.Random) -> dict:
    xs = [round(rng.uniform(0, 10), 2) for _ in range(6)]
    ys = [round(rng.uniform(0, 5), 2) for _ in range(6)]
    return {
        "xs": xs,
        "ys": ys,
        "ys2": ys[:2],
        "ys3": ys[:3],
    }


def generate_behavior_scripts(row: str, n: int, seed: int) -> list[str]:
    """n deterministic scripts for one behavior row."""
    rng = random.Random(f"{seed}:{row}")
    scripts = []
    for _ in range(n):
        data = _data(rng)
        if row == ROW_DISPLAY_CALL:
            body = rng.choice(_MPL_BODIES).format(**data)
            scripts.append(f"import matplotlib.pyplot as plt\n{body}\nplt.show()\n")
        elif row == ROW_FORGOTTEN_SAVE:
            body = rng.choice(_FORGOTTEN_BODIES).format(**data)
            scripts.append(f"import matplotlib.pyplot as plt\n{body}\n")
        elif row == ROW_INTERACTIVE_NO_HTML:
            body = rng.choice(_PLOTLY_BODIES).format(**data)
            scripts.append(f"import plotly.graph_objects as go\n{body}\n")
        else:
            raise ValueError(f"unknown behavior row {row!r}")
    return scripts


def capture_succeeded(row: str, report) -> bool:
    kinds = [a.kind for a in report.artifacts]
    if row == ROW_INTERACTIVE_NO_HTML:
        return "interactive_html" in kinds
    return "raster_image_b64" in kinds
