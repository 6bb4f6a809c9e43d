"""Deterministic CSV/JSON/SVG outputs keyed by the config hash."""

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402
import numpy as np  # noqa: E402

from hopfduet.config import SCHEMA_VERSION, jsonable  # noqa: E402
from hopfduet.errors import HopfDuetError  # noqa: E402

logger = logging.getLogger(__name__)

SVG_SALT = "hopfduet"

# One colour per label set in region maps
LABEL_COLOURS = {
    "FP": "#d9d9d9",
    "IP": "#4575b4",
    "AP": "#d73027",
    "AP+IP": "#984ea3",
    "LA": "#a6d96a",
    "HA": "#1a9850",
    "OTHER": "#fdae61",
    "UNRESOLVED": "#000000",
}
EVENT_MARKERS = {"HB": "o", "PF": "s", "PD": "D", "TR": "^", "FOLD": "v"}


def format_value(value: Any) -> str:
    """CSV cell text: floats as %.12g, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return "%.12g" % v
    if isinstance(value, complex):
        return "%.12g%+.12gj" % (value.real, value.imag)
    return str(value)


def header_line(config_hash: str, command: str) -> str:
    return f"hopfduet schema={SCHEMA_VERSION} config={config_hash} command={command}"


def render_csv(config_hash: str, command: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    buffer.write(f"# {header_line(config_hash, command)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_json(config_hash: str, command: str, payload: Dict[str, Any]) -> str:
    body = dict(jsonable(payload))
    body["_meta"] = {"schema": SCHEMA_VERSION, "config": config_hash, "command": command}
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def render_svg(config_hash: str, command: str, figure) -> str:
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        buffer = io.StringIO()
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(figure)
    text = buffer.getvalue()
    comment = f"<!-- {header_line(config_hash, command)} -->\n"
    # after the XML declaration when present
    if text.startswith("<?xml"):
        end = text.index("?>") + 2
        return text[:end] + "\n" + comment + text[end:].lstrip("\n")
    return comment + text


class OutputWriter:
    """Collects rendered files in memory; nothing touches disk before `commit`."""

    def __init__(self, directory: Path, config_hash: str, command: str, formats: Sequence[str] = ("csv", "json", "svg")):
        self.directory = Path(directory)
        self.config_hash = config_hash
        self.command = command
        self.formats = tuple(formats)
        self.files: Dict[str, str] = {}

    @property
    def stem(self) -> str:
        return f"{self.command.replace(' ', '-')}_{self.config_hash}"

    def _name(self, suffix: str, ext: str) -> str:
        tail = f"_{suffix}" if suffix else ""
        return f"{self.stem}{tail}.{ext}"

    def _add(self, name: str, text: str):
        if name in self.files:
            raise HopfDuetError(f"output file {name} produced twice")
        self.files[name] = text

    def add_csv(self, suffix: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]):
        if "csv" in self.formats:
            self._add(self._name(suffix, "csv"), render_csv(self.config_hash, self.command, columns, rows))

    def add_json(self, suffix: str, payload: Dict[str, Any]):
        if "json" in self.formats:
            self._add(self._name(suffix, "json"), render_json(self.config_hash, self.command, payload))

    def add_svg(self, suffix: str, build_figure):
        """`build_figure` is only called when SVG output is enabled."""
        if "svg" in self.formats:
            self._add(self._name(suffix, "svg"), render_svg(self.config_hash, self.command, build_figure()))

    def commit(self) -> List[Path]:
        self.directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.files):
            path = self.directory / name
            path.write_text(self.files[name], encoding="utf-8")
            logger.info("wrote %s", path)
            written.append(path)
        return written


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def curves_figure(points, title: str = ""):
    """HB/TR0/DET0/DISC0 curves in the (lambda, eps) plane."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    styles = {"HB": "-", "TR0": "--", "DET0": "-.", "DISC0": ":"}
    colours = {"plus": "#4575b4", "minus": "#d73027"}
    groups: Dict[Tuple[str, str], List[Tuple[float, float]]] = {}
    for pt in points:
        groups.setdefault((pt.branch, pt.curve), []).append((pt.lam, pt.eps))
    for (branch, curve), values in sorted(groups.items()):
        lam, eps = zip(*values)
        ax.plot(lam, eps, styles.get(curve, "-"), color=colours.get(branch, "k"), label=f"{curve} {branch}", lw=1.2)
    ax.set_xlabel("lambda")
    ax.set_ylabel("eps")
    if title:
        ax.set_title(title)
    if groups:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return fig


def regions_figure(diagram, title: str = ""):
    """Flat colour map of label sets (2D) or a label strip (1D), with event markers."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    keys = sorted({diagram.key(idx) for idx in diagram.cells})
    colour_index = {k: i for i, k in enumerate(keys)}
    colours = [LABEL_COLOURS.get(k, "#7f7f7f") for k in keys]
    cmap = ListedColormap(colours)
    xs = diagram.axes[0].values
    if len(diagram.axes) == 2:
        ys = diagram.axes[1].values
        grid = np.zeros((len(ys), len(xs)))
        for (i, j) in diagram.cells:
            grid[j, i] = colour_index[diagram.key((i, j))]
        ax.pcolormesh(xs, ys, grid, cmap=cmap, vmin=-0.5, vmax=len(keys) - 0.5, shading="nearest")
        ax.set_ylabel(diagram.axes[1].name)
    else:
        grid = np.array([[colour_index[diagram.key((i,))] for i in range(len(xs))]])
        ax.pcolormesh(xs, [0.0], grid, cmap=cmap, vmin=-0.5, vmax=len(keys) - 0.5, shading="nearest")
        ax.set_yticks([])
    for event in diagram.events:
        y = event.p2 if event.p2 is not None else 0.0
        ax.plot(event.p1, y, EVENT_MARKERS.get(event.type, "x"), color="k", ms=3)
    handles = [Patch(color=c, label=k) for k, c in zip(keys, colours)]
    ax.legend(handles=handles, fontsize=7, loc="best")
    ax.set_xlabel(diagram.axes[0].name)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def branch_figure(branches: Sequence, events: Sequence, param: str, title: str = ""):
    """Orbit amplitude along continued branches: solid stable, dashed unstable."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for branch in branches:
        values = np.array([pt.value for pt in branch.points])
        amps = np.array([pt.orbit.amplitude for pt in branch.points])
        stable = np.array([pt.orbit.stable for pt in branch.points])
        for flag, style in ((True, "-"), (False, "--")):
            masked = np.where(stable == flag, amps, np.nan)
            ax.plot(values, masked, style, color="k", lw=1.2)
    for event in events:
        ax.axvline(event.p1, color="#7f7f7f", lw=0.6)
        ax.plot(event.p1, 0.0, EVENT_MARKERS.get(event.type, "x"), color="k", ms=5, label=event.type)
    ax.set_xlabel(param)
    ax.set_ylabel("amplitude")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def trajectory_figure(t: np.ndarray, y: np.ndarray, names: Sequence[str], title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k, name in enumerate(names):
        ax.plot(t, y[:, k], lw=0.8, label=name)
    ax.set_xlabel("t")
    ax.legend(fontsize=7, loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def event_rows(events: Sequence, default_p2: Optional[float] = None) -> List[Tuple[Any, ...]]:
    """`type,p1,p2,branch` rows in a fixed order."""
    rows = [(e.type, e.p1, e.p2 if e.p2 is not None else default_p2, e.branch) for e in events]
    return sorted(rows, key=lambda r: (r[1], r[0], r[3]))
