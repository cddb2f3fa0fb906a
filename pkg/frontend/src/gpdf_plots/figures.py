"""Figure construction from validated scenario tables.

Five figure kinds are rendered as static PNGs: moment-growth curves with
exponential / stretched-exponential overlays, shell-window slopes,
scattering-distance decay, conservation-drift panels, and the truncation
sweep heatmap.  Every figure carries the sha256 digest its input file has
in the scenario manifest, both as a visible footer and as PNG metadata,
so an image can always be traced back to the exact bytes it was drawn
from.
"""
from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, Table, read_table

GROWTH = "growth-curves"
SHELL_WINDOWS = "shell-windows"
SCATTERING_DECAY = "scattering-decay"
CONSERVATION = "conservation-drift"
SWEEP_HEATMAP = "sweep-heatmap"

FIGURE_KINDS = (GROWTH, SHELL_WINDOWS, SCATTERING_DECAY, CONSERVATION,
                SWEEP_HEATMAP)

# which figure kinds each known CSV produces
KINDS_BY_FILE = {
    "trace_diagnostics.csv": (GROWTH,),
    "sweep.csv": (SHELL_WINDOWS, SWEEP_HEATMAP),
    "scattering.csv": (SCATTERING_DECAY,),
    "observables.csv": (CONSERVATION,),
}

NO_DIGEST = "no-manifest"


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: input, kind, transforms, output, caption."""

    kind: str
    csv_path: Path
    out_path: Path
    axis_transforms: tuple[str, ...] = ()
    caption_template: str = "{kind} — {scenario}/{source} [{digest}]"
    scenario: str = ""
    digest: str = NO_DIGEST
    manifest_extras: dict = field(default_factory=dict)

    def caption(self) -> str:
        return self.caption_template.format(
            kind=self.kind, scenario=self.scenario or "?",
            source=self.csv_path.name, digest=self.digest,
        )


@dataclass(frozen=True)
class RenderResult:
    spec: FigureSpec
    warning: Optional[str] = None


def manifest_info(csv_path: Path) -> tuple[str, str, dict]:
    """(scenario, digest-of-this-csv, extras) from the sibling manifest."""
    manifest = csv_path.parent / "manifest.json"
    if not manifest.exists():
        return "", NO_DIGEST, {}
    doc = json.loads(manifest.read_text())
    digest = NO_DIGEST
    for entry in doc.get("outputs", []):
        if entry.get("file") == csv_path.name:
            digest = entry.get("sha256", NO_DIGEST)
    return doc.get("scenario", ""), digest, doc.get("extras", {})


def specs_for_csv(csv_path: Path, out_dir: Path) -> list[FigureSpec]:
    kinds = KINDS_BY_FILE.get(csv_path.name, ())
    scenario, digest, extras = manifest_info(csv_path)
    specs = []
    for kind in kinds:
        stem = f"{scenario or csv_path.parent.name}_{kind}.png"
        specs.append(FigureSpec(
            kind=kind,
            csv_path=csv_path,
            out_path=Path(out_dir) / stem,
            axis_transforms=("log",) if kind in (SHELL_WINDOWS,
                                                 SCATTERING_DECAY) else (),
            scenario=scenario,
            digest=digest,
            manifest_extras=extras,
        ))
    return specs


def _finish(fig, spec: FigureSpec, warning: Optional[str]) -> RenderResult:
    if warning:
        fig.text(0.5, 0.5, "NO DATA", ha="center", va="center",
                 fontsize=28, color="crimson", alpha=0.5,
                 transform=fig.transFigure)
    fig.text(0.01, 0.005, spec.caption(), fontsize=6, color="0.35")
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(
        spec.out_path, dpi=120,
        metadata={
            "gpdf-digest": spec.digest,
            "gpdf-source": spec.csv_path.name,
            "gpdf-kind": spec.kind,
        },
    )
    plt.close(fig)
    return RenderResult(spec=spec, warning=warning)


def _render_growth(spec: FigureSpec, table: Table) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    warning = None
    if table.empty:
        warning = "empty input"
    else:
        k = table.col("k")
        val = table.col("value_log")
        ax.plot(k, val, "o-", ms=3, label="log trace")
        extras = spec.manifest_extras
        c = float(extras.get("c_fit", 0.0)) or None
        r = float(spec.manifest_extras.get("r", 0.0)) or None
        if r is None:
            cfg_r = None
            manifest = spec.csv_path.parent / "manifest.json"
            if manifest.exists():
                cfg_r = json.loads(manifest.read_text()).get(
                    "config", {}).get("measure.r")
            r = float(cfg_r) if cfg_r else None
        if c:
            ax.plot(k, c * k, "--", lw=1, label=f"{c:.3g}·k")
            if r:
                ax.plot(k, c * k**r, ":", lw=1.2, label=f"{c:.3g}·k^{r:g}")
        exp = extras.get("exponent_family")
        if exp is not None:
            ax.annotate(f"fitted growth exponent r−1 ≈ {float(exp):.3f}",
                        xy=(0.03, 0.92), xycoords="axes fraction", fontsize=8)
    ax.set_xlabel("k")
    ax.set_ylabel("log Tr(S^(k,1) γ^(k))")
    ax.set_title("Trace moment growth")
    ax.legend(fontsize=7, loc="lower right")
    return _finish(fig, spec, warning)


def _render_shell_windows(spec: FigureSpec, table: Table) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    warning = None
    if table.empty:
        warning = "empty input"
    else:
        j = table.col("J_retained")
        w = table.col("min_window")
        ax.semilogy(j, w, "s-", ms=4, base=2, label="certified window")
        if len(j) >= 2 and np.all(w > 0):
            slope = float(np.polyfit(j, np.log2(w), 1)[0])
            ax.annotate(f"fitted log₂ slope {slope:.3f}",
                        xy=(0.03, 0.06), xycoords="axes fraction", fontsize=8)
    ax.set_xlabel("deepest retained shell j")
    ax.set_ylabel("blowup window")
    ax.set_title("Shell blowup windows")
    ax.legend(fontsize=7)
    return _finish(fig, spec, warning)


def _render_scattering_decay(spec: FigureSpec, table: Table) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    warning = None
    if table.empty:
        warning = "empty input"
    else:
        t = table.col("t")

        def _pos(name):
            y = table.col(name)
            mask = y > 0
            return t[mask], y[mask]

        for name, style in (("D_1", "o-"), ("D_2", "s-"), ("D_3", "^-")):
            tt, yy = _pos(name)
            if len(tt):
                ax.semilogy(tt, yy, style, ms=3, label=name)
        tt, yy = _pos("bound_D_3")
        if len(tt):
            ax.semilogy(tt, yy, "--", lw=1, color="0.4",
                        label="telescoping bound (k=3)")
        tt, yy = _pos("H1_pullback_increment")
        if len(tt):
            ax.semilogy(tt, yy, ":", lw=1, color="0.6",
                        label="H¹ Cauchy increment")
    ax.set_xlabel("t")
    ax.set_ylabel("hierarchy distance to φ₊")
    ax.set_title("Scattering decay at dyadic checkpoints")
    ax.legend(fontsize=7)
    return _finish(fig, spec, warning)


def _render_conservation(spec: FigureSpec, table: Table) -> RenderResult:
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 6.4), sharex=True)
    warning = None
    if table.empty:
        warning = "empty input"
    else:
        t = table.col("t")
        M, E, H1 = table.col("M"), table.col("E"), table.col("H1")
        axes[0].plot(t, (M - M[0]) / M[0], lw=1)
        axes[0].set_ylabel("ΔM / M₀")
        scale_e = max(abs(E[0]), 1e-300)
        axes[1].plot(t, (E - E[0]) / scale_e, lw=1)
        axes[1].set_ylabel("ΔE / |E₀|")
        axes[2].plot(t, H1, lw=1)
        axes[2].set_ylabel("‖φ‖_{H¹}")
    axes[2].set_xlabel("t")
    axes[0].set_title("Conservation drift and H¹ growth")
    fig.align_ylabels(axes)
    return _finish(fig, spec, warning)


def _render_sweep_heatmap(spec: FigureSpec, table: Table) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6.4, 4.6))
    fig.subplots_adjust(bottom=0.24, left=0.16)
    warning = None
    if table.empty:
        warning = "empty input"
    else:
        R = table.col("R")
        trace = table.col("log_trace_k")
        window = table.col("min_window")
        # two normalized rows over the R axis: trace level and window level
        log_w = np.log10(window)
        rows = np.vstack([
            (trace - trace.min()) / max(float(np.ptp(trace)), 1e-300),
            (log_w - log_w.min()) / max(float(np.ptp(log_w)), 1e-300),
        ])
        im = ax.imshow(rows, aspect="auto", cmap="viridis",
                       extent=(-0.5, len(R) - 0.5, 1.5, -0.5))
        ax.set_yticks([0, 1], ["log trace", "log₁₀ window"])
        ax.set_xticks(range(len(R)), [f"{r:.3g}" for r in R],
                      rotation=45, fontsize=7)
        for i, (tr, w) in enumerate(zip(trace, window)):
            ax.text(i, 0, f"{tr:.1f}", ha="center", va="center", fontsize=6,
                    color="w")
            ax.text(i, 1, f"{w:.1e}", ha="center", va="center", fontsize=6,
                    color="w")
        fig.colorbar(im, ax=ax, label="normalized level")
    ax.set_xlabel("truncation radius R")
    ax.set_title("Truncation sweep: trace growth vs shrinking window")
    return _finish(fig, spec, warning)


_RENDERERS = {
    GROWTH: _render_growth,
    SHELL_WINDOWS: _render_shell_windows,
    SCATTERING_DECAY: _render_scattering_decay,
    CONSERVATION: _render_conservation,
    SWEEP_HEATMAP: _render_sweep_heatmap,
}


def render_figure(spec: FigureSpec) -> RenderResult:
    table = read_table(spec.csv_path)
    result = _RENDERERS[spec.kind](spec, table)
    if table.empty and result.warning is None:
        result = RenderResult(spec=spec, warning="empty input")
    return result


def write_index(out_dir: Path, results: list[RenderResult]) -> Path:
    """Static index page listing every figure with caption and digest."""
    items = []
    for res in sorted(results, key=lambda r: r.spec.out_path.name):
        spec = res.spec
        badge = (f'<span class="warn">warning: {html.escape(res.warning)}</span>'
                 if res.warning else "")
        items.append(
            "<figure>"
            f'<img src="{html.escape(spec.out_path.name)}" '
            f'alt="{html.escape(spec.kind)}">'
            f"<figcaption>{html.escape(spec.caption())} {badge}</figcaption>"
            "</figure>"
        )
    body = "\n".join(items) if items else "<p>No figures rendered.</p>"
    doc = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        "<title>gpdf figures</title>"
        "<style>figure{margin:1em 0;} img{max-width:720px;display:block;}"
        "figcaption{font:12px monospace;color:#444;}"
        ".warn{color:crimson;font-weight:bold;}</style>"
        "</head><body>\n<h1>gpdf scenario figures</h1>\n"
        f"{body}\n</body></html>\n"
    )
    path = Path(out_dir) / "index.html"
    path.write_text(doc)
    return path
