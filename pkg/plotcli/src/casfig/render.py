"""Deterministic figure rendering from sidecar payloads.

The renderer draws exactly the numbers prepared by `casfig.series` and
writes them to the figure's JSON sidecar.  SVG output is reproducible:
the element-id hash salt is pinned and no timestamp metadata is
embedded, so equal inputs give byte-identical files.
"""

import json
import pathlib

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_AXIS_LABELS = {
    "band": ("z", "F / min F(z)"),
    "reldiff": ("z", "|relative force difference|"),
    "integrand": ("xi", "frequency density"),
    "ema-params": ("xi", "parameter value"),
}


def sidecar_path(output):
    """The JSON sidecar written next to a figure file."""
    return pathlib.Path(output).with_suffix(".json")


def _draw_band(ax, payload):
    for i, entry in enumerate(payload["series"]):
        color = f"C{i}"
        ax.fill_between(entry["x"], entry["lo"], entry["hi"], alpha=0.35,
                        linewidth=0.0, color=color, label=entry["label"])
        ax.plot(entry["x"], entry["lo"], linewidth=0.8, color=color)
        ax.plot(entry["x"], entry["hi"], linewidth=0.8, color=color)


def _draw_reldiff(ax, payload):
    for entry in payload["series"]:
        y = [abs(v) for v in entry["y"]]
        ax.plot(entry["x"], y, marker="o", markersize=3.0,
                label=entry["label"])
    for marker in payload["markers"]:
        ax.axvline(marker["position"], linestyle="--", linewidth=0.8,
                   color="0.4")


def _draw_lines(ax, payload):
    for entry in payload["series"]:
        ax.plot(entry["x"], entry["y"], marker="o", markersize=3.0,
                label=entry["label"])


_DRAWERS = {
    "band": _draw_band,
    "reldiff": _draw_reldiff,
    "integrand": _draw_lines,
    "ema-params": _draw_lines,
}


def render(spec, payload):
    """Write the figure file and its JSON sidecar for one payload.

    The sidecar holds the payload verbatim, so the figure's numbers can
    be checked without parsing the image.
    """
    with plt.rc_context({"svg.hashsalt": "casfig"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0), layout="constrained")
        try:
            _DRAWERS[spec.kind](ax, payload)
            ax.set_xscale(spec.x_scale)
            ax.set_yscale(spec.y_scale)
            xlabel, ylabel = _AXIS_LABELS[spec.kind]
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if any(entry["label"] for entry in payload["series"]):
                ax.legend(loc="best", fontsize="small")
            metadata = {"Date": None} if spec.output.endswith(".svg") \
                else None
            fig.savefig(spec.output, metadata=metadata)
        finally:
            plt.close(fig)
    sidecar_path(spec.output).write_text(
        json.dumps(payload, indent=2) + "\n")
