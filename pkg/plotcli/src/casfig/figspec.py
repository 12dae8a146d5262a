"""Figure specification: what to plot, from which CSVs, to which file."""

import dataclasses
import json

from .csvio import InputError

KINDS = ("band", "reldiff", "integrand", "ema-params")
SCALES = ("linear", "log")
OUTPUT_SUFFIXES = (".svg", ".png")

_DEFAULT_SCALES = {
    "band": ("linear", "linear"),
    "reldiff": ("linear", "log"),
    "integrand": ("log", "linear"),
    "ema-params": ("log", "linear"),
}

_KEYS = ("kind", "inputs", "output", "x_scale", "y_scale")


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    """One figure: input CSV paths, figure kind, axis scales, output path.

    Parameters
    ----------
    kind : str
        One of "band" (min/max force bands over the transverse offset),
        "reldiff" (relative chirality force difference with sign-change
        markers), "integrand" (frequency density), "ema-params"
        (retrieved effective parameters).
    inputs : tuple of str
        CSV files to plot, one series (or band pair) per file where the
        kind allows several.
    output : str
        Figure file to write; ".svg" or ".png".  A JSON sidecar with the
        plotted series is written next to it.
    x_scale, y_scale : str
        "linear" or "log".
    """

    kind: str
    inputs: tuple
    output: str
    x_scale: str
    y_scale: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}; "
                             f"use one of {', '.join(KINDS)}")
        if not self.inputs or not all(
                isinstance(p, str) and p for p in self.inputs):
            raise InputError("inputs must be a non-empty list of CSV paths")
        for scale in (self.x_scale, self.y_scale):
            if scale not in SCALES:
                raise InputError(f"axis scale must be one of "
                                 f"{', '.join(SCALES)}, not {scale!r}")
        if not self.output.endswith(OUTPUT_SUFFIXES):
            raise InputError(f"output must end in one of "
                             f"{', '.join(OUTPUT_SUFFIXES)}")


def load_spec(path):
    """Read and validate a FigureSpec from a JSON file.

    The document must be an object with keys "kind", "inputs", "output"
    and optionally "x_scale"/"y_scale" (defaulted per kind); unknown
    keys are fatal so typos cannot silently change a figure.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: figure spec must be a JSON object")
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise InputError(f"{path}: unknown keys: {', '.join(unknown)}")
    for key in ("kind", "inputs", "output"):
        if key not in doc:
            raise InputError(f"{path}: missing required key '{key}'")
    kind = doc["kind"]
    defaults = _DEFAULT_SCALES.get(kind, ("linear", "linear"))
    inputs = doc["inputs"]
    if not isinstance(inputs, list):
        raise InputError(f"{path}: inputs must be a list of CSV paths")
    return FigureSpec(kind=kind, inputs=tuple(inputs),
                      output=str(doc["output"]),
                      x_scale=str(doc.get("x_scale", defaults[0])),
                      y_scale=str(doc.get("y_scale", defaults[1])))
