"""Series extraction and the documented normalizations.

This module turns parsed CSV tables into the exact numbers a figure
shows; the renderer adds nothing on top.  The only numeric
transformations, by figure kind, are:

band
    Forces are divided by the per-z minimum force taken over all rows
    (both chirality groups) sharing that z; each chirality group then
    contributes one (min over x, max over x) band per z.
reldiff
    The per-z difference of group-mean forces (second chirality group
    minus first, in file order) is divided by the same per-z minimum
    force.  Sign changes between consecutive z values are reported as
    markers at the arithmetic midpoint of the bracketing z pair.
integrand, ema-params
    None; columns are plotted as stored.

Every payload built here is written verbatim as the figure's JSON
sidecar.
"""

import pathlib

import numpy as np

from .csvio import InputError, read_table

_NORMALIZATION = {
    "band": "F divided by the minimum F over all rows sharing that z",
    "reldiff": "per z: mean(F) of the second chirality group minus the "
               "first, divided by the minimum F over all rows sharing "
               "that z",
    "integrand": "none",
    "ema-params": "none",
}


def _label(path, inputs, suffix=None):
    stem = pathlib.Path(path).stem
    parts = ([stem] if len(inputs) > 1 or suffix is None else []) \
        + ([suffix] if suffix is not None else [])
    return " ".join(parts)


def _chirality_groups(table):
    """(z values sorted, ordered group labels, {label: (z, F) arrays})."""
    table.require("z", "chirality", "F")
    z_all = table.numbers("z")
    f_all = table.numbers("F")
    tags = table.text("chirality")
    order = []
    for tag in tags:
        if tag not in order:
            order.append(tag)
    z_unique = np.unique(z_all)
    groups = {}
    for tag in order:
        sel = np.array([t == tag for t in tags])
        if not np.array_equal(np.unique(z_all[sel]), z_unique):
            raise InputError(f"{table.path}: chirality group '{tag}' does "
                             f"not cover every z value")
        groups[tag] = (z_all[sel], f_all[sel])
    return z_unique, order, groups


def _per_z_minimum(z_unique, z_all, f_all):
    return np.array([f_all[z_all == z].min() for z in z_unique])


def _band_payload(spec, tables):
    series = []
    for table in tables:
        z_unique, order, groups = _chirality_groups(table)
        norm = _per_z_minimum(z_unique, table.numbers("z"),
                              table.numbers("F"))
        for tag in order:
            gz, gf = groups[tag]
            lo = [float(gf[gz == z].min() / n)
                  for z, n in zip(z_unique, norm)]
            hi = [float(gf[gz == z].max() / n)
                  for z, n in zip(z_unique, norm)]
            series.append({"label": _label(table.path, spec.inputs, tag),
                           "x": [float(z) for z in z_unique],
                           "lo": lo, "hi": hi})
    return {"series": series}


def _reldiff_payload(spec, tables):
    series = []
    markers = []
    for table in tables:
        z_unique, order, groups = _chirality_groups(table)
        if len(order) != 2:
            raise InputError(f"{table.path}: reldiff needs exactly two "
                             f"chirality groups, found {len(order)}")
        norm = _per_z_minimum(z_unique, table.numbers("z"),
                              table.numbers("F"))
        (z1, f1), (z2, f2) = groups[order[0]], groups[order[1]]
        rel = [float((f2[z2 == z].mean() - f1[z1 == z].mean()) / n)
               for z, n in zip(z_unique, norm)]
        label = _label(table.path, spec.inputs,
                       None if len(spec.inputs) > 1 else "reldiff")
        series.append({"label": label,
                       "x": [float(z) for z in z_unique], "y": rel})
        for i in range(len(rel) - 1):
            if rel[i] * rel[i + 1] < 0.0:
                lo_z, hi_z = float(z_unique[i]), float(z_unique[i + 1])
                markers.append({"label": label, "between": [lo_z, hi_z],
                                "position": 0.5 * (lo_z + hi_z)})
    return {"series": series, "markers": markers}


def _integrand_payload(spec, tables):
    series = []
    for table in tables:
        table.require("xi", "value")
        series.append({"label": _label(table.path, spec.inputs, "integrand"),
                       "x": [float(v) for v in table.numbers("xi")],
                       "y": [float(v) for v in table.numbers("value")]})
    return {"series": series}


def _ema_params_payload(spec, tables):
    series = []
    for table in tables:
        table.require("xi", "eps", "mu", "kappa")
        xi = [float(v) for v in table.numbers("xi")]
        for name in ("eps", "mu", "kappa"):
            series.append({"label": _label(table.path, spec.inputs, name),
                           "x": xi,
                           "y": [float(v) for v in table.numbers(name)]})
    return {"series": series}


_BUILDERS = {
    "band": _band_payload,
    "reldiff": _reldiff_payload,
    "integrand": _integrand_payload,
    "ema-params": _ema_params_payload,
}


def build_payload(spec):
    """Sidecar payload for one figure spec: every number the figure shows.

    Returns a dict with the figure kind, axis scales, the normalization
    description, the series list, and (for reldiff) sign-change markers.
    """
    tables = [read_table(path) for path in spec.inputs]
    payload = {"kind": spec.kind, "x_scale": spec.x_scale,
               "y_scale": spec.y_scale,
               "normalization": _NORMALIZATION[spec.kind]}
    payload.update(_BUILDERS[spec.kind](spec, tables))
    return payload
