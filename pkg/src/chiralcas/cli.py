"""Command-line interface: JSON-configured runs and bit-stable CSV output.

Subcommands
-----------
force      Energy/force of a configured body pair over a (z, x) grid.
sweep      Same- vs opposite-chirality forces of one lattice with a
           min/max-over-x summary per separation.
retrieve   Effective-medium parameters fitted to a reflection source over
           a frequency grid.
integrand  Frequency-resolved force density, or the density of the
           chirality force difference, at one separation.
pairwise   Chirality-blind pairwise Casimir-Polder estimate on a (z, x)
           grid.

Configurations are JSON documents with a mandatory ``schema`` version
field; unknown keys anywhere are fatal before any computation starts.
Every CSV opens with a comment block carrying the library version and a
sha256 digest of the fully resolved configuration (defaults substituted,
grids expanded, referenced files hashed by content).  Runs with equal
digests produce byte-identical CSV bodies regardless of the worker
count.  Internally hbar = c = 1 and the lattice period is the length
unit; ``--si`` appends columns converted with the configured period
``a_si`` (meters).

Exit codes: 0 success, 2 configuration error, 3 numeric tolerance
failure (the CSV is still written, with a ``status`` column).
"""

import argparse
import dataclasses
import hashlib
import json
import math
import pathlib
import sys
import warnings

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from scipy.constants import c as _C_SI, hbar as _HBAR_SI
from scipy.spatial.transform import Rotation

from . import __version__, ema, forcengine, lattice, scatterers

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; reported on stderr with exit code 2."""


# ----------------------------------------------------------------------------
# JSON schemas
# ----------------------------------------------------------------------------

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": {"type": "number"},
         "minItems": 3, "maxItems": 3}

_OMEGA_SCALARS = {
    "a_e": _POSITIVE,
    "a_m": _POSITIVE,
    "a_c": {"type": "number"},
    "a_s": {"type": "number", "minimum": 0},
    "omega0": _POSITIVE,
    "t_perp": {"type": "number", "minimum": 0, "maximum": 1},
}

_KAPPA = {"oneOf": [
    {"const": 0},
    {"type": "object", "additionalProperties": False,
     "required": ["amplitude", "corner"],
     "properties": {"amplitude": {"type": "number"}, "corner": _POSITIVE}},
]}

_SLAB_TABLE = {"oneOf": [
    {"type": "string"},
    {"type": "object", "additionalProperties": False,
     "required": ["xi", "eps", "mu", "kappa"],
     "properties": {key: {"type": "array", "items": {"type": "number"},
                          "minItems": 2}
                    for key in ("xi", "eps", "mu", "kappa")}},
]}

_PARTICLE = {
    "type": "object", "additionalProperties": False,
    "required": ["position"],
    "properties": {
        "position": _VEC3,
        "handedness": {"enum": [-1, 1]},
        "params": {"type": "object", "additionalProperties": False,
                   "properties": {**_OMEGA_SCALARS, "axis": _VEC3}},
        "tmatrix_files": {"type": "array", "minItems": 1,
                          "items": {"type": "string"}},
        "rotation": {"type": "object", "additionalProperties": False,
                     "required": ["axis", "angle_deg"],
                     "properties": {"axis": _VEC3,
                                    "angle_deg": {"type": "number"}}},
    },
}

_BODY = {"oneOf": [
    {"type": "object", "additionalProperties": False, "required": ["kind"],
     "properties": {"kind": {"const": "mirror"}}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "eps"],
     "properties": {"kind": {"const": "slab"}, "eps": _POSITIVE,
                    "mu": _POSITIVE, "kappa": _KAPPA}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "table"],
     "properties": {"kind": {"const": "slab"}, "table": _SLAB_TABLE}},
    {"type": "object", "additionalProperties": False, "required": ["kind"],
     "properties": {"kind": {"const": "omega-lattice"},
                    "handedness": {"enum": [-1, 1]},
                    "params": {"type": "object",
                               "additionalProperties": False,
                               "properties": _OMEGA_SCALARS}}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "particles"],
     "properties": {"kind": {"const": "cell"},
                    "particles": {"type": "array", "items": _PARTICLE}}},
]}

_QUADRATURE = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "n_xi": {"type": "integer", "minimum": 4},
        "n_bz": {"type": "integer", "minimum": 4},
        "xi_scale": _POSITIVE,
        "bz_scale": _POSITIVE,
        "tolerance": _POSITIVE,
        "max_refinements": {"type": "integer", "minimum": 0},
    },
}

_LMAX = {"type": "integer", "minimum": 1}
_GMAX = {"type": "integer", "minimum": 0}

_COMMON_PROPS = {
    "schema": {"const": SCHEMA_VERSION},
    "a_si": _POSITIVE,
    "omega_p_si": _POSITIVE,
    "deterministic": {"const": True},
    "output": {"type": "object", "additionalProperties": False,
               "properties": {"stem": {"type": "string",
                                       "pattern": "^[A-Za-z0-9._-]+$"}}},
}


def _grid(positive):
    item = _POSITIVE if positive else {"type": "number"}
    return {"oneOf": [
        {"type": "array", "items": item, "minItems": 1},
        {"type": "object", "additionalProperties": False,
         "required": ["start", "stop", "num", "spacing"],
         "properties": {"start": item, "stop": item,
                        "num": {"type": "integer", "minimum": 1},
                        "spacing": {"enum": ["linear", "geometric"]}}},
    ]}


def _command_schema(required, props):
    return {"type": "object", "additionalProperties": False,
            "required": ["schema"] + required,
            "properties": {**_COMMON_PROPS, **props}}


_SCHEMAS = {
    "force": _command_schema(
        ["lower", "upper", "z_grid"],
        {"lower": _BODY, "upper": _BODY, "z_grid": _grid(True),
         "x_grid": _grid(False), "l_max": _LMAX, "g_max": _GMAX,
         "quadrature": _QUADRATURE}),
    "sweep": _command_schema(
        ["cell"],
        {"cell": _BODY, "z_grid": _grid(True), "x_grid": _grid(False),
         "normalization": {"enum": ["global", "per-chirality"]},
         "l_max": _LMAX, "g_max": _GMAX, "quadrature": _QUADRATURE}),
    "retrieve": _command_schema(
        ["source", "xi_grid"],
        {"source": _BODY, "xi_grid": _grid(True),
         "n_samples": {"type": "integer", "minimum": 4},
         "k_max": _POSITIVE, "l_max": _LMAX, "g_max": _GMAX}),
    "integrand": _command_schema(
        ["lower", "upper", "z"],
        {"lower": _BODY, "upper": _BODY, "z": _POSITIVE,
         "n_xi": {"type": "integer", "minimum": 5},
         "kind": {"enum": ["difference", "force"]},
         "l_max": _LMAX, "g_max": _GMAX, "quadrature": _QUADRATURE}),
    "pairwise": _command_schema(
        ["lower", "upper", "z_grid"],
        {"lower": _BODY, "upper": _BODY, "z_grid": _grid(True),
         "x_grid": _grid(False), "rel_cutoff": _POSITIVE}),
}


# ----------------------------------------------------------------------------
# configuration resolution
# ----------------------------------------------------------------------------

class _OnePoleKappa:
    """kappa(xi) = amplitude * corner * xi / (corner^2 + xi^2): odd in
    xi, vanishing at zero frequency, peaking (at amplitude/2) at the
    corner frequency."""

    def __init__(self, amplitude, corner):
        self.amplitude = float(amplitude)
        self.corner = float(corner)

    def __call__(self, xi):
        return self.amplitude * self.corner * xi \
            / (self.corner ** 2 + xi ** 2)


def _read_json(path):
    try:
        text = pathlib.Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def _validate_schema(raw, command):
    error = best_match(Draft202012Validator(
        _SCHEMAS[command]).iter_errors(raw))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "top level"
        raise ConfigError(f"{where}: {error.message}")


def _file_digest(path):
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read referenced file {path}: {exc}") \
            from exc
    return hashlib.sha256(data).hexdigest()


def _expand_grid(spec, context):
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if spec["spacing"] == "geometric" and (spec["start"] <= 0
                                           or spec["stop"] <= 0):
        raise ConfigError(f"{context}: geometric spacing needs positive "
                          "endpoints")
    space = np.geomspace if spec["spacing"] == "geometric" else np.linspace
    return [float(v) for v in space(spec["start"], spec["stop"], spec["num"])]


def _omega_params(scalars, handedness=1, axis=None):
    kwargs = dict(scalars)
    kwargs["handedness"] = handedness
    if axis is not None:
        kwargs["axis"] = tuple(float(v) for v in axis)
    try:
        return scatterers.OmegaParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"omega parameters: {exc}") from exc


def _omega_scalars_resolved(params):
    return {"a_e": params.a_e, "a_m": params.a_m, "a_c": params.a_c,
            "a_s": params.a_s, "omega0": params.omega0,
            "t_perp": params.t_perp}


def _rotation_matrix(spec):
    axis = np.asarray(spec["axis"], dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ConfigError("rotation axis must be nonzero")
    angle = math.radians(spec["angle_deg"])
    return Rotation.from_rotvec(axis / norm * angle).as_matrix()


def _resolve_particle(spec):
    if "tmatrix_files" in spec:
        if "params" in spec or "handedness" in spec:
            raise ConfigError("particle: tmatrix_files excludes params "
                              "and handedness")
        paths = spec["tmatrix_files"]
        try:
            source = scatterers.TMatrixTable.from_files(paths)
        except ValueError as exc:
            raise ConfigError(f"particle T-matrix table: {exc}") from exc
        resolved_source = {"tmatrix_files": [
            {"path": p, "sha256": _file_digest(p)} for p in paths]}
    else:
        raw = dict(spec.get("params", {}))
        axis = raw.pop("axis", None)
        source = _omega_params(raw, spec.get("handedness", 1), axis)
        resolved_source = {"handedness": source.handedness,
                           "params": {**_omega_scalars_resolved(source),
                                      "axis": list(source.axis)}}
    rotation = None
    if "rotation" in spec:
        rotation = _rotation_matrix(spec["rotation"])
    resolved = {"position": [float(v) for v in spec["position"]],
                "rotation": None if rotation is None else
                {"axis": [float(v) for v in spec["rotation"]["axis"]],
                 "angle_deg": float(spec["rotation"]["angle_deg"])},
                **resolved_source}
    try:
        particle = lattice.PlacedParticle(source=source,
                                          position=tuple(spec["position"]),
                                          rotation=rotation)
    except ValueError as exc:
        raise ConfigError(f"particle: {exc}") from exc
    return resolved, particle


def _resolve_body(spec, context):
    kind = spec["kind"]
    if kind == "mirror":
        return {"kind": "mirror"}, ema.perfect_mirror()
    if kind == "slab":
        if "table" in spec:
            table = spec["table"]
            if isinstance(table, str):
                resolved = {"kind": "slab",
                            "table": {"path": table,
                                      "sha256": _file_digest(table)}}
            else:
                resolved = {"kind": "slab", "table": {"inline": table}}
            try:
                return resolved, ema.slab_from_table(table)
            except (ValueError, OSError) as exc:
                raise ConfigError(f"{context}: {exc}") from exc
        kappa = spec.get("kappa", 0)
        if kappa == 0:
            kfun = 0.0
            resolved_kappa = 0
        else:
            kfun = _OnePoleKappa(kappa["amplitude"], kappa["corner"])
            resolved_kappa = {"amplitude": kfun.amplitude,
                              "corner": kfun.corner}
        resolved = {"kind": "slab", "eps": float(spec["eps"]),
                    "mu": float(spec.get("mu", 1.0)),
                    "kappa": resolved_kappa}
        return resolved, ema.ChiralSlabModel(eps=resolved["eps"],
                                             mu=resolved["mu"], kappa=kfun)
    if kind == "omega-lattice":
        base = _omega_params(spec.get("params", {}),
                             spec.get("handedness", 1))
        resolved = {"kind": "omega-lattice", "handedness": base.handedness,
                    "params": _omega_scalars_resolved(base)}
        return resolved, lattice.standard_omega_cell(
            handedness=base.handedness, base=base)
    resolved_parts, particles = [], []
    for part in spec["particles"]:
        res, built = _resolve_particle(part)
        resolved_parts.append(res)
        particles.append(built)
    return {"kind": "cell", "particles": resolved_parts}, \
        lattice.UnitCell(particles=particles)


def _resolve_quadrature(raw, tolerance_override):
    values = {field.name: field.default
              for field in dataclasses.fields(forcengine.QuadratureSpec)}
    values.update(raw)
    if tolerance_override is not None:
        values["tolerance"] = float(tolerance_override)
    try:
        spec = forcengine.QuadratureSpec(**values)
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from exc
    return values, spec


def _resolve_common(raw, args, command):
    return {
        "command": command,
        "schema": SCHEMA_VERSION,
        "a_si": float(raw.get("a_si", 1e-6)),
        "omega_p_si": float(raw.get("omega_p_si", 1.37e16)),
        "deterministic": True,
        "si": bool(args.si),
        "output": {"stem": raw.get("output", {}).get("stem", command)},
    }


def _require_unit_cell(body, context):
    if not isinstance(body, lattice.UnitCell):
        raise ConfigError(f"{context} must be a particle lattice "
                          "(kind 'cell' or 'omega-lattice')")


def _resolve_force(raw, args, command="force"):
    resolved = _resolve_common(raw, args, command)
    runtime = {}
    for side in ("lower", "upper"):
        resolved[side], runtime[side] = _resolve_body(raw[side], side)
    resolved["z_grid"] = _expand_grid(raw["z_grid"], "z_grid")
    resolved["x_grid"] = _expand_grid(raw.get("x_grid", [0.0]), "x_grid")
    resolved["l_max"] = int(raw.get("l_max", 3))
    resolved["g_max"] = int(raw.get("g_max", 3))
    resolved["quadrature"], runtime["quadrature"] = _resolve_quadrature(
        raw.get("quadrature", {}), args.tolerance)
    return resolved, runtime


def _resolve_sweep(raw, args):
    resolved = _resolve_common(raw, args, "sweep")
    runtime = {}
    resolved["cell"], runtime["cell"] = _resolve_body(raw["cell"], "cell")
    _require_unit_cell(runtime["cell"], "sweep cell")
    resolved["z_grid"] = _expand_grid(
        raw.get("z_grid", [float(z) for z in forcengine.default_z_grid()]),
        "z_grid")
    resolved["x_grid"] = _expand_grid(
        raw.get("x_grid", [float(x) for x in forcengine.default_x_grid()]),
        "x_grid")
    resolved["normalization"] = raw.get("normalization", "global")
    resolved["l_max"] = int(raw.get("l_max", 3))
    resolved["g_max"] = int(raw.get("g_max", 3))
    resolved["quadrature"], runtime["quadrature"] = _resolve_quadrature(
        raw.get("quadrature", {}), args.tolerance)
    return resolved, runtime


def _resolve_retrieve(raw, args):
    resolved = _resolve_common(raw, args, "retrieve")
    runtime = {}
    resolved["source"], body = _resolve_body(raw["source"], "source")
    if resolved["source"]["kind"] == "mirror":
        raise ConfigError("retrieve needs a finite-parameter source, "
                          "not an ideal mirror")
    resolved["xi_grid"] = _expand_grid(raw["xi_grid"], "xi_grid")
    resolved["n_samples"] = int(raw.get("n_samples", 8))
    resolved["k_max"] = None if "k_max" not in raw else float(raw["k_max"])
    resolved["l_max"] = int(raw.get("l_max", 3))
    resolved["g_max"] = int(raw.get("g_max", 3))
    if isinstance(body, lattice.UnitCell):
        runtime["source"] = lattice.specular_reflection_source(
            body, l_max=resolved["l_max"], g_max=resolved["g_max"])
    else:
        runtime["source"] = ema.reflection_source(body)
    return resolved, runtime


def _resolve_integrand(raw, args):
    resolved = _resolve_common(raw, args, "integrand")
    runtime = {}
    for side in ("lower", "upper"):
        resolved[side], runtime[side] = _resolve_body(raw[side], side)
    resolved["z"] = float(raw["z"])
    resolved["n_xi"] = int(raw.get("n_xi", 25))
    resolved["kind"] = raw.get("kind", "difference")
    resolved["l_max"] = int(raw.get("l_max", 3))
    resolved["g_max"] = int(raw.get("g_max", 3))
    resolved["quadrature"], runtime["quadrature"] = _resolve_quadrature(
        raw.get("quadrature", {}), args.tolerance)
    return resolved, runtime


def _resolve_pairwise(raw, args):
    resolved = _resolve_common(raw, args, "pairwise")
    runtime = {}
    for side in ("lower", "upper"):
        resolved[side], runtime[side] = _resolve_body(raw[side], side)
        _require_unit_cell(runtime[side], side)
        for particle in runtime[side].particles:
            if not isinstance(particle.source, scatterers.OmegaParams):
                raise ConfigError(f"{side}: the pairwise estimator needs "
                                  "parameter-described particles")
    resolved["z_grid"] = _expand_grid(raw["z_grid"], "z_grid")
    resolved["x_grid"] = _expand_grid(raw.get("x_grid", [0.0]), "x_grid")
    resolved["rel_cutoff"] = float(raw.get("rel_cutoff", 1e-9))
    return resolved, runtime


def resolved_digest(resolved):
    """sha256 hex digest of the canonical JSON form of a resolved config."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ----------------------------------------------------------------------------
# CSV emission
# ----------------------------------------------------------------------------

def _format_cell(value):
    if isinstance(value, str):
        return value
    return "%.17g" % float(value)


def _write_csv(path, header_lines, columns, rows):
    text = "".join(f"# {line}\n" for line in header_lines)
    text += ",".join(columns) + "\n"
    for row in rows:
        text += ",".join(_format_cell(v) for v in row) + "\n"
    path.write_text(text)


def _header_lines(resolved, digest, extras=()):
    return [f"chiralcas {__version__}",
            f"command: {resolved['command']}",
            f"config sha256: {digest}",
            *extras]


def _si_scales(resolved):
    a = resolved["a_si"]
    hbar_c = _HBAR_SI * _C_SI
    return {"length": a, "frequency": _C_SI / a,
            "energy": hbar_c / a ** 3, "force": hbar_c / a ** 4,
            "density": _HBAR_SI / a ** 3}


def _with_status(columns, rows, statuses):
    if all(status == "ok" for status in statuses):
        return columns, rows, 0
    return columns + ["status"], \
        [row + [status] for row, status in zip(rows, statuses)], 3


# ----------------------------------------------------------------------------
# command runners
# ----------------------------------------------------------------------------

def _grid_point(config, workers):
    """((E, F, errE, errF), status) at one grid point; tolerance misses
    and numeric failures are recorded, not raised."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            (energy, force), (err_e, err_f) = forcengine.energy_and_force(
                config, workers=workers)
        except (FloatingPointError, ValueError) as exc:
            print(f"grid point z={config.z} shift={config.shift} failed: "
                  f"{exc}", file=sys.stderr)
            return (math.nan, math.nan, math.nan, math.nan), "error"
    if any(issubclass(w.category, RuntimeWarning) for w in caught):
        return (energy, force, err_e, err_f), "tolerance"
    return (energy, force, err_e, err_f), "ok"


def _run_force(resolved, runtime, out_dir, digest, workers):
    rows, statuses = [], []
    scales = _si_scales(resolved)
    for z in resolved["z_grid"]:
        for x in resolved["x_grid"]:
            config = forcengine.LatticePairConfig(
                cell_lower=runtime["lower"], cell_upper=runtime["upper"],
                z=z, shift=(x, 0.0), l_max=resolved["l_max"],
                g_max=resolved["g_max"], quadrature=runtime["quadrature"])
            (energy, force, _, err_f), status = _grid_point(config, workers)
            row = [z, x, "given", force, energy, err_f]
            if resolved["si"]:
                row += [z * scales["length"], x * scales["length"],
                        force * scales["force"], energy * scales["energy"],
                        err_f * scales["force"]]
            rows.append(row)
            statuses.append(status)
    columns = ["z", "x", "chirality", "F", "E", "err"]
    if resolved["si"]:
        columns += ["z_si", "x_si", "F_si", "E_si", "err_si"]
    columns, rows, code = _with_status(columns, rows, statuses)
    _write_csv(out_dir / f"{resolved['output']['stem']}.csv",
               _header_lines(resolved, digest), columns, rows)
    return code


def _run_sweep(resolved, runtime, out_dir, digest, workers):
    result = forcengine.sweep_sc_oc(
        runtime["cell"], z_grid=resolved["z_grid"],
        x_grid=resolved["x_grid"], l_max=resolved["l_max"],
        g_max=resolved["g_max"], quadrature_spec=runtime["quadrature"],
        workers=workers, normalization=resolved["normalization"])
    z_status = {z: ("tolerance" if warned else "ok")
                for z, warned in zip(resolved["z_grid"],
                                     result.metadata["warnings_per_z"])}
    scales = _si_scales(resolved)
    rows, statuses = [], []
    for table in (result.sc, result.oc):
        for z, x, force, energy, err in table.rows:
            row = [z, x, table.chirality, force, energy, err]
            if resolved["si"]:
                row += [z * scales["length"], x * scales["length"],
                        force * scales["force"], energy * scales["energy"],
                        err * scales["force"]]
            rows.append(row)
            statuses.append(z_status[z])
    columns = ["z", "x", "chirality", "F", "E", "err"]
    if resolved["si"]:
        columns += ["z_si", "x_si", "F_si", "E_si", "err_si"]
    columns, rows, code = _with_status(columns, rows, statuses)
    stem = resolved["output"]["stem"]
    _write_csv(out_dir / f"{stem}.csv", _header_lines(resolved, digest),
               columns, rows)

    sum_rows, sum_statuses = [], []
    for entry in result.summary:
        row = list(entry)
        if resolved["si"]:
            row += [entry[0] * scales["length"]] + \
                [v * scales["force"] for v in entry[1:5]]
        sum_rows.append(row)
        sum_statuses.append(z_status[entry[0]])
    sum_columns = ["z", "F_min_SC", "F_max_SC", "F_min_OC", "F_max_OC",
                   "rel_diff"]
    if resolved["si"]:
        sum_columns += ["z_si", "F_min_SC_si", "F_max_SC_si", "F_min_OC_si",
                        "F_max_OC_si"]
    sum_columns, sum_rows, _ = _with_status(sum_columns, sum_rows,
                                            sum_statuses)
    _write_csv(out_dir / f"{stem}_summary.csv",
               _header_lines(resolved, digest, [
                   f"normalization: {resolved['normalization']}"]),
               sum_columns, sum_rows)
    return code


def _run_retrieve(resolved, runtime, out_dir, digest, workers):
    del workers  # the retrieval fit is a single-process operation
    scales = _si_scales(resolved)
    rows, statuses = [], []
    for xi in resolved["xi_grid"]:
        try:
            fit = ema.retrieve_ema(runtime["source"], xi,
                                   n_samples=resolved["n_samples"],
                                   k_max=resolved["k_max"])
            row = [xi, fit.eps, fit.mu, fit.kappa, fit.residual,
                   fit.anisotropy]
            status = "ok"
        except (FloatingPointError, ValueError) as exc:
            print(f"retrieval at xi={xi} failed: {exc}", file=sys.stderr)
            row = [xi] + [math.nan] * 5
            status = "error"
        if resolved["si"]:
            row += [xi * scales["frequency"]]
        rows.append(row)
        statuses.append(status)
    columns = ["xi", "eps", "mu", "kappa", "residual", "anisotropy"]
    if resolved["si"]:
        columns += ["xi_si"]
    columns, rows, code = _with_status(columns, rows, statuses)
    _write_csv(out_dir / f"{resolved['output']['stem']}.csv",
               _header_lines(resolved, digest), columns, rows)
    return code


def _run_integrand(resolved, runtime, out_dir, digest, workers):
    config = forcengine.LatticePairConfig(
        cell_lower=runtime["lower"], cell_upper=runtime["upper"],
        z=resolved["z"], l_max=resolved["l_max"], g_max=resolved["g_max"],
        quadrature=runtime["quadrature"])
    if resolved["kind"] == "difference":
        trace = forcengine.difference_integrand(config, n_xi=resolved["n_xi"],
                                                workers=workers)
    else:
        trace = forcengine.force_integrand_trace(config,
                                                 n_xi=resolved["n_xi"],
                                                 workers=workers)
    peak = float(np.abs(trace.values).max())
    extras = [f"kind: {resolved['kind']}",
              f"z: {_format_cell(resolved['z'])}",
              f"zero_limit: {_format_cell(trace.zero_limit)}",
              f"peak: {_format_cell(peak)}"]
    scales = _si_scales(resolved)
    rows = []
    for xi, value in zip(trace.xi, trace.values):
        row = [xi, value]
        if resolved["si"]:
            row += [xi * scales["frequency"],
                    value * scales["density"]]
        rows.append(row)
    columns = ["xi", "value"]
    if resolved["si"]:
        columns += ["xi_si", "value_si"]
    stem = resolved["output"]["stem"]
    _write_csv(out_dir / f"{stem}.csv",
               _header_lines(resolved, digest, extras), columns, rows)
    if len(trace.samples):
        name = "logdet_diff" if resolved["kind"] == "difference" \
            else "logdet"
        _write_csv(out_dir / f"{stem}_samples.csv",
                   _header_lines(resolved, digest, extras),
                   ["xi", "kx", "ky", name],
                   [list(row) for row in trace.samples])
    return 0


def _run_pairwise(resolved, runtime, out_dir, digest, workers):
    del workers  # image sums cost microseconds per pair; never dispatched
    scales = _si_scales(resolved)
    rows = []
    for z in resolved["z_grid"]:
        for x in resolved["x_grid"]:
            config = forcengine.LatticePairConfig(
                cell_lower=runtime["lower"], cell_upper=runtime["upper"],
                z=z, shift=(x, 0.0))
            force = forcengine.pairwise_estimator(
                config, rel_cutoff=resolved["rel_cutoff"])
            err = resolved["rel_cutoff"] * abs(force)
            row = [z, x, "pairwise", force, math.nan, err]
            if resolved["si"]:
                row += [z * scales["length"], x * scales["length"],
                        force * scales["force"], math.nan,
                        err * scales["force"]]
            rows.append(row)
    columns = ["z", "x", "chirality", "F", "E", "err"]
    if resolved["si"]:
        columns += ["z_si", "x_si", "F_si", "E_si", "err_si"]
    _write_csv(out_dir / f"{resolved['output']['stem']}.csv",
               _header_lines(resolved, digest), columns, rows)
    return 0


_COMMANDS = {
    "force": (_resolve_force, _run_force),
    "sweep": (_resolve_sweep, _run_sweep),
    "retrieve": (_resolve_retrieve, _run_retrieve),
    "integrand": (_resolve_integrand, _run_integrand),
    "pairwise": (_resolve_pairwise, _run_pairwise),
}

_HELP = {
    "force": "energy/force of a body pair over a (z, x) grid",
    "sweep": "SC/OC force sweep of one lattice with min/max summary",
    "retrieve": "effective-medium parameters of a reflection source",
    "integrand": "frequency-resolved force or difference density",
    "pairwise": "chirality-blind pairwise Casimir-Polder estimate",
}


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chiralcas",
        description="Casimir forces between chiral metamaterial lattices")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=_HELP[name])
        cmd.add_argument("--config", required=True,
                         help="JSON configuration path")
        cmd.add_argument("--out", default=".",
                         help="output directory (created if missing)")
        cmd.add_argument("--workers", type=_positive_int, default=1,
                         help="worker processes for grid dispatch")
        cmd.add_argument("--tolerance", type=float, default=None,
                         help="override the quadrature relative tolerance")
        cmd.add_argument("--si", action="store_true",
                         help="append SI-unit columns scaled by a_si")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    resolve, run = _COMMANDS[args.command]
    try:
        raw = _read_json(args.config)
        _validate_schema(raw, args.command)
        resolved, runtime = resolve(raw, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return run(resolved, runtime, out_dir, resolved_digest(resolved),
               args.workers)


if __name__ == "__main__":
    sys.exit(main())
