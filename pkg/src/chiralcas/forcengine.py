"""Casimir energy and force between two half-space media.

The interaction energy per unit cell (period a = 1, hbar = c = 1) is

    E(z) = (1/2 pi) int_0^inf dxi (1/(2 pi)^2) int_BZ d^2k
           log det(I - M(xi, k, z)),

with the round trip M = R_up X(z) R_down X(z) across the vacuum gap z
between the two reference planes; X = diag(exp(-kappa_G z)) translates
planewave amplitudes across the gap.  E < 0 for attracting bodies and
shrinks toward zero as z grows, so its z-derivative

    F(z) = dE/dz > 0

is reported as the (positive) attractive force per unit cell; F is
computed analytically from the trace formula, never by differencing.

Bodies are UnitCell lattices (dilute scattering, see `lattice`) or
homogeneous ChiralSlabModel media (see `ema`); the two kinds mix freely,
which is how lattice results are compared against their effective-medium
description.  Up-facing lattice reflections come from the z-mirrored cell
conjugated with the s/p parity of the mirror map; for isotropic slabs the
up- and down-facing reflections coincide.

Chirality pairings follow one convention everywhere: the opposite-
chirality (OC) partner of a pair is obtained by mirroring the *lower*
body through the xy plane, the same-chirality (SC) pair uses the lower
body as given.
"""

import concurrent.futures
import dataclasses
import hashlib
import json
import math
import warnings

import numpy as np

from . import ema
from . import lattice
from . import quadrature
from . import scatterers

_TWO_PI_CUBED = (2.0 * math.pi) ** 3


@dataclasses.dataclass(frozen=True)
class QuadratureSpec:
    """Orders and refinement policy for the double (xi, k) quadrature.

    n_xi points map (0, inf) through xi = xi_scale u/(1-u) (xi_scale
    defaults to 1/z); n_bz is the per-axis Gauss-Legendre order on the
    Brillouin zone, with nodes drawn toward the zone center at scale
    1/bz_scale (default z) since gap integrands decay like exp(-2|k|z).
    Error estimates compare against a half-order pass; orders double (up
    to max_refinements times) while the estimate exceeds `tolerance`
    relative to the result.
    """

    n_xi: int = 16
    n_bz: int = 6
    xi_scale: float = None
    bz_scale: float = None
    tolerance: float = 1e-3
    max_refinements: int = 2

    def __post_init__(self):
        if self.n_xi < 4 or self.n_bz < 4:
            raise ValueError("quadrature orders must be at least 4")
        for name in ("xi_scale", "bz_scale"):
            value = getattr(self, name)
            if value is not None and value <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")


_DEFAULT_QUADRATURE = QuadratureSpec()


def _is_body(obj):
    return isinstance(obj, (lattice.UnitCell, ema.ChiralSlabModel))


@dataclasses.dataclass(frozen=True, eq=False)
class LatticePairConfig:
    """One evaluation geometry: two bodies, a gap, a transverse shift."""

    cell_lower: object
    cell_upper: object
    z: float
    shift: tuple = (0.0, 0.0)
    l_max: int = 3
    g_max: int = 3
    quadrature: QuadratureSpec = _DEFAULT_QUADRATURE

    def __post_init__(self):
        if self.z <= 0.0:
            raise ValueError("z must be positive")
        for body in (self.cell_lower, self.cell_upper):
            if not _is_body(body):
                raise TypeError("bodies must be UnitCell or ChiralSlabModel")
        shift = tuple(float(v) for v in self.shift)
        if len(shift) != 2:
            raise ValueError("shift must have two components")
        object.__setattr__(self, "shift", shift)
        if self.l_max < 1 or self.g_max < 0:
            raise ValueError("l_max >= 1 and g_max >= 0 required")


@dataclasses.dataclass(frozen=True, eq=False)
class IntegrandTrace:
    """Per-frequency reduced integrand with its xi -> 0 extrapolation.

    values[i] is the frequency density at xi[i] (integrating values over
    xi yields the traced quantity); samples rows are (xi, kx, ky,
    log det) for the underlying Brillouin-zone evaluations when the
    engine collects them (lattice runs; empty for homogeneous media).
    """

    xi: np.ndarray
    values: np.ndarray
    zero_limit: float
    samples: np.ndarray
    metadata: dict

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        values = np.asarray(self.values, dtype=float)
        samples = np.asarray(self.samples, dtype=float).reshape(-1, 4)
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(values))
                and np.all(np.isfinite(samples))
                and math.isfinite(self.zero_limit)):
            raise ValueError("integrand trace must be finite and real")
        for name, arr in (("xi", xi), ("values", values),
                          ("samples", samples)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclasses.dataclass(frozen=True, eq=False)
class ForceTable:
    """Sweep results for one chirality pairing: rows (z, x, F, E, err)."""

    chirality: str
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float).reshape(-1, 5)
        if not np.all(np.isfinite(rows)):
            raise ValueError("force table rows must be finite")
        if np.any(rows[:, 4] < 0.0):
            raise ValueError("error estimates must be non-negative")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)


@dataclasses.dataclass(frozen=True, eq=False)
class SweepResult:
    """SC and OC force tables plus the per-z spread summary.

    summary rows: (z, F_min_SC, F_max_SC, F_min_OC, F_max_OC, rel_diff)
    where extrema are over the x-grid and rel_diff is the mean force
    difference (OC - SC) normalized per metadata["normalization"].
    """

    sc: ForceTable
    oc: ForceTable
    summary: np.ndarray
    metadata: dict


def default_z_grid():
    """Sixteen geometrically spaced separations spanning [1.5, 6] a."""
    return np.geomspace(1.5, 6.0, 16)


def default_x_grid():
    """Eight transverse displacements along a lattice axis in [0, 1/2] a."""
    return np.linspace(0.0, 0.5, 8)


# ----------------------------------------------------------------------------
# reflection assembly and round trips
# ----------------------------------------------------------------------------

def _slab_halfspace(slab, xi, k, g_max):
    """Diagonal reflection of a homogeneous medium: each G channel sees
    its own incidence |k + G|.  Valid for both facings (isotropic)."""
    gv = lattice.reciprocal_vectors(g_max)
    k = np.asarray(k, dtype=float)
    n = 2 * len(gv)
    out = np.zeros((n, n), dtype=complex)
    for i, g in enumerate(gv):
        out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = \
            ema.chiral_fresnel(slab, xi, float(np.hypot(*(k + g))))
    return lattice.PlanewaveReflectionMatrix(xi=xi, k=k, gvecs=gv, matrix=out)


def planewave_translation(r, dz):
    """Diagonal gap-translation factors exp(-kappa_G dz) aligned with the
    planewave indexing of the reflection matrix `r`."""
    if dz < 0.0:
        raise ValueError("translation distance must be non-negative")
    return np.exp(-np.repeat(r.decay_constants, 2) * dz)


def roundtrip(r_up, r_down, z, xi=None, k=None):
    """Round-trip operator M = R_up X(z) R_down X(z).

    The optional xi and k arguments assert the reflection matrices were
    built at the expected point; mismatched operands are rejected.
    """
    if r_up.matrix.shape != r_down.matrix.shape:
        raise ValueError("reflection matrices have mismatched dimensions")
    if abs(r_up.xi - r_down.xi) > 1e-12 * max(r_up.xi, 1.0) or \
            not np.array_equal(r_up.gvecs, r_down.gvecs) or \
            not np.allclose(r_up.k, r_down.k, atol=1e-12):
        raise ValueError("reflection matrices describe different channels")
    if xi is not None and abs(r_up.xi - xi) > 1e-12 * max(abs(xi), 1.0):
        raise ValueError("reflection matrices built at a different xi")
    if k is not None and not np.allclose(r_up.k, np.asarray(k, float),
                                         atol=1e-12):
        raise ValueError("reflection matrices built at a different k")
    x2 = planewave_translation(r_down, z)
    return (r_up.matrix * x2[None, :]) @ (r_down.matrix * x2[None, :])


def _logdet_and_force(r_up_matrix, r_dn_matrix, kap2, z):
    """(log det(I - M), d log det(I - M)/dz) for one (xi, k) point.

    Both are real; the imaginary residue of the log-determinant is
    asserted below 1e-10.
    """
    x2 = np.exp(-kap2 * z)
    a = r_up_matrix * x2[None, :]
    b = r_dn_matrix * x2[None, :]
    m = a @ b
    imt = np.eye(len(m), dtype=complex) - m
    sign, logabs = np.linalg.slogdet(imt)
    if abs(np.angle(sign)) > 1e-10:
        raise FloatingPointError("log det(I-M) acquired an imaginary part")
    dm = -((a * kap2[None, :]) @ b + a @ (b * kap2[None, :]))
    trace = -np.trace(np.linalg.solve(imt, dm))
    if abs(trace.imag) > 1e-10 * max(abs(trace.real), 1.0):
        raise FloatingPointError("force trace acquired an imaginary part")
    return logabs, trace.real


@dataclasses.dataclass(frozen=True)
class _PassSpec:
    """Picklable description of one quadrature pass shared by xi tasks.

    pairs holds (lower body, upper body already z-mirrored when it is a
    cell); the same object may appear in several roles and is then built
    once per (xi, k).
    """

    pairs: tuple
    z: float
    shifts: tuple
    l_max: int
    g_max: int
    n_bz: int
    bz_scale: float
    collect: bool = False


def body_reflection(body, xi, k, *, l_max=3, g_max=3, facing="down"):
    """Half-space reflection matrix of either body kind.

    Homogeneous media reflect identically from both faces; lattices are
    delegated to `lattice.halfspace_reflection`, which mirrors the cell
    for the up-facing case.
    """
    if facing not in ("down", "up"):
        raise ValueError("facing must be 'down' or 'up'")
    if isinstance(body, ema.ChiralSlabModel):
        return _slab_halfspace(body, xi, np.asarray(k, dtype=float), g_max)
    if isinstance(body, lattice.UnitCell):
        return lattice.halfspace_reflection(body, xi, k, l_max=l_max,
                                            g_max=g_max, facing=facing)
    raise TypeError("bodies must be UnitCell or ChiralSlabModel")


def _reflection_for_task(body, xi, k, spec, tms_cache, facing):
    """Worker-path reflection: up-facing cells arrive pre-mirrored, so
    only the polarization-parity conjugation remains to apply."""
    if isinstance(body, ema.ChiralSlabModel):
        return _slab_halfspace(body, xi, k, spec.g_max)
    r = lattice.stack_semi_infinite(lattice.cell_reflection(
        body, xi, k, l_max=spec.l_max, g_max=spec.g_max,
        tmatrices=tms_cache[id(body)]))
    if facing == "up":
        flip = lattice.polarization_flip(len(r.gvecs))
        r = lattice.PlanewaveReflectionMatrix(
            xi=r.xi, k=r.k, gvecs=r.gvecs,
            matrix=flip[:, None] * r.matrix * flip[None, :])
    return r


def _xi_task(args):
    """Brillouin-zone reduction at one frequency.

    Returns (out, samples): out[i_pair, i_shift, 0] is the k-weighted sum
    of log det(I - M), out[..., 1] the matching force trace; samples
    holds per-k log-determinants (pairs x shifts x nk) when requested.
    """
    xi, spec = args
    tms_cache = {}
    for pair in spec.pairs:
        for body in pair:
            if isinstance(body, lattice.UnitCell) and id(body) not in \
                    tms_cache:
                tms_cache[id(body)] = lattice.cell_tmatrices(
                    body, xi, spec.l_max)
    kpts, wk = quadrature.bz_grid(spec.n_bz, scale=spec.bz_scale)
    npair, nshift = len(spec.pairs), len(spec.shifts)
    out = np.zeros((npair, nshift, 2))
    samples = np.zeros((npair, nshift, len(kpts))) if spec.collect else None
    for ik, k in enumerate(kpts):
        raw_cache = {}
        for ip, (dn_body, up_body) in enumerate(spec.pairs):
            key_dn = (id(dn_body), "down")
            if key_dn not in raw_cache:
                raw_cache[key_dn] = _reflection_for_task(
                    dn_body, xi, k, spec, tms_cache, "down")
            r_dn = raw_cache[key_dn]
            key_up = (id(up_body), "up")
            if key_up not in raw_cache:
                raw_cache[key_up] = _reflection_for_task(
                    up_body, xi, k, spec, tms_cache, "up")
            r_up = raw_cache[key_up]
            kap2 = np.repeat(r_dn.decay_constants, 2)
            for isft, shift in enumerate(spec.shifts):
                mat_up = r_up.matrix
                if shift != (0.0, 0.0) and isinstance(
                        up_body, lattice.UnitCell):
                    mat_up = lattice.displace_transverse(r_up, shift).matrix
                ld, tr = _logdet_and_force(mat_up, r_dn.matrix, kap2, spec.z)
                out[ip, isft, 0] += wk[ik] * ld
                out[ip, isft, 1] += wk[ik] * tr
                if spec.collect:
                    samples[ip, isft, ik] = ld
    return out, samples


def _parallel_map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=1))


def _quadrature_pass(spec, n_xi, xi_scale, workers):
    """One complete double quadrature: (npair, nshift, 2) of (E, F)."""
    xis, wx = quadrature.half_line(n_xi, xi_scale)
    results = _parallel_map(_xi_task, [(xi, spec) for xi in xis], workers)
    total = np.zeros((len(spec.pairs), len(spec.shifts), 2))
    for i in range(len(xis)):
        total += wx[i] * results[i][0]
    return total / _TWO_PI_CUBED


def _even_floor(n):
    """Largest even order >= max(n, 2); even Brillouin-zone orders keep
    nodes off the zone axes."""
    n = max(n, 2)
    return n + n % 2


def _mirrored_body(body):
    if isinstance(body, ema.ChiralSlabModel):
        return body.mirrored()
    return lattice.mirror_unit_cell(body, "xy")


def _pair_spec(config, shifts=(None,), pairings="single", collect=False):
    """Build the task spec; upper cells are pre-mirrored once here."""
    upper = config.cell_upper
    upper_eff = _mirrored_body(upper) if isinstance(upper, lattice.UnitCell) \
        else upper
    if pairings == "single":
        pairs = ((config.cell_lower, upper_eff),)
    elif pairings == "sc-oc":
        if config.cell_lower is upper and isinstance(
                upper, lattice.UnitCell):
            oc_lower = upper_eff  # shared object keeps the caches warm
        else:
            oc_lower = _mirrored_body(config.cell_lower)
        pairs = ((config.cell_lower, upper_eff), (oc_lower, upper_eff))
    else:
        raise ValueError(f"unknown pairing mode {pairings!r}")
    shifts = tuple(config.shift if s is None else tuple(s) for s in shifts)
    quad = config.quadrature
    bz_scale = quad.bz_scale if quad.bz_scale is not None else config.z
    return _PassSpec(pairs=pairs, z=config.z, shifts=shifts,
                     l_max=config.l_max, g_max=config.g_max,
                     n_bz=quad.n_bz, bz_scale=bz_scale, collect=collect)


def _evaluate_with_error(config, workers, pairings="single", shifts=(None,)):
    """Adaptive evaluation: (values, errors) shaped (npair, nshift, 2).

    The error estimate is the change from a pass at half the quadrature
    orders; orders double while the estimate exceeds the requested
    relative tolerance, and a remaining excess is warned about rather
    than silently accepted.
    """
    quad = config.quadrature
    scale = quad.xi_scale if quad.xi_scale is not None else 1.0 / config.z
    n_xi, n_bz = quad.n_xi, quad.n_bz
    spec = _pair_spec(config, shifts, pairings)
    fine = _quadrature_pass(spec, n_xi, scale, workers)
    coarse = _quadrature_pass(
        dataclasses.replace(spec, n_bz=_even_floor(n_bz // 2)),
        max(n_xi // 2, 4), scale, workers)
    err = np.abs(fine - coarse)
    for _ in range(quad.max_refinements):
        scale_ref = np.maximum(np.abs(fine), 1e-300)
        if np.all(err <= quad.tolerance * scale_ref):
            break
        n_xi, n_bz = 2 * n_xi, 2 * n_bz
        spec = dataclasses.replace(spec, n_bz=n_bz)
        coarse, fine = fine, _quadrature_pass(spec, n_xi, scale, workers)
        err = np.abs(fine - coarse)
    if np.any(err > quad.tolerance * np.maximum(np.abs(fine), 1e-300)):
        warnings.warn("quadrature error estimate above tolerance after "
                      "maximum refinement", RuntimeWarning, stacklevel=3)
    return fine, err


def casimir_energy(config, workers=1):
    """Interaction energy per unit cell and its error estimate."""
    vals, errs = _evaluate_with_error(config, workers)
    return vals[0, 0, 0], errs[0, 0, 0]


def casimir_force(config, workers=1):
    """Attractive force per unit cell (positive = attraction) and its
    error estimate, from the analytic trace formula."""
    vals, errs = _evaluate_with_error(config, workers)
    return vals[0, 0, 1], errs[0, 0, 1]


def energy_and_force(config, workers=1):
    """((energy, force), (energy_err, force_err)) from a single adaptive
    quadrature run; cheaper than two separate calls when both are needed."""
    vals, errs = _evaluate_with_error(config, workers)
    return (vals[0, 0, 0], vals[0, 0, 1]), (errs[0, 0, 0], errs[0, 0, 1])


# ----------------------------------------------------------------------------
# SC/OC sweeps
# ----------------------------------------------------------------------------

def sweep_sc_oc(cell, z_grid=None, x_grid=None, *, l_max=3, g_max=3,
                quadrature_spec=None, workers=1, normalization="global"):
    """Force tables over (z, x) for both chirality pairings of one cell.

    The same-chirality pair faces the cell with itself; the opposite-
    chirality pair mirrors the lower body.  Transverse displacements run
    along the x lattice axis.  Quadrature failures at individual grid
    points are counted in metadata["warnings"], not raised.

    normalization: "global" divides the mean force difference by the
    minimum force over both pairings at that z, "per-chirality" by the
    SC minimum only; the summary column follows the choice, and both
    series are kept in metadata.
    """
    if not isinstance(cell, lattice.UnitCell):
        raise TypeError("sweep_sc_oc needs a UnitCell")
    if normalization not in ("global", "per-chirality"):
        raise ValueError("normalization must be 'global' or 'per-chirality'")
    z_grid = default_z_grid() if z_grid is None else np.asarray(
        z_grid, dtype=float)
    x_grid = default_x_grid() if x_grid is None else np.asarray(
        x_grid, dtype=float)
    quad = _DEFAULT_QUADRATURE if quadrature_spec is None else quadrature_spec
    shifts = tuple((float(x), 0.0) for x in x_grid)
    rows = {0: [], 1: []}
    summary = []
    rel_both = []
    warn_per_z = []
    for z in z_grid:
        config = LatticePairConfig(cell_lower=cell, cell_upper=cell, z=z,
                                   l_max=l_max, g_max=g_max, quadrature=quad)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            vals, errs = _evaluate_with_error(config, workers,
                                              pairings="sc-oc",
                                              shifts=shifts)
        warn_per_z.append(sum(issubclass(w.category, RuntimeWarning)
                              for w in caught))
        for ip in (0, 1):
            for ix, x in enumerate(x_grid):
                rows[ip].append((z, x, vals[ip, ix, 1], vals[ip, ix, 0],
                                 errs[ip, ix, 1]))
        f_sc, f_oc = vals[0, :, 1], vals[1, :, 1]
        diff = np.mean(f_oc) - np.mean(f_sc)
        rel_global = diff / min(f_sc.min(), f_oc.min())
        rel_per = diff / f_sc.min()
        rel_both.append((rel_global, rel_per))
        summary.append((z, f_sc.min(), f_sc.max(), f_oc.min(), f_oc.max(),
                        rel_global if normalization == "global" else rel_per))
    metadata = {"normalization": normalization, "warnings": sum(warn_per_z),
                "warnings_per_z": warn_per_z,
                "l_max": l_max, "g_max": g_max,
                "rel_diff_global": [r[0] for r in rel_both],
                "rel_diff_per_chirality": [r[1] for r in rel_both]}
    return SweepResult(sc=ForceTable("SC", np.array(rows[0])),
                       oc=ForceTable("OC", np.array(rows[1])),
                       summary=np.array(summary), metadata=metadata)


# ----------------------------------------------------------------------------
# frequency-resolved integrands
# ----------------------------------------------------------------------------

def _trace_xi_values(config, xis, workers, pairings, collect):
    spec = _pair_spec(config, (None,), pairings, collect=collect)
    results = _parallel_map(_xi_task, [(xi, spec) for xi in xis], workers)
    red = np.array([r[0] for r in results])     # (nxi, npair, 1, 2)
    values = red[:, :, 0, 1] / _TWO_PI_CUBED    # force density per pairing
    sample_rows = []
    if collect:
        kpts, _ = quadrature.bz_grid(spec.n_bz, scale=spec.bz_scale)
        for i, xi in enumerate(xis):
            ld = results[i][1][:, 0, :]          # (npair, nk)
            val = ld[-1] - ld[0] if len(spec.pairs) == 2 else ld[0]
            for ik in range(len(kpts)):
                sample_rows.append((xi, kpts[ik, 0], kpts[ik, 1], val[ik]))
    return values, np.array(sample_rows, dtype=float).reshape(-1, 4)


def _is_slab_pair(config):
    return isinstance(config.cell_lower, ema.ChiralSlabModel) and \
        isinstance(config.cell_upper, ema.ChiralSlabModel)


def _slab_force_density(config, pairings):
    lower, upper = config.cell_lower, config.cell_upper
    if pairings == "sc-oc":
        pairs = [(lower, upper), (lower.mirrored(), upper)]
    else:
        pairs = [(lower, upper)]

    def density(xi):
        return np.array([ema.ema_xi_integrand(up, dn, config.z, xi,
                                              kind="force")
                         for dn, up in pairs])
    return density


def difference_integrand(config, z=None, *, n_xi=25, workers=1):
    """Frequency density of the force difference F_OC - F_SC.

    The OC pairing mirrors the lower body of `config`; the trace spans a
    geometric xi grid bracketing the 1/z peak, and zero_limit Richardson-
    extrapolates the density to xi = 0 from samples at {1, 2, 4}e-4/z.
    For pure isotropic chiral media the limit vanishes; anisotropic cells
    leave a finite zero-frequency component.
    """
    if z is not None:
        config = dataclasses.replace(config, z=float(z))
    xis = np.geomspace(0.02 / config.z, 12.0 / config.z, n_xi)
    if _is_slab_pair(config):
        density = _slab_force_density(config, "sc-oc")
        pair_vals = np.array([density(xi) for xi in xis])
        values = pair_vals[:, 1] - pair_vals[:, 0]
        samples = np.zeros((0, 4))

        def diff_at(s):
            v = density(s)
            return v[1] - v[0]
    else:
        vals, samples = _trace_xi_values(config, xis, workers, "sc-oc",
                                         collect=True)
        values = vals[:, 1] - vals[:, 0]

        def diff_at(s):
            v, _ = _trace_xi_values(config, [s], workers, "sc-oc",
                                    collect=False)
            return v[0, 1] - v[0, 0]
    zero = quadrature.richardson_zero(diff_at, 1e-4 / config.z)
    metadata = {"z": config.z, "kind": "force-difference-density",
                "config": config_digest(config)}
    return IntegrandTrace(xi=xis, values=values, zero_limit=zero,
                          samples=samples, metadata=metadata)


def force_integrand_trace(config, *, n_xi=25, workers=1):
    """Frequency density of the force itself for one pair (same grid and
    extrapolation conventions as `difference_integrand`)."""
    xis = np.geomspace(0.02 / config.z, 12.0 / config.z, n_xi)
    if _is_slab_pair(config):
        density = _slab_force_density(config, "single")
        values = np.array([density(xi)[0] for xi in xis])
        samples = np.zeros((0, 4))

        def value_at(s):
            return density(s)[0]
    else:
        vals, samples = _trace_xi_values(config, xis, workers, "single",
                                         collect=True)
        values = vals[:, 0]

        def value_at(s):
            v, _ = _trace_xi_values(config, [s], workers, "single",
                                    collect=False)
            return v[0, 0]
    zero = quadrature.richardson_zero(value_at, 1e-4 / config.z)
    metadata = {"z": config.z, "kind": "force-density",
                "config": config_digest(config)}
    return IntegrandTrace(xi=xis, values=values, zero_limit=zero,
                          samples=samples, metadata=metadata)


# ----------------------------------------------------------------------------
# pairwise Casimir-Polder estimator
# ----------------------------------------------------------------------------

def static_electric_polarizability(source):
    """Isotropic-average static electric polarizability (Gaussian
    convention, alpha_volume / 4 pi) of a particle source."""
    if isinstance(source, scatterers.OmegaParams):
        alpha6 = scatterers.omega_polarizability(source, 0.0)
        return np.trace(alpha6[:3, :3]) / 3.0 / (4.0 * math.pi)
    raise TypeError("pairwise estimator needs parameter-described particles "
                    "(static polarizability unavailable for "
                    f"{type(source).__name__})")


def casimir_polder_force(alpha1, alpha2, displacement):
    """Retarded two-dipole attraction, z-component.

    E(r) = -23 alpha1 alpha2 / (4 pi r^7) gives the gap-direction force
    7 C dz / r^9 with C = 23 alpha1 alpha2 / (4 pi); positive when the
    vertical separation dz is positive (attraction across the gap).
    """
    d = np.asarray(displacement, dtype=float)
    r2 = float(d @ d)
    c = 23.0 * alpha1 * alpha2 / (4.0 * math.pi)
    return 7.0 * c * d[2] / r2 ** 4.5


def pairwise_estimator(config, rel_cutoff=1e-9):
    """Chirality-blind pairwise force: summed Casimir-Polder attractions.

    Every lower-body particle (all lattice images and depth layers)
    attracts every upper-body particle via the static isotropic electric
    polarizabilities; magnetic and magnetoelectric response is ignored,
    so handedness cannot enter and SC/OC predictions coincide exactly.
    In-plane image shells and depth layers are truncated at a cutoff
    radius and closed with analytic integral tail estimates, chosen so
    the relative truncation error stays below rel_cutoff.
    """
    for body in (config.cell_lower, config.cell_upper):
        if not isinstance(body, lattice.UnitCell):
            raise TypeError("pairwise estimator needs two particle lattices")
    shift = np.asarray(config.shift, dtype=float)
    total = 0.0
    for pl in config.cell_lower.particles:
        al = static_electric_polarizability(pl.source)
        for pu in config.cell_upper.particles:
            au = static_electric_polarizability(pu.source)
            drho = (np.asarray(pu.position[:2]) + shift
                    - np.asarray(pl.position[:2]))
            dz0 = config.z + pu.position[2] + (1.0 - pl.position[2])
            total += _pair_image_sum(al, au, drho, dz0, rel_cutoff)
    return total


_INPLANE_INTEGRAL_DZ = 5.0  # lattice sum and plane integral agree to ~3e-10


def _pair_image_sum(alpha1, alpha2, drho, dz0, rel_cutoff):
    """Depth layers of the image sum; each layer is an in-plane lattice
    sum, and the remaining layers are closed with a midpoint integral
    tail once its estimated error is negligible."""
    c = 23.0 * alpha1 * alpha2 / (4.0 * math.pi)
    total = 0.0
    level = 0
    while True:
        dz = dz0 + level
        layer = 7.0 * c * (level + 1) * _inplane_image_sum(drho, dz,
                                                           rel_cutoff)
        total += layer
        if dz0 + level + 1 >= _INPLANE_INTEGRAL_DZ:
            # layers u > level: 2 pi c (u + 1) / (dz0 + u)^6 each, so the
            # tail is ~ 2 pi c int_{v0}^inf (v - dz0 + 1) v^-6 dv with
            # v0 = dz0 + level + 1/2 and a relative error ~ 1.5 / v0^2.
            v0 = dz + 0.5
            tail = 2.0 * math.pi * c * (0.25 * v0 ** -4
                                        - 0.2 * (dz0 - 1.0) * v0 ** -5)
            if 2.0 * tail / v0 ** 2 <= 0.5 * rel_cutoff * total:
                return total + tail
        level += 1
        if level > 100000:  # pragma: no cover - generous physical bound
            return total


def _inplane_image_sum(drho, dz, rel_cutoff):
    """sum over u in Z^2 of dz / |(drho + u, dz)|^9, by square shells
    closed with an area-matched disk integral tail."""
    if dz >= _INPLANE_INTEGRAL_DZ:
        return 2.0 * math.pi / (7.0 * dz ** 6)
    total = dz / (drho @ drho + dz * dz) ** 4.5
    shell = 0
    min_shell = max(2, int(np.ceil(np.max(np.abs(drho)))) + 1)
    while True:
        shell += 1
        t = np.arange(-shell, shell + 1)
        edge = np.concatenate([
            np.column_stack([np.full(2 * shell + 1, -shell), t]),
            np.column_stack([np.full(2 * shell + 1, shell), t]),
            np.column_stack([t[1:-1], np.full(2 * shell - 1, -shell)]),
            np.column_stack([t[1:-1], np.full(2 * shell - 1, shell)])])
        rho = drho[None, :] + edge
        total += np.sum(dz / (np.einsum("ij,ij->i", rho, rho)
                              + dz * dz) ** 4.5)
        if shell >= min_shell:
            disk_r2 = (2 * shell + 1) ** 2 / math.pi
            tail = 2.0 * math.pi * dz / (7.0 * (disk_r2 + dz * dz) ** 3.5)
            if tail <= 0.5 * rel_cutoff * total:
                return total + tail


# ----------------------------------------------------------------------------
# configuration digests
# ----------------------------------------------------------------------------

def _describe(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {"type": type(obj).__name__,
                "fields": {f.name: _describe(getattr(obj, f.name))
                           for f in dataclasses.fields(obj)}}
    if isinstance(obj, np.ndarray):
        return {"array": obj.tolist()}
    if isinstance(obj, (list, tuple)):
        return [_describe(v) for v in obj]
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    if callable(obj):
        return {"callable": getattr(obj, "__qualname__", repr(type(obj)))}
    return {"repr": repr(obj)}


def config_digest(config):
    """Deterministic sha256 hex digest of a configuration tree."""
    blob = json.dumps(_describe(config), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
