"""Homogeneous chiral-medium engine on the imaginary frequency axis.

Covers four related jobs: reflection matrices of chiral half-spaces
(closed form plus an independently coded boundary-matching solver used as
a cross-check), the specular Lifshitz energy/force between two such
half-spaces, retrieval of effective-medium parameters from a black-box
reflection source by low-transverse-momentum fitting, and Clausius-
Mossotti homogenization connecting particle polarizabilities to medium
parameters.

Constitutive convention on the imaginary axis (xi = -i omega): D = eps E
+ kappa H and B = mu H - kappa E with eps, mu, kappa all real; kappa is
odd in xi for a causal chiral response, so kappa(0) = 0.  The circular
eigenmodes carry complex-conjugate indices n_pm = sqrt(eps mu) +- i kappa,
which keeps every reflection matrix real.  Reflection matrices are 2x2 in
the (s, p) basis, columns indexed by the incident polarization.
"""

import dataclasses
import json
import math

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares

from . import quadrature
from .scatterers import omega_polarizability


class _ConstantField:
    """Constant parameter as a callable; a class (not a closure) so slab
    models stay picklable for worker processes."""

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, xi):
        return self.value


class _NegatedField:
    """Sign-flipped view of another parameter function (picklable)."""

    def __init__(self, inner):
        self.inner = inner

    def __call__(self, xi):
        return -self.inner(xi)


def _as_function(value):
    if callable(value):
        return value
    return _ConstantField(value)


@dataclasses.dataclass(frozen=True, eq=False)
class ChiralSlabModel:
    """Half-space material: eps(xi), mu(xi), kappa(xi) real on xi >= 0.

    Fields may be constants or callables.  eps = inf marks a perfect
    mirror.  Evaluation rejects parameter sets with kappa^2 >= eps*mu,
    for which the eigen-indices degenerate.
    """

    eps: object
    mu: object = 1.0
    kappa: object = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eps", _as_function(self.eps))
        object.__setattr__(self, "mu", _as_function(self.mu))
        object.__setattr__(self, "kappa", _as_function(self.kappa))

    def params(self, xi):
        """(eps, mu, kappa) at xi, domain-checked."""
        eps, mu, kap = self.eps(xi), self.mu(xi), self.kappa(xi)
        if not (eps > 0.0 and mu > 0.0):
            raise ValueError(f"need eps, mu > 0; got ({eps}, {mu}) "
                             f"at xi={xi}")
        if math.isfinite(eps) and kap ** 2 >= eps * mu:
            raise ValueError(f"need kappa^2 < eps*mu; got kappa={kap} "
                             f"with eps*mu={eps * mu} at xi={xi}")
        return eps, mu, kap

    def mirrored(self):
        """The mirror-image medium: kappa -> -kappa."""
        return ChiralSlabModel(eps=self.eps, mu=self.mu,
                               kappa=_NegatedField(self.kappa))


def perfect_mirror():
    """Ideal-mirror half-space: r_ss = -1, r_pp = +1 at all (xi, k)."""
    return ChiralSlabModel(eps=math.inf)


class _TableField:
    """Shape-preserving cubic through tabulated samples (picklable).

    Below the grid the value either holds the first sample or is anchored
    linearly through zero (for kappa, where kappa(0) = 0); above the grid
    the last sample is held.
    """

    def __init__(self, grid, vals, anchor_zero):
        self.grid = grid
        self.vals = vals
        self.anchor_zero = anchor_zero
        self.interp = PchipInterpolator(grid, vals, extrapolate=False)

    def __call__(self, xi):
        if xi < self.grid[0]:
            if self.anchor_zero:
                return self.vals[0] * xi / self.grid[0]
            return self.vals[0]
        if xi > self.grid[-1]:
            return self.vals[-1]
        return float(self.interp(xi))


def slab_from_table(source):
    """ChiralSlabModel from {"xi": [...], "eps": [...], "mu": [...],
    "kappa": [...]} given as a dict or a JSON file path.

    Each parameter is interpolated with a shape-preserving cubic.  Outside
    the grid eps and mu hold their edge values while kappa is anchored
    linearly in xi below the grid (kappa(0) = 0) and held above it.
    """
    if not isinstance(source, dict):
        with open(source) as fh:
            source = json.load(fh)
    for key in ("xi", "eps", "mu", "kappa"):
        if key not in source:
            raise ValueError(f"slab table: missing field '{key}'")
    grid = np.asarray(source["xi"], dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("slab table: xi must be increasing with >= 2 points")

    def field(name, anchor_zero):
        vals = np.asarray(source[name], dtype=float)
        if vals.shape != grid.shape:
            raise ValueError(f"slab table: '{name}' length mismatch")
        return _TableField(grid, vals, anchor_zero)

    return ChiralSlabModel(eps=field("eps", False), mu=field("mu", False),
                           kappa=field("kappa", True))


# ----------------------------------------------------------------------------
# half-space reflection matrices
# ----------------------------------------------------------------------------

def _fresnel_core(eps, mu, kap, xi, q):
    """Closed-form reflection matrix for valid finite parameters."""
    if xi == 0.0:
        # kappa(0) = 0 for causal media; only the achiral limits survive
        return np.array([[(mu - 1.0) / (mu + 1.0), 0.0],
                         [0.0, (eps - 1.0) / (eps + 1.0)]])
    root = math.sqrt(eps * mu)
    eta = math.sqrt(mu / eps)
    n_p = root + 1j * kap
    n_m = root - 1j * kap
    kap0 = math.hypot(xi, q)
    kh_p = np.sqrt(q * q + xi * xi * n_p * n_p)
    kh_m = np.sqrt(q * q + xi * xi * n_m * n_m)
    c0 = kap0 / xi
    c_p = kh_p / (n_p * xi)
    c_m = kh_m / (n_m * xi)
    a_p = c0 / eta + c_p
    a_m = c0 / eta + c_m
    b_p = c0 + c_p / eta
    b_m = c0 + c_m / eta
    delta = a_p * b_m + a_m * b_p
    r_ss = 2.0 * c0 * (a_p + a_m) / delta - 1.0
    r_pp = 2.0 * c0 * (b_p + b_m) / (eta * delta) - 1.0
    r_sp = 2.0j * c0 * (b_p - b_m) / delta
    out = np.array([[r_ss, r_sp], [-r_sp, r_pp]])
    scale = max(np.abs(out).max(), 1.0)
    worst = np.abs(out.imag).max()
    if worst > 1e-11 * scale:
        raise AssertionError("reflection matrix lost reality "
                             f"(imaginary residue {worst:.2e})")
    return out.real


def chiral_fresnel(slab, xi, k):
    """2x2 reflection matrix [[r_ss, r_sp], [r_ps, r_pp]] of a half-space.

    Parameters
    ----------
    slab : ChiralSlabModel
    xi : float
        Imaginary frequency (xi = 0 follows the limit path).
    k : float
        Transverse momentum magnitude |k_perp|.

    Returns
    -------
    (2, 2) ndarray, real.  Columns index the incident polarization.
    """
    eps, mu, kap = slab.params(xi)
    if math.isinf(eps):
        return np.array([[-1.0, 0.0], [0.0, 1.0]])
    return _fresnel_core(eps, mu, kap, xi, k)


def chiral_fresnel_bvp(slab, xi, k):
    """Reflection matrix by numeric matching of the 4x4 tangential-field
    boundary system; an independent cross-check of `chiral_fresnel`.

    The medium fills z < 0; for tangential fields u = (E_x, E_y, H_x, H_y)
    with transverse factor e^{i k x}, the curl equations reduce to
    u' = A u after eliminating E_z, H_z algebraically.  Transmitted modes
    are the two eigenvectors of A decaying into the medium; vacuum modes
    are written explicitly.  Returns a complex matrix whose imaginary
    parts are numerically zero.
    """
    eps, mu, kap = slab.params(xi)
    if not math.isfinite(eps):
        raise ValueError("boundary-matching solver needs finite parameters")
    if xi <= 0.0:
        raise ValueError("boundary-matching solver needs xi > 0")
    d2 = kap * kap + eps * mu
    qq = k * k / xi
    amat = np.array([
        [0.0, xi * kap - qq * kap / d2, 0.0, -xi * mu - qq * mu / d2],
        [-xi * kap, 0.0, xi * mu, 0.0],
        [0.0, xi * eps + qq * eps / d2, 0.0, xi * kap - qq * kap / d2],
        [-xi * eps, 0.0, -xi * kap, 0.0],
    ], dtype=complex)
    evals, evecs = np.linalg.eig(amat)
    into = np.flatnonzero(evals.real > 0.0)
    if len(into) != 2:
        raise AssertionError("expected two modes decaying into the medium")
    kap0 = math.hypot(xi, k)

    def vac(d, pol):
        if pol == 0:  # s: E = e_s, H = -e_p(d)
            return np.array([0.0, 1.0, -d * kap0 / xi, 0.0])
        return np.array([d * kap0 / xi, 0.0, 0.0, 1.0])

    cols = np.column_stack([vac(1, 0), vac(1, 1),
                            -evecs[:, into[0]], -evecs[:, into[1]]])
    out = np.empty((2, 2), dtype=complex)
    for pol in (0, 1):
        sol = np.linalg.solve(cols, -vac(-1, pol))
        out[0, pol] = sol[0]
        out[1, pol] = sol[1]
    return out


def reflection_source(slab):
    """Adapter: ChiralSlabModel -> callable(xi, kvec) giving the 2x2
    reflection matrix (the protocol `retrieve_ema` consumes)."""
    def source(xi, kvec):
        kvec = np.asarray(kvec, dtype=float)
        return chiral_fresnel(slab, xi, math.hypot(kvec[0], kvec[1]))
    return source


# ----------------------------------------------------------------------------
# Lifshitz integrals
# ----------------------------------------------------------------------------

def _round_trip_terms(slab1, slab2, xi, q):
    """(tr K, det K) of K = R1 R2, arranged so the values are exactly
    symmetric under swapping the two slabs."""
    r1 = chiral_fresnel(slab1, xi, q)
    r2 = chiral_fresnel(slab2, xi, q)
    t1 = r1[0, 0] * r2[0, 0]
    t4 = r1[1, 1] * r2[1, 1]
    t2 = r1[0, 1] * r2[1, 0]
    t3 = r1[1, 0] * r2[0, 1]
    tr = (t1 + t4) + (t2 + t3)
    det = (r1[0, 0] * r1[1, 1] - r1[0, 1] * r1[1, 0]) \
        * (r2[0, 0] * r2[1, 1] - r2[0, 1] * r2[1, 0])
    return tr, det


def _node_energy(tr, det, kap0, z):
    damp = math.exp(-2.0 * kap0 * z)
    return math.log1p((-tr + det * damp) * damp)


def _node_force(tr, det, kap0, z):
    damp = math.exp(-2.0 * kap0 * z)
    num = 2.0 * kap0 * damp * (tr - 2.0 * det * damp)
    return num / (1.0 + (-tr + det * damp) * damp)


_NODE_FUNCS = {"energy": _node_energy, "force": _node_force}


def _ema_integral(kind, slab1, slab2, z, n_r, n_t, scale):
    """(1/4 pi^2) int dxi d(q^2/2) of the requested node function, in polar
    coordinates (kap0, theta) where the radial variable is the vacuum decay
    constant itself."""
    node = _NODE_FUNCS[kind]
    rad, wrad = quadrature.half_line(n_r, scale)
    tht, wtht = quadrature.gauss_legendre(n_t, 0.0, 0.5 * math.pi)
    sin_t, cos_t = np.sin(tht), np.cos(tht)
    total = 0.0
    for kap0, wr in zip(rad, wrad):
        ring = 0.0
        for st, ct, wt in zip(sin_t, cos_t, wtht):
            tr, det = _round_trip_terms(slab1, slab2, kap0 * ct, kap0 * st)
            ring += wt * st * node(tr, det, kap0, z)
        total += wr * kap0 * kap0 * ring
    return total / (4.0 * math.pi ** 2)


def ema_energy(slab1, slab2, z, n_r=48, n_t=24, scale=None):
    """Casimir energy per area between two half-spaces at separation z.

    Returns (energy, error_estimate); the estimate compares against a
    half-resolution quadrature.  Negative values mean binding.
    """
    return _with_error("energy", slab1, slab2, z, n_r, n_t, scale)


def ema_force(slab1, slab2, z, n_r=48, n_t=24, scale=None):
    """Casimir force per area, F = +dE/dz (positive = attraction).

    Returns (force, error_estimate).  Exactly symmetric in the two slabs.
    """
    return _with_error("force", slab1, slab2, z, n_r, n_t, scale)


def _with_error(kind, slab1, slab2, z, n_r, n_t, scale):
    if z <= 0.0:
        raise ValueError("z must be positive")
    if scale is None:
        scale = 1.0 / z
    full = _ema_integral(kind, slab1, slab2, z, n_r, n_t, scale)
    coarse = _ema_integral(kind, slab1, slab2, z, n_r // 2, n_t // 2, scale)
    return full, abs(full - coarse)


def ema_xi_integrand(slab1, slab2, z, xi, kind="force", n_q=64, scale=None):
    """Frequency density g(xi) with int_0^inf g dxi = energy (or force).

    Used to study the low-frequency behavior of chirality effects: for
    pure chiral pairs, g_OC - g_SC vanishes as xi -> 0.
    """
    if scale is None:
        scale = 1.0 / z
    node = _NODE_FUNCS[kind]
    qs, wq = quadrature.half_line(n_q, scale)
    total = 0.0
    for q, w in zip(qs, wq):
        tr, det = _round_trip_terms(slab1, slab2, xi, q)
        total += w * q * node(tr, det, math.hypot(xi, q), z)
    return total / (4.0 * math.pi ** 2)


# ----------------------------------------------------------------------------
# parameter retrieval
# ----------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RetrievedParams:
    """Effective-medium fit at one frequency.

    residual is the RMS misfit of the reflection entries over all samples;
    anisotropy is the largest absolute parameter difference between fits
    restricted to the axis samples and to the diagonal samples.
    """

    eps: float
    mu: float
    kappa: float
    residual: float
    anisotropy: float


def _fit_samples(xi, n_samples, k_max):
    per_dir = max(n_samples // 2, 2)
    mags = k_max * np.arange(1, per_dir + 1) / per_dir
    axis = [np.array([m, 0.0]) for m in mags]
    diag = [np.array([m, m]) / math.sqrt(2.0) for m in mags]
    return axis, diag


def _fit_params(targets, kvecs, xi, x0):
    flat_t = np.concatenate(
        [np.asarray(t, dtype=complex).ravel() for t in targets])

    def residual(p):
        eps, mu, kap = p
        if not (eps > 0.0 and mu > 0.0 and kap * kap < eps * mu):
            return np.full(8 * len(kvecs), 1e3)
        out = []
        for kvec in kvecs:
            r = _fresnel_core(eps, mu, kap, xi, math.hypot(*kvec))
            out.append(r.ravel())
        diff = np.concatenate(out) - flat_t
        return np.concatenate([diff.real, diff.imag])

    fit = least_squares(residual, x0, method="trf",
                        bounds=([1e-6, 1e-6, -100.0], [1e6, 1e6, 100.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x = _polish_least_squares(residual, fit.x)
    rms = math.sqrt(np.mean(residual(x) ** 2))
    return x, rms


def _polish_least_squares(fun, x, n_iter=12):
    """Gauss-Newton refinement with centered differences.

    Drives the fit to its stationary point more tightly than the stopping
    rule of `least_squares`, and the symmetric derivative stencil keeps
    parameter parities exact: mirrored inputs retrieve kappa of the exact
    opposite sign instead of agreeing only to the optimizer tolerance.
    """
    x = np.array(x, dtype=float)
    steps = 1e-5 * np.maximum(np.abs(x), 1.0)
    scale = np.max(np.maximum(np.abs(x), 1e-3))
    best_x = x.copy()
    best_cost = float(np.sum(fun(x) ** 2))
    for _ in range(n_iter):
        r0 = fun(x)
        jac = np.empty((r0.size, x.size))
        for i in range(x.size):
            xp = x.copy()
            xp[i] += steps[i]
            xm = x.copy()
            xm[i] -= steps[i]
            jac[:, i] = (fun(xp) - fun(xm)) / (2.0 * steps[i])
        step, *_ = np.linalg.lstsq(jac, -r0, rcond=None)
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > 0.1 * scale:
            break
        x = x + step
        cost = float(np.sum(fun(x) ** 2))
        if cost <= best_cost:
            best_x, best_cost = x.copy(), cost
        if np.max(np.abs(step)) < 1e-12 * scale:
            break
    # keep the final (stationary) iterate unless it genuinely regressed
    if float(np.sum(fun(x) ** 2)) > best_cost * (1.0 + 1e-6):
        return best_x
    return x


def retrieve_ema(source, xi, n_samples=8, k_max=None):
    """Fit (eps, mu, kappa) to a black-box specular reflection source.

    Parameters
    ----------
    source : callable(xi, kvec) -> (2, 2) reflection matrix
        For example `reflection_source(slab)` or a lattice half-space.
    xi : float
        Frequency at which to fit.
    n_samples : int
        Total number of finite-k samples, split between the k_x axis and
        the (1, 1) diagonal; the two directions separate isotropic from
        anisotropic quadratic terms.
    k_max : float
        Largest |k| sampled; defaults to xi/10, inside the regime where
        the quadratic expansion underlying the retrieval is valid.

    Returns
    -------
    RetrievedParams
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    if k_max is None:
        k_max = xi / 10.0
    axis, diag = _fit_samples(xi, n_samples, k_max)
    targets_axis = [source(xi, k) for k in axis]
    targets_diag = [source(xi, k) for k in diag]
    # normal incidence pins the impedance; use it to seed the optimizer
    r0 = float(np.real(np.asarray(source(xi, np.zeros(2))))[0, 0])
    r0 = min(max(r0, -0.999), 0.999)
    eta0 = (1.0 + r0) / (1.0 - r0)
    x0 = np.array([min(max(eta0 ** -2, 1e-3), 1e3), 1.0, 0.0])
    full, rms = _fit_params(targets_axis + targets_diag, axis + diag, xi, x0)
    p_axis, _ = _fit_params(targets_axis, axis, xi, x0)
    p_diag, _ = _fit_params(targets_diag, diag, xi, x0)
    return RetrievedParams(eps=full[0], mu=full[1], kappa=full[2],
                           residual=rms,
                           anisotropy=float(np.abs(p_axis - p_diag).max()))


# ----------------------------------------------------------------------------
# Clausius-Mossotti homogenization
# ----------------------------------------------------------------------------

def isotropic_alpha(alpha6):
    """Orientation-averaged 2x2 polarizability [[a_e, a_c], [-a_c, a_m]]
    from a 6x6 dipole polarizability."""
    alpha6 = np.asarray(alpha6, dtype=float)
    a_e = np.trace(alpha6[:3, :3]) / 3.0
    a_m = np.trace(alpha6[3:, 3:]) / 3.0
    a_c = np.trace(alpha6[:3, 3:]) / 3.0
    return np.array([[a_e, a_c], [-a_c, a_m]])


def clausius_mossotti(number_density, alpha, direction="forward"):
    """Clausius-Mossotti map between polarizabilities and medium parameters.

    direction = "forward": alpha is the 2x2 isotropic chiral polarizability
    [[a_e, a_c], [-a_c, a_m]]; returns (eps, mu, kappa) from the full
    resummed map A (I - (n/3) A)^{-1}.
    direction = "dilute": first-order truncation (eps = 1 + n a_e, ...).
    direction = "inverse": alpha is a tuple (eps, mu, kappa); returns the
    2x2 polarizability solving the forward map.
    """
    n = float(number_density)
    if n < 0.0:
        raise ValueError("number density must be non-negative")
    if direction == "inverse":
        eps, mu, kap = alpha
        if n == 0.0:
            raise ValueError("inverse map needs a positive density")
        atil = np.array([[(eps - 1.0) / n, kap / n],
                         [-kap / n, (mu - 1.0) / n]])
        denom = np.eye(2) + (n / 3.0) * atil
        if abs(np.linalg.det(denom)) < 1e-12:
            raise ValueError("resonant density: inverse map singular")
        return atil @ np.linalg.inv(denom)
    amat = np.asarray(alpha, dtype=float)
    if amat.shape != (2, 2):
        raise ValueError("alpha must be a 2x2 matrix")
    scale = max(np.abs(amat).max(), 1e-300)
    if abs(amat[1, 0] + amat[0, 1]) > 1e-9 * scale:
        raise ValueError("alpha must have the reciprocal structure "
                         "alpha[1,0] = -alpha[0,1]")
    if direction == "dilute":
        atil = amat
    elif direction in ("forward", "full"):
        denom = np.eye(2) - (n / 3.0) * amat
        if abs(np.linalg.det(denom)) < 1e-12 * max(1.0, (n * scale) ** 2):
            raise ValueError("resonant density: Clausius-Mossotti "
                             "denominator vanishes")
        atil = amat @ np.linalg.inv(denom)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return (1.0 + n * atil[0, 0], 1.0 + n * atil[1, 1], n * atil[0, 1])


class _HomogenizedComponent:
    """One Clausius-Mossotti medium parameter as a function of xi.

    A picklable callable; the per-frequency homogenization result is
    memoized in a shared dict so eps, mu, kappa at one xi cost a single
    polarizability evaluation.
    """

    def __init__(self, params, number_density, mode, index, cache):
        self.params = params
        self.number_density = number_density
        self.mode = mode
        self.index = index
        self.cache = cache

    def __call__(self, xi):
        if xi not in self.cache:
            alpha = isotropic_alpha(omega_polarizability(self.params, xi))
            self.cache[xi] = clausius_mossotti(self.number_density, alpha,
                                               direction=self.mode)
        return self.cache[xi][self.index]


def omega_ema_slab(params, number_density=12.0, mode="full"):
    """ChiralSlabModel homogenizing a lattice of omega particles.

    `number_density` counts particles per unit cell volume (the standard
    cell carries 12).  mode selects the full or dilute Clausius-Mossotti
    map.
    """
    if mode not in ("full", "dilute"):
        raise ValueError(f"unknown Clausius-Mossotti mode {mode!r}")
    cache = {}
    eps, mu, kap = (_HomogenizedComponent(params, number_density, mode, i,
                                          cache) for i in range(3))
    return ChiralSlabModel(eps=eps, mu=mu, kappa=kap)
