"""Single-particle scattering on the imaginary frequency axis.

Provides an analytic bi-anisotropic point-particle model (electric, magnetic
and magnetoelectric dipole response with a single resonance), the construction
of its l = 1 T-matrix block in the package multipole convention, rotation and
mirror transforms of T-matrices, and JSON file I/O with entrywise
interpolation over frequency for externally supplied T-matrices.

Polarizabilities are rationalized volume quantities: a dilute medium of
number density n made of particles with scalar electric polarizability
alpha has eps = 1 + n alpha.  T-matrix normalization constants are never
hand-carried; they are obtained by solving small least-squares calibration
systems built from the planewave/multipole conversion matrices, so the
construction stays consistent with the basis convention by design.
"""

import dataclasses
import json
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import wavebasis as wb

#: identifier of the multipole phase/normalization convention used on disk
CONVENTION_ID = "chiralcas-vswf-r1"

#: largest multipole order accepted from T-matrix files
FILE_L_MAX = 4


# ----------------------------------------------------------------------------
# point-particle polarizability model
# ----------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class OmegaParams:
    """Single-resonance bi-anisotropic particle (volume-unit polarizabilities).

    Along `axis` the particle carries a resonant electric response of
    strength `a_e`, a magnetic response `-a_s - a_m xi^2/(omega0^2 + xi^2)`
    (diamagnetic at all frequencies, with a frequency-independent part
    `a_s`), and a magnetoelectric coupling of strength `a_c` linear in xi at
    low frequency.  Perpendicular to the axis only an electric response
    `t_perp * a_e` survives.  `handedness` flips the sign of the
    magnetoelectric coupling only.
    """

    a_e: float = 0.02
    a_m: float = 0.01
    a_c: float = 0.012
    a_s: float = 0.005
    omega0: float = 3.0
    t_perp: float = 0.3
    handedness: int = 1
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not (self.a_e > 0.0 and self.a_m > 0.0 and self.omega0 > 0.0):
            raise ValueError("a_e, a_m and omega0 must be positive")
        if self.a_s < 0.0:
            raise ValueError("a_s must be non-negative")
        if self.a_c ** 2 > self.a_e * self.a_m * (1.0 + 1e-12):
            raise ValueError("need a_c^2 <= a_e a_m")
        if self.handedness not in (1, -1):
            raise ValueError("handedness must be +1 or -1")
        if not 0.0 <= self.t_perp <= 1.0:
            raise ValueError("t_perp must lie in [0, 1]")
        ax = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(ax)
        if norm == 0.0:
            raise ValueError("axis must be a nonzero vector")
        object.__setattr__(self, "axis", tuple(ax / norm))

    def mirrored(self):
        """Parameters of the mirror-image particle (handedness flipped)."""
        return dataclasses.replace(self, handedness=-self.handedness)


def omega_polarizability(params, xi):
    """6x6 dipole polarizability [[a_ee, a_em], [a_me, a_mm]] at frequency xi.

    Input and output 3-vectors are ordered (E; H) and (p; m); all blocks are
    real on the imaginary axis and the magnetoelectric blocks satisfy
    a_me = -a_em (reciprocity).

    Parameters
    ----------
    params : OmegaParams
    xi : float
        Imaginary frequency, xi >= 0.

    Returns
    -------
    (6, 6) ndarray
    """
    if xi < 0.0:
        raise ValueError("xi must be non-negative")
    lam = params.omega0 ** 2 / (params.omega0 ** 2 + xi ** 2)
    a_ee_par = params.a_e * lam
    a_ee_perp = params.t_perp * params.a_e * lam
    a_mm_par = -params.a_s - params.a_m * xi ** 2 / (params.omega0 ** 2 + xi ** 2)
    a_em_par = params.handedness * params.a_c * xi * params.omega0 \
        / (params.omega0 ** 2 + xi ** 2)
    n = np.asarray(params.axis)
    proj = np.outer(n, n)
    out = np.zeros((6, 6))
    out[:3, :3] = a_ee_perp * np.eye(3) + (a_ee_par - a_ee_perp) * proj
    out[3:, 3:] = a_mm_par * proj
    out[:3, 3:] = a_em_par * proj
    out[3:, :3] = -a_em_par * proj
    return out


# ----------------------------------------------------------------------------
# T-matrix container and dipole-block construction
# ----------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class TMatrix:
    """Multipole scattering amplitudes of one particle at one frequency.

    `matrix[a, b]` maps incident regular coefficients (channel b) to
    scattered outgoing coefficients (channel a) in the package basis.
    `stored`, when present, is the exact real storage-basis representation
    the matrix was built from; keeping it makes save/load round trips
    byte-identical.
    """

    xi: float
    basis: object
    matrix: np.ndarray
    stored: np.ndarray = dataclasses.field(default=None, repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = len(self.basis)
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match "
                             f"basis size {n}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if self.stored is not None:
            st = np.array(self.stored, dtype=float)
            st.setflags(write=False)
            object.__setattr__(self, "stored", st)

    @property
    def l_max(self):
        return self.basis.l_max


def _calibration_samples(xi):
    """Deterministic (qvec, d) sample set for the calibration systems."""
    qunits = np.array([
        [0.0, 0.0], [0.3, 0.0], [0.0, 0.45], [0.8, 0.35], [-0.55, 0.75],
        [1.3, -0.6], [-1.1, -1.0], [2.1, 0.4],
    ])
    return xi * qunits


def _value_maps(xi, basis1):
    """Field values at the origin of the l = 1 regular channels.

    Returns (v_e, v_h): 3x3 complex matrices whose columns (ordered by m)
    give the electric-field value of the electric channels and the
    magnetic-field value of the magnetic channels.  Obtained by expanding
    planewaves at the origin: e_P = sum_a W[a, P] E_a(0), and H of the
    planewave is -e_p for P = s and +e_s for P = p (from H = -curl E / xi).
    """
    qv = _calibration_samples(xi)
    rows_e, rhs_e, rows_h, rhs_h = [], [], [], []
    is_m = basis1.pol == wb.POL_M
    for d in (1, -1):
        wmat = wb.multipole_from_planewave(xi, qv, d, basis1)
        e_s, e_p = wb.pol_vectors(xi, qv, d)
        for i in range(len(qv)):
            for pidx, (evec, hvec) in enumerate(((e_s[i], -e_p[i]),
                                                 (e_p[i], e_s[i]))):
                rows_e.append(wmat[i, ~is_m, pidx])
                rhs_e.append(evec)
                rows_h.append(wmat[i, is_m, pidx])
                rhs_h.append(hvec)
    v_e = _solve_calibration(np.array(rows_e), np.array(rhs_e)).T
    v_h = _solve_calibration(np.array(rows_h), np.array(rhs_h)).T
    return v_e, v_h


def _radiation_maps(xi, basis1):
    """Outgoing l = 1 coefficients of unit point dipoles at the origin.

    Returns (g_e, g_m): 6x3 complex matrices mapping an electric (magnetic)
    dipole vector to outgoing coefficients on the six l = 1 channels.  The
    dipole planewave amplitudes, in the measure d^2q/(4 xi kappa), are
    A_P = -(2 xi^3/pi) (e_P . p) for an electric dipole (from the Weyl
    expansion of (-xi^2 + grad grad)(e^{-xi r}/r) p), and the curl relation
    turns them into (+(2 xi^3/pi)(m . e_p), -(2 xi^3/pi)(m . e_s)) for a
    magnetic dipole.
    """
    qv = _calibration_samples(xi)
    dens = 2.0 * xi ** 3 / math.pi
    rows, rhs_e, rhs_m = [], [], []
    for d in (1, -1):
        conv = wb.planewave_from_multipole(xi, qv, d, basis1)
        e_s, e_p = wb.pol_vectors(xi, qv, d)
        for i in range(len(qv)):
            for pidx, (avec_e, avec_m) in enumerate(((-dens * e_s[i],
                                                      dens * e_p[i]),
                                                     (-dens * e_p[i],
                                                      -dens * e_s[i]))):
                rows.append(conv[i, pidx, :])
                rhs_e.append(avec_e)
                rhs_m.append(avec_m)
    rows = np.array(rows)
    g_e = _solve_calibration(rows, np.array(rhs_e))
    g_m = _solve_calibration(rows, np.array(rhs_m))
    return g_e, g_m


def _solve_calibration(design, rhs):
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    resid = np.linalg.norm(design @ sol - rhs)
    scale = max(np.linalg.norm(rhs), 1e-300)
    if resid > 1e-9 * scale:
        raise RuntimeError("calibration system did not close "
                           f"(relative residual {resid / scale:.2e})")
    return sol


def tmatrix_from_polarizability(alpha, xi, l_max=1):
    """Dipole T-matrix of a point particle with 6x6 polarizability `alpha`.

    Parameters
    ----------
    alpha : (6, 6) array_like
        Blocks [[a_ee, a_em], [a_me, a_mm]] in rationalized volume units.
    xi : float
        Imaginary frequency, xi > 0.
    l_max : int
        Basis order of the returned TMatrix; blocks with l >= 2 are zero.

    Returns
    -------
    TMatrix
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (6, 6):
        raise ValueError("alpha must be 6x6")
    basis = wb.multipole_basis(l_max)
    basis1 = wb.multipole_basis(1)
    v_e, v_h = _value_maps(xi, basis1)
    g_e, g_m = _radiation_maps(xi, basis1)
    is_m = basis1.pol == wb.POL_M
    value6 = np.zeros((6, 6), dtype=complex)
    value6[np.ix_([0, 1, 2], ~is_m)] = v_e
    value6[np.ix_([3, 4, 5], is_m)] = v_h
    rad6 = np.concatenate([g_e, g_m], axis=1)
    block = rad6 @ (alpha / (4.0 * math.pi)) @ value6
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    out[:6, :6] = block
    return TMatrix(xi=xi, basis=basis, matrix=out)


def omega_tmatrix(params, xi, l_max=1):
    """T-matrix of an OmegaParams particle (model + dipole construction)."""
    return tmatrix_from_polarizability(omega_polarizability(params, xi),
                                       xi, l_max=l_max)


def embed_tmatrix(tmat, l_max):
    """Re-express a TMatrix on the (larger or equal) basis of order l_max."""
    if l_max < tmat.l_max:
        raise ValueError("cannot shrink a TMatrix")
    if l_max == tmat.l_max:
        return tmat
    basis = wb.multipole_basis(l_max)
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    n = len(tmat.basis)
    # channels of the smaller basis occupy the leading indexes of the larger
    out[:n, :n] = tmat.matrix
    return TMatrix(xi=tmat.xi, basis=basis, matrix=out)


# ----------------------------------------------------------------------------
# rotations and mirrors
# ----------------------------------------------------------------------------

_PLANE_NORMALS = {"xy": (0.0, 0.0, 1.0),
                  "yz": (1.0, 0.0, 0.0),
                  "zx": (0.0, 1.0, 0.0)}


def rotate_tmatrix(tmat, rot):
    """T-matrix of the particle rotated actively by the 3x3 matrix `rot`."""
    d = wb.rotation_matrix(tmat.basis, rot)
    return TMatrix(xi=tmat.xi, basis=tmat.basis,
                   matrix=d @ tmat.matrix @ d.conj().T)


def mirror_tmatrix(tmat, plane):
    """T-matrix of the mirror-image particle.

    `plane` is "xy", "yz", "zx", or an arbitrary mirror-plane normal
    vector.  Mirroring flips the handedness of a chiral particle.
    """
    if isinstance(plane, str):
        try:
            normal = _PLANE_NORMALS[plane]
        except KeyError:
            raise ValueError(f"unknown mirror plane {plane!r}; use one of "
                             f"{sorted(_PLANE_NORMALS)} or a normal vector")
    else:
        normal = plane
    mop = wb.mirror_matrix(tmat.basis, normal)
    # mirror operators are involutive, so conjugation uses the operator twice
    return TMatrix(xi=tmat.xi, basis=tmat.basis,
                   matrix=mop @ tmat.matrix @ mop)


# ----------------------------------------------------------------------------
# reality structure and file I/O
# ----------------------------------------------------------------------------

def storage_basis(basis):
    """Unitary S such that S^H T S is real for physically real T-matrices.

    Physical scatterers map real fields to real fields, which in this basis
    reads conj(T[a, b]) = (-1)^(m_a + m_b) T[abar, bbar] with abar the
    channel with m -> -m.  Columns of S combine (m, -m) channel pairs into
    invariant combinations of that antilinear symmetry.
    """
    n = len(basis)
    s = np.zeros((n, n), dtype=complex)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for a in range(n):
        l, m, pol = basis.l[a], basis.m[a], basis.pol[a]
        if m == 0:
            s[a, a] = 1.0
            continue
        plus = basis.index(l, abs(m), pol)
        minus = basis.index(l, -abs(m), pol)
        sgn = (-1.0) ** abs(m)
        if m < 0:
            s[plus, a] = sgn * inv_sqrt2
            s[minus, a] = inv_sqrt2
        else:
            s[plus, a] = -1j * sgn * inv_sqrt2
            s[minus, a] = 1j * inv_sqrt2
    return s


def to_storage(tmat):
    """Real matrix S^H T S; raises if the imaginary residue is significant."""
    if tmat.stored is not None:
        return tmat.stored
    s = storage_basis(tmat.basis)
    stored = s.conj().T @ tmat.matrix @ s
    scale = max(np.abs(stored).max(), 1e-300)
    worst = np.abs(stored.imag).max()
    if worst > 1e-9 * scale:
        raise ValueError("T-matrix violates the reality convention "
                         f"(imaginary residue {worst / scale:.2e} relative)")
    return stored.real


def from_storage(stored, xi, l_max):
    """Inverse of `to_storage` (the exact real representation is retained)."""
    basis = wb.multipole_basis(l_max)
    s = storage_basis(basis)
    return TMatrix(xi=xi, basis=basis, matrix=s @ stored @ s.conj().T,
                   stored=stored)


def save_tmatrix(tmat, path):
    """Write a TMatrix as JSON (real entries in the storage basis)."""
    stored = to_storage(tmat)
    doc = {
        "format": CONVENTION_ID,
        "xi": float(tmat.xi),
        "l_max": int(tmat.l_max),
        "entries": [float(v) for v in stored.ravel()],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_tmatrix(path):
    """Read a TMatrix written by `save_tmatrix` (validating the schema).

    Entries may be flat reals or [re, im] pairs; imaginary parts above 1e-9
    of the matrix scale are rejected, as are unknown format identifiers and
    l_max outside 1..FILE_L_MAX.
    """
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("format", "xi", "l_max", "entries"):
        if key not in doc:
            raise ValueError(f"T-matrix file {path}: missing field '{key}'")
    if doc["format"] != CONVENTION_ID:
        raise ValueError(f"T-matrix file {path}: convention '{doc['format']}' "
                         f"does not match '{CONVENTION_ID}'")
    l_max = doc["l_max"]
    if not isinstance(l_max, int) or not 1 <= l_max <= FILE_L_MAX:
        raise ValueError(f"T-matrix file {path}: l_max must be an integer "
                         f"in 1..{FILE_L_MAX}")
    xi = float(doc["xi"])
    if xi <= 0.0:
        raise ValueError(f"T-matrix file {path}: xi must be positive")
    n = 2 * l_max * (l_max + 2)
    raw = doc["entries"]
    if len(raw) != n * n:
        raise ValueError(f"T-matrix file {path}: expected {n * n} entries "
                         f"for l_max={l_max}, found {len(raw)}")
    vals = np.empty(n * n)
    scale = max((abs(v[0]) if isinstance(v, list) else abs(v) for v in raw),
                default=0.0)
    for i, v in enumerate(raw):
        if isinstance(v, list):
            if len(v) != 2:
                raise ValueError(f"T-matrix file {path}: entry {i} is not "
                                 "a [re, im] pair")
            if abs(v[1]) > 1e-9 * max(scale, 1e-300):
                raise ValueError(f"T-matrix file {path}: entry {i} has "
                                 f"imaginary part {v[1]!r}")
            vals[i] = v[0]
        else:
            vals[i] = v
    return from_storage(vals.reshape(n, n), xi, l_max)


@dataclasses.dataclass(frozen=True, eq=False)
class TMatrixTable:
    """Entrywise-interpolated T-matrix over a grid of imaginary frequencies.

    Interpolation runs in the real storage basis with a shape-preserving
    cubic (PCHIP).  Below the tabulated range the matrix is anchored to the
    dipole law T ~ xi^3; above it the last tabulated matrix is held (force
    integrands suppress that region exponentially).
    """

    xi_grid: np.ndarray
    l_max: int
    _stack: np.ndarray
    _interp: object

    @classmethod
    def from_tmatrices(cls, tmats):
        if not tmats:
            raise ValueError("need at least one TMatrix")
        tmats = sorted(tmats, key=lambda t: t.xi)
        l_max = tmats[0].l_max
        if any(t.l_max != l_max for t in tmats):
            raise ValueError("all tabulated T-matrices must share l_max")
        xi_grid = np.array([t.xi for t in tmats])
        if np.any(np.diff(xi_grid) <= 0.0):
            raise ValueError("tabulated frequencies must be distinct")
        stack = np.stack([to_storage(t) for t in tmats])
        if len(tmats) == 1:
            interp = None
        else:
            interp = PchipInterpolator(xi_grid, stack, axis=0,
                                       extrapolate=False)
        xi_grid.setflags(write=False)
        stack.setflags(write=False)
        return cls(xi_grid=xi_grid, l_max=l_max, _stack=stack,
                   _interp=interp)

    @classmethod
    def from_files(cls, paths):
        return cls.from_tmatrices([load_tmatrix(p) for p in paths])

    def __call__(self, xi):
        """TMatrix at frequency xi (interpolated / anchored as documented)."""
        if xi <= 0.0:
            raise ValueError("xi must be positive")
        lo, hi = self.xi_grid[0], self.xi_grid[-1]
        if xi < lo:
            stored = (xi / lo) ** 3 * self._stack[0]
        elif xi > hi:
            stored = self._stack[-1]
        elif self._interp is None:
            stored = self._stack[0]
        else:
            stored = self._interp(xi)
        return from_storage(stored, xi, self.l_max)
