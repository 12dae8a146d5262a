"""2D-periodic lattices of point scatterers and their reflection matrices.

A unit cell (square period a = 1 in x, y and repeat distance 1 in z) holds
point particles described by T-matrices.  The lattice fills the half-space
below its reference plane: a particle with fractional position (x, y, t)
sits at height t - 1 in the first cell, so its depth below the plane is
1 - t, and further cells repeat downward.  Reflection matrices map incoming
downward planewaves to outgoing upward planewaves in the discrete set
q = k + G of transverse momenta (G in the retained reciprocal set), with
polarization index (s, p) interleaved fastest: row 2*i + P for G-index i.

Scattering is dilute: each particle scatters the incident planewave once,
contributions add linearly, and stacked layers combine as a geometric
series without inter-layer multiple scattering.
"""

import dataclasses
import math

import numpy as np

from . import scatterers as sc
from . import wavebasis as wb

_MIRROR_AXIS = {"xy": 2, "yz": 0, "zx": 1}


def reciprocal_vectors(g_max):
    """Reciprocal vectors 2 pi (n, m) with n^2 + m^2 <= g_max^2.

    Deterministically ordered by (|G|^2, n, m); the zero vector comes
    first, so the specular block occupies the leading indexes.
    """
    if g_max < 0:
        raise ValueError("g_max must be non-negative")
    pairs = [(n, m) for n in range(-g_max, g_max + 1)
             for m in range(-g_max, g_max + 1)
             if n * n + m * m <= g_max * g_max]
    pairs.sort(key=lambda nm: (nm[0] ** 2 + nm[1] ** 2, nm[0], nm[1]))
    return 2.0 * math.pi * np.array(pairs, dtype=float)


@dataclasses.dataclass(frozen=True)
class PlacedParticle:
    """One particle of a unit cell.

    source : OmegaParams, TMatrix, or callable(xi) -> TMatrix (for example
        a TMatrixTable); resolved at evaluation frequency.
    position : fractional (x, y, z), canonicalized into [0, 1).
    rotation : optional 3x3 proper rotation applied to the particle.
    """

    source: object
    position: tuple
    rotation: object = None

    def __post_init__(self):
        pos = tuple(float(v) % 1.0 for v in self.position)
        if len(pos) != 3:
            raise ValueError("position must have three components")
        object.__setattr__(self, "position", pos)
        if self.rotation is not None:
            rot = np.array(self.rotation, dtype=float)
            if rot.shape != (3, 3) or abs(np.linalg.det(rot) - 1.0) > 1e-9:
                raise ValueError("rotation must be a proper 3x3 rotation")
            rot.setflags(write=False)
            object.__setattr__(self, "rotation", rot)


@dataclasses.dataclass(frozen=True)
class UnitCell:
    """Particles of one period; may be empty (reflecting nothing)."""

    particles: tuple

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))


@dataclasses.dataclass(frozen=True, eq=False)
class PlanewaveReflectionMatrix:
    """Reflection of a half-space lattice in the planewave set k + G."""

    xi: float
    k: np.ndarray
    gvecs: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        for name in ("k", "gvecs", "matrix"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def decay_constants(self):
        qv = self.k[None, :] + self.gvecs
        return np.sqrt(self.xi ** 2 + np.einsum("ij,ij->i", qv, qv))


def standard_omega_cell(handedness=1, base=None):
    """The default isotropic-chirality cell: twelve omega particles.

    Three axis orientations (x, y, z) share each of four sites placed on
    two checkerboards at depths 1/4 and 3/4, a motif invariant (modulo
    lattice translations) under quarter turns about z.  Every particle
    carries the given handedness.
    """
    if base is None:
        base = sc.OmegaParams()
    sources = [dataclasses.replace(base, handedness=handedness, axis=ax)
               for ax in ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))]
    sites = [(0.0, 0.0, 0.25), (0.5, 0.5, 0.25),
             (0.0, 0.5, 0.75), (0.5, 0.0, 0.75)]
    particles = [PlacedParticle(source=src, position=site)
                 for src in sources for site in sites]
    return UnitCell(particles=particles)


class _MirroredSource:
    """Mirror image of a callable T-matrix source; a class rather than a
    closure so mirrored cells can cross process boundaries."""

    def __init__(self, inner, plane):
        self.inner = inner
        self.plane = plane

    def __call__(self, xi):
        return sc.mirror_tmatrix(self.inner(xi), self.plane)


def _mirror_source(source, plane):
    if isinstance(source, sc.OmegaParams):
        smat = np.eye(3)
        smat[_MIRROR_AXIS[plane], _MIRROR_AXIS[plane]] = -1.0
        return dataclasses.replace(
            source, axis=tuple(smat @ np.asarray(source.axis)),
            handedness=-source.handedness)
    if isinstance(source, sc.TMatrix):
        return sc.mirror_tmatrix(source, plane)
    if callable(source):
        return _MirroredSource(source, plane)
    raise TypeError(f"unsupported particle source {type(source).__name__}")


def mirror_unit_cell(cell, plane="xy"):
    """Mirror image of the cell through a coordinate plane.

    Positions reflect (and wrap) in the normal coordinate, particle
    rotations conjugate with the reflection, and every particle source is
    replaced by its mirror image (flipping handedness for chiral ones).
    """
    if plane not in _MIRROR_AXIS:
        raise ValueError(f"unknown mirror plane {plane!r}; use one of "
                         f"{sorted(_MIRROR_AXIS)}")
    axis = _MIRROR_AXIS[plane]
    smat = np.eye(3)
    smat[axis, axis] = -1.0
    out = []
    for part in cell.particles:
        pos = list(part.position)
        pos[axis] = (-pos[axis]) % 1.0
        rot = None if part.rotation is None else smat @ part.rotation @ smat
        out.append(PlacedParticle(source=_mirror_source(part.source, plane),
                                  position=tuple(pos), rotation=rot))
    return UnitCell(particles=out)


def rotate_unit_cell(cell, rot):
    """Cell rotated rigidly about the origin (positions and particles).

    Meaningful only for rotations compatible with the lattice (quarter
    turns about z, or any rotation when comparing against homogeneous
    partners); positions wrap back into the cell.
    """
    rot = np.asarray(rot, dtype=float)
    out = []
    for part in cell.particles:
        pos = tuple((rot @ np.asarray(part.position)) % 1.0)
        if part.rotation is None:
            newrot = rot
        else:
            newrot = rot @ part.rotation
        out.append(PlacedParticle(source=part.source, position=pos,
                                  rotation=newrot))
    return UnitCell(particles=out)


def effective_tmatrix(particle, xi, l_max):
    """Particle T-matrix at frequency xi on the basis of order l_max."""
    src = particle.source
    if isinstance(src, sc.TMatrix):
        if abs(src.xi - xi) > 1e-12 * max(abs(xi), 1.0):
            raise ValueError(f"fixed TMatrix at xi={src.xi} cannot be "
                             f"evaluated at xi={xi}")
        tm = src
    elif isinstance(src, sc.OmegaParams):
        tm = sc.omega_tmatrix(src, xi)
    elif callable(src):
        tm = src(xi)
    else:
        raise TypeError(f"unsupported particle source {type(src).__name__}")
    tm = sc.embed_tmatrix(tm, l_max)
    if particle.rotation is not None:
        tm = sc.rotate_tmatrix(tm, particle.rotation)
    return tm


def cell_tmatrices(cell, xi, l_max):
    """Effective T-matrices for every particle, shared between particles
    with identical source and rotation objects (frequency-independent
    work is reused by `cell_reflection`)."""
    cache = {}
    out = []
    for part in cell.particles:
        key = (id(part.source), id(part.rotation))
        if key not in cache:
            cache[key] = effective_tmatrix(part, xi, l_max)
        out.append(cache[key])
    return out


def cell_reflection(cell, xi, k, l_max=3, g_max=3, tmatrices=None):
    """Reflection matrix of a single lattice layer (one unit cell deep).

    Entries (dilute, single scattering per particle):

        R[(G,P), (G',P')] = (2 pi)^2 / (4 xi kappa_G)
            * sum_j exp(i (G'-G) . rho_j) exp(-(kappa_G + kappa_G') s_j)
            * [C(k+G) T_j W(k+G')]_{P P'}

    with s_j the particle depth below the reference plane and C, W the
    planewave/multipole conversion matrices.

    Parameters
    ----------
    cell : UnitCell
    xi : float (> 0)
    k : (2,) array_like, reduced transverse Bloch vector
    l_max, g_max : int, multipole and reciprocal-set truncations
    tmatrices : optional list from `cell_tmatrices(cell, xi, l_max)`,
        letting callers reuse frequency-only work across many k.
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    gv = reciprocal_vectors(g_max)
    k = np.asarray(k, dtype=float)
    qv = k[None, :] + gv
    kapg = np.sqrt(xi * xi + np.einsum("ij,ij->i", qv, qv))
    ng = len(gv)
    nmat = 2 * ng
    out = np.zeros((nmat, nmat), dtype=complex)
    if not cell.particles:
        return PlanewaveReflectionMatrix(xi=xi, k=k, gvecs=gv, matrix=out)
    if tmatrices is None:
        tmatrices = cell_tmatrices(cell, xi, l_max)
    basis = wb.multipole_basis(l_max)
    conv = wb.planewave_from_multipole(xi, qv, 1, basis)
    wmat = wb.multipole_from_planewave(xi, qv, -1, basis)
    pref = (2.0 * math.pi) ** 2 / (4.0 * xi * kapg)
    groups = {}
    for j, tm in enumerate(tmatrices):
        groups.setdefault(id(tm), []).append(j)
    for idxs in groups.values():
        tm = tmatrices[idxs[0]]
        if len(tm.basis) != len(basis):
            raise ValueError("tmatrices do not match the requested l_max")
        core = np.einsum("gpn,nm,hmq->gphq", conv, tm.matrix, wmat,
                         optimize=True)
        acc = np.zeros((ng, ng), dtype=complex)
        for j in idxs:
            rho = np.asarray(cell.particles[j].position[:2])
            depth = 1.0 - cell.particles[j].position[2]
            up = np.exp(-1j * (gv @ rho) - kapg * depth)
            down = np.exp(1j * (gv @ rho) - kapg * depth)
            acc += np.outer(up, down)
        acc *= pref[:, None]
        out += (core * acc[:, None, :, None]).reshape(nmat, nmat)
    return PlanewaveReflectionMatrix(xi=xi, k=k, gvecs=gv, matrix=out)


def stack_semi_infinite(r_cell):
    """Reflection of infinitely many layers stacked downward.

    In the dilute approximation layer n contributes the cell matrix damped
    by exp(-(kappa_G + kappa_G') n a), so the sum is the entrywise
    geometric series R_cell / (1 - exp(-(kappa_G + kappa_G') a)).
    """
    kapg = r_cell.decay_constants
    kap2 = np.repeat(kapg, 2)
    denom = 1.0 - np.exp(-(kap2[:, None] + kap2[None, :]))
    return PlanewaveReflectionMatrix(
        xi=r_cell.xi, k=r_cell.k, gvecs=r_cell.gvecs,
        matrix=r_cell.matrix / denom)


def displace_transverse(r, shift):
    """Reflection of the same medium displaced transversely by `shift`.

    Entries pick up exp(i (G' - G) . shift); specular blocks are
    unchanged, and a full-period shift is the identity.
    """
    shift = np.asarray(shift, dtype=float)
    phase = np.exp(1j * (r.gvecs @ shift))
    phase2 = np.repeat(phase, 2)
    return PlanewaveReflectionMatrix(
        xi=r.xi, k=r.k, gvecs=r.gvecs,
        matrix=r.matrix * np.outer(np.conj(phase2), phase2))


def polarization_flip(n_g):
    """Diagonal signs (+1 for s, -1 for p) implementing the z-mirror map
    on planewave amplitudes; conjugating a down-facing reflection of the
    mirrored cell with this gives the up-facing reflection."""
    return np.tile([1.0, -1.0], n_g)


def halfspace_reflection(cell, xi, k, l_max=3, g_max=3, facing="down"):
    """Reflection matrix of the semi-infinite lattice medium.

    facing = "down": medium below its reference plane, reflecting
    downward-incident waves (the geometry `cell_reflection` documents).
    facing = "up": medium stacked upward from its reference plane,
    reflecting upward-incident waves; computed from the z-mirrored cell
    conjugated with the polarization parity of the mirror map.
    """
    if facing == "down":
        return stack_semi_infinite(
            cell_reflection(cell, xi, k, l_max=l_max, g_max=g_max))
    if facing != "up":
        raise ValueError("facing must be 'down' or 'up'")
    r = stack_semi_infinite(
        cell_reflection(mirror_unit_cell(cell, "xy"), xi, k,
                        l_max=l_max, g_max=g_max))
    flip = polarization_flip(len(r.gvecs))
    return PlanewaveReflectionMatrix(
        xi=r.xi, k=r.k, gvecs=r.gvecs,
        matrix=flip[:, None] * r.matrix * flip[None, :])


def specular_reflection_source(cell, l_max=3, g_max=3):
    """callable(xi, kvec) -> specular 2x2 block of the half-space
    reflection, the protocol `ema.retrieve_ema` consumes."""
    def source(xi, kvec):
        r = halfspace_reflection(cell, xi, np.asarray(kvec, dtype=float),
                                 l_max=l_max, g_max=g_max)
        return np.array(r.matrix[:2, :2])
    return source
