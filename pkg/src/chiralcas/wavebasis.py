"""Decaying plane waves, vector multipoles, and the maps between them.

Everything in this package lives on the imaginary frequency axis w = i*xi
(xi > 0), in units hbar = c = 1 with lattice period a = 1.  Two field bases
are used:

* transverse plane waves ``phi_{q,d}(r) = exp(i q . rho - d kappa z)`` with
  in-plane wavevector q, decay constant ``kappa = sqrt(xi^2 + |q|^2)`` and
  side index d = +1 (decaying upward) / d = -1 (decaying downward), carrying
  s or p polarization;

* vector multipole channels (l, m, P) with P in {M, E}, either regular at
  the origin or outgoing.

The polarization vectors are bilinear-normalized (e . e = 1 with no complex
conjugation), which is the natural pairing at imaginary frequency:

    e_s(q)    = (-sin f, cos f, 0),            f = azimuth of q,
    e_p(q, d) = (d kappa qhat + i |q| zhat) / xi.

With C = curl / xi one has C(e_s phi) = e_p phi and C(e_p phi) = -e_s phi,
and the magnetic field of E is H = -C E.

The multipole channels are the analytic continuation of the standard
Condon-Shortley-phased vector multipoles:

    M_lm = n_l curl(r R_l(xi r) Y_lm(rhat)),    n_l = 1/sqrt(l(l+1)),
    N_lm = curl(M_lm) / xi,

with R_l = k_l (outgoing) or i_l (regular).  Because the basis is the plain
continuation, rotation operators are ordinary Wigner D-matrices, and the
conversion matrices obey conj(C(q)) = -C(q) P and conj(W(q)) = -P W(q)
where P is the m -> -m channel swap.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import special

POL_M = 0
POL_E = 1


# ----------------------------------------------------------------------------
# scalars
# ----------------------------------------------------------------------------

def decay_constant(xi, q):
    """Decay constant kappa = sqrt(xi^2 + q^2) of a transverse plane wave.

    Parameters
    ----------
    xi : float
        Imaginary frequency, xi > 0.
    q : float or ndarray
        In-plane wavevector magnitude(s).
    """
    q = np.asarray(q, dtype=float)
    return np.sqrt(xi * xi + q * q)


def spherical_ik(l_max, x):
    """Modified spherical Bessel functions i_l(x) and k_l(x), l = 0 .. l_max.

    Conventions: i_0(x) = sinh(x)/x and k_0(x) = (pi/2) exp(-x)/x, so that
    i_l and k_l are the radial factors of regular and outgoing solutions of
    (lap - 1) psi = 0.

    Returns
    -------
    i, k : ndarray, shape (l_max + 1,) + shape(x)
    """
    x = np.asarray(x, dtype=float)
    orders = np.arange(l_max + 1).reshape((l_max + 1,) + (1,) * x.ndim) + 0.5
    pref = np.sqrt(np.pi / (2.0 * x))
    return pref * special.iv(orders, x), pref * special.kv(orders, x)


@lru_cache(maxsize=None)
def _legendre_deriv_series(l, order):
    coeffs = np.zeros(l + 1)
    coeffs[l] = 1.0
    if order:
        coeffs = npleg.legder(coeffs, order)
    coeffs.setflags(write=False)
    return coeffs


def legendre_deriv(l, order, x):
    """order-th derivative of the Legendre polynomial P_l, evaluated at x."""
    x = np.asarray(x, dtype=float)
    if order > l:
        return np.zeros_like(x)
    return npleg.legval(x, _legendre_deriv_series(l, order))


@lru_cache(maxsize=None)
def _gamma_lm(l, m):
    # sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!), the real harmonic normalization
    return math.sqrt((2 * l + 1) / (4.0 * math.pi)
                     * math.factorial(l - m) / math.factorial(l + m))


# ----------------------------------------------------------------------------
# multipole index bookkeeping
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MultipoleBasis:
    """Channel ordering for multipole coefficient vectors.

    Channels run l = 1 .. l_max, m = -l .. l, polarization (M, E), in that
    nesting order, so a coefficient vector has length 2 l_max (l_max + 2).
    """

    l_max: int
    l: np.ndarray
    m: np.ndarray
    pol: np.ndarray

    def __len__(self):
        return self.l.size

    def index(self, l, m, pol):
        """Position of channel (l, m, pol) in the coefficient vector."""
        hits = np.flatnonzero((self.l == l) & (self.m == m) & (self.pol == pol))
        if hits.size != 1:
            raise KeyError(f"no channel (l={l}, m={m}, pol={pol})")
        return int(hits[0])


@lru_cache(maxsize=None)
def multipole_basis(l_max):
    """Construct the shared MultipoleBasis for a given l_max >= 1."""
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    ls, ms, pols = [], [], []
    for l in range(1, l_max + 1):
        for m in range(-l, l + 1):
            for pol in (POL_M, POL_E):
                ls.append(l)
                ms.append(m)
                pols.append(pol)
    arrays = tuple(np.array(v, dtype=int) for v in (ls, ms, pols))
    for arr in arrays:
        arr.setflags(write=False)
    return MultipoleBasis(l_max, *arrays)


# ----------------------------------------------------------------------------
# polarization vectors
# ----------------------------------------------------------------------------

def pol_vectors(xi, qvecs, d):
    """s and p polarization vectors for a batch of in-plane wavevectors.

    Parameters
    ----------
    xi : float
    qvecs : ndarray, shape (nq, 2)
    d : int, +1 or -1
        Side index of the plane wave phi_{q,d}.

    Returns
    -------
    e_s, e_p : ndarray, shape (nq, 3)
        Bilinear-normalized (e . e = 1, no conjugation).  At q = 0 the
        azimuth is taken as 0, so e_s = yhat and e_p = d xhat.
    """
    qvecs = np.atleast_2d(np.asarray(qvecs, dtype=float))
    qmag = np.hypot(qvecs[:, 0], qvecs[:, 1])
    phi = np.arctan2(qvecs[:, 1], qvecs[:, 0])
    c, s = np.cos(phi), np.sin(phi)
    kappa = decay_constant(xi, qmag)
    e_s = np.zeros(qvecs.shape[:1] + (3,), dtype=complex)
    e_s[:, 0] = -s
    e_s[:, 1] = c
    e_p = np.zeros_like(e_s)
    e_p[:, 0] = d * kappa * c / xi
    e_p[:, 1] = d * kappa * s / xi
    e_p[:, 2] = 1j * qmag / xi
    return e_s, e_p


# ----------------------------------------------------------------------------
# conversion matrices
# ----------------------------------------------------------------------------

def _angular_tables(xi, qmag, u, basis):
    """Real angular factors tau[a] and pi[a] entering both conversions.

    For each channel a = (l, m, P) the factors depend on l, m and the
    "direction cosine" u = d kappa / xi only:

        tau_{lm} = -gamma_{l|m|} [ (q/xi)^{|m|+1} P_l^{(|m|+1)}(u)
                                   + |m| u (q/xi)^{|m|-1} P_l^{(|m|)}(u) ]
        pi_{lm}  =  m gamma_{l|m|} (q/xi)^{|m|-1} P_l^{(|m|)}(u)

    with P_l^{(k)} the plain k-th derivative of the Legendre polynomial.
    Both are even under m -> -m except pi, which is odd.
    """
    nq = qmag.shape[0]
    n = len(basis)
    tau = np.zeros((nq, n))
    pi_ = np.zeros((nq, n))
    ratio = qmag / xi
    for l in range(1, basis.l_max + 1):
        for mabs in range(0, l + 1):
            gam = _gamma_lm(l, mabs)
            p_m1 = legendre_deriv(l, mabs + 1, u)
            tau_val = -gam * ratio ** (mabs + 1) * p_m1
            if mabs:
                p_m = legendre_deriv(l, mabs, u)
                tau_val = tau_val - gam * mabs * u * ratio ** (mabs - 1) * p_m
                pi_val = gam * mabs * ratio ** (mabs - 1) * p_m
            else:
                pi_val = np.zeros(nq)
            cols = np.flatnonzero((basis.l == l) & (np.abs(basis.m) == mabs))
            tau[:, cols] = tau_val[:, None]
            pi_[:, cols] = np.sign(basis.m[cols])[None, :] * pi_val[:, None]
    return tau, pi_


def _conversion_ingredients(xi, qvecs, d, basis):
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    qvecs = np.atleast_2d(np.asarray(qvecs, dtype=float))
    qmag = np.hypot(qvecs[:, 0], qvecs[:, 1])
    kappa = decay_constant(xi, qmag)
    u = d * kappa / xi
    tau, pi_ = _angular_tables(xi, qmag, u, basis)
    phi = np.arctan2(qvecs[:, 1], qvecs[:, 0])
    # channel phase i^(m+1) exp(+-i m phi), from continuing the CS harmonics
    # to the complex propagation direction of phi_{q,d}
    head = 1j ** (basis.m + 1)
    azim = np.exp(1j * np.outer(phi, basis.m))
    n_l = 1.0 / np.sqrt(basis.l * (basis.l + 1.0))
    is_m = basis.pol == POL_M
    return qvecs, tau, pi_, head[None, :] * azim, head[None, :] * np.conj(azim), is_m, n_l


def planewave_from_multipole(xi, qvecs, d, basis):
    """Plane-wave amplitudes radiated by unit outgoing multipoles.

    On the side sign(z) = d, the outgoing multipole field of channel a has
    the decaying plane-wave representation

        E_a(r) = int d^2q / (4 xi kappa) sum_P C[q, P, a] e_P(q, d) phi_{q,d}(r)

    and this function returns the matrix C.  The 1/(4 xi kappa) measure is
    *not* included; assembly code applies it together with its d^2q -> sum_G
    discretization.

    Returns
    -------
    C : ndarray, complex, shape (nq, 2, n)
        Axis 1 is polarization (s, p); axis 2 the multipole channel.
    """
    _, tau, pi_, phase_c, _, is_m, n_l = _conversion_ingredients(xi, qvecs, d, basis)
    out = np.empty((tau.shape[0], 2, len(basis)), dtype=complex)
    out[:, 0, :] = np.where(is_m[None, :], tau + 0j, -1j * pi_)
    out[:, 1, :] = np.where(is_m[None, :], 1j * pi_, tau + 0j)
    out *= (n_l[None, None, :] * phase_c[:, None, :])
    return out


def multipole_from_planewave(xi, qvecs, d, basis):
    """Regular-multipole content of unit s- and p-polarized plane waves.

    The plane wave e_P(q, d) phi_{q,d}(r) expands around the origin in the
    regular multipole basis with coefficients W[q, :, P]:

        e_P(q, d) phi_{q,d}(r) = sum_a W[q, a, P] E_a^reg(r).

    Returns
    -------
    W : ndarray, complex, shape (nq, n, 2)
        Axis 2 is polarization (s, p).
    """
    _, tau, pi_, _, phase_w, is_m, n_l = _conversion_ingredients(xi, qvecs, d, basis)
    pref = 4.0 * np.pi * (-1.0) ** basis.l * n_l
    out = np.empty((tau.shape[0], len(basis), 2), dtype=complex)
    out[:, :, 0] = np.where(is_m[None, :], tau + 0j, 1j * pi_)
    out[:, :, 1] = np.where(is_m[None, :], -1j * pi_, tau + 0j)
    out *= (pref[None, :, None] * phase_w[:, :, None])
    return out


# ----------------------------------------------------------------------------
# rotations and mirrors
# ----------------------------------------------------------------------------

def axis_angle_matrix(axis, angle):
    """Rotation matrix about `axis` by `angle` (Rodrigues formula)."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("axis must be a nonzero vector")
    n = n / norm
    cross = np.array([[0.0, -n[2], n[1]],
                      [n[2], 0.0, -n[0]],
                      [-n[1], n[0], 0.0]])
    return np.eye(3) + math.sin(angle) * cross + (1.0 - math.cos(angle)) * cross @ cross


def euler_zyz(rot):
    """Extract z-y-z Euler angles (alpha, beta, gamma) of a rotation matrix.

    Satisfies rot = Rz(alpha) Ry(beta) Rz(gamma); the beta ~ 0 or pi
    degenerate cases return gamma = 0.
    """
    rot = np.asarray(rot, dtype=float)
    # beta from sin/cos keeps full accuracy near beta = 0 and pi, where
    # acos(rot[2, 2]) would amplify rounding errors.
    sb = math.hypot(rot[0, 2], rot[1, 2])
    beta = math.atan2(sb, rot[2, 2])
    if sb > 1e-9:
        alpha = math.atan2(rot[1, 2], rot[0, 2])
        gamma = math.atan2(rot[2, 1], -rot[2, 0])
    elif rot[2, 2] > 0.0:
        alpha = math.atan2(rot[1, 0], rot[0, 0])
        gamma = 0.0
    else:
        alpha = math.atan2(-rot[1, 0], -rot[0, 0])
        gamma = 0.0
    return alpha, beta, gamma


def wigner_d(l, beta):
    """Real Wigner d-matrix d^l_{m'm}(beta); rows and columns run m = -l .. l."""
    ms = np.arange(-l, l + 1)
    cb = math.cos(0.5 * beta)
    sb = math.sin(0.5 * beta)
    f = math.factorial
    out = np.zeros((2 * l + 1, 2 * l + 1))
    for i, mp in enumerate(ms):
        for j, m in enumerate(ms):
            pref = math.sqrt(f(l + mp) * f(l - mp) * f(l + m) * f(l - m))
            acc = 0.0
            for k in range(max(0, m - mp), min(l + m, l - mp) + 1):
                acc += ((-1.0) ** (mp - m + k)
                        * cb ** (2 * l + m - mp - 2 * k)
                        * sb ** (mp - m + 2 * k)
                        / (f(l + m - k) * f(k) * f(l - mp - k) * f(mp - m + k)))
            out[i, j] = pref * acc
    return out


def wigner_D(l, alpha, beta, gamma):
    """Complex Wigner D-matrix, D^l_{m'm} = e^{-i m' alpha} d^l_{m'm} e^{-i m gamma}."""
    ms = np.arange(-l, l + 1)
    d = wigner_d(l, beta)
    return np.exp(-1j * ms[:, None] * alpha) * d * np.exp(-1j * ms[None, :] * gamma)


def rotation_matrix(basis, rot):
    """Proper-rotation operator on multipole coefficient vectors.

    If a field with coefficients f is rotated actively by the 3x3 matrix
    `rot` (det +1), the rotated field has coefficients D f with D the matrix
    returned here.  Block-diagonal in l and polarization; the blocks are
    plain Wigner D-matrices because the basis carries CS phases.
    """
    rot = np.asarray(rot, dtype=float)
    if abs(np.linalg.det(rot) - 1.0) > 1e-9:
        raise ValueError("rotation_matrix needs a proper rotation; "
                         "use mirror_matrix for improper ones")
    alpha, beta, gamma = euler_zyz(rot)
    n = len(basis)
    out = np.zeros((n, n), dtype=complex)
    for l in range(1, basis.l_max + 1):
        block = wigner_D(l, alpha, beta, gamma)
        for pol in (POL_M, POL_E):
            cols = np.flatnonzero((basis.l == l) & (basis.pol == pol))
            # cols are ordered by m because of the basis nesting order
            out[np.ix_(cols, cols)] = block
    return out


def inversion_matrix(basis):
    """Spatial-inversion operator: diagonal, (-1)^(l+1) on M, (-1)^l on E."""
    sign = np.where(basis.pol == POL_M, (-1.0) ** (basis.l + 1), (-1.0) ** basis.l)
    return np.diag(sign)


def mirror_matrix(basis, normal):
    """Reflection through the plane with unit normal `normal`.

    Implemented as inversion composed with a rotation by pi about the
    normal.  For normal = zhat this reduces to the diagonal
    (-1)^(l+m+1) on M channels and (-1)^(l+m) on E channels.
    """
    return inversion_matrix(basis) @ rotation_matrix(
        basis, axis_angle_matrix(normal, math.pi))
