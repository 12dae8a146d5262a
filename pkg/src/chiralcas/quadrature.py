"""Gauss-Legendre quadrature maps used throughout the package.

Three integral types recur: imaginary-frequency integrals over (0, inf),
Brillouin-zone integrals over [-pi, pi]^2 (lattice period a = 1), and radial
in-plane wavevector integrals over (0, inf).  Each helper returns plain
(nodes, weights) arrays so callers can share nodes between runs that must be
differenced without independent-grid noise.
"""

import numpy as np
from scipy.optimize import brentq


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights mapped to the interval [a, b].

    Parameters
    ----------
    n : int
        Number of nodes.
    a, b : float
        Interval endpoints.

    Returns
    -------
    x, w : ndarray, shape (n,)
    """
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def half_line(n, scale=1.0):
    """Nodes and weights for integrals over (0, inf).

    Uses the rational map x = scale * u / (1 - u) of the unit interval, which
    handles integrands decaying like exp(-x / scale) well.  The Jacobian is
    folded into the weights.

    Returns
    -------
    x, w : ndarray, shape (n,)
    """
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    u, wu = gauss_legendre(n, 0.0, 1.0)
    x = scale * u / (1.0 - u)
    w = wu * scale / (1.0 - u) ** 2
    return x, w


def bz_grid(n, scale=None):
    """Tensor Gauss-Legendre rule for the square Brillouin zone [-pi, pi]^2.

    Even n is recommended so no node lands exactly on a zone axis.

    With a `scale`, each axis is mapped through k = pi sinh(a t)/sinh(a)
    (Jacobian folded into the weights), drawing nodes toward the zone
    center so that integrands peaked there with width ~1/scale are
    resolved; a solves dk/dt(0) = min(pi, 2/scale), and scales below
    2/pi leave the plain affine rule unchanged.  Gap integrands decay
    like exp(-2 |k| z) away from the center, so scale = z is the natural
    choice.

    Returns
    -------
    k : ndarray, shape (n*n, 2)
        Bloch wavevectors.
    w : ndarray, shape (n*n,)
        Weights summing to (2 pi)^2 (exactly for the plain rule, to
        quadrature accuracy under the sinh map).
    """
    if scale is None or scale <= 2.0 / np.pi:
        x, wx = gauss_legendre(n, -np.pi, np.pi)
    else:
        t, wt = gauss_legendre(n, -1.0, 1.0)
        a = _sinh_concentration(2.0 / (np.pi * scale))
        x = np.pi * np.sinh(a * t) / np.sinh(a)
        wx = wt * np.pi * a * np.cosh(a * t) / np.sinh(a)
    kx, ky = np.meshgrid(x, x, indexing="ij")
    k = np.column_stack([kx.ravel(), ky.ravel()])
    return k, np.outer(wx, wx).ravel()


def _sinh_concentration(ratio):
    """The a > 0 with a / sinh(a) = ratio, for ratio in (0, 1)."""
    return brentq(lambda a: a / np.sinh(a) - ratio, 1e-9, 60.0, xtol=1e-13)


def richardson_zero(fn, h):
    """Estimate lim_{x -> 0+} fn(x) from samples at h, 2h and 4h.

    Assumes a power-series tail whose leading corrections are O(x^2) and
    O(x^3): two Richardson levels cancel both, leaving an O(h^4) error.
    """
    g1, g2, g4 = fn(h), fn(2.0 * h), fn(4.0 * h)
    r1 = (4.0 * g1 - g2) / 3.0
    r2 = (4.0 * g2 - g4) / 3.0
    return (8.0 * r1 - r2) / 7.0
