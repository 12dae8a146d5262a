"""Casimir forces between periodic chiral metamaterial lattices.

Scattering-formalism engines for the interaction energy between two
semi-infinite dilute lattices of magneto-electric (omega-type) particles,
together with a chiral-slab effective-medium route, parameter retrieval,
and a pairwise-additive estimator.  All calculations run on the imaginary
frequency axis in units hbar = c = 1 with the lattice period a = 1.
"""

__version__ = "0.1.0"
