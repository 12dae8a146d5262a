"""casfig: figures from chiralcas CSV output.

The package reads the comment-headed CSV files written by the chiralcas
command-line tool and renders them as deterministic SVG or PNG figures,
driven by a small JSON figure specification.  Every plotted series is
also written to a JSON sidecar so the numbers behind a figure stay
machine-checkable; rendering never transforms data beyond the
normalizations documented in `casfig.series`.
"""

__version__ = "0.1.0"
