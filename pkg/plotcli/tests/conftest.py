"""Shared fixtures: synthetic CSVs in the chiralcas output format."""

import json

import pytest

HEADER = ["# chiralcas 0.1.0", "# command: sweep",
          "# config sha256: " + "0" * 64]


def write_csv(path, columns, rows, header=None):
    lines = list(HEADER if header is None else header)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(str(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_spec(path, **doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def sweep_csv(tmp_path):
    """Two z, three x, two chirality groups; per-z minimum is the first
    SC row at each z."""
    rows = [(1.0, 0.0, "SC", 10.0, -5.0, 0.01),
            (1.0, 0.25, "SC", 11.0, -5.5, 0.01),
            (1.0, 0.5, "SC", 12.0, -6.0, 0.01),
            (2.0, 0.0, "SC", 2.0, -1.0, 0.01),
            (2.0, 0.25, "SC", 2.2, -1.1, 0.01),
            (2.0, 0.5, "SC", 2.4, -1.2, 0.01),
            (1.0, 0.0, "OC", 10.5, -5.2, 0.01),
            (1.0, 0.25, "OC", 11.5, -5.7, 0.01),
            (1.0, 0.5, "OC", 13.0, -6.5, 0.01),
            (2.0, 0.0, "OC", 2.1, -1.0, 0.01),
            (2.0, 0.25, "OC", 2.3, -1.1, 0.01),
            (2.0, 0.5, "OC", 2.5, -1.2, 0.01)]
    return write_csv(tmp_path / "sweep.csv",
                     ["z", "x", "chirality", "F", "E", "err"], rows)


@pytest.fixture
def signflip_csv(tmp_path):
    """Single x per group; the OC-SC difference changes sign once,
    between z = 1 and z = 2."""
    rows = [(1.0, 0.0, "SC", 10.0, -5.0, 0.01),
            (2.0, 0.0, "SC", 5.0, -2.5, 0.01),
            (3.0, 0.0, "SC", 2.0, -1.0, 0.01),
            (1.0, 0.0, "OC", 10.5, -5.2, 0.01),
            (2.0, 0.0, "OC", 4.8, -2.4, 0.01),
            (3.0, 0.0, "OC", 1.9, -0.9, 0.01)]
    return write_csv(tmp_path / "flip.csv",
                     ["z", "x", "chirality", "F", "E", "err"], rows)
