"""Reader for the comment-headed CSV files written by chiralcas.

The format is: zero or more leading comment lines starting with "# ",
one comma-separated column-name line, then data rows.  Cells are plain
text; numeric access is explicit so non-numeric columns (for example the
chirality tag) stay available as strings.
"""

import dataclasses

import numpy as np


class InputError(ValueError):
    """A CSV input cannot be used; reported on stderr with exit code 2."""


@dataclasses.dataclass(frozen=True)
class Table:
    """One parsed CSV file.

    Parameters
    ----------
    path : str
        Where the file was read from (used in error messages and series
        labels).
    header : tuple of str
        Leading comment lines with the "# " prefix stripped.
    columns : tuple of str
        Column names in file order.
    cells : tuple of tuple of str
        Data rows as raw text cells.
    """

    path: str
    header: tuple
    columns: tuple
    cells: tuple

    def require(self, *names):
        """Raise `InputError` naming the first missing column, if any."""
        for name in names:
            if name not in self.columns:
                raise InputError(
                    f"{self.path}: missing column '{name}' "
                    f"(has: {', '.join(self.columns)})")

    def text(self, name):
        """One column as a list of raw strings."""
        self.require(name)
        idx = self.columns.index(name)
        return [row[idx] for row in self.cells]

    def numbers(self, name):
        """One column as a float array."""
        values = self.text(name)
        try:
            return np.array([float(v) for v in values])
        except ValueError as exc:
            raise InputError(
                f"{self.path}: column '{name}' is not numeric: {exc}") \
                from None


def read_table(path):
    """Parse one chiralcas CSV file into a `Table`.

    Raises
    ------
    InputError
        If the file cannot be read, has no column line, or has rows
        whose cell count differs from the column count.
    """
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    header = []
    columns = None
    cells = []
    for line in text.splitlines():
        if line.startswith("#"):
            header.append(line[2:] if line.startswith("# ") else line[1:])
            continue
        if not line:
            continue
        parts = tuple(line.split(","))
        if columns is None:
            columns = parts
            continue
        if len(parts) != len(columns):
            raise InputError(f"{path}: row has {len(parts)} cells, "
                             f"expected {len(columns)}")
        cells.append(parts)
    if columns is None:
        raise InputError(f"{path}: no column line found")
    return Table(path=str(path), header=tuple(header), columns=columns,
                 cells=tuple(cells))
