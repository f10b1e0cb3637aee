"""Deterministic CSV emission.

Every float is written as scientific notation with 9 significant digits
so that a given configuration always produces byte-identical files.
"""

import os


def format_value(v) -> str:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return f"{float(v):.8e}"


def write_rows(path, header: str, rows) -> str:
    """Write header + rows; each row is an iterable of numbers."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path
