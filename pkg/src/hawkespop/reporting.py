"""CSV emission with locale-independent, round-trippable numbers."""

from __future__ import annotations

import sys
from typing import Iterable, Sequence


def fmt(x) -> str:
    """Format a value for CSV output.

    Floats round-trip exactly; magnitudes outside [1e-3, 1e6) switch to
    scientific notation, everything else stays plain decimal with a '.'
    separator.
    """
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    v = float(x)
    if v == 0.0:
        return "0"
    if v != v:  # NaN
        return "nan"
    mag = abs(v)
    if 1e-3 <= mag < 1e6:
        r = repr(v)
        if "e" not in r and "E" not in r:
            return r
    return f"{v:.16e}"


def write_rows(header: Sequence[str], rows: Iterable[Sequence], output: str | None):
    """Write a header row plus data rows as CSV to stdout or a file."""
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(fmt(v) for v in row) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
