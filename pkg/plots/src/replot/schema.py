"""CSV loading with strict header validation.

The headers below are the external interface to the experiment tool; they
are pinned here independently so a drift on either side fails loudly with
the offending column named.
"""

import csv
import math

HARNESS_HEADER = (
    "d", "k", "epsilon", "rho_target", "delta", "n", "radius", "trials",
    "rho_hat", "rho_lo", "rho_hi", "err_rate", "mean_err", "median_err",
    "ball_cap_hits", "master_seed",
)
SPECTRUM_HEADER = ("index", "eigenvalue")
SHELLS_HEADER = ("t", "count", "cumulative")


class SchemaError(Exception):
    """Input CSV does not match the expected schema."""


def _check_header(found, expected, path):
    for i, name in enumerate(expected):
        if i >= len(found):
            raise SchemaError(f"{path}: missing column '{name}' (position {i + 1})")
        if found[i] != name:
            raise SchemaError(
                f"{path}: column {i + 1} is '{found[i]}', expected '{name}'"
            )
    if len(found) > len(expected):
        raise SchemaError(
            f"{path}: unexpected extra column '{found[len(expected)]}'"
        )


def load_csv(path, expected_header):
    """Rows of ``path`` as dicts of floats, after validating the header.

    Raises SchemaError on an empty file, a header mismatch, a row of the
    wrong width, or a cell that does not parse as a number.  nan cells are
    legal (the experiment tool writes all-nan statistics rows when an
    acceptance ball exceeds its enumeration cap).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty CSV") from None
        _check_header(header, expected_header, path)
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(expected_header):
                raise SchemaError(
                    f"{path}: line {lineno} has {len(cells)} cells, "
                    f"expected {len(expected_header)}"
                )
            row = {}
            for name, cell in zip(expected_header, cells):
                try:
                    row[name] = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{path}: line {lineno}, column '{name}': "
                        f"'{cell}' is not a number"
                    ) from None
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def column(rows, name):
    return [row[name] for row in rows]


def finite(values):
    return [v for v in values if math.isfinite(v)]
