"""Standalone figure rendering for the replearn CSV outputs.

Consumes the experiment and spectrum CSVs through their documented headers
only; no statistics are recomputed here, columns are displayed as written.
"""

from .schema import HARNESS_HEADER, SHELLS_HEADER, SPECTRUM_HEADER, SchemaError, load_csv

__all__ = [
    "HARNESS_HEADER",
    "SHELLS_HEADER",
    "SPECTRUM_HEADER",
    "SchemaError",
    "load_csv",
]
