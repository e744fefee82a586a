"""Morse theory for ordered eigenvalues of smooth self-adjoint matrix families."""

from .classify import Classification, ClassifyOptions, classify_point, definite_in_span
from .families import MatrixFamily, builtin, resolve_family
from .pipeline import MorseReport, ScanOptions, scan, scan_all
from .polyalg import Field, IntPoly, emit_table, morse_division, nonsmooth_contribution

__all__ = [
    "Classification",
    "ClassifyOptions",
    "Field",
    "IntPoly",
    "MatrixFamily",
    "MorseReport",
    "ScanOptions",
    "builtin",
    "classify_point",
    "definite_in_span",
    "emit_table",
    "morse_division",
    "nonsmooth_contribution",
    "resolve_family",
    "scan",
    "scan_all",
]

__version__ = "0.1.0"
