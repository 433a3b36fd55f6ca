"""Exact one-shot derivation of the planefocal generator table.

Computes the seven degree-6 generators of the elimination ideal in the
twelve homography-Gram entries q21..q36, emits them as a byte-deterministic
JSON table, and verifies the table numerically against a forward model.
"""

from .derive import (
    EliminationFailed,
    SymbolicGenerator,
    derive_generators,
)
from .emit import emit_table
from .verify import VerificationReport, load_table, verify_generators

__all__ = [
    "EliminationFailed",
    "SymbolicGenerator",
    "VerificationReport",
    "derive_generators",
    "emit_table",
    "load_table",
    "verify_generators",
]
