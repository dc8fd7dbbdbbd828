"""Network-informed isoform quantification.

Per-gene transcript proportions are estimated from read-compatibility data,
optionally with Dirichlet priors derived from the expression of each
transcript's neighbors in a transcript interaction network.
"""

from .errors import FormatError, NetquantError, NumericalError, ValidationError
from .model import (
    CompatibilitySet,
    GeneEntry,
    QuantState,
    ReadCompat,
    SimTruth,
    Transcript,
    TranscriptCatalog,
    TranscriptNetwork,
    compute_phi,
    expression,
    relative_abundance,
)

__version__ = "0.1.0"

__all__ = [
    "CompatibilitySet",
    "FormatError",
    "GeneEntry",
    "NetquantError",
    "NumericalError",
    "QuantState",
    "ReadCompat",
    "SimTruth",
    "Transcript",
    "TranscriptCatalog",
    "TranscriptNetwork",
    "ValidationError",
    "compute_phi",
    "expression",
    "relative_abundance",
]
