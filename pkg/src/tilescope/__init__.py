"""tilescope: analysis pipeline for tile-substitution systems.

Declare a substitution (expansion map, digit sets) over an exact coordinate
basis and compute patch generation, prototile supports, Perron-Frobenius
frequencies, local-complexity and rigidity verdicts, Pisot classification,
dynamical-eigenvalue tests, cylinder-set measures and the non-mixing
overlap bound.
"""

from . import analysis, cli, geometry, numberfield, spectral, substitution

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "cli",
    "geometry",
    "numberfield",
    "spectral",
    "substitution",
    "__version__",
]
