"""Prior conditional probabilities for sequential measurements of canonical observables.

Submodules
----------
symplectic_core
    Symplectic forms, subspaces, normal forms and polygon areas.
regions
    Interval unions and regions cut out by generator coordinates.
weyl_oracle
    Finite-grid Weyl pair with brute-force matrix traces.
propagators
    Free and harmonic propagators, their kernel products and trace integrals.
prior_engine
    Closed-form probabilities for box chains, Lagrangian regions and field pairings.
cli
    JSON scenario runner (``qcond run | sweep | check``).
"""

from .errors import QcondError
from .regions import GeneratedRegion, IntervalUnion
from .symplectic_core import SymplecticSpace, Subspace

__version__ = "0.1.0"

__all__ = ["GeneratedRegion", "IntervalUnion", "Subspace", "SymplecticSpace", "QcondError"]
