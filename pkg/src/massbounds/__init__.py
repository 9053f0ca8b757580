"""Numerical checks of lower bounds for ADM and Brown-York masses.

Modules
-------
mesh       grids, node fields and quadrature
metric     metrics on grids, curvature and radial profiles
elliptic   Dirichlet/exterior solves, eigenvalues, Sobolev estimates
mass       ADM flux, surface embedding and Brown-York mass
bounds     hypothesis checks and bound formulas producing verdicts
scenarios  metric families with analytic or radial-ODE oracles
cli        batch runs and reports
"""
from massbounds.errors import (ConfigError, EmbeddingObstructed, ExtrapolationUnreliable,
                               NonCoerciveOperator, SolverDiverged)

__version__ = "0.1.0"

__all__ = ["ConfigError", "EmbeddingObstructed", "ExtrapolationUnreliable",
           "NonCoerciveOperator", "SolverDiverged", "__version__"]
