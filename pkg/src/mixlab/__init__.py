"""mixlab: a computational laboratory for multiple-mixing phenomena.

Exact and Monte-Carlo k-fold correlations for algebraic and rank-one
dynamical systems, deviation-from-mixing statistics, the joining-tensor and
Markov-operator calculus, and percolation analysis of harmonic lattice
configurations.
"""

from .measure import MeasureValue, format_fraction, parse_fraction

__version__ = "0.1.0"

__all__ = ["MeasureValue", "format_fraction", "parse_fraction", "__version__"]
