"""Mirror coupling of symmetric pure-jump Lévy processes.

Tools to check the integral condition ∫₀¹ r/η(r) dr < ∞, simulate the
coupled pair (X̄, Ȳ) and compare the coupling bound against a Fourier
inversion oracle for the total-variation distance of translates.
"""

__version__ = "0.1.0"

from levycouple.levy_measure import (
    PowerLog,
    Quadratic,
    Stable,
    SymmetricLevyMeasure,
    Tabulated,
    TruncatedStable,
    eta,
    measure_from_dict,
    sample_jump,
    tail_mass,
)
from levycouple.stats import MCEstimate, aggregate, ks_statistic

__all__ = [
    "MCEstimate",
    "PowerLog",
    "Quadratic",
    "Stable",
    "SymmetricLevyMeasure",
    "Tabulated",
    "TruncatedStable",
    "aggregate",
    "eta",
    "ks_statistic",
    "measure_from_dict",
    "sample_jump",
    "tail_mass",
]
