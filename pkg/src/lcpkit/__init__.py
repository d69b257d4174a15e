"""Projection-free convex optimization through linear minimization oracles."""

from .algorithms import (SolverConfig, cndg, holder_diagnostic, pa_cndg, pda_cndg,
                         randomized_cndg, shrinking_cndg, smoothing_cndg)
from .core import (IterationRecord, IterationTrace, QuadraticObjective, SmoothObjective,
                   StepSchedule, wolfe_gap)
from .oracles import (EuclideanBall, Hypercube, KnapsackBox, ResistingSimplex, ScaledSimplex,
                      Spectrahedron, StandardSimplex, UnsupportedDomainError)

__version__ = "0.1.0"
