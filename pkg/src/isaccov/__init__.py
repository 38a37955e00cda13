"""Coverage probability of integrated sensing and communication networks with blockage.

Two independent paths compute the same quantities: ``analytic`` evaluates
the integral expressions by quadrature and ``montecarlo`` simulates network
snapshots. ``experiments`` drives both over parameter sweeps.
"""

from .analytic import CoverageResult, NetworkParams, comm_coverage, sens_coverage
from .channel import BlockageParams, FadingParams, PathLossParams
from .specfun import QuadratureSpec

__all__ = [
    "BlockageParams",
    "CoverageResult",
    "FadingParams",
    "NetworkParams",
    "PathLossParams",
    "QuadratureSpec",
    "comm_coverage",
    "sens_coverage",
]

__version__ = "0.1.0"
