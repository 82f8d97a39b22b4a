"""leakywire: bound states of a 3D Schrodinger operator with an attractive
delta interaction supported on a finite curve, via a regularized
trace-space (Birman-Schwinger type) integral operator."""

__version__ = "0.1.0"

from .geometry import (CircleLoop, CircularArc, Curve, Domain, FourierLoop,
                       HiatusCurve, ParallelOffset, Recess,
                       RegularityWitness, Segment)
from .kernels import SpectralParameter

__all__ = [
    "CircleLoop", "CircularArc", "Curve", "Domain", "FourierLoop",
    "HiatusCurve", "ParallelOffset", "Recess", "RegularityWitness",
    "Segment", "SpectralParameter", "__version__",
]
