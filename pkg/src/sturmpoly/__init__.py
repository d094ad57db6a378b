"""Inverse spectral problems for Sturm-Liouville operators with a distribution
potential and eigenparameter-dependent boundary conditions."""
from .core import (BoundaryPolynomials, CauchyData, ContourGrid, PotentialSigma, Problem,
                   ReconstructionResult, SpectralData, WeylDiffSamples, load, make_contour, save)
from .errors import SturmPolyError

__all__ = ["BoundaryPolynomials", "CauchyData", "ContourGrid", "PotentialSigma", "Problem",
           "ReconstructionResult", "SpectralData", "SturmPolyError", "WeylDiffSamples",
           "load", "make_contour", "save"]
