"""Quantale-valued fixed points and the probabilistic limit theorems they yield."""

from .cltsys import (
    CltSystem,
    ConvergenceReport,
    Kind,
    analytic_target,
    central_limit,
    estimate_contraction,
    functoriality_check,
    grading,
    observable_clt,
    theta,
)
from .measure import (
    DualGrid,
    GaussianMeasure,
    LatticeMeasure,
    char_fn,
    convolve,
    dilate,
    fourier_l_distance,
    pushforward_linear,
)
from .psd import PsdMatrix, bures_wasserstein, sqrt_psd
from .quantale import BOOLEAN, EXT_REAL_MUL, LAWVERE, Quantale, check_laws
from .vspace import MetricStructure, banach_fixed_point, estimate_lipschitz

__version__ = "0.1.0"
