"""Tensor-train construction of Karhunen-Loeve type expansions matching second and third cumulants."""

from .chebapprox import AdaptiveFunction, FunctionMatrix, approximate, integrate, inner_product
from .cumulant import FinalExpansion, LatentCumulant3
from .klmodes import DirectionalModes
from .nurbs import NurbsGeometry
from .pipeline import PipelineConfig, load_config, run
from .ttcross import CrossConfig, FunctionTrain, cross_decompose

__version__ = "0.1.0"
