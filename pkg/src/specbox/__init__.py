"""Spectral laboratory for Schrodinger operators on boxes with mixed faces."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

from .model import (BC, BoxProblem, CosineSpec, DirectionalComponent, TrigPotential, build_potential,
                    directional_decomposition, evaluate, irrationality_scan, reduce_potential,
                    reflect_potential)

__all__ = [
    "BC", "BoxProblem", "CosineSpec", "DirectionalComponent", "TrigPotential", "build_potential",
    "directional_decomposition", "evaluate", "irrationality_scan", "reduce_potential", "reflect_potential",
    "__version__",
]
