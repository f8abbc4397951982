"""Co-rotating and travelling doubly connected gSQG vortex patches, 0 <= alpha < 2."""

from .contour import ConfigError, FourierPair, GeometryError, PatchConfig, SineResidual
from .solver import Solution, SolveOptions, continuation, newton_solve, speed_select
from .spectral import m_block, omega_star, region_table, w_star

__all__ = [
    "ConfigError",
    "FourierPair",
    "GeometryError",
    "PatchConfig",
    "SineResidual",
    "Solution",
    "SolveOptions",
    "continuation",
    "m_block",
    "newton_solve",
    "omega_star",
    "region_table",
    "speed_select",
    "w_star",
]
