"""Bounded partial sums along lattice paths in random signed environments."""
from ._kernels import MIX_VERSION
from .blocks import BlockParams, BlockReport, calibrate, calibrate_with_diagnostics, classify_block
from .builder import EtaStarResult, IncrementLaws, build_eta_star, simulate_chain
from .env import EdgeKey, Environment, LawSpec, WeightLaw, edge_sample, make_environment, normalize_axes, support_class
from .errors import (CalibrationError, ConfigurationError, ConstructionError, DegenerateCycleError,
                     UnsupportedRegimeError)
from .geometry import PathSeq, PathSums, path_sums
from .optimizer import (MinimaxResult, SearchBox, find_heavy_vertex, flat_path, minimax_search, plant_outward_ball,
                        verify_outward_ball, zero_path_search)
from .percolation import BlockField, OrientedBlockPath, percolate_oriented
from .probability import Pmf, exact_crossing_law, symmetrized_law, tv_distance
from .tessellation import BlockAddress, BlockGeometry, TessellationParams

__all__ = [name for name in dir() if not name.startswith("_")] + ["MIX_VERSION"]
