"""Weight-space exploration engine for conditional image generators.

Synthesize or load generator checkpoints, apply deterministic weight-space
interventions (multiplicative perturbation, statistics-matched block
randomization, masked substitution), and render reproducible comparison grids.
"""

from .configs import BUILTIN, PAPER256, TINY64, resolve_config
from .graph import BlockId, GeneratorGraph, GraphConfig, build_graph, forward

__version__ = "0.1.0"

__all__ = [
    "BUILTIN",
    "PAPER256",
    "TINY64",
    "BlockId",
    "GeneratorGraph",
    "GraphConfig",
    "build_graph",
    "forward",
    "resolve_config",
    "__version__",
]
