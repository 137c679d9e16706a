"""Discontinuous Galerkin solver for the 1D2V Vlasov-Maxwell system.

Structure-preserving time integrators (explicit, implicit-midpoint, split and
fourth-order compositions) on a tensor Gauss-Legendre nodal mesh, with the
streaming Weibel instability as the built-in benchmark.
"""

__version__ = "0.1.0"

from .fields import EMField, MaxwellFlux
from .harness import RunManifest, WeibelParams, parse_config, run_simulation
from .integrators_unsplit import SchemeConfig, State
from .mesh import Mesh1D2V, build_mesh
from .schemes import advance
from .vlasov import VlasovFlux

__all__ = [
    "__version__",
    "EMField",
    "MaxwellFlux",
    "Mesh1D2V",
    "RunManifest",
    "SchemeConfig",
    "State",
    "VlasovFlux",
    "WeibelParams",
    "advance",
    "build_mesh",
    "parse_config",
    "run_simulation",
]
