"""Dirichlet-to-Neumann operators on rough planar domains.

Builds P1 discretizations of the DtN (Steklov) operator, its spectrum and the
Markov semigroup it generates, and checks trace, Robin and Maz'ya type
inequalities on domains with teeth and cusps.

Example:
    ```bash
    dtnlab mesh --domain "tooth(a=0.5)" --h 0.02 -o tooth.mesh
    dtnlab steklov --mesh tooth.mesh -k 8 --check-kernel -o tooth.json
    dtnlab robin --domain "comb(n=3)" --h 0.0625 --betas 0.1,0.5,2
    ```
"""

from .config import DtnlabConfig, load_config
from .core.dtn import DtnOperator, build_dtn
from .core.mesh import Mesh, build_domain, refine
from .core.semigroup import SpectralSemigroup
from .core.spectral import SteklovSpectrum, steklov_spectrum
from .errors import DtnlabError

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "build_domain",
    "refine",
    "DtnOperator",
    "build_dtn",
    "SteklovSpectrum",
    "steklov_spectrum",
    "SpectralSemigroup",
    "DtnlabConfig",
    "load_config",
    "DtnlabError",
]
