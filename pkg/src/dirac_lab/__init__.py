"""Port-Hamiltonian systems on discrete Stokes-Dirac structures, their contact lift and information geometry."""

from .forms import Cochain, PointField
from .mesh import BoundaryMesh, Mesh, boundary_complex, build_mesh
from .phs import EnergySpec, InitialCondition, PHSState, make_preset
from .stokes_dirac import Signature

__all__ = [
    "BoundaryMesh",
    "Cochain",
    "EnergySpec",
    "InitialCondition",
    "Mesh",
    "PHSState",
    "PointField",
    "Signature",
    "boundary_complex",
    "build_mesh",
    "make_preset",
]
__version__ = "0.1.0"
