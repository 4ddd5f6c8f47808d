"""Forward scattering by sound-hard polygons and cracks."""

from .galerkin import GalerkinMesh, solve_crack, solve_obstacle_combined
from .model import SourceModel, far_field_constant, plane_wave
from .obstacle import BoundaryDiscretization, solve_obstacle
from .solution import (
    CauchyData,
    InputError,
    ResonanceError,
    ScatterSolution,
    cauchy_data_on_circle,
    far_field,
    read_cauchy_csv,
    write_cauchy_csv,
)


def solve(scene, k, d, **kwargs) -> ScatterSolution:
    """Dispatch on the scene type."""
    if scene.kind == "crack":
        return solve_crack(scene, k, d, **kwargs)
    return solve_obstacle(scene, k, d, **kwargs)
