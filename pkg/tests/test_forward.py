import math

import numpy as np
import pytest
import scipy.special as sp

from herglotz_enclosure.farfield import farfield_from_nearfield
from herglotz_enclosure.forward import (
    BoundaryDiscretization,
    GalerkinMesh,
    InputError,
    ResonanceError,
    SourceModel,
    cauchy_data_on_circle,
    far_field_constant,
    plane_wave,
    read_cauchy_csv,
    solve,
    solve_crack,
    solve_obstacle,
    solve_obstacle_combined,
    write_cauchy_csv,
)
from herglotz_enclosure.forward.obstacle import kress_grading
from herglotz_enclosure.geometry import CrackSet, Direction, PolygonalObstacle, regular_polygon
from herglotz_enclosure.herglotz import cgo_wave

from .conftest import unit

THETA = np.linspace(0, 2 * np.pi, 97)


def disc_far_field(k, a, theta, d_angle=0.0):
    n = np.arange(-60, 61)
    c = sp.jvp(n, k * a) / sp.h1vp(n, k * a)
    return -np.sqrt(2 / (np.pi * k)) * np.exp(-1j * np.pi / 4) * (np.exp(1j * np.outer(theta - d_angle, n)) @ c)


def test_far_field_constant():
    assert far_field_constant(2.0) == pytest.approx(np.exp(1j * np.pi / 4) / np.sqrt(16 * np.pi))


def test_grading_endpoints():
    t = np.linspace(0, 1, 11)
    w, dw = kress_grading(t, 3)
    assert w[0] == 0 and w[-1] == pytest.approx(1)
    assert dw[0] == pytest.approx(0) and np.all(np.diff(w) > 0)


@pytest.mark.parametrize("ppe", [8, 16])
def test_disc_oracle_converges_with_polygon(ppe):
    ref = disc_far_field(1.0, 1.0, THETA)
    errs = []
    for n in (32, 64):
        scene = PolygonalObstacle([regular_polygon(n, 1.0)], R=2)
        sol = solve_obstacle(scene, 1.0, (1.0, 0.0), BoundaryDiscretization.build(scene, ppe))
        errs.append(np.abs(sol.sources.far_field(THETA) - ref).max())
    assert errs[1] < 0.5 * errs[0] and errs[1] < 1e-2


def test_reciprocity_square(square):
    sols = {a: solve(square, 1.0, unit(a)) for a in (0.2, 2.5)}
    fa = sols[0.2].sources.far_field(np.array([2.5 + math.pi]))[0]
    fb = sols[2.5].sources.far_field(np.array([0.2 + math.pi]))[0]
    assert abs(fa - fb) < 1e-5


def test_optical_theorem(square_solution):
    k = square_solution.k
    n = 1024
    th = 2 * np.pi * np.arange(n) / n
    F = square_solution.sources.far_field(th)
    lhs = np.sum(np.abs(F) ** 2) * 2 * np.pi / n
    forward_ff = square_solution.sources.far_field(np.array([0.0]))[0]
    rhs = -np.sqrt(8 * np.pi / k) * (np.exp(1j * np.pi / 4) * forward_ff).real
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_translation_phase(square):
    k, b = 1.0, np.array([0.3, -0.2])
    d = np.array(unit(0.7))
    F0 = solve(square, k, d).sources.far_field(THETA)
    F1 = solve(square.translated(b), k, d).sources.far_field(THETA)
    xhat = np.stack([np.cos(THETA), np.sin(THETA)], axis=1)
    assert np.allclose(F1, np.exp(1j * k * ((d - xhat) @ b)) * F0, atol=1e-6)


def test_rotation_covariance(square):
    # the square is invariant under a quarter turn
    F0 = solve(square, 1.0, unit(0.3)).sources.far_field(THETA)
    F1 = solve(square, 1.0, unit(0.3 + math.pi / 2)).sources.far_field(THETA + math.pi / 2)
    assert np.allclose(F0, F1, atol=1e-8)


def test_combined_agrees_with_nystrom(square):
    a = solve_obstacle(square, 1.0, (1.0, 0.0), BoundaryDiscretization.build(square, 48))
    b = solve_obstacle_combined(square, 1.0, (1.0, 0.0), GalerkinMesh.build(square.components, closed=True, elems_per_edge=48))
    assert np.abs(a.sources.far_field(THETA) - b.sources.far_field(THETA)).max() < 1e-5


def test_resonance_detected_and_avoided(square):
    k = math.pi * math.sqrt(2)  # interior Dirichlet eigenvalue of the unit square
    with pytest.raises(ResonanceError, match="combined"):
        solve_obstacle(square, k, (1.0, 0.0))
    sol = solve_obstacle(square, k, (1.0, 0.0), combined=True)
    assert sol.metadata["condition"] < 1e4
    shifted = solve_obstacle(square, k + 0.05, (1.0, 0.0))
    assert np.abs(shifted.sources.far_field(THETA) - solve_obstacle(square, k + 0.05, (1.0, 0.0), combined=True).sources.far_field(THETA)).max() < 1e-3


def test_solver_metadata(square_solution):
    meta = square_solution.metadata
    assert meta["residual"] < 1e-10
    assert 1 < meta["condition"] < 1e10
    assert meta["resonance"] is False


def test_input_errors(square):
    with pytest.raises(InputError):
        solve(square, -1.0, (1.0, 0.0))
    with pytest.raises(InputError):
        solve(square, 1.0, (1.0, 1.0))
    with pytest.raises(InputError):
        solve_obstacle(CrackSet([[[0, 0], [0.5, 0]]], R=1), 1.0, (1.0, 0.0))


def test_cauchy_data_and_pairing_identity(square_solution, tmp_path):
    cd = cauchy_data_on_circle(square_solution, 1.2, 512)
    omega = Direction(1.0)
    vg = lambda y: cgo_wave(y, 2.0, 1.0, omega)  # noqa: E731
    near = farfield_from_nearfield(1.0, cd.pairing(vg))
    far = square_solution.sources.pair(vg)
    assert abs(near - far) < 1e-12 * abs(far)
    path = tmp_path / "cauchy.csv"
    write_cauchy_csv(cd, path)
    back = read_cauchy_csv(path, 1.2)
    assert np.array_equal(back.u, cd.u) and np.array_equal(back.du, cd.du)
    with pytest.raises(InputError):
        cauchy_data_on_circle(square_solution, 0.6, 64)


def test_incident_wave_pairs_to_zero():
    th = 2 * np.pi * np.arange(256) / 256
    x = 1.3 * np.stack([np.cos(th), np.sin(th)], axis=1)
    u, g = plane_wave(x, 1.0, unit(0.4))
    from herglotz_enclosure.forward import CauchyData

    cd = CauchyData(1.3, th, u, np.einsum("pc,pc->p", g, x) / 1.3)
    assert abs(cd.pairing(lambda y: cgo_wave(y, 1.5, 1.0, Direction(2.0)))) < 1e-12


def test_source_model_field_radiates():
    src = SourceModel(1.0, np.array([[0.1, 0.2]]), np.array([1.0 + 0j]), np.array([[0.3, -0.1]], complex))
    r = 400.0
    th = np.array([0.3, 2.0])
    x = r * np.stack([np.cos(th), np.sin(th)], axis=1)
    u, _ = src.field(x)
    approx = np.exp(1j * r) / np.sqrt(r) * src.far_field(th)
    assert np.allclose(u, approx, rtol=5e-3)


def test_crack_reciprocity_and_mirror(l_crack_solutions):
    a, b = l_crack_solutions[(1.0, 0.0)], l_crack_solutions[(0.0, 1.0)]
    fa = a.sources.far_field(np.array([math.pi / 2 + math.pi]))[0]
    fb = b.sources.far_field(np.array([math.pi]))[0]
    assert abs(fa - fb) < 1e-8
    seg = CrackSet([[[-0.5, 0.0], [0.5, 0.0]]], R=1)
    sol = solve(seg, 1.0, unit(0.6))
    mirror = solve(seg, 1.0, unit(-0.6))
    assert np.allclose(sol.sources.far_field(THETA), mirror.sources.far_field(-THETA), atol=1e-12)


def test_crack_refinement(l_crack):
    coarse = solve_crack(l_crack, 1.0, (1.0, 0.0), elems_per_edge=16)
    fine = solve_crack(l_crack, 1.0, (1.0, 0.0), elems_per_edge=48)
    assert np.abs(coarse.sources.far_field(THETA) - fine.sources.far_field(THETA)).max() < 1e-3


def test_thin_rectangle_surrogate():
    width = 1e-3
    crack = CrackSet([[[-0.5, 0.0], [0.5, 0.0]]], R=1)
    rect = PolygonalObstacle([[[-0.5, -width / 2], [0.5, -width / 2], [0.5, width / 2], [-0.5, width / 2]]], R=1)
    d = unit(0.9)
    fc = solve(crack, 1.0, d).sources.far_field(THETA)
    fr = solve_obstacle_combined(rect, 1.0, d, elems_per_edge=64).sources.far_field(THETA)
    assert np.abs(fc - fr).max() <= 5e-3 * np.abs(fc).max() + 5e-3
