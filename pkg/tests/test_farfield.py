import json
import math

import numpy as np
import pytest
import scipy.special as sp

from herglotz_enclosure.farfield import (
    AliasingError,
    Aperture,
    ApertureError,
    DatasetError,
    FarFieldDataset,
    dataset_from_dict,
    dataset_from_solution,
    dataset_to_dict,
    fourier_spectrum,
    nearfield_pairing,
    pair_with_density,
    point_source_spectrum,
    read_dataset,
    sample_spectrum,
    write_dataset,
    write_spectrum_csv,
)
from herglotz_enclosure.forward import cauchy_data_on_circle, far_field_constant
from herglotz_enclosure.geometry import Direction
from herglotz_enclosure.herglotz import cgo_wave, density_coeffs, truncation_certificate


def test_aperture_grids():
    full = Aperture()
    assert np.allclose(full.angles(4), [0, math.pi / 2, math.pi, 3 * math.pi / 2])
    arc = Aperture("arc", 0.0, 1.0)
    assert np.allclose(arc.angles(4), [0.125, 0.375, 0.625, 0.875])
    assert arc.weights(4).sum() == pytest.approx(1.0)
    for bad in (("arc", None, 1.0), ("arc", 1.0, 1.0), ("arc", 0.0, 7.0), ("disc", 0, 1)):
        with pytest.raises(DatasetError):
            Aperture(*bad)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        FarFieldDataset(1.0, [1, 0], np.zeros(3))
    with pytest.raises(DatasetError):
        FarFieldDataset(1.0, [1, 0], [1, 2, np.nan, 4])
    with pytest.raises(DatasetError):
        FarFieldDataset(0.0, [1, 0], np.zeros(8))
    with pytest.raises(DatasetError):
        FarFieldDataset(1.0, [1, 0], np.zeros(8)).restricted(Aperture("arc", 0, 1), 8)


def test_round_trip_with_sources(tmp_path, square_solution):
    ds = dataset_from_solution(square_solution, 64)
    path = tmp_path / "ds.json"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert np.array_equal(back.values, ds.values)
    assert np.array_equal(back.sources.points, ds.sources.points)
    assert np.array_equal(back.sources.dipoles, ds.sources.dipoles)
    assert back.aperture == ds.aperture and back.k == ds.k
    arc = ds.restricted(Aperture("arc", 0.2, 1.4), 32)
    assert dataset_from_dict(json.loads(json.dumps(dataset_to_dict(arc)))).aperture == arc.aperture


@pytest.mark.parametrize("field", ["version", "k", "d", "aperture", "n", "values"])
def test_missing_field_named(field, square_solution):
    doc = dataset_to_dict(dataset_from_solution(square_solution, 16, keep_sources=False))
    del doc[field]
    with pytest.raises(DatasetError, match=repr(field)):
        dataset_from_dict(doc)


def test_malformed_documents(tmp_path, square_solution):
    doc = dataset_to_dict(dataset_from_solution(square_solution, 16))
    with pytest.raises(DatasetError, match="'n'"):
        dataset_from_dict({**doc, "n": 17})
    with pytest.raises(DatasetError, match=r"values\[0\]"):
        dataset_from_dict({**doc, "values": [[1.0]] + doc["values"][1:]})
    with pytest.raises(DatasetError, match="version"):
        dataset_from_dict({**doc, "version": 7})
    with pytest.raises(DatasetError, match="sources"):
        dataset_from_dict({**doc, "sources": {"points": [[0, 0]]}})
    bad = tmp_path / "bad.json"
    bad.write_text('{"k": 1,\n oops}')
    with pytest.raises(DatasetError, match="line 2"):
        read_dataset(bad)


def test_spectrum_routes_agree(square_solution):
    ds = dataset_from_solution(square_solution, 512)
    a = fourier_spectrum(ds, 24, route="samples")
    b = fourier_spectrum(ds, 24, route="sources")
    assert b.route == "sources"
    assert np.allclose(a.values, b.values, rtol=0, atol=1e-13)
    assert fourier_spectrum(FarFieldDataset(ds.k, ds.d, ds.values), 8).route == "samples"
    with pytest.raises(DatasetError):
        fourier_spectrum(FarFieldDataset(ds.k, ds.d, ds.values), 8, route="sources")


def test_source_route_keeps_tiny_coefficients(square_solution):
    ds = dataset_from_solution(square_solution, 64)
    spec = fourier_spectrum(ds, 200, route="sources")
    g = spec.coeffs[-1] * 1.0
    assert g != 0 and spec.log_scale[-1] < -700  # below the double range, still carried


def test_sampling_errors(square_solution):
    ds = dataset_from_solution(square_solution, 64)
    with pytest.raises(AliasingError):
        sample_spectrum(ds, 16)
    sample_spectrum(ds, 15)
    with pytest.raises(ApertureError):
        sample_spectrum(ds.restricted(Aperture("arc", 0, 1), 64), 4)


def test_point_source_spectrum_formula():
    y0, k = np.array([0.3, -0.4]), 1.7
    spec = point_source_spectrum(y0, k, 30, amplitude=2.0)
    r, a = np.hypot(*y0), math.atan2(y0[1], y0[0])
    for m in (-30, -7, 0, 3, 30):
        ref = 2.0 * 2 * math.pi * 1j ** abs(m) * sp.jv(abs(m), k * r) * np.exp(1j * m * a)
        assert spec[m] == pytest.approx(ref, rel=1e-12)


def test_point_source_spectrum_matches_samples():
    y0, k = np.array([0.2, 0.1]), 1.0
    th = 2 * math.pi * np.arange(256) / 256
    vals = np.exp(-1j * k * (np.cos(th) * y0[0] + np.sin(th) * y0[1]))  # F(theta) with F(-phi) = e^{ik y0.phi}
    ds = FarFieldDataset(k, [1, 0], vals)
    assert np.allclose(sample_spectrum(ds, 20).values, point_source_spectrum(y0, k, 20).values, atol=1e-13)


def test_pair_with_density_vs_direct_sum(square_solution):
    spec = fourier_spectrum(dataset_from_solution(square_solution, 512), 30, route="samples")
    dc = density_coeffs(20, 2.0, square_solution.k, Direction(0.9))
    direct = sum(dc.coeff(m) * spec[m] for m in range(-20, 21))
    assert pair_with_density(spec, dc) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        pair_with_density(spec, density_coeffs(31, 2.0, 1.0, Direction(0)))


def test_nearfield_pairing_sample_floor(square_solution):
    cd = cauchy_data_on_circle(square_solution, 1.2, 64)
    with pytest.raises(ValueError, match="128"):
        nearfield_pairing(cd, lambda y: (np.ones(len(y)), np.zeros((len(y), 2))))


def test_far_field_constant_in_pairing(square_solution):
    # pairing with the plane wave e^{-ik xhat.y} recovers F(xhat) by Green's representation
    xhat = np.array([math.cos(0.6), math.sin(0.6)])
    k = square_solution.k
    cd = cauchy_data_on_circle(square_solution, 1.2, 512)

    def plane(y):
        v = np.exp(-1j * k * (y @ xhat))
        return v, -1j * k * xhat[None, :] * v[:, None]

    F = square_solution.sources.far_field(np.array([0.6]))[0]
    assert -far_field_constant(k) * nearfield_pairing(cd, plane) == pytest.approx(F, rel=1e-9)


def test_spectrum_csv(tmp_path):
    spec = point_source_spectrum([0.1, 0.1], 1.0, 3)
    path = tmp_path / "g.csv"
    write_spectrum_csv(spec, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "m,Re,Im" and len(rows) == 8
    assert complex(float(rows[4].split(",")[1]), float(rows[4].split(",")[2])) == pytest.approx(spec[0])


def test_spectrum_converges_spectrally():
    y0, k = np.array([0.3, 0.2]), 1.0

    def ds(n):
        th = 2 * math.pi * np.arange(n) / n
        return FarFieldDataset(k, [1, 0], np.exp(-1j * k * (np.cos(th) * y0[0] + np.sin(th) * y0[1])))

    assert np.abs(sample_spectrum(ds(128), 20).values - sample_spectrum(ds(256), 20).values).max() < 1e-12


def test_single_term_pairing(square_solution):
    spec = fourier_spectrum(dataset_from_solution(square_solution, 64), 4, route="samples")
    dc = density_coeffs(0, 1.0, 1.0, Direction(0.2))
    assert pair_with_density(spec, dc) == pytest.approx(spec[0] / (2 * math.pi), rel=1e-14)


def test_pairing_matches_dense_quadrature(square_solution):
    ds = dataset_from_solution(square_solution, 512)
    # kept at N=8: the negative-order coefficients grow like (q/k)^N and the dense sum cancels
    dc = density_coeffs(8, 2.0, 1.0, Direction(1.1))
    th = 2 * math.pi * np.arange(4096) / 4096
    F_minus = square_solution.sources.far_field(th + math.pi)
    quad = np.sum(F_minus * dc(th)) * 2 * math.pi / 4096
    for route in ("samples", "sources"):
        assert pair_with_density(fourier_spectrum(ds, 8, route=route), dc) == pytest.approx(quad, rel=1e-10)


def test_point_source_pairing_within_certificate():
    y0, tau, k, om = np.array([0.3, 0.4]), 3.0, 1.0, Direction(0.7)
    N = 14  # bound still above double rounding
    got = pair_with_density(point_source_spectrum(y0, k, N), density_coeffs(N, tau, k, om))
    exact = cgo_wave(y0[None, :], tau, k, om)[0][0]
    assert abs(got - exact) <= truncation_certificate(N, tau, k, 1.0).bound_value


def test_nearfield_pairing_independent_of_radius(square_solution):
    vg = lambda y: cgo_wave(y, 2.0, 1.0, Direction(0.5))  # noqa: E731
    a = nearfield_pairing(cauchy_data_on_circle(square_solution, 1.5, 256), vg)
    b = nearfield_pairing(cauchy_data_on_circle(square_solution, 2.0, 256), vg)
    assert abs(a - b) <= 1e-6 * abs(a)
