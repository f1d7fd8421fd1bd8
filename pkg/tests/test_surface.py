"""Meshes, regions, and their text formats."""

import numpy as np
import pytest

from obslab import (ConfigError, EmptyRegion, InvalidResolution, RegionSpec,
                    build_bolza, build_torus, chart_triangle_areas,
                    disk_distance, euler_characteristic, fmt_float, load_mesh,
                    rasterize_region, save_mesh, save_region, vertex_measures)

from _oracles import octagon_area_quadrature


# ---------------------------------------------------------------------------
# torus

def test_torus_chart_combinatorics():
    mesh = build_torus(8, 1.0)
    assert mesh.surface_kind == "torus"
    assert mesh.n_vertices == 81
    assert mesh.n_triangles == 128
    assert mesh.n_quotient == 64
    assert mesh.torus_length == 1.0
    assert abs(mesh.area - 1.0) < 1e-14
    assert euler_characteristic(mesh) == 0
    areas = chart_triangle_areas(mesh)
    assert np.allclose(areas, (1.0 / 8) ** 2 / 2.0)


def test_torus_side_length_scales_area():
    mesh = build_torus(8, 2.0)
    assert abs(mesh.area - 4.0) < 1e-13
    assert mesh.torus_length == 2.0


def test_torus_resolution_guards():
    with pytest.raises(InvalidResolution):
        build_torus(3)
    with pytest.raises(InvalidResolution):
        build_torus(8, 0.0)


def test_torus_identifications_consistent(mesh16):
    # every chart vertex maps to a representative with identical class index
    reps = mesh16.identifications
    assert np.array_equal(mesh16.quotient_index,
                          mesh16.quotient_index[reps])
    assert np.array_equal(mesh16.quotient_index[mesh16.quotient_reps],
                          np.arange(mesh16.n_quotient))


def test_vertex_measures_sum_to_area(mesh16, bolza4):
    for mesh in (mesh16, bolza4):
        assert abs(vertex_measures(mesh).sum() - mesh.area) < 1e-12 * mesh.area
        assert vertex_measures(mesh).min() > 0


# ---------------------------------------------------------------------------
# octagon

def test_octagon_quadrature_oracle_hits_gauss_bonnet():
    # genus 2 forces hyperbolic area 4 pi; the polar quadrature must agree
    assert abs(octagon_area_quadrature() - 4.0 * np.pi) < 1e-12


def test_octagon_mesh_area_converges_from_above(bolza4):
    target = octagon_area_quadrature()
    errs = []
    for mesh in (build_bolza(2), build_bolza(3), bolza4):
        errs.append(mesh.area / target - 1.0)
    # linear interpolation of the convex conformal weight overestimates
    assert all(e > 0 for e in errs)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_octagon_combinatorics(bolza4):
    quotient_counts = {0: 2, 1: 14, 2: 62, 3: 254}
    for refine, expected in quotient_counts.items():
        mesh = build_bolza(refine)
        assert mesh.n_quotient == expected
        assert mesh.n_triangles == 8 * 4 ** refine
        assert euler_characteristic(mesh) == -2
        assert np.hypot(*mesh.vertices.T).max() < 1.0
        assert mesh.conformal_weight.min() >= 4.0 - 1e-12
    assert bolza4.n_quotient == 1022
    assert euler_characteristic(bolza4) == -2


def test_octagon_refinement_quadruples_triangles():
    assert build_bolza(1).n_triangles == 4 * build_bolza(0).n_triangles


def test_disk_distance_closed_form():
    r = np.array([0.1, 0.5, 0.84])
    expected = np.log((1 + r) / (1 - r))
    assert np.allclose(disk_distance(0.0, r), expected, rtol=1e-13)
    z, w = 0.3 + 0.2j, -0.1 + 0.6j
    assert abs(disk_distance(z, w) - disk_distance(w, z)) < 1e-14


# ---------------------------------------------------------------------------
# regions

def test_full_region(mesh16):
    region = rasterize_region(mesh16, RegionSpec.full())
    assert np.all(region.weights == 1.0)
    assert abs(region.support_area - mesh16.area) < 1e-12


def test_ball_region_profile(mesh16):
    spec = RegionSpec.ball((0.3, 0.4), 0.2)
    region = rasterize_region(mesh16, spec)
    w = region.weights
    assert w.min() >= 0.0 and w.max() == 1.0
    band = 0.2 * spec.radius
    pts = mesh16.vertices
    shifts = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
    d = np.min([np.hypot(pts[:, 0] - 0.3 - dx, pts[:, 1] - 0.4 - dy)
                for dx, dy in shifts], axis=0)
    assert np.all(w[d <= spec.radius - band + 1e-12] == 1.0)
    assert np.all(w[d >= spec.radius - 1e-12] == 0.0)


def test_strip_region_profile(mesh16):
    region = rasterize_region(mesh16, RegionSpec.strip("x", 0.0, 0.3))
    w = region.weights
    x = mesh16.vertices[:, 0]
    # the ramp starts exactly at the leading edge
    assert np.all(w[x == 0.0] == 0.0)
    assert np.all(w[(x >= 0.1) & (x <= 0.2)] == 1.0)
    assert np.all(w[x > 0.3] == 0.0)
    h = 1.0 / 16
    assert 0.3 - 2 * h < region.support_area < 0.3 + 2 * h


def test_region_weights_constant_on_classes(mesh16, bolza4):
    for mesh, spec in ((mesh16, RegionSpec.strip("y", 0.2, 0.4)),
                       (bolza4, RegionSpec.ball((0.25, 0.15), 0.6))):
        w = rasterize_region(mesh, spec).weights
        assert np.array_equal(w, w[mesh.identifications])


def test_region_monotone_in_descriptor_at_fixed_band(mesh16):
    # as the region grows (same transition band), no weight may decrease
    w1 = rasterize_region(mesh16, RegionSpec.strip("x", 0.0, 0.3, band=0.05)).weights
    w2 = rasterize_region(mesh16, RegionSpec.strip("x", 0.0, 0.4, band=0.05)).weights
    assert np.all(w2 >= w1 - 1e-12)
    b1 = rasterize_region(mesh16, RegionSpec.ball((0.5, 0.5), 0.20, band=0.04)).weights
    b2 = rasterize_region(mesh16, RegionSpec.ball((0.5, 0.5), 0.25, band=0.04)).weights
    assert np.all(b2 >= b1 - 1e-12)


def test_empty_region_no_positive_weight(mesh16):
    # ball falls between grid points
    spec = RegionSpec.ball((0.5 + 1.0 / 32, 0.5 + 1.0 / 32), 0.01)
    with pytest.raises(EmptyRegion):
        rasterize_region(mesh16, spec)


def test_empty_region_under_resolved_band(mesh16):
    # positive weights exist but none reaches 1: the mesh cannot resolve
    # the core of the region
    spec = RegionSpec.ball((0.5 + 1.0 / 32, 0.5 + 1.0 / 32), 0.08, band=0.04)
    with pytest.raises(EmptyRegion, match="full-weight"):
        rasterize_region(mesh16, spec)


def test_nonpositive_region_sizes(mesh16):
    with pytest.raises(EmptyRegion):
        rasterize_region(mesh16, RegionSpec.ball((0.5, 0.5), 0.0))
    with pytest.raises(EmptyRegion):
        rasterize_region(mesh16, RegionSpec.strip("x", 0.0, -0.1))


def test_strip_axis_normalization():
    assert RegionSpec.strip(0, 0.0, 0.3).axis == "x"
    assert RegionSpec.strip("1", 0.0, 0.3).axis == "y"
    assert RegionSpec.strip("y", 0.0, 0.3).axis == "y"
    with pytest.raises(ConfigError):
        RegionSpec.strip("z", 0.0, 0.3)


def test_strip_rejected_off_torus(bolza4):
    with pytest.raises(ConfigError):
        rasterize_region(bolza4, RegionSpec.strip("x", 0.0, 0.3))


def test_ball_center_outside_disk_rejected(bolza4):
    with pytest.raises(ConfigError):
        rasterize_region(bolza4, RegionSpec.ball((1.2, 0.0), 0.3))


def test_vertex_set_region(mesh16):
    region = rasterize_region(mesh16, RegionSpec.vertex_set([5]))
    cls = mesh16.quotient_index[5]
    expected = (mesh16.quotient_index == cls).astype(float)
    assert np.array_equal(region.weights, expected)
    with pytest.raises(EmptyRegion):
        rasterize_region(mesh16, RegionSpec.vertex_set([]))


def test_region_labels():
    assert RegionSpec.full().label() == "full"
    assert RegionSpec.strip("x", 0.0, 0.3).label() == "strip(x,0,0.3)"
    assert "ball" in RegionSpec.ball((0.25, 0.15), 0.6).label()


# ---------------------------------------------------------------------------
# text formats

def test_fmt_float_roundtrips_exactly():
    values = [0.0, 1.0, -1.0 / 3.0, np.pi, 1e-17, 12345.6789]
    for v in values:
        assert float(fmt_float(v)) == v


@pytest.mark.parametrize("builder", [lambda: build_torus(8, 1.0),
                                     lambda: build_bolza(2)])
def test_mesh_save_load_roundtrip(tmp_path, builder):
    mesh = builder()
    path = tmp_path / "mesh.txt"
    save_mesh(path, mesh)
    back = load_mesh(path)
    assert back.surface_kind == mesh.surface_kind
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.conformal_weight, mesh.conformal_weight)
    assert np.array_equal(back.identifications, mesh.identifications)
    assert np.array_equal(back.quotient_reps, mesh.quotient_reps)
    assert back.area == mesh.area


def test_load_mesh_rejects_other_files(tmp_path):
    path = tmp_path / "other.txt"
    path.write_text("header nonsense\n")
    with pytest.raises(ConfigError):
        load_mesh(path)


def test_save_region_format(tmp_path, mesh16, strip16):
    path = tmp_path / "region.txt"
    save_region(path, strip16)
    lines = path.read_text().splitlines()
    assert len(lines) == mesh16.n_vertices
    idx, w = lines[0].split()
    assert idx == "0"
    assert float(w) == strip16.weights[0]
