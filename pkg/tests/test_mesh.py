import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdgreen.config import AssumptionWarning, ConfigError, ProblemConfig
from sdgreen.mesh import (K1, K2, REGIONS, ShishkinMesh, build_mesh, classify_region, mesh_sizes,
                          read_mesh, shishkin_coordinates, transition_parameters, write_mesh)


def cfg(**kw):
    kw.setdefault("warn", False)
    return ProblemConfig(**kw)


class TestTransitionParameters:
    def test_clamped_at_half(self):
        with pytest.warns(AssumptionWarning):
            c = ProblemConfig(epsilon=0.3, N=4, b1=1.0)
        assert 2.5 * 0.3 * math.log(4) > 0.5
        assert transition_parameters(c)[0] == 0.5

    def test_layer_value_against_high_precision(self):
        mpmath.mp.dps = 30
        expected = mpmath.mpf("2.5") * mpmath.mpf("1e-3") * mpmath.log(64) / 2
        lam_x, _ = transition_parameters(cfg(epsilon=1e-3, N=64, b1=2.0))
        assert lam_x == pytest.approx(float(expected), rel=1e-15)
        assert lam_x == pytest.approx(5.19860e-3, rel=1e-5)

    def test_symmetric_convection(self):
        lam_x, lam_y = transition_parameters(cfg(epsilon=1e-3, N=64, b1=2.0, b2=2.0))
        assert lam_x == lam_y


class TestConfig:
    @pytest.mark.parametrize("N", [3, 7, 2, 0, -4, 5.5])
    def test_rejects_bad_N(self, N):
        with pytest.raises(ConfigError):
            ProblemConfig(N=N)

    @pytest.mark.parametrize("field", ["epsilon", "b1", "b2", "c", "rho", "k", "script_k"])
    def test_rejects_nonpositive(self, field):
        with pytest.raises(ConfigError):
            ProblemConfig(**{field: 0.0})

    def test_warns_when_eps_exceeds_inverse_N(self):
        with pytest.warns(AssumptionWarning):
            ProblemConfig(epsilon=0.3, N=8)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ProblemConfig(epsilon=1e-3, N=8)

    def test_default_stabilisation_constant(self):
        c = ProblemConfig(b1=3.0, b2=4.0)
        assert c.stab_constant == pytest.approx(0.25 / 25.0)
        assert ProblemConfig(c_star=0.7).stab_constant == 0.7


class TestCoordinates:
    def test_small_example(self):
        np.testing.assert_allclose(shishkin_coordinates(4, 0.1), [0, 0.45, 0.9, 0.95, 1.0], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("N,lam", [(4, 0.1), (16, 0.5), (64, 3e-6), (128, 0.01)])
    def test_endpoints_transition_and_monotone(self, N, lam):
        x = shishkin_coordinates(N, lam)
        assert x[0] == 0.0 and x[-1] == 1.0
        assert abs(x[N // 2] - (1 - lam)) <= 2 * np.spacing(1 - lam)
        assert np.all(np.diff(x) > 0)

    def test_rejects_bad_lambda(self):
        with pytest.raises(ConfigError):
            shishkin_coordinates(8, 0.75)


class TestBuildMesh:
    def test_counts_and_regions_uniform_case(self):
        mesh = ShishkinMesh.from_transition(4, 0.5, 0.5)
        assert mesh.n_triangles == 32
        # enumeration oracle: a cell is in Omega_s iff its upper-right corner is <= 1/2 in both coords
        s_cells = sum(1 for i in range(4) for j in range(4)
                      if mesh.x_coords[i + 1] <= 0.5 and mesh.y_coords[j + 1] <= 0.5)
        assert s_cells == 4
        for r in REGIONS:
            assert np.sum(mesh.region_mask(r)) == 8

    def test_triangle_vertices_follow_coding(self):
        mesh = ShishkinMesh.from_transition(6, 0.2, 0.3)
        x, y = mesh.x_coords, mesh.y_coords
        for t in range(mesh.n_triangles):
            i, j = mesh.triangle_cells[t]
            verts = mesh.nodes[mesh.triangles[t]]
            if mesh.triangle_kind[t] == K1:
                expected = [(x[i], y[j]), (x[i + 1], y[j]), (x[i], y[j + 1])]
            else:
                assert mesh.triangle_kind[t] == K2
                expected = [(x[i], y[j + 1]), (x[i + 1], y[j]), (x[i + 1], y[j + 1])]
            np.testing.assert_array_equal(verts, expected)

    def test_k1_k2_share_diagonal(self):
        mesh = ShishkinMesh.from_transition(8, 0.1, 0.2)
        tris = mesh.triangles
        for c in range(mesh.N * mesh.N):
            shared = set(tris[2 * c]) & set(tris[2 * c + 1])
            assert shared == {tris[2 * c][1], tris[2 * c][2]}

    def test_partition_of_unit_square(self):
        mesh = build_mesh(cfg(epsilon=1e-8, N=64))
        assert np.sum(mesh.geometry.area) == pytest.approx(1.0, rel=1e-12)

    def test_region_conformity(self):
        mesh = build_mesh(cfg(epsilon=1e-4, N=16))
        for t in range(mesh.n_triangles):
            tag = classify_region(mesh, t)
            for (px, py) in mesh.nodes[mesh.triangles[t]]:
                in_x = px >= 1 - mesh.lambda_x
                in_y = py >= 1 - mesh.lambda_y
                # every vertex lies in the closed rectangle of the triangle's region
                assert {"S": px <= 1 - mesh.lambda_x and py <= 1 - mesh.lambda_y,
                        "X": in_x and py <= 1 - mesh.lambda_y,
                        "Y": px <= 1 - mesh.lambda_x and in_y,
                        "XY": in_x and in_y}[tag]

    def test_uniform_cells_within_regions(self):
        mesh = build_mesh(cfg(epsilon=1e-6, N=32))
        hx = np.diff(mesh.x_coords)[mesh.triangle_cells[:, 0]]
        hy = np.diff(mesh.y_coords)[mesh.triangle_cells[:, 1]]
        for r in REGIONS:
            m = mesh.region_mask(r)
            assert np.ptp(hx[m]) <= 1e-15 and np.ptp(hy[m]) <= 1e-15


class TestClassify:
    mesh = build_mesh(cfg(epsilon=1e-3, N=16))

    def test_corners(self):
        assert classify_region(self.mesh, (0.0, 0.0)) == "S"
        assert classify_region(self.mesh, (1.0, 1.0)) == "XY"

    def test_x_layer(self):
        assert self.mesh.lambda_y < 0.75
        assert classify_region(self.mesh, (1 - self.mesh.lambda_x / 2, 0.25)) == "X"
        assert classify_region(self.mesh, (0.25, 1 - self.mesh.lambda_y / 2)) == "Y"

    def test_outside_rejected(self):
        with pytest.raises(ValueError):
            classify_region(self.mesh, (1.2, 0.5))


class TestMeshSizes:
    def test_small_example(self):
        H_x, h_x, _, _ = mesh_sizes(ShishkinMesh.from_transition(4, 0.1, 0.1))
        assert H_x == pytest.approx(0.45) and h_x == pytest.approx(0.05)

    def test_uniform_case(self):
        mesh = ShishkinMesh.from_transition(8, 0.5, 0.5)
        assert mesh.H_x == mesh.h_x == mesh.H_y == mesh.h_y == pytest.approx(1 / 8)

    def test_chained_formula(self):
        mesh = build_mesh(cfg(epsilon=1e-3, N=64, b1=2.0))
        assert mesh.h_x == pytest.approx(2.5e-3 * math.log(64) / 2 / 32, rel=1e-14)
        assert mesh.h_x == pytest.approx(1.62456e-4, rel=1e-5)

    @settings(max_examples=60, deadline=None)
    @given(N=st.integers(2, 100).map(lambda n: 2 * n),
           log_eps=st.floats(-10, -1),
           b1=st.floats(0.5, 5), b2=st.floats(0.5, 5))
    def test_size_bounds(self, N, log_eps, b1, b2):
        eps = min(10.0**log_eps, 1.0 / N)
        mesh = build_mesh(cfg(epsilon=eps, N=N, b1=b1, b2=b2))
        for H, h, lam, b in ((mesh.H_x, mesh.h_x, mesh.lambda_x, b1), (mesh.H_y, mesh.h_y, mesh.lambda_y, b2)):
            assert 1 / N <= H * (1 + 1e-14) and H <= 2 / N
            assert h == pytest.approx(2 * lam / N)
            if lam < 0.5:
                assert h == pytest.approx(2.5 * 2 * eps * math.log(N) / (b * N))
        assert np.all(np.diff(mesh.x_coords) > 0)


def test_export_roundtrip(tmp_path):
    mesh = build_mesh(cfg(epsilon=1e-4, N=8))
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0].split()[0] == "8"
    assert len(lines) == 1 + 81 + 128
    node_line = lines[1 + 10].split()
    assert int(node_line[0]) == 10 and float(node_line[1]) == mesh.nodes[10, 0]
    tri_line = lines[1 + 81 + 5].split()
    assert tri_line[4] in ("K1", "K2") and tri_line[5] in REGIONS
    back = read_mesh(path)
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
