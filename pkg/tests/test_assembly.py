import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from sdgreen.assembly import (FemFunction, assemble_rhs, assemble_system, asd_p1, delta_on_triangle,
                              evaluate, local_matrices, nodal_interpolant, sd_norm)
from sdgreen.config import ProblemConfig
from sdgreen.mesh import ShishkinMesh, build_mesh
from sdgreen.quadrature import triangle_rule


def cfg(**kw):
    kw.setdefault("warn", False)
    return ProblemConfig(**kw)


def symbolic_element(vertices, eps, b, c, delta):
    """Element matrix of the streamline-diffusion form by exact symbolic integration."""
    X, Y = sym.symbols("x y")
    (x0, y0), (x1, y1), (x2, y2) = [(sym.Rational(str(px)), sym.Rational(str(py))) for px, py in vertices]
    s, t = sym.symbols("s t")
    xs = x0 + s * (x1 - x0) + t * (x2 - x0)
    ys = y0 + s * (y1 - y0) + t * (y2 - y0)
    jac = abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    # hat functions in physical coordinates, solved from nodal conditions
    basis = []
    for k in range(3):
        a0, a1, a2 = sym.symbols("a0 a1 a2")
        phi = a0 + a1 * X + a2 * Y
        vals = [1 if m == k else 0 for m in range(3)]
        pts = [(x0, y0), (x1, y1), (x2, y2)]
        sol = sym.solve([phi.subs({X: px, Y: py}) - v for (px, py), v in zip(pts, vals)], [a0, a1, a2])
        basis.append(phi.subs(sol))
    b1, b2 = (sym.Rational(str(v)) for v in b)
    eps, c, delta = sym.Rational(str(eps)), sym.Rational(str(c)), sym.Rational(str(delta))
    out = np.zeros((3, 3))
    for a in range(3):
        for bb in range(3):
            v, w = basis[bb], basis[a]
            conv_v = b1 * sym.diff(v, X) + b2 * sym.diff(v, Y)
            conv_w = b1 * sym.diff(w, X) + b2 * sym.diff(w, Y)
            integrand = (eps * (sym.diff(v, X) * sym.diff(w, X) + sym.diff(v, Y) * sym.diff(w, Y))
                         + conv_v * w + c * v * w + delta * (conv_v + c * v) * conv_w)
            ref = integrand.subs({X: xs, Y: ys}) * jac
            out[a, bb] = float(sym.integrate(sym.integrate(ref, (t, 0, 1 - s)), (s, 0, 1)))
    return out


class TestElementMatrices:
    @pytest.mark.parametrize("vertices", [
        [(0.0, 0.0), (0.5, 0.0), (0.0, 0.25)],
        [(0.0, 0.25), (0.5, 0.0), (0.5, 0.25)],
        [(0.9, 0.1), (0.95, 0.1), (0.9, 0.3)],
    ])
    def test_against_symbolic_integration(self, vertices):
        c = cfg(epsilon=0.01, b1=2.0, b2=1.0, c=1.5, N=8)
        delta = 0.05
        galerkin, stab = local_matrices(vertices, c, delta)
        expected = symbolic_element(vertices, 0.01, (2.0, 1.0), 1.5, delta)
        np.testing.assert_allclose(galerkin + stab, expected, rtol=1e-12, atol=1e-15)

    def test_right_triangle_stiffness(self):
        h = 0.125
        c = cfg(epsilon=0.3, b1=1e-300, b2=1e-300, c=1e-300, N=8)
        galerkin, _ = local_matrices([(0, 0), (h, 0), (0, h)], c)
        expected = 0.3 / 2 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
        np.testing.assert_allclose(galerkin, expected, atol=1e-14)

    def test_convection_kills_constants_and_mass_integrates_one(self):
        verts = [(0.1, 0.2), (0.3, 0.2), (0.1, 0.7)]
        area = 0.5 * 0.2 * 0.5
        conv_only = cfg(epsilon=1e-300, b1=2.0, b2=1.0, c=1e-300, N=8)
        g, _ = local_matrices(verts, conv_only)
        np.testing.assert_allclose(g @ np.ones(3), 0.0, atol=1e-14)
        mass_only = cfg(epsilon=1e-300, b1=1e-300, b2=1e-300, c=1.0, N=8)
        g, _ = local_matrices(verts, mass_only)
        np.testing.assert_allclose(g @ np.ones(3), area / 3, rtol=1e-12)

    def test_symmetric_part_without_stabilisation(self):
        # convection is skew on functions vanishing on the boundary
        mesh = ShishkinMesh.from_transition(8, 0.1, 0.2)
        full = assemble_system(mesh, cfg(epsilon=0.1, b1=2.0, b2=1.0, c=1.0, N=8, c_star=0.0)).matrix
        no_conv = assemble_system(mesh, cfg(epsilon=0.1, b1=1e-300, b2=1e-300, c=1.0, N=8, c_star=0.0)).matrix
        np.testing.assert_allclose((0.5 * (full + full.T)).toarray(), no_conv.toarray(), atol=1e-13)


class TestDelta:
    def test_values(self):
        c = cfg(N=64, c_star=0.5)
        assert delta_on_triangle("S", c) == 0.0078125
        for r in ("X", "Y", "XY"):
            assert delta_on_triangle(r, c) == 0.0

    def test_default_constant(self):
        c = cfg(N=32, b1=2.0, b2=1.0)
        assert delta_on_triangle("S", c) == pytest.approx(0.25 / 5.0 / 32)


def quadrature_form(v: FemFunction, w: FemFunction, c: ProblemConfig) -> float:
    """Bilinear form by quadrature, gradients recovered from vertex values by linear solves."""
    mesh = v.mesh
    rule = triangle_rule(5)
    total = 0.0
    bvec = np.array([c.b1, c.b2])
    for t in range(mesh.n_triangles):
        verts = mesh.nodes[mesh.triangles[t]]
        mat = np.column_stack([np.ones(3), verts])
        gv = np.linalg.solve(mat, v.coeffs[mesh.triangles[t]])[1:]
        gw = np.linalg.solve(mat, w.coeffs[mesh.triangles[t]])[1:]
        pts = rule.bary @ verts
        # nudge towards the centroid so point location is unambiguous
        pts = pts + 1e-12 * (verts.mean(axis=0) - pts)
        vq, wq = evaluate(v, pts[:, 0], pts[:, 1]), evaluate(w, pts[:, 0], pts[:, 1])
        area = 0.5 * abs(np.linalg.det(mat))
        i, j = mesh.triangle_cells[t]
        delta = c.stab_constant / c.N if (mesh.x_coords[i + 1] <= 1 - mesh.lambda_x
                                          and mesh.y_coords[j + 1] <= 1 - mesh.lambda_y) else 0.0
        integrand = (c.epsilon * gv @ gw + (bvec @ gv) * wq + c.c * vq * wq
                     + delta * ((bvec @ gv) + c.c * vq) * (bvec @ gw))
        total += area * np.sum(rule.weights * integrand)
    return total


class TestGlobalSystem:
    def test_size(self):
        system = assemble_system(build_mesh(cfg(epsilon=1e-4, N=8)), cfg(epsilon=1e-4, N=8))
        assert system.matrix.shape == (49, 49)

    def test_form_matches_independent_quadrature(self):
        c = cfg(epsilon=1e-3, N=8)
        mesh = build_mesh(c)
        system = assemble_system(mesh, c)
        rng = np.random.default_rng(7)
        for _ in range(3):
            v = FemFunction.from_interior(mesh, rng.uniform(-1, 1, system.n))
            w = FemFunction.from_interior(mesh, rng.uniform(-1, 1, system.n))
            ref = quadrature_form(v, w, c)
            assert system.form(v, w) == pytest.approx(ref, rel=1e-10)
            assert asd_p1(v, w, c) == pytest.approx(ref, rel=1e-10)

    def test_diagonal_positive(self):
        c = cfg(epsilon=1e-6, N=16)
        system = assemble_system(build_mesh(c), c)
        assert np.all(system.matrix.diagonal() > 0)


class TestRhs:
    def test_zero(self):
        c = cfg(epsilon=1e-4, N=8)
        np.testing.assert_array_equal(assemble_rhs(build_mesh(c), c, lambda x, y: 0 * x), 0.0)

    def test_one_without_stabilisation_equals_hat_integrals(self):
        c = cfg(epsilon=1e-4, N=8, c_star=0.0)
        mesh = build_mesh(c)
        rhs = assemble_rhs(mesh, c, lambda x, y: np.ones_like(x))
        # integral of a hat function = (patch area) / 3
        patch = np.zeros(mesh.n_nodes)
        np.add.at(patch, mesh.triangles.ravel(), np.repeat(mesh.geometry.area, 3) / 3)
        np.testing.assert_allclose(rhs, patch[mesh.interior_nodes], rtol=1e-13)

    def test_coarse_interior_node(self):
        c = cfg(epsilon=1e-4, N=8)
        mesh = build_mesh(c)
        node = mesh.node_index(2, 2)
        rhs = assemble_rhs(mesh, c, lambda x, y: np.ones_like(x))
        # stabilisation terms cancel around a node whose patch is entirely coarse
        assert rhs[mesh.interior_number[node]] == pytest.approx(mesh.H_x * mesh.H_y, rel=1e-13)


class TestEvaluate:
    def test_reproduces_linear_functions(self):
        mesh = build_mesh(cfg(epsilon=1e-3, N=8))
        u = nodal_interpolant(lambda x, y: 1 + 2 * x - 3 * y, mesh)
        rng = np.random.default_rng(1)
        x, y = rng.random(200), rng.random(200)
        np.testing.assert_allclose(evaluate(u, x, y), 1 + 2 * x - 3 * y, atol=1e-13)

    def test_nodal_values(self):
        mesh = build_mesh(cfg(epsilon=1e-3, N=8))
        u = FemFunction(mesh, np.arange(mesh.n_nodes, dtype=float))
        px, py = mesh.nodes.T
        np.testing.assert_allclose(evaluate(u, px, py), u.coeffs, atol=1e-12)

    def test_outside(self):
        mesh = build_mesh(cfg(epsilon=1e-3, N=8))
        with pytest.raises(ValueError):
            evaluate(FemFunction.zeros(mesh), 1.5, 0.5)


class TestSdNorm:
    def test_converges_for_smooth_function(self):
        # |sin(pi x) sin(pi y)|_1^2 = pi^2 / 2 and ||.||^2 = 1/4
        c = cfg(epsilon=1.0 / 256, N=256, c_star=0.0)
        mesh = ShishkinMesh.from_transition(256, 0.5, 0.5)
        u = nodal_interpolant(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), mesh)
        assert sd_norm(u, c, squared=True) == pytest.approx(c.epsilon * np.pi**2 / 2 + 0.25, rel=1e-3)

    @settings(max_examples=25, deadline=None)
    @given(alpha=st.floats(-10, 10).filter(lambda a: a == 0 or abs(a) > 1e-100), seed=st.integers(0, 2**16))
    def test_homogeneous(self, alpha, seed):
        c = cfg(epsilon=1e-4, N=8)
        mesh = build_mesh(c)
        u = FemFunction.from_interior(mesh, np.random.default_rng(seed).uniform(-1, 1, 49))
        assert sd_norm(u * alpha, c) == pytest.approx(abs(alpha) * sd_norm(u, c), rel=1e-12, abs=1e-300)

    def test_zero_only_for_zero(self):
        c = cfg(epsilon=1e-4, N=8)
        mesh = build_mesh(c)
        assert sd_norm(FemFunction.zeros(mesh), c) == 0.0
        assert sd_norm(FemFunction.from_interior(mesh, np.eye(49)[3]), c) > 0.0
