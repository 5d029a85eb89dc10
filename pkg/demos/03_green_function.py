"""
The discrete Green's function and its weighted norm
===================================================

One transpose solve gives G for a source node x*.  The weight decays
upstream of x* and away from the streamline through it, so the weighted
norm mostly sees G where it is large.
"""

import numpy as np

from sdgreen import (Directions, ProblemConfig, assemble_system, build_mesh, compute_green, omega0_prime,
                     sd_norm, weight, weighted_norm)
from sdgreen.green import region_norms

cfg = ProblemConfig(epsilon=1e-6, N=64)
mesh = build_mesh(cfg)
system = assemble_system(mesh, cfg)
dirs = Directions.from_config(cfg)

for selector in ("center-S", "mid-X", "mid-Y"):
    green = compute_green(system, selector)
    wp = green.weight_params
    G = green.G
    print(f"\nx* = {selector} {green.x_star}, region {green.region}")
    print(f"  G(x*) = {G.coeffs[green.node]:.4f}, max |G| = {np.abs(G.coeffs).max():.4f}")

    # %%
    # a_SD(v, G) reproduces v(x*) for any v in the finite element space.
    v = np.random.default_rng(1).uniform(-1, 1, system.n)
    print(f"  a_SD(v, G) - v(x*) = {G.interior @ (system.matrix @ v) - v[mesh.interior_number[green.node]]:.2e}")

    # %%
    # Energy norm against weighted norm, and how the latter splits by block.
    energy, wnorm = sd_norm(G, cfg), weighted_norm(G, wp, dirs, cfg)
    print(f"  |||G||| = {energy:.4f}, |||G|||_omega = {wnorm:.4f}, ratio = {energy / wnorm:.4f}")
    print("  by block:", {k: round(val, 4) for k, val in region_norms(G, wp, dirs, cfg).items()})

    # %%
    # The influence region: triangles that meet it with positive area.  Its
    # half-widths grow like sigma ln N, which at desk-scale N and k = 4 still
    # exceeds the unit square.
    tris, measure = omega0_prime(mesh, wp, dirs)
    print(f"  {tris.size} of {mesh.n_triangles} triangles touch the influence region, area {measure:.4f}")

# %%
# The weight along the streamline through x*: it tends to 2 upstream and
# decays like 2 exp(-r) downstream.
green = compute_green(system, "center-S")
wp = green.weight_params
for s in (-0.4, -0.2, 0.0, 0.2, 0.4):
    p = np.array(green.x_star) + s * dirs.beta
    print(f"omega at {s:+.1f} along beta: {float(weight(p, wp, dirs).omega):.4f}")
