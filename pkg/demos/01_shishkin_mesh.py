"""
Shishkin meshes for a convection-dominated problem
==================================================

How the transition points and the fine step size react to epsilon and N.
"""

import numpy as np

from sdgreen import ProblemConfig, build_mesh

# %%
# The transition point sits at 1 - lambda, with lambda proportional to
# epsilon ln N.  Half of the mesh intervals go into the thin layer.
print(f"{'eps':>8} {'N':>5} {'lambda_x':>12} {'H_x':>10} {'h_x':>12} {'H/h':>10}")
for eps in (1e-2, 1e-4, 1e-6, 1e-8):
    for N in (16, 64):
        mesh = build_mesh(ProblemConfig(epsilon=eps, N=N, warn=False))
        print(f"{eps:>8.0e} {N:>5} {mesh.lambda_x:>12.4e} {mesh.H_x:>10.4f} {mesh.h_x:>12.4e} "
              f"{mesh.H_x / mesh.h_x:>10.3g}")

# %%
# Every cell is cut by the diagonal from its upper-left to its lower-right
# corner, and each triangle is tagged with the block it belongs to.
mesh = build_mesh(ProblemConfig(epsilon=1e-6, N=8))
counts = {r: int(np.sum(mesh.region_mask(r))) for r in ("S", "X", "Y", "XY")}
print("triangles per region:", counts)
print("first cell, lower triangle:\n", mesh.nodes[mesh.triangles[0]])
print("first cell, upper triangle:\n", mesh.nodes[mesh.triangles[1]])

# %%
# Areas add up to one, which is a cheap sanity check on the geometry.
print("total area:", mesh.geometry.area.sum())
