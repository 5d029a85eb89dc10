"""
Checking the weighted-norm inequalities
=======================================

For each source position: the smallest k on the grid for which the
coercivity-type and interpolation inequalities hold, the empirical constant
of the pointwise bound, and how the weighted norm grows with N.
"""

import math

from sdgreen import ProblemConfig, assemble_system, build_mesh, compute_green
from sdgreen.diagnostics import (lemma1_check, lemma2_check, lemma3_check, theorem_instance_check,
                                 theorem_scaling)

eps = 1e-6
norms = {}
print(f"{'x*':>9} {'N':>4} {'coer k':>6} {'intp k':>6} {'point C':>10} {'|||G|||':>9} {'sqrt8 |||G|||_w':>16}")
for selector in ("center-S", "mid-X", "mid-Y"):
    for N in (16, 32, 64):
        cfg = ProblemConfig(epsilon=eps, N=N)
        green = compute_green(assemble_system(build_mesh(cfg), cfg), selector)
        l1, l3, l2 = lemma1_check(green), lemma3_check(green), lemma2_check(green)
        thm = theorem_instance_check(green)
        norms.setdefault(selector, {})[N] = thm.extra["weighted_norm"]
        print(f"{selector:>9} {N:>4} {l1.extra['min_k']:>6g} {l3.extra['min_k']:>6g} {l2.ratio:>10.3e} "
              f"{thm.lhs:>9.4f} {thm.rhs:>16.4f}")

# %%
# The weighted norm divided by sqrt(N ln N) should stay bounded.
for selector, by_n in norms.items():
    rep = theorem_scaling(by_n)
    r = ", ".join(f"{N}: {v / math.sqrt(N * math.log(N)):.4f}" for N, v in sorted(by_n.items()))
    print(f"{selector:>9}: r(N) = {r}; growth over N=32 is {rep.ratio:.3f} ({'ok' if rep.passed else 'too fast'})")
