"""Sweep the Kirchhoff weight and watch the ground-state level respond.

The nonlocal gradient term penalizes concentration, so the level c(b)
must be nondecreasing in b: a larger b only adds energy to any competitor
state.  The sweep verifies the trend on computed outputs.
"""

import math

import kclattice as kc

base = kc.ProblemSpec(
    box=kc.LatticeBox(5),
    potential=kc.PotentialSpec.coercive(1.0, 1.0, 2.0),
    nonlinearity=kc.PowerNonlinearity(1.0, 3.0),
    alpha=1.0,
    a=1.0,
    b=0.0,
)
kernel = kc.build_kernel(base.alpha, 2 * base.box.radius)

weights = [0.0, 0.25, 0.5, 1.0, 2.0]
print(f"{'b':>6}  {'energy c':>18}  {'residual':>10}  {'||u||_H':>12}  iters")
levels = []
for b in weights:
    spec = kc.ProblemSpec(
        box=base.box,
        potential=base.potential,
        nonlinearity=base.nonlinearity,
        alpha=base.alpha,
        a=base.a,
        b=b,
    )
    rep = kc.solve_ground_state(spec, kernel)
    assert rep.converged, rep.message
    norm = math.sqrt(spec.h_inner(rep.solution, rep.solution))
    total = rep.iterations + rep.newton_iterations
    print(f"{b:6.2f}  {rep.energy:18.9f}  {rep.residual:10.2e}  {norm:12.6f}  {total}")
    levels.append(rep.energy)

monotone = all(x <= y for x, y in zip(levels, levels[1:]))
print()
print(f"level nondecreasing in b: {monotone}")
