"""A flux that is affine near the mean can keep a perturbation alive forever.

The piecewise-linear flux max(0, -u) is affine on each side of 0, so the
nonlinearity set around mean 0 collapses to a single point. Start from the
periodic profile plus a small plateau of height eps on [0, eps) and watch the
X-norm: the periodic part dies at t = 2, the perturbation settles into a
stationary plateau of height 1 + eps and its norm stays at eps.
"""

from decaylab.analysis import x_norm
from decaylab.oracle import example1_cell_averages, example1_model
from decaylab.problem import enlarged_domain
from decaylab.solver import SchemeConfig, evolve

eps, t_end = 0.5, 6.0
lower, upper, _ = enlarged_domain([2.0], 1.0, 1.0, t_end)
cells = int(400 * (upper[0] - lower[0]))
times = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)

u0 = example1_cell_averages(0.0, lower[0], upper[0], cells, eps)
traj = evolve(u0, example1_model(), SchemeConfig("godunov_1d", 0.9, t_end, times))

print(f"torus [{lower[0]:g}, {upper[0]:g}), {cells} cells, eps = {eps}")
print("   t    x_norm   max u")
for i, t in enumerate(traj.times):
    u = traj.field_at(i)
    print(f"{t:4.1f}  {x_norm(u):8.5f}  {u.data.max():6.3f}")
print(f"the norm does not decay: it locks at eps = {eps}")
