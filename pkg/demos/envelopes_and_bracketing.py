"""Trap a perturbed periodic state between two purely periodic ones.

The indicator of [0, 1) is folded onto coarser and coarser period boxes rZ.
Its periodic envelopes have sup norm M_r = 1/r, which shrinks as r grows.
Adding p to them gives two periodic data sets with prescribed means. They
bracket p + v, so comparison pins the perturbed solution between two
solutions that each decay to their own mean.
"""

import numpy as np

from decaylab.lattice import PeriodStructure
from decaylab.problem import build_bracketing_data, indicator, periodic_envelopes, sine
from decaylab.solver import GridField

Z = PeriodStructure.integer_lattice(1, 1)
chi = indicator(1.0, [0.0], [1.0])
v = GridField.from_function(chi, (-8.0,), (8.0,), 512)
p = sine(0.5, (1,))

print("  r    M_r     eps+     eps-   down mean   up mean   bracket holds")
for r in (4, 8, 16):
    env = periodic_envelopes(v, Z, r)
    down, up = build_bracketing_data(p, env, 0.0, -0.3, 0.3)
    u0 = GridField.from_function(lambda x: p(x) + chi(x), up.lower, up.upper, up.cells).data
    holds = bool(np.all(down.data <= u0) and np.all(u0 <= up.data))
    print(f"{r:3d}  {env.M_r:6.4f}  {env.eps_plus:7.4f}  {env.eps_minus:7.4f}"
          f"  {down.data.mean():9.4f}  {up.data.mean():8.4f}   {holds}")
