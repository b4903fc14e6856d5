"""Burgers' flux is genuinely nonlinear, so periodic data decays to its mean.

A sine wave steepens into a sawtooth whose amplitude falls like 1/t. The
torus L1 distance to the mean is printed against the 1/(4t) sawtooth rate
it approaches.
"""

import numpy as np

from decaylab.analysis import torus_l1_distance
from decaylab.flux import PRESETS
from decaylab.lattice import PeriodStructure
from decaylab.solver import GridField, SchemeConfig, evolve

u0 = GridField.from_function(lambda x: np.sin(2 * np.pi * x[0]), (0,), (1,), 512, subsamples=8)
times = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
traj = evolve(u0, PRESETS["burgers"]((-1.5, 1.5)), SchemeConfig("local_lax_friedrichs", 0.9, 20.0, times, (-1, 1)))
S = PeriodStructure.integer_lattice(1, 1)

print("   t   ||u - 0||_L1(T)   1/(4t)")
for i, t in enumerate(traj.times):
    d = torus_l1_distance(traj.field_at(i), 0.0, S)
    rate = f"{1 / (4 * t):.5f}" if t > 0 else "   -"
    print(f"{t:5.1f}  {d:14.5f}   {rate}")
