"""In two dimensions a flat flux component can freeze a whole direction.

The second flux component is constant within delta of the mean, so data that
varies only in x2 by less than delta never moves. The averages over x1 are
printed at a few times: they are the same sine profile throughout.
"""

from fractions import Fraction

import numpy as np

from decaylab.analysis import slice_means
from decaylab.flux import PRESETS
from decaylab.lattice import PeriodStructure
from decaylab.problem import nondecaying_example
from decaylab.solver import SchemeConfig, evolve

delta = 0.5
init = nondecaying_example(delta, PeriodStructure.integer_lattice(2, 1), (0, 1), 1)
u0 = init.sample((0, 0), (1, 1), (64, 64))
traj = evolve(u0, PRESETS["flat_band"](0.0, Fraction(1, 2)), SchemeConfig("engquist_osher", 0.9, 5.0, (0.0, 2.5, 5.0)))

rows = np.arange(0, 64, 8)
print("y2     " + "  ".join(f"{y:6.3f}" for y in u0.axis_centers(1)[rows]))
for i, t in enumerate(traj.times):
    m = slice_means(traj.field_at(i), 1)[rows]
    print(f"t={t:<4g} " + "  ".join(f"{x:6.3f}" for x in m))
