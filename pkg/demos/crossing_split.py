"""Split a horizontal circle into fully crossing pieces and track distortion."""
import numpy as np

from stdmap_lab.curves import full_crossing_split, iterate_crossing_split, seed_curve, tangent_distortion
from stdmap_lab.family import CoefficientSchedule, Composition, linear_test, trig_standard

lin = Composition(linear_test(10), CoefficientSchedule.constant(10.0), 0.75)
for k in (1, 2, 3):
    d = iterate_crossing_split(seed_curve(0.0, 1.0, 0.3), lin, 1, k)
    print(f"linear q=10, {k} stage(s): {int(d.piece_count)} pieces, excised {d.excised_measure:.4f}")

for L in (1e3, 1e4, 1e5):
    st = Composition(trig_standard(), CoefficientSchedule.constant(L), 0.75).stage(1)
    d = full_crossing_split(seed_curve(0.0, 1.0, 0.0), st)
    rep = tangent_distortion(d.pieces, 16, rng=np.random.default_rng(0))
    print(f"trig L={L:.0e}: {len(d.pieces)} pieces, excised {d.excised_measure:.3e}, "
          f"max log distortion {rep.max_log_ratio:.3e}")
