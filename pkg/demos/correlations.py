"""Two-map correlation of cos 2pi y against its Bessel closed form, then the singular limit."""
import math

from scipy.special import jv

from stdmap_lab.ensembles import correlation, singular_limit_scan
from stdmap_lab.family import CoefficientSchedule, Composition, trig_standard
from stdmap_lab.observables import get

fam = trig_standard()
for L in (1e3, 1e4):
    comp = Composition(fam, CoefficientSchedule.constant(L), 0.75)
    est, se = correlation(get("cos2piy"), get("cos2piy"), comp, 1, 2, budget=1_000_000, seed=1)
    print(f"L={L:.0e}: corr {est:+.3e} +- {se:.1e}, J_2(2 pi L)/2 = {0.5 * jv(2, 2 * math.pi * L):+.3e}")

tab = singular_limit_scan(fam, [1e3, 1e4], budget=500_000)
for r in tab.rows:
    print(f"{r.row_id:22s} {r.estimate:+.2e} +- {r.std_error:.1e} {'ok' if r.passed else 'FAIL'}")
