"""Stopping-time tails for L_n = max(1e3, n^6) on a square of side 0.1."""
import numpy as np

from stdmap_lab.family import CoefficientSchedule, Composition, trig_standard
from stdmap_lab.foliation import Square, survival_tail, track_sigma

comp = Composition(trig_standard(), CoefficientSchedule.polynomial(6, 1e3), 0.7)
S = Square(0.3, 0.3, 0.1)
x, y = S.sample(20_000, 0)
rec = track_sigma(comp, x, y, S, N_max=100, sigma_horizon=90)
th = [2, 4, 8, 16, 32]
for w in ("tau", "tau_bar", "sigma"):
    s = survival_tail(rec, w, comp, th, truncate_at=100)
    print(w, " ".join(f"P(>{n})={p:.4f}" for n, p in zip(th, s.empirical)))
print("ordering holds on", int(np.sum(rec.ordering_ok())), "of", len(rec), "samples")
print("persistence holds on", int(np.sum(rec.persistence_ok)), "of", len(rec), "samples")
