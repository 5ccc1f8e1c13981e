"""
Telling two multipliers apart from window data.

If two multipliers produce the same window measurements, a bilinear
pairing of second-order responses vanishes for every test function off W.
For the Riesz multiplier against a perturbed one it does not, and with
static bump probes the same pairing samples grad(K1 - K2) at the offset
between the bumps.
"""
import numpy as np

from activescalar import FourierLattice, MultiplierSpec, TimeGrid, Window
from activescalar.experiments import default_probe_function, default_source_pair
from activescalar.inverse import (polar_offsets, reconstruct_kernel_gradient,
                                  second_order_identity_residual)

lat = FourierLattice(64)
grid = TimeGrid(0.5, 100)
W = Window((0.0, 0.0), 0.1)
R, P = MultiplierSpec.riesz(), MultiplierSpec.perturbed()
f1, f2 = default_source_pair(lat, W)
phi = default_probe_function(lat)
print("pairing, Riesz vs Riesz:    ", second_order_identity_residual(R, R, f1, f2, phi, 0.75,
                                                                     grid, W))
print("pairing, Riesz vs perturbed:", second_order_identity_residual(R, P, f1, f2, phi, 0.75,
                                                                     grid, W))

tab = reconstruct_kernel_gradient(R, P, polar_offsets(3, 8, 0.2, 0.4), 0.05,
                                  FourierLattice(128), W)
print(f"\n{'offset':>16s} {'axis':>4s} {'sampled':>10s} {'truth':>10s}")
for d, j, s, t in list(zip(tab.offsets, tab.axis, tab.sampled, tab.truth))[::6]:
    print(f"({d[0]:+.3f}, {d[1]:+.3f}) {j:4d} {s:10.4f} {t:10.4f}")
print(f"relative L2 error over {len(tab.offsets) // 2} offsets: {tab.relative_l2_error:.4f}")
print("largest |truth|:", np.abs(tab.truth).max())
