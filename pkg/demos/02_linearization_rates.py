"""
How fast does the nonlinear response become linear?

theta_{eps f}/eps approaches the linear solution w with error O(eps), and
the mixed second difference quotient approaches the bilinear response v,
again at rate eps. We sweep eps over two decades and fit log-log slopes.
"""
from activescalar import FourierLattice, MultiplierSpec, TimeGrid
from activescalar.linearization import (convergence_rate_fit, first_order_sweep,
                                        second_order_sweep, two_mode_sources)

lat = FourierLattice(32)
grid = TimeGrid(0.5, 100)
spec = MultiplierSpec.perturbed()
f1, f2 = two_mode_sources(lat)
eps = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)

for label, sweep in (("first order", first_order_sweep(f1 + f2, spec, 0.75, grid, eps)),
                     ("second order", second_order_sweep(f1, f2, spec, 0.75, grid, eps))):
    print(label)
    for name, vals in sweep.norms.items():
        print(f"  {name:12s}", "  ".join(f"{v:.3e}" for v in vals))
    for name, fit in convergence_rate_fit(sweep).items():
        print(f"  slope {name:12s} {fit.slope:.4f}")

# an x1-only pair has no nonlinear interaction at all
x1_sweep = second_order_sweep(f1, 0.5 * f1, spec, 0.75, grid, eps)
print("x1-only second-order residuals:",
      max(v.max() for v in x1_sweep.norms.values()), "(round-off)")
