"""Walk outward through the CMC foliation of Schwarzschild (m = 1).

For each leaf we print lambda*H, the stability gap and the Hawking mass,
and compare H against the radial leaf computed by 1D quadrature.
"""
import sys
from pathlib import Path

import numpy as np

from cmcspheres import ls_solver as ls
from cmcspheres import metric_models as mm
from cmcspheres import surface_geometry as sg

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import centered_leaf_H  # noqa: E402

model = mm.schwarzschild(1.0)
lambdas = [25.0, 50.0, 100.0, 200.0]
leaves, rep = ls.foliation_sweep(model, lambdas)

print(f"{'lambda':>8} {'lambda*H':>12} {'H/oracle-1':>12} {'lowest eig':>12} {'6m/R^3':>12} {'m_H':>10}")
for lf in leaves:
    stab = ls.stability_spectrum(lf)
    R = np.sqrt(sg.area(lf.surface) / (4 * np.pi))
    print(f"{lf.lam:8.0f} {lf.lam * lf.H_mean:12.8f} {lf.H_mean / centered_leaf_H(lf.lam, 1.0) - 1:12.2e} "
          f"{stab.lowest_meanzero_eigenvalue:12.4e} {6 / R**3:12.4e} {sg.hawking_mass(lf.surface):10.7f}")

print()
print("H decreasing:", rep.h_decreasing, " leaves nested:", rep.ordered)
print(f"|lambda H - 2| decays like lambda^-{rep.remainder_order:.2f}")
