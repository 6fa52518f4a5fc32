"""G(xi) - G(0) along a ray grows like 4 pi m |xi|^2 for large lambda."""
import numpy as np

from cmcspheres import ls_solver as ls
from cmcspheres import metric_models as mm
from cmcspheres.cli_harness import fit_quadratic

model = mm.schwarzschild(1.0)
ts = np.linspace(0.0, 0.5, 9)[1:]

for lam in (50.0, 100.0, 200.0):
    G0 = ls.solve_graph(np.zeros(3), lam, model, with_derivative=False).G_value
    G = [ls.solve_graph(np.array([t, 0.0, 0.0]), lam, model, with_derivative=False).G_value for t in ts]
    c = fit_quadratic(ts, G0, G)
    print(f"lambda={lam:5.0f}  coefficient/(4 pi m) = {c / (4 * np.pi):.5f}")

# the gradient near the origin is 8 pi m xi
xi = np.array([0.05, 0.0, 0.0])
_, grad = ls.reduced_function(xi, 100.0, model)
print("grad G at xi=0.05 e1:", grad, " vs 8 pi m xi:", 8 * np.pi * xi)

leaf = ls.find_critical_point(100.0, model, xi0=(0.2, -0.1, 0.05))
print("critical point from (0.2,-0.1,0.05):", leaf.xi)
