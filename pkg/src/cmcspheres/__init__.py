"""Large constant-mean-curvature spheres in asymptotically flat 3-metrics."""

from .errors import CMCError, ConfigError
from .flux_invariants import adm_mass, drift_obstruction, hamiltonian_com
from .ls_solver import (LSLeaf, SolverOptions, find_critical_point, foliation_sweep, reduced_function,
                        solve_graph, stability_spectrum)
from .metric_models import MetricModel, PerturbationTerm, catalog, eval_metric_jet
from .sphere_spectral import SphereField, SphereGrid, get_grid
from .surface_geometry import GraphSurface, compute_extrinsic

__version__ = "0.1.0"
