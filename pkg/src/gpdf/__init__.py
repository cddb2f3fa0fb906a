"""Numerical laboratory for cubic NLS dynamics and their de Finetti hierarchies.

The package couples a split-step spectral solver for the cubic nonlinear
Schroedinger equation on a periodic box with exact operator algebra for
the marginal-density hierarchies generated by finitely atomic measures on
one-body states: trace functionals, contraction operators, scattering
diagnostics, virial blowup certificates, and the super-exponential
trace-growth dichotomy.
"""

__version__ = "0.1.0"

from .grid import BoxGrid, Field, WaveFunction  # noqa: F401
from .dynamics import SolverConfig, Trajectory, evolve, strang_step  # noqa: F401
from .ensemble import AtomicMeasure, GaussianProfile, build_blowup_measure  # noqa: F401
