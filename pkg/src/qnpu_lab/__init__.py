"""Variational solvers for nonlinear problems on simulated quantum registers.

Submodules are imported on demand; importing the package itself stays
light so the command-line entry point can configure thread pools first.
"""

__version__ = "0.1.0"
