"""Averaging-based global extremum seeking with double-integrator dynamics."""

from .ode import IntegrationError, IntegratorConfig, Trajectory, integrate, resample

__version__ = "0.1.0"
__all__ = ["IntegrationError", "IntegratorConfig", "Trajectory", "integrate", "resample", "__version__"]
