"""Complex geometric optics solutions concentrated near planes, and the
boundary-data route to plane integrals of a potential."""

__version__ = "0.1.0"

from .geometry import BallDomain, Plane, PlaneFrame  # noqa: E402,F401
from .fields import GridField  # noqa: E402,F401
from .faddeev import RhoParam  # noqa: E402,F401

__all__ = ["BallDomain", "GridField", "Plane", "PlaneFrame", "RhoParam", "__version__"]
