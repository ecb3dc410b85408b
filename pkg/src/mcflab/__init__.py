"""Numerical laboratory for graphical mean curvature flow solitons.

Submodules:

``gridfield``  grids, sampled graphs f: B -> R^k, jets, interpolation, quadrature
``geometry``   induced metric, normal projection, second fundamental form, H
``soliton``    residuals of H + F_perp = 0 and a pseudo-time Dirichlet solver
``flow``       explicit graphical MCF and its rescaled (normalized) form
``analysis``   integral estimates, blow-down sequences and cone profiles
``cli``        the ``mcflab`` command
"""

__version__ = "0.1.0"

from . import analysis, fixtures, flow, geometry, gridfield, soliton  # noqa: E402,F401
from .gridfield import GraphField, GridSpec, build_field, load_field, save_field  # noqa: E402,F401
