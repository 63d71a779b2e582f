"""lagflow: nonholonomic geometry of regular Lagrangians and the induced
bi-Hamiltonian mKdV / sine-Gordon flow hierarchy on a periodic domain."""

__version__ = "0.1.0"

from . import dsl, frames, geometry, soliton, spectral  # noqa: F401
