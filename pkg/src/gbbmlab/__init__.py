"""gbbmlab: spectral simulator and statistical laboratory for the
generalized BBM equation on the one-dimensional torus.

Subpackages: spectral (field representation and norms), flow (free and
truncated nonlinear flows with Liouville/linearization diagnostics),
measures (Gaussian sampling and density bookkeeping), transport (Monte
Carlo change-of-variables and singular-transport experiments), energy
(energy-estimate and large-deviation laboratory), cli (experiment runner).
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["__version__", "kernel_backend"]
