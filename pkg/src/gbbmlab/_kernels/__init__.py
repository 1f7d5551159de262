"""Kernel backend selection.

The RK4 stepping of the truncated mode ODE dominates runtime for long
trajectories, so it has a compiled (Cython) implementation next to the
pure-numpy one.  Selection happens once at import:

    GBBMLAB_BACKEND=auto      compiled if built, else python (default)
    GBBMLAB_BACKEND=python    force the numpy kernels
    GBBMLAB_BACKEND=compiled  require the extension (ImportError if absent)

``run_flow`` (sequential trajectories) and ``evolve_batch`` (Monte Carlo
ensembles) are backend-switched; the remaining vectorized helpers stay in
numpy where they are already at C speed.  The two backends differ in
rounding only, never in truncation.
"""

import os

from . import _reference

_choice = os.environ.get("GBBMLAB_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise RuntimeError(f"GBBMLAB_BACKEND must be auto/python/compiled, got {_choice!r}")

_fast = None
if _choice in ("auto", "compiled"):
    try:
        from . import _fastcore as _fast
    except ImportError:
        if _choice == "compiled":
            raise
        _fast = None

# the direct O(N^2) convolution in the extension beats the zero-padded
# transforms up to roughly this many modes (see benchmarks/bench_kernels.py)
_CROSSOVER_N = 96

if _fast is None:
    BACKEND = "python"
    run_flow = _reference.run_flow
    evolve_batch = _reference.evolve_batch
elif _choice == "compiled":
    BACKEND = "compiled"
    run_flow = _fast.run_flow
    evolve_batch = _fast.evolve_batch
else:
    BACKEND = "compiled"

    def run_flow(u0, omega, cons_weights, energy_weights, h, n_steps, record_stride):
        impl = _fast if len(u0) <= _CROSSOVER_N else _reference
        return impl.run_flow(u0, omega, cons_weights, energy_weights, h,
                             n_steps, record_stride)

    evolve_batch = _fast.evolve_batch

quadratic_convolution = _reference.quadratic_convolution
bilinear_convolution = _reference.bilinear_convolution
rhs = _reference.rhs
rk4_step = _reference.rk4_step

__all__ = [
    "BACKEND",
    "run_flow",
    "quadratic_convolution",
    "bilinear_convolution",
    "rhs",
    "rk4_step",
    "evolve_batch",
]
