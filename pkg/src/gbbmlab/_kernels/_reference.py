"""Pure-numpy kernels for the truncated mode ODE.

The state is the vector of positive-mode coefficients u_hat(1..N); the
negative modes are implied by conjugate symmetry.  The flow is

    d/dt u_hat(n) = -i omega_n (u_hat(n) + c_n(u)),   omega_n = n/(1+n^gamma)

with c_n the quadratic convolution truncated to |n1|, |n2| <= N.  These
routines are the hot path; the Cython backend mirrors their semantics.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

BACKEND_NAME = "python"

# below this mode count the direct pair sum beats zero-padded transforms,
# especially for wide Monte Carlo batches
_DIRECT_N_MAX = 8


def _fft_len(N: int) -> int:
    # alias-free length for modes |n| <= N of a product of two such fields
    L = 1
    while L < 3 * N + 1:
        L *= 2
    return L


@lru_cache(maxsize=None)
def _pair_table(N: int):
    """Index pairs into the signed-mode line -N..N (offset N) per output mode."""
    table = []
    for n in range(1, N + 1):
        ks = [k for k in range(-N, N + 1)
              if k != 0 and n - k != 0 and abs(n - k) <= N]
        table.append((np.array([N + k for k in ks], dtype=np.intp),
                      np.array([N + n - k for k in ks], dtype=np.intp)))
    return table


def _full_line(coeffs: np.ndarray) -> np.ndarray:
    N = coeffs.shape[-1]
    full = np.zeros(coeffs.shape[:-1] + (2 * N + 1,), dtype=np.complex128)
    full[..., N + 1:] = coeffs
    full[..., :N] = np.conj(coeffs[..., ::-1])
    return full


def quadratic_convolution(coeffs: np.ndarray) -> np.ndarray:
    """c_n = sum_{n1+n2=n, 0<|n1|,|n2|<=N} u_{n1} u_{n2} for n = 1..N.

    Accepts any leading batch shape; the mode axis is the last one.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    N = coeffs.shape[-1]
    if N == 0:
        return coeffs.copy()
    if N <= _DIRECT_N_MAX:
        full = _full_line(coeffs)
        out = np.empty_like(coeffs)
        for n, (left, right) in enumerate(_pair_table(N)):
            out[..., n] = np.sum(full[..., left] * full[..., right], axis=-1)
        return out
    L = _fft_len(N)
    full = np.zeros(coeffs.shape[:-1] + (L,), dtype=np.complex128)
    full[..., 1: N + 1] = coeffs
    full[..., L - N:] = np.conj(coeffs[..., ::-1])
    grid = np.fft.ifft(full, axis=-1)
    prod = np.fft.fft(grid * grid, axis=-1) * L
    return prod[..., 1: N + 1]


def bilinear_convolution(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Truncated convolution sum_{n1+n2=n} u_{n1} v_{n2}, modes 1..N.

    u and v broadcast against each other over leading axes.
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    N = u.shape[-1]
    if v.shape[-1] != N:
        raise ValueError("mode counts must agree")
    if N == 0:
        return (u * v).copy()
    L = _fft_len(N)

    def lift(w):
        full = np.zeros(w.shape[:-1] + (L,), dtype=np.complex128)
        full[..., 1: N + 1] = w
        full[..., L - N:] = np.conj(w[..., ::-1])
        return np.fft.ifft(full, axis=-1)

    prod = np.fft.fft(lift(u) * lift(v), axis=-1) * L
    return prod[..., 1: N + 1]


def rhs(coeffs: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return -1j * omega * (coeffs + quadratic_convolution(coeffs))


def rk4_step(u: np.ndarray, omega: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(u, omega)
    k2 = rhs(u + 0.5 * h * k1, omega)
    k3 = rhs(u + 0.5 * h * k2, omega)
    k4 = rhs(u + h * k3, omega)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def run_flow(u0, omega, cons_weights, energy_weights, h, n_steps, record_stride):
    """RK4 on the mode ODE with per-step conservation monitoring.

    Returns (states, conserved, energy, max_rel_drift, blowup_step) where
    states[k] is the state at step indices 0, stride, 2*stride, ..., n_steps
    (final step always recorded), conserved/energy are logged at the same
    indices, max_rel_drift tracks every step, and blowup_step is the first
    step with a non-finite state (-1 if none).
    """
    u = np.array(u0, dtype=np.complex128)
    omega = np.asarray(omega, dtype=np.float64)
    cons_w = np.asarray(cons_weights, dtype=np.float64)
    en_w = np.asarray(energy_weights, dtype=np.float64)

    rec_idx = list(range(0, n_steps + 1, max(record_stride, 1)))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    rec_set = set(rec_idx)

    states = np.empty((len(rec_idx), len(u)), dtype=np.complex128)
    conserved = np.empty(len(rec_idx))
    energy = np.empty(len(rec_idx))

    def cons(w):
        return float(np.sum(cons_w * (w.real ** 2 + w.imag ** 2)))

    def ener(w):
        return float(np.sum(en_w * (w.real ** 2 + w.imag ** 2)))

    with np.errstate(over="ignore", invalid="ignore"):
        c0 = cons(u)
        e0 = ener(u)
    scale = c0 if c0 > 0.0 else 1.0
    max_drift = 0.0
    pos = 0
    states[pos] = u
    conserved[pos] = c0
    energy[pos] = e0
    pos += 1

    # overflow is detected and reported explicitly, not via numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            u = rk4_step(u, omega, h)
            if not np.all(np.isfinite(u.view(np.float64))):
                return states[:pos], conserved[:pos], energy[:pos], max_drift, step
            c = cons(u)
            max_drift = max(max_drift, abs(c - c0) / scale)
            if step in rec_set:
                states[pos] = u
                conserved[pos] = c
                energy[pos] = ener(u)
                pos += 1

    return states, conserved, energy, max_drift, -1


def evolve_batch(states: np.ndarray, omega: np.ndarray, h: float, n_steps: int) -> np.ndarray:
    """Advance a whole (M, N) batch of states n_steps RK4 steps."""
    u = np.array(states, dtype=np.complex128)
    for _ in range(n_steps):
        u = rk4_step(u, omega, h)
    return u
