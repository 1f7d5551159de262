# cython: language_level=3
"""Compiled inner loop for the truncated mode ODE.

Same contract as gbbmlab._kernels._reference.run_flow, with the quadratic
convolution done by direct summation over the coefficient line instead of
zero-padded transforms (identical truncation, different rounding only).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


cdef void _conv_trunc(double complex[::1] full, double complex[::1] out, Py_ssize_t N) nogil:
    # full holds modes -N..N at offset N (mean slot zero);
    # out[n-1] = sum over k of full[k] * full[n-k] for n = 1..N
    cdef Py_ssize_t n, k, lo
    cdef double complex acc
    for n in range(1, N + 1):
        acc = 0
        lo = n - N
        if lo < -N:
            lo = -N
        for k in range(lo, N + 1):
            if k == 0 or k == n:
                continue
            acc = acc + full[N + k] * full[N + n - k]
        out[n - 1] = acc


cdef void _fill_full(double complex[::1] u, double complex[::1] full, Py_ssize_t N) nogil:
    cdef Py_ssize_t i
    full[N] = 0
    for i in range(N):
        full[N + 1 + i] = u[i]
        full[N - 1 - i] = u[i].conjugate()


cdef void _rhs(double complex[::1] u, double[::1] omega,
               double complex[::1] full, double complex[::1] out, Py_ssize_t N) nogil:
    cdef Py_ssize_t i
    _fill_full(u, full, N)
    _conv_trunc(full, out, N)
    for i in range(N):
        out[i] = -1j * omega[i] * (u[i] + out[i])


def quadratic_convolution(coeffs):
    """Direct-summation truncated convolution (single state, modes 1..N)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] u = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef Py_ssize_t N = u.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] full = np.zeros(2 * N + 1, dtype=np.complex128)
    if N == 0:
        return out
    _fill_full(u, full, N)
    _conv_trunc(full, out, N)
    return out


def evolve_batch(states, omega, double h, Py_ssize_t n_steps):
    """Advance a whole (M, N) batch of states n_steps RK4 steps."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] U = np.array(states, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t M = U.shape[0], N = U.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] full = np.zeros(2 * N + 1, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k1 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k2 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k3 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k4 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] tmp = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] u = np.empty(N, dtype=np.complex128)

    cdef double complex[:, ::1] Uv = U
    cdef double complex[::1] uv = u, fullv = full, tmpv = tmp
    cdef double complex[::1] k1v = k1, k2v = k2, k3v = k3, k4v = k4
    cdef double[::1] omv = om
    cdef Py_ssize_t m, step, i

    with nogil:
        for m in range(M):
            for i in range(N):
                uv[i] = Uv[m, i]
            for step in range(n_steps):
                _rhs(uv, omv, fullv, k1v, N)
                for i in range(N):
                    tmpv[i] = uv[i] + 0.5 * h * k1v[i]
                _rhs(tmpv, omv, fullv, k2v, N)
                for i in range(N):
                    tmpv[i] = uv[i] + 0.5 * h * k2v[i]
                _rhs(tmpv, omv, fullv, k3v, N)
                for i in range(N):
                    tmpv[i] = uv[i] + h * k3v[i]
                _rhs(tmpv, omv, fullv, k4v, N)
                for i in range(N):
                    uv[i] = uv[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
            for i in range(N):
                Uv[m, i] = uv[i]
    return U


def run_flow(u0, omega, cons_weights, energy_weights, double h, Py_ssize_t n_steps,
             Py_ssize_t record_stride):
    """RK4 loop; see the reference backend for the exact return contract."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] u = np.array(u0, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cw = np.ascontiguousarray(cons_weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ew = np.ascontiguousarray(energy_weights, dtype=np.float64)
    cdef Py_ssize_t N = u.shape[0]

    if record_stride < 1:
        record_stride = 1
    rec_idx = list(range(0, n_steps + 1, record_stride))
    if rec_idx[len(rec_idx) - 1] != n_steps:
        rec_idx.append(n_steps)

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] states = np.empty((len(rec_idx), N), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] conserved = np.empty(len(rec_idx))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] energy = np.empty(len(rec_idx))

    cdef cnp.ndarray[cnp.complex128_t, ndim=1] full = np.zeros(2 * N + 1, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k1 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k2 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k3 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] k4 = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] tmp = np.empty(N, dtype=np.complex128)

    cdef double complex[::1] uv = u
    cdef double complex[::1] fullv = full
    cdef double complex[::1] k1v = k1, k2v = k2, k3v = k3, k4v = k4, tmpv = tmp
    cdef double[::1] omv = om, cwv = cw, ewv = ew

    cdef double c0, c, e, mag, max_drift = 0.0, scale
    cdef Py_ssize_t step, i, pos = 0, next_rec_i = 0
    cdef Py_ssize_t blowup = -1
    cdef bint finite

    c0 = 0.0
    e = 0.0
    for i in range(N):
        mag = uv[i].real * uv[i].real + uv[i].imag * uv[i].imag
        c0 += cwv[i] * mag
        e += ewv[i] * mag
    scale = c0 if c0 > 0.0 else 1.0

    states[pos] = u
    conserved[pos] = c0
    energy[pos] = e
    pos += 1
    next_rec_i += 1

    for step in range(1, n_steps + 1):
        with nogil:
            _rhs(uv, omv, fullv, k1v, N)
            for i in range(N):
                tmpv[i] = uv[i] + 0.5 * h * k1v[i]
            _rhs(tmpv, omv, fullv, k2v, N)
            for i in range(N):
                tmpv[i] = uv[i] + 0.5 * h * k2v[i]
            _rhs(tmpv, omv, fullv, k3v, N)
            for i in range(N):
                tmpv[i] = uv[i] + h * k3v[i]
            _rhs(tmpv, omv, fullv, k4v, N)
            for i in range(N):
                uv[i] = uv[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])

            finite = True
            c = 0.0
            e = 0.0
            for i in range(N):
                mag = uv[i].real * uv[i].real + uv[i].imag * uv[i].imag
                if mag != mag or mag > 1e308:
                    finite = False
                c += cwv[i] * mag
                e += ewv[i] * mag
        if not finite:
            blowup = step
            break
        if abs(c - c0) / scale > max_drift:
            max_drift = abs(c - c0) / scale
        if step == rec_idx[next_rec_i]:
            states[pos] = u
            conserved[pos] = c
            energy[pos] = e
            pos += 1
            next_rec_i += 1

    return states[:pos], conserved[:pos], energy[:pos], max_drift, blowup
