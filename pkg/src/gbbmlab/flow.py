"""Free and nonlinear flows of the truncated generalized BBM equation.

The equation d/dt u + d/dt |D_x|^gamma u + d/dx u + d/dx pi_N((pi_N u)^2) = 0
reduces on the positive Fourier modes to

    d/dt u_hat(n) = -i omega_n (u_hat(n) + c_n(u)),  omega_n = n / (1 + n^gamma)

with c_n the truncated quadratic convolution.  Since 0 < omega_n <= 1 for
gamma >= 1 the system is non-stiff and plain explicit RK4 is adequate; the
Duhamel fixed-point solver is kept alongside as an independent route to the
same local solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .spectral import SpectralField


class FlowBlowupError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state at t = {time:.6g}")
        self.time = time


class PicardDivergenceError(RuntimeError):
    """Duhamel iteration failed to contract (step size too large)."""

    def __init__(self, distances):
        super().__init__(
            "no contraction within max_iter; successive-iterate distances: "
            + ", ".join(f"{d:.3e}" for d in distances)
        )
        self.distances = list(distances)


class TrajectoryTooCoarseError(RuntimeError):
    """Stored base trajectory lacks the per-step resolution required."""


@dataclass(frozen=True)
class GbbmParams:
    """Dispersion exponent gamma > 1, regularity index s >= 1, cutoff N."""

    gamma: float
    s: int = 1
    n_modes: int = 1

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be an integer >= 1, got {self.s}")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be an integer >= 1, got {self.n_modes}")
        w = omegas(self.gamma, self.n_modes)
        if not (np.all(w > 0.0) and np.all(w <= 1.0)):
            raise ValueError("phase speeds left (0, 1]; inconsistent parameters")

    def omega(self) -> np.ndarray:
        return omegas(self.gamma, self.n_modes)


def omegas(gamma: float, n_modes: int) -> np.ndarray:
    """Phase speeds omega_n = n / (1 + n^gamma), n = 1..n_modes."""
    n = np.arange(1, n_modes + 1, dtype=np.float64)
    return n / (1.0 + n ** gamma)


def free_evolution(u: SpectralField, gamma: float, t: float) -> SpectralField:
    """S(t): rotate mode n by exp(-i t omega_n); an isometry of every H^sigma."""
    if not gamma > 1.0:
        raise ValueError("gamma must be > 1")
    w = omegas(gamma, u.n_max)
    return SpectralField(u.coeffs * np.exp(-1j * t * w))


def conserved_quantity(u: SpectralField, gamma: float) -> float:
    """||u||_{L^2}^2 + 4 pi ||u||_{H^{gamma/2}}^2 = 4 pi sum (1+n^gamma)|u_hat|^2."""
    if u.n_max == 0:
        return 0.0
    n = np.arange(1, u.n_max + 1, dtype=np.float64)
    return 4.0 * math.pi * float(np.sum((1.0 + n ** gamma) * np.abs(u.coeffs) ** 2))


def energy_norm_sq(u: SpectralField, p: GbbmParams) -> float:
    """||pi_N u||^2_{H^{s + gamma/2}}, the Gaussian log-density functional."""
    m = min(u.n_max, p.n_modes)
    if m == 0:
        return 0.0
    n = np.arange(1, m + 1, dtype=np.float64)
    return float(np.sum(n ** (2.0 * p.s + p.gamma) * np.abs(u.coeffs[:m]) ** 2))


def _coeffs_on_cutoff(u: SpectralField, N: int) -> np.ndarray:
    """Positive-mode array padded/validated to exactly N modes."""
    if u.n_max > N and np.any(u.coeffs[N:] != 0):
        raise ValueError(f"field has active modes above the cutoff N = {N}")
    c = np.zeros(N, dtype=np.complex128)
    m = min(u.n_max, N)
    c[:m] = u.coeffs[:m]
    return c


def gbbm_rhs(u: SpectralField, p: GbbmParams) -> SpectralField:
    """Time derivative of the truncated flow at state u (modes 1..N)."""
    c = _coeffs_on_cutoff(u, p.n_modes)
    return SpectralField(_kernels.rhs(c, p.omega()))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states with per-step conserved-quantity and energy logs.

    times are elapsed (non-negative, strictly increasing); direction is +1
    for forward runs and -1 when the time-reversed field was integrated, so
    physical times are direction * times.  max_rel_drift tracks the
    conserved quantity over every integrator step, not only stored ones;
    flagged marks runs whose drift exceeded the configured tolerance.
    """

    params: GbbmParams
    times: np.ndarray
    states: list = field(repr=False)
    conserved_log: np.ndarray = field(repr=False)
    energy_log: np.ndarray = field(repr=False)
    direction: int = 1
    dt: float = 0.0
    record_every: int = 1
    max_rel_drift: float = 0.0
    flagged: bool = False

    def __post_init__(self):
        k = len(self.times)
        if not (len(self.states) == len(self.conserved_log) == len(self.energy_log) == k):
            raise ValueError("trajectory logs must have equal lengths")
        if k > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> SpectralField:
        return self.states[-1]

    @property
    def physical_times(self) -> np.ndarray:
        return self.direction * self.times


def _steps_for(t_final: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = abs(t_final)
    if span == 0.0:
        return 0, dt
    n_steps = max(1, int(round(span / dt)))
    return n_steps, span / n_steps


def integrate(
    u0: SpectralField,
    p: GbbmParams,
    t_final: float,
    dt: float,
    record_every: int = 1,
    drift_tol: float = 1e-6,
) -> Trajectory:
    """RK4 on the mode ODE up to t_final (negative t_final runs the
    time-reversed field); logs the conserved quantity and energy and flags
    the run if the relative drift ever exceeds drift_tol."""
    N = p.n_modes
    c0 = _coeffs_on_cutoff(u0, N)
    n_steps, h = _steps_for(t_final, dt)
    direction = -1 if t_final < 0 else 1

    n = np.arange(1, N + 1, dtype=np.float64)
    cons_w = 4.0 * math.pi * (1.0 + n ** p.gamma)
    en_w = n ** (2.0 * p.s + p.gamma)

    states, conserved, energy, max_drift, blowup = _kernels.run_flow(
        c0, p.omega(), cons_w, en_w, direction * h, n_steps, record_every
    )
    if blowup >= 0:
        raise FlowBlowupError(direction * blowup * h)

    rec_idx = list(range(0, n_steps + 1, max(record_every, 1)))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    times = h * np.asarray(rec_idx, dtype=np.float64)

    return Trajectory(
        params=p,
        times=times,
        states=[SpectralField(row) for row in states],
        conserved_log=np.asarray(conserved),
        energy_log=np.asarray(energy),
        direction=direction,
        dt=h,
        record_every=max(record_every, 1),
        max_rel_drift=float(max_drift),
        flagged=bool(max_drift > drift_tol),
    )


def evolve_modes(states: np.ndarray, p: GbbmParams, t: float, dt: float) -> np.ndarray:
    """Final-state integrator for (M, N) ensembles; no logging, RK4 as above."""
    arr = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    if arr.shape[-1] != p.n_modes:
        raise ValueError("state width must equal n_modes")
    n_steps, h = _steps_for(t, dt)
    if n_steps == 0:
        out = arr.copy()
    else:
        out = _kernels.evolve_batch(arr, p.omega(), math.copysign(h, t), n_steps)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise FlowBlowupError(t)
    return out.reshape(np.asarray(states, dtype=np.complex128).shape)


# ---------------------------------------------------------------------------
# Duhamel fixed point (independent of the RK4 route)
# ---------------------------------------------------------------------------

def _picard_sweep(u0, p, tau, tol, max_iter, quad_nodes):
    N = p.n_modes
    w = p.omega()
    c0 = _coeffs_on_cutoff(u0, N)
    K = quad_nodes
    ts = tau * np.arange(K + 1) / K
    h = tau / K
    rot = np.exp(-1j * np.outer(ts, w))          # S(t_j)
    free = rot * c0                              # S(t_j) u0
    hgam = np.arange(1, N + 1, dtype=np.float64) ** p.gamma  # H^{gamma/2} weights

    def dist(A, B):
        return float(np.max(np.sqrt(np.sum(hgam * np.abs(A - B) ** 2, axis=1))))

    U = free.copy()
    distances = []
    # diverging iterates may overflow before the distance check catches them
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            # B(u) = (1+|D|^gamma)^{-1} d/dx pi_N((pi_N u)^2) = i omega * conv(u)
            integrand = np.conj(rot) * (1j * w * _kernels.quadratic_convolution(U))
            cum = np.zeros_like(integrand)
            cum[1:] = np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]), axis=0)
            U_next = rot * (c0 - cum)
            d = dist(U_next, U)
            distances.append(d)
            U = U_next
            if d < tol:
                return SpectralField(U[-1]), distances
    raise PicardDivergenceError(distances)


def picard_lifespan(u0: SpectralField, p: GbbmParams, contraction_c: float = 0.1) -> float:
    """Guaranteed contraction window c (1 + ||u0||_{H^{gamma/2}})^{-1}."""
    from .spectral import sobolev_norm

    return contraction_c / (1.0 + sobolev_norm(u0, p.gamma / 2.0))


def picard_local_solve(
    u0: SpectralField,
    p: GbbmParams,
    tau: float,
    tol: float = 1e-10,
    max_iter: int = 40,
    contraction_c: float = 0.1,
    quad_nodes: int = 128,
    enforce_lifespan: bool = True,
) -> SpectralField:
    """Fixed point of the Duhamel map evaluated at t = tau.

    The iteration lives on a uniform quadrature grid over [0, tau]
    (cumulative trapezoid for the integral term); successive iterates are
    compared in sup-over-grid H^{gamma/2}.  With tau inside the contraction
    window the distances decrease geometrically; otherwise
    PicardDivergenceError carries them as the diagnostic.
    """
    if enforce_lifespan and abs(tau) > picard_lifespan(u0, p, contraction_c):
        raise ValueError(
            f"tau = {tau:.4g} exceeds the contraction window "
            f"{picard_lifespan(u0, p, contraction_c):.4g}; "
            "shrink tau or pass enforce_lifespan=False"
        )
    out, _ = _picard_sweep(u0, p, tau, tol, max_iter, quad_nodes)
    return out


def picard_iterate_distances(
    u0: SpectralField,
    p: GbbmParams,
    tau: float,
    tol: float = 1e-12,
    max_iter: int = 40,
    quad_nodes: int = 128,
) -> list[float]:
    """Successive-iterate distances of the Duhamel fixed point (diagnostic)."""
    try:
        _, distances = _picard_sweep(u0, p, tau, tol, max_iter, quad_nodes)
    except PicardDivergenceError as exc:
        distances = exc.distances
    return distances


# ---------------------------------------------------------------------------
# Liouville diagnostics
# ---------------------------------------------------------------------------

def divergence_diagnostic(u: SpectralField, p: GbbmParams, fd_step: float = 1e-6) -> float:
    """Max over n of the per-mode divergence |dF_n/da_n + dG_n/db_n|.

    In the real coordinates u_hat(n) = a_n + i b_n the two diagonal partials
    cancel pairwise (each equals +/- 2 omega_n Im u_hat(2n) when 2n <= N),
    so every per-mode sum -- and with it the phase-space divergence -- is
    identically zero.  Central finite differences of the right-hand side
    measure how well that holds.
    """
    N = p.n_modes
    w = p.omega()
    base = _coeffs_on_cutoff(u, N)

    def deriv(c):
        return _kernels.rhs(c, w)

    worst = 0.0
    for idx in range(N):
        ca, cb = base.copy(), base.copy()
        ca[idx] += fd_step
        cb[idx] -= fd_step
        dF_da = (deriv(ca)[idx].real - deriv(cb)[idx].real) / (2.0 * fd_step)
        ca, cb = base.copy(), base.copy()
        ca[idx] += 1j * fd_step
        cb[idx] -= 1j * fd_step
        dG_db = (deriv(ca)[idx].imag - deriv(cb)[idx].imag) / (2.0 * fd_step)
        worst = max(worst, abs(dF_da + dG_db))
    return worst


# ---------------------------------------------------------------------------
# linearized flow and derived diagnostics
# ---------------------------------------------------------------------------

def _tangent_rhs(u, V, w):
    """Linearization of the mode ODE at u applied to tangent rows V."""
    return -1j * w * (V + 2.0 * _kernels.bilinear_convolution(u[np.newaxis, :], V))


def _tangent_step(u, V, w, h):
    """One RK4 step of the variational system (u, V); returns both."""
    ku1 = _kernels.rhs(u, w)
    kv1 = _tangent_rhs(u, V, w)
    u2 = u + 0.5 * h * ku1
    ku2 = _kernels.rhs(u2, w)
    kv2 = _tangent_rhs(u2, V + 0.5 * h * kv1, w)
    u3 = u + 0.5 * h * ku2
    ku3 = _kernels.rhs(u3, w)
    kv3 = _tangent_rhs(u3, V + 0.5 * h * kv2, w)
    u4 = u + h * ku3
    ku4 = _kernels.rhs(u4, w)
    kv4 = _tangent_rhs(u4, V + h * kv3, w)
    u_next = u + (h / 6.0) * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
    V_next = V + (h / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
    return u_next, V_next


def linearized_flow(base: Trajectory, v0: SpectralField) -> Trajectory:
    """Integrate the linear problem along a stored base trajectory.

    The same RK4 scheme is applied to the variational system anchored at
    every stored base state, so the base must have been recorded at every
    step (record_every == 1).  The result is exactly linear in v0.
    """
    if base.record_every != 1:
        raise TrajectoryTooCoarseError(
            "base trajectory recorded with stride > 1; re-run integrate with "
            "record_every=1 for linearized integration"
        )
    p = base.params
    w = p.omega()
    h = base.direction * base.dt
    V = _coeffs_on_cutoff(v0, p.n_modes)[np.newaxis, :]

    states = [SpectralField(V[0])]
    for k in range(len(base) - 1):
        u_k = base.states[k].coeffs
        _, V = _tangent_step(u_k, V, w, h)
        states.append(SpectralField(V[0]))

    conserved = np.array([conserved_quantity(v, p.gamma) for v in states])
    energy = np.array([energy_norm_sq(v, p) for v in states])
    return Trajectory(
        params=p,
        times=base.times.copy(),
        states=states,
        conserved_log=conserved,
        energy_log=energy,
        direction=base.direction,
        dt=base.dt,
        record_every=1,
        max_rel_drift=0.0,
        flagged=False,
    )


def jacobian_determinant(u0: SpectralField, p: GbbmParams, t: float, dt: float) -> float:
    """Determinant of the full 2N x 2N variational matrix after time t.

    The tangent columns evolve with the analytic linearization (closed form
    via the convolution structure), co-integrated with the base state; the
    divergence-free field should keep the determinant at 1.
    """
    N = p.n_modes
    if 2 * N > 40:
        raise ValueError("dense variational matrix limited to 2*n_modes <= 40")
    w = p.omega()
    u = _coeffs_on_cutoff(u0, N)
    # rows: tangent vectors for the real basis (a_1..a_N, b_1..b_N)
    V = np.vstack([np.eye(N, dtype=np.complex128), 1j * np.eye(N, dtype=np.complex128)])
    n_steps, h = _steps_for(t, dt)
    h = math.copysign(h, t) if t != 0 else h
    for _ in range(n_steps):
        u, V = _tangent_step(u, V, w, h)
    # real 2N x 2N matrix: column j = (Re V[j], Im V[j])
    M = np.concatenate([V.real, V.imag], axis=1).T
    return float(np.linalg.det(M))


def forced_linear_flow(h_field: SpectralField, gamma: float, t: float) -> SpectralField:
    """Duhamel response f(t) of the linear equation forced by d/dx h.

    Closed form per mode: f_hat(t)(n) = h_hat(n) (exp(-i t omega_n) - 1),
    obtained by integrating S(t - tau) against the constant forcing.
    """
    if not gamma > 1.0:
        raise ValueError("gamma must be > 1")
    w = omegas(gamma, h_field.n_max)
    return SpectralField(h_field.coeffs * (np.exp(-1j * t * w) - 1.0))


def dk_hilbert_schmidt(
    u0: SpectralField,
    p: GbbmParams,
    t: float,
    basis_dim: int,
    dt: float = 1e-3,
) -> float:
    """Frobenius norm of the truncated matrix of (DK(t))_{u0} on H^{s+gamma/2}.

    K(t) = S(-t) Phi_N(t) - Id, so each column is DK(v0) = S(-t) v(t) - v0
    with v the linearized flow of the basis vector v0; this evaluates the
    Duhamel integral for DK exactly.  Basis: {n^{-(s+gamma/2)} (cos, sin)}
    for n <= basis_dim, rows truncated at basis_dim as well.
    """
    N = p.n_modes
    if not 1 <= basis_dim <= N:
        raise ValueError("need 1 <= basis_dim <= n_modes")
    if t == 0.0:
        return 0.0
    w = p.omega()
    sg = p.s + p.gamma / 2.0
    scale = np.arange(1, basis_dim + 1, dtype=np.float64) ** (-sg)
    V0 = np.zeros((2 * basis_dim, N), dtype=np.complex128)
    V0[:basis_dim, :basis_dim] = np.diag(scale)
    V0[basis_dim:, :basis_dim] = 1j * np.diag(scale)

    u = _coeffs_on_cutoff(u0, N)
    n_steps, h = _steps_for(t, dt)
    h = math.copysign(h, t)
    V = V0.copy()
    for _ in range(n_steps):
        u, V = _tangent_step(u, V, w, h)

    W = np.exp(1j * t * w) * V - V0          # S(-t) v(t) - v0
    m_w = np.arange(1, basis_dim + 1, dtype=np.float64) ** (2.0 * sg)
    hs_sq = float(np.sum(m_w * np.abs(W[:, :basis_dim]) ** 2))
    return math.sqrt(hs_sq)


# ---------------------------------------------------------------------------
# trajectory export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory, stride: int = 1) -> str:
    """CSV rows t, conserved, energy, then (n, re, im) per retained mode."""
    N = traj.params.n_modes
    header = ["t", "conserved", "energy"]
    for m in range(1, N + 1):
        header += [f"n{m}", f"re{m}", f"im{m}"]
    lines = [",".join(header)]
    phys = traj.physical_times
    for k in range(0, len(traj), max(stride, 1)):
        row = [_fmt(phys[k]), _fmt(traj.conserved_log[k]), _fmt(traj.energy_log[k])]
        c = traj.states[k].coeffs
        for m in range(N):
            row += [str(m + 1), _fmt(c[m].real), _fmt(c[m].imag)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def trajectory_to_json(traj: Trajectory, stride: int = 1) -> dict:
    """JSON-ready dict mirroring the CSV content."""
    phys = traj.physical_times
    rows = []
    for k in range(0, len(traj), max(stride, 1)):
        c = traj.states[k].coeffs
        rows.append(
            {
                "t": float(phys[k]),
                "conserved": float(traj.conserved_log[k]),
                "energy": float(traj.energy_log[k]),
                "modes": [[m + 1, float(c[m].real), float(c[m].imag)] for m in range(len(c))],
            }
        )
    return {
        "gamma": traj.params.gamma,
        "s": traj.params.s,
        "n_modes": traj.params.n_modes,
        "dt": traj.dt,
        "direction": traj.direction,
        "max_rel_drift": traj.max_rel_drift,
        "flagged": traj.flagged,
        "rows": rows,
    }
