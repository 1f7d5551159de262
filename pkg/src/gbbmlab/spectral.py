"""Fourier-side representation of zero-mean real fields on the 2*pi torus.

A field u(x) = sum_{0<|n|<=n_max} u_hat(n) e^{inx} with u_hat(-n) =
conj(u_hat(n)) is stored through its positive-mode coefficients only, so
zero mean and reality hold by construction.  This module provides the
Sobolev/Lebesgue norms, Fourier multipliers, Dirichlet and dyadic
(Littlewood-Paley) projectors, exact quadratic products, grid sampling
and plain-text serialization used by the rest of the package.

Norm conventions (fixed once here, used everywhere):

    ||u||_{H^sigma}^2 = sum_{n>=1} n^{2 sigma} |u_hat(n)|^2
    ||u||_{L^2}^2     = int_0^{2pi} u^2 dx = 4 pi sum_{n>=1} |u_hat(n)|^2

so ||  |D_x|^sigma u ||_{L^2} = 2 sqrt(pi) ||u||_{H^sigma}.  The variant
weighted by (1+|n|)^{2 sigma} defines an equivalent norm on zero-mean
fields (|n| <= 1+|n| <= 2|n| for n != 0) and is not implemented separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# products switch from direct convolution to zero-padded FFT above this size
_DIRECT_CONV_MAX = 32

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Zero-mean real field stored as complex coefficients u_hat(1..n_max)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1:
            raise ValueError("coefficient array must be one-dimensional")
        if not np.all(np.isfinite(c.view(np.float64))):
            raise ValueError("non-finite Fourier coefficient")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return len(self.coeffs)

    @classmethod
    def zeros(cls, n_max: int) -> "SpectralField":
        return cls(np.zeros(n_max, dtype=np.complex128))

    @classmethod
    def from_modes(cls, modes: dict, n_max: int | None = None) -> "SpectralField":
        """Build a field from a {mode index: coefficient} mapping (1-based)."""
        if not modes and n_max is None:
            raise ValueError("empty mode map needs an explicit n_max")
        top = max(modes) if modes else 0
        if any(n < 1 for n in modes):
            raise ValueError("mode indices must be >= 1")
        size = n_max if n_max is not None else top
        if top > size:
            raise ValueError("mode index exceeds n_max")
        c = np.zeros(size, dtype=np.complex128)
        for n, v in modes.items():
            c[n - 1] = v
        return cls(c)

    def coeff(self, n: int) -> complex:
        """u_hat(n) for 1 <= n <= n_max."""
        if not 1 <= n <= self.n_max:
            raise IndexError(f"mode {n} outside 1..{self.n_max}")
        return complex(self.coeffs[n - 1])

    def pad_to(self, n_max: int) -> "SpectralField":
        if n_max < self.n_max:
            raise ValueError("pad_to cannot shrink; use dirichlet_project")
        c = np.zeros(n_max, dtype=np.complex128)
        c[: self.n_max] = self.coeffs
        return SpectralField(c)

    # fields form a vector space; these make test algebra painless
    def __add__(self, other: "SpectralField") -> "SpectralField":
        m = max(self.n_max, other.n_max)
        c = np.zeros(m, dtype=np.complex128)
        c[: self.n_max] += self.coeffs
        c[: other.n_max] += other.coeffs
        return SpectralField(c)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-1.0) * other

    def __mul__(self, a) -> "SpectralField":
        return SpectralField(self.coeffs * complex(a))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(-self.coeffs)


@dataclass(frozen=True)
class GridSample:
    """Real samples of a field on the uniform grid x_j = 2 pi j / len(values)."""

    oversample: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.oversample < 1:
            raise ValueError("oversample must be a positive integer")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or len(v) % (2 * self.oversample) != 0:
            raise ValueError("grid length must be oversample * 2 * n_max")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n_max(self) -> int:
        return len(self.values) // (2 * self.oversample)


# ---------------------------------------------------------------------------
# norms and multipliers
# ---------------------------------------------------------------------------

def _mode_indices(u: SpectralField) -> np.ndarray:
    return np.arange(1, u.n_max + 1, dtype=np.float64)


def sobolev_norm(u: SpectralField, sigma: float) -> float:
    """H^sigma norm (positive-mode convention, any real sigma)."""
    if u.n_max == 0:
        return 0.0
    n = _mode_indices(u)
    return math.sqrt(float(np.sum(n ** (2.0 * sigma) * np.abs(u.coeffs) ** 2)))


def l2_norm(u: SpectralField) -> float:
    """Plain L^2(dx) norm on [0, 2 pi]; equals 2 sqrt(pi) ||u||_{H^0}."""
    if u.n_max == 0:
        return 0.0
    return math.sqrt(4.0 * math.pi * float(np.sum(np.abs(u.coeffs) ** 2)))


def l2_inner(u: SpectralField, v: SpectralField) -> float:
    """L^2(dx) pairing int u v dx = 4 pi sum Re(u_hat conj(v_hat))."""
    m = min(u.n_max, v.n_max)
    if m == 0:
        return 0.0
    return 4.0 * math.pi * float(
        np.sum(np.real(u.coeffs[:m] * np.conj(v.coeffs[:m])))
    )


def fractional_derivative(u: SpectralField, s: float) -> SpectralField:
    """|D_x|^s: multiply u_hat(n) by n^s.  Negative s is smoothing."""
    n = _mode_indices(u)
    return SpectralField(u.coeffs * n ** s)


def x_derivative(u: SpectralField, order: int = 1) -> SpectralField:
    """Signed derivative d^order/dx^order: multiply u_hat(n) by (i n)^order."""
    if order < 0:
        raise ValueError("order must be >= 0")
    n = _mode_indices(u)
    return SpectralField(u.coeffs * (1j * n) ** order)


def smoothing_multiplier(u: SpectralField, gamma: float) -> SpectralField:
    """(1 + |D_x|^gamma)^{-1} u."""
    n = _mode_indices(u)
    return SpectralField(u.coeffs / (1.0 + n ** gamma))


def dirichlet_project(u: SpectralField, N: int) -> SpectralField:
    """Sharp Fourier cutoff: keep modes n <= N, zero out the rest."""
    if N < 0:
        raise ValueError("projector index must be >= 0")
    c = u.coeffs.copy()
    c[N:] = 0.0
    return SpectralField(c)


# ---------------------------------------------------------------------------
# exact quadratic products
# ---------------------------------------------------------------------------

def _full_line(u: SpectralField) -> np.ndarray:
    """Coefficients on -n_max..n_max (index k + n_max), mean slot zero."""
    N = u.n_max
    f = np.zeros(2 * N + 1, dtype=np.complex128)
    f[N + 1:] = u.coeffs
    f[:N] = np.conj(u.coeffs[::-1])
    return f


def pointwise_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Exact Fourier coefficients of the product u*v, mean mode discarded.

    All n_max_u + n_max_v product modes are retained.  Small inputs use
    direct convolution; larger ones a zero-padded transform, both alias
    free.  Dropping the mean is harmless downstream: every use of the
    product sits inside d/dx.
    """
    n_out = u.n_max + v.n_max
    if n_out == 0:
        return SpectralField.zeros(0)
    if max(u.n_max, v.n_max) < _DIRECT_CONV_MAX:
        full = np.convolve(_full_line(u), _full_line(v))
        # full has indices -(n_out)..n_out centred at n_out
        return SpectralField(full[n_out + 1:])
    L = 1
    while L < 2 * n_out + 1:
        L *= 2
    fu = np.zeros(L, dtype=np.complex128)
    fu[1: u.n_max + 1] = u.coeffs
    fu[L - u.n_max:] = np.conj(u.coeffs[::-1])
    fv = np.zeros(L, dtype=np.complex128)
    fv[1: v.n_max + 1] = v.coeffs
    fv[L - v.n_max:] = np.conj(v.coeffs[::-1])
    prod = np.fft.fft(np.fft.ifft(fu) * np.fft.ifft(fv)) * L
    return SpectralField(prod[1: n_out + 1])


# ---------------------------------------------------------------------------
# Littlewood-Paley blocks
# ---------------------------------------------------------------------------

def _quintic_step(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _eta(x: np.ndarray) -> np.ndarray:
    # 1 on x<=1, 0 on x>=2, quintic-smoothstep transition in between
    return 1.0 - _quintic_step(np.asarray(x, dtype=np.float64) - 1.0)


def lp_bump(x) -> np.ndarray:
    """The fixed dyadic bump psi(x) = eta(x) - eta(2x), supported in [1/2, 2].

    By telescoping, sum over lambda in {1,2,4,...} of psi(n/lambda) = 1
    for every integer n >= 1.
    """
    x = np.asarray(x, dtype=np.float64)
    return _eta(x) - _eta(2.0 * x)


def lp_block(u: SpectralField, lam: int, mode: str = "sharp") -> SpectralField:
    """Dyadic frequency block at scale lambda.

    sharp: keep exactly lambda <= n < 2*lambda; smooth: weight by the
    fixed bump psi(n/lambda).
    """
    if lam < 1 or lam & (lam - 1):
        raise ValueError("lambda must be a dyadic integer 1, 2, 4, ...")
    n = _mode_indices(u)
    if mode == "sharp":
        w = ((n >= lam) & (n < 2 * lam)).astype(np.float64)
    elif mode == "smooth":
        w = lp_bump(n / lam)
    else:
        raise ValueError("mode must be 'sharp' or 'smooth'")
    return SpectralField(u.coeffs * w)


def dyadic_scales(n_max: int) -> list[int]:
    """Dyadic scales covering modes 1..n_max (up to the first lambda >= n_max,
    so the smooth bumps at the top scale still sum to one there)."""
    scales = [1]
    while scales[-1] < max(n_max, 1):
        scales.append(2 * scales[-1])
    return scales


# ---------------------------------------------------------------------------
# grid sampling and grid-based norms
# ---------------------------------------------------------------------------

def to_grid(u: SpectralField, oversample: int) -> GridSample:
    """Sample on the uniform grid with oversample * 2 * n_max points."""
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if u.n_max == 0:
        return GridSample(oversample, np.zeros(2 * oversample))
    G = 2 * u.n_max * oversample
    half = np.zeros(G // 2 + 1, dtype=np.complex128)
    half[1: u.n_max + 1] = u.coeffs
    return GridSample(oversample, np.fft.irfft(half, n=G) * G)


def from_grid(g: GridSample) -> SpectralField:
    """Invert to_grid; exact whenever the grid resolves the field."""
    G = len(g.values)
    half = np.fft.rfft(g.values) / G
    return SpectralField(half[1: g.n_max + 1])


def sup_norm(u: SpectralField, oversample: int = 8) -> float:
    """Grid max of |u|; a lower bound on the true L^inf norm that
    converges from below as oversample grows."""
    if oversample < 2:
        raise ValueError("oversample must be >= 2")
    if u.n_max == 0:
        return 0.0
    return float(np.max(np.abs(to_grid(u, oversample).values)))


def lebesgue_norm(u: SpectralField, p: float, oversample: int = 8) -> float:
    """L^p(dx) norm by trapezoid quadrature on the oversampled grid."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if u.n_max == 0:
        return 0.0
    vals = to_grid(u, oversample).values
    dx = TWO_PI / len(vals)
    return float(np.sum(np.abs(vals) ** p) * dx) ** (1.0 / p)


def quadrature_integral(values: np.ndarray) -> float:
    """int f dx over [0, 2 pi) from uniform samples (trapezoid = exact for
    trigonometric polynomials below the grid size)."""
    return float(np.sum(values) * (TWO_PI / len(values)))


# ---------------------------------------------------------------------------
# serialization: JSON array of [n, re, im] and CSV with columns n,re,im
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_to_json(u: SpectralField) -> str:
    triples = [
        [n + 1, float(np.real(c)), float(np.imag(c))]
        for n, c in enumerate(u.coeffs)
    ]
    return json.dumps(triples)


def field_from_json(text: str) -> SpectralField:
    triples = json.loads(text)
    if not triples:
        return SpectralField.zeros(0)
    n_max = max(int(t[0]) for t in triples)
    c = np.zeros(n_max, dtype=np.complex128)
    for n, re, im in triples:
        c[int(n) - 1] = complex(re, im)
    return SpectralField(c)


def field_to_csv(u: SpectralField) -> str:
    lines = ["n,re,im"]
    for n, c in enumerate(u.coeffs):
        lines.append(f"{n + 1},{_fmt(np.real(c))},{_fmt(np.imag(c))}")
    return "\n".join(lines) + "\n"


def field_from_csv(text: str) -> SpectralField:
    rows = [r for r in text.strip().splitlines() if r and not r.startswith("#")]
    if rows and rows[0].lower().startswith("n,"):
        rows = rows[1:]
    if not rows:
        return SpectralField.zeros(0)
    parsed = [r.split(",") for r in rows]
    n_max = max(int(r[0]) for r in parsed)
    c = np.zeros(n_max, dtype=np.complex128)
    for r in parsed:
        c[int(r[0]) - 1] = complex(float(r[1]), float(r[2]))
    return SpectralField(c)
