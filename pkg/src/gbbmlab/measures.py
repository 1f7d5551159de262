"""Sampling and density bookkeeping for the Gaussian measures mu_s.

mu_s is the law of the random Fourier series with independent standard
complex Gaussian mode amplitudes damped by n^{-(s + gamma/2)}:

    u_hat(n) = (h_n + i l_n) / (sqrt(2) n^{s + gamma/2}),  h_n, l_n ~ N(0,1).

The cutoff measure mu_{s,r} weights mu_s by the indicator that the flow's
conserved quantity does not exceed r.  Normal variates come from the
counter-based Philox generator (numpy's ziggurat normals) keyed per sample
by (master_seed, index), so ensembles are reproducible bit-for-bit no
matter how they are chunked across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flow import conserved_quantity
from .spectral import SpectralField


@dataclass(frozen=True)
class MeasureSpec:
    """Identifies mu_{s,r} truncated to modes 1..n_modes (r = inf: no cutoff)."""

    s: int
    gamma: float
    n_modes: int
    r: float = math.inf

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be an integer >= 1, got {self.s}")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if self.s < self.gamma / 2.0:
            raise ValueError("need s >= gamma/2 so the flow is defined on the support")
        if int(self.n_modes) != self.n_modes or self.n_modes < 0:
            raise ValueError(f"n_modes must be an integer >= 0, got {self.n_modes}")
        if not self.r > 0.0:
            raise ValueError(f"cutoff radius must be positive, got {self.r}")


def _generator(master_seed: int, index: int) -> np.random.Generator:
    """Philox generator keyed by (master_seed, sample index)."""
    key = np.array([master_seed % (1 << 64), index % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_coeffs(spec: MeasureSpec, master_seed: int, count: int, start: int = 0) -> np.ndarray:
    """(count, n_modes) coefficient matrix; row i uses seed (master_seed, start+i).

    Draw order per sample is fixed (all h_n, then all l_n) so the values
    are part of the reproducibility contract.
    """
    N = spec.n_modes
    damp = np.arange(1, N + 1, dtype=np.float64) ** (spec.s + spec.gamma / 2.0)
    out = np.empty((count, N), dtype=np.complex128)
    for i in range(count):
        g = _generator(master_seed, start + i)
        h = g.standard_normal(N)
        l = g.standard_normal(N)
        out[i] = (h + 1j * l) / (math.sqrt(2.0) * damp)
    return out


def sample_mu_s(spec: MeasureSpec, seed: int) -> SpectralField:
    """One draw from the truncated mu_s; deterministic in the seed."""
    return SpectralField(sample_coeffs(spec, seed, 1)[0])


@dataclass(frozen=True)
class SampleBatch:
    """Ensemble of mu_s draws with its seeding metadata."""

    spec: MeasureSpec
    master_seed: int
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def draw(cls, spec: MeasureSpec, master_seed: int, count: int) -> "SampleBatch":
        return cls(spec, master_seed, sample_coeffs(spec, master_seed, count))

    @property
    def count(self) -> int:
        return self.coeffs.shape[0]

    @property
    def fields(self) -> list:
        return [SpectralField(row) for row in self.coeffs]

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.coeffs[i])


def batch_to_json(batch: SampleBatch) -> dict:
    """JSON-ready export: per-field [n, re, im] triples plus seeding metadata."""
    return {
        "spec": {"s": batch.spec.s, "gamma": batch.spec.gamma,
                 "n_modes": batch.spec.n_modes,
                 "r": repr(batch.spec.r) if math.isinf(batch.spec.r) else batch.spec.r},
        "master_seed": batch.master_seed,
        "count": batch.count,
        "fields": [
            [[n + 1, float(c.real), float(c.imag)] for n, c in enumerate(row)]
            for row in batch.coeffs
        ],
    }


def batch_to_csv(batch: SampleBatch) -> str:
    """CSV export with columns sample,n,re,im (same triple format as fields)."""
    lines = [
        f"# spec: s={batch.spec.s} gamma={batch.spec.gamma} "
        f"n_modes={batch.spec.n_modes} r={batch.spec.r}",
        f"# master_seed: {batch.master_seed}",
        f"# count: {batch.count}",
        "sample,n,re,im",
    ]
    for i, row in enumerate(batch.coeffs):
        for n, c in enumerate(row):
            lines.append(f"{i},{n + 1},{c.real:.17g},{c.imag:.17g}")
    return "\n".join(lines) + "\n"


def cutoff_chi_r(u: SpectralField, spec: MeasureSpec) -> int:
    """chi_r(u): 1 iff the conserved quantity of u is <= r."""
    if math.isinf(spec.r):
        return 1
    return int(conserved_quantity(u, spec.gamma) <= spec.r)


def chi_r_values(coeffs: np.ndarray, spec: MeasureSpec) -> np.ndarray:
    """Vectorized chi_r over a (M, N) coefficient matrix."""
    M = coeffs.shape[0]
    if math.isinf(spec.r):
        return np.ones(M)
    n = np.arange(1, coeffs.shape[1] + 1, dtype=np.float64)
    q = 4.0 * math.pi * np.sum((1.0 + n ** spec.gamma) * np.abs(coeffs) ** 2, axis=1)
    return (q <= spec.r).astype(np.float64)


def log_gaussian_weight(u: SpectralField, spec: MeasureSpec) -> float:
    """-||pi_N u||^2_{H^{s+gamma/2}}; the normalization gamma_N is never
    materialized, so only differences of this weight are meaningful."""
    m = min(u.n_max, spec.n_modes)
    if m == 0:
        return 0.0
    n = np.arange(1, m + 1, dtype=np.float64)
    return -float(np.sum(n ** (2.0 * spec.s + spec.gamma) * np.abs(u.coeffs[:m]) ** 2))


def expected_sobolev_moment(spec: MeasureSpec, sigma: float) -> float:
    """Closed form E ||pi_N u||^2_{H^sigma} = sum_{n<=N} n^{2 sigma - 2s - gamma}."""
    if spec.n_modes == 0:
        return 0.0
    n = np.arange(1, spec.n_modes + 1, dtype=np.float64)
    return float(np.sum(n ** (2.0 * sigma - 2.0 * spec.s - spec.gamma)))
