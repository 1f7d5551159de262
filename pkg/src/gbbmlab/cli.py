"""Experiment runner: configuration, validation, orchestration, reports.

Each subcommand names one experiment; a run is a pure function of its
configuration (TOML file plus flag overrides, flags winning), writes
machine-first JSON with CSV companions, and exits 0 when every configured
tolerance is met, 1 on a tolerance failure, 2 on validation errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .flow import (
    GbbmParams,
    divergence_diagnostic,
    dk_hilbert_schmidt,
    integrate,
    jacobian_determinant,
    trajectory_to_csv,
    trajectory_to_json,
)
from .measures import MeasureSpec, sample_mu_s
from .reporting import config_hash, write_csv, write_json, write_text
from .spectral import SpectralField
from . import energy as energy_lab
from . import transport as transport_lab

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

EXPERIMENTS = (
    "simulate",
    "conservation",
    "liouville",
    "transport",
    "energy",
    "large-deviation",
    "singular-demo",
    "dk-diagnostic",
)

OUT_DIR_ENV = "GBBMLAB_OUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully serializable description of one run."""

    experiment: str
    gamma: float = 2.0
    s: int = 1
    n_modes: int = 64
    t: float = 1.0
    dt: float = 1e-3
    samples: int = 10000
    master_seed: int = 0
    r: float = math.inf
    eps: float = 0.01
    eps1: float = 0.01
    margin: float = 1.5
    oversample: int = 8
    drift_tol: float = 1e-6
    det_tol: float = 1e-6
    div_tol: float = 1e-8
    slope_tol: float = 0.6
    exponent_tol: float = 0.05
    stride: int = 1
    p_list: tuple = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    n_list: tuple = tuple(2 ** k for k in range(6, 15))
    basis_list: tuple = (8, 16, 32, 64)
    set_kind: str = "sobolev_ball"
    set_sigma: float | None = None
    set_radius: float = 1.0
    set_mode: int = 1
    set_component: str = "re"
    set_threshold: float = 0.0
    expect_trend: str = ""
    out_dir: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def validate(config: ExperimentConfig) -> list[str]:
    """Collect every precondition violation (returned, never thrown)."""
    diag = []
    if config.experiment not in EXPERIMENTS:
        diag.append(f"experiment must be one of {EXPERIMENTS}, got {config.experiment!r}")
        return diag
    if not config.gamma > 1.0:
        diag.append(f"gamma: the flow requires gamma > 1 (got {config.gamma})")
    samples_mu = config.experiment in (
        "simulate", "conservation", "liouville", "transport", "energy",
        "large-deviation")
    if int(config.s) != config.s or config.s < 1:
        diag.append(f"s: must be an integer >= 1 (got {config.s})")
    elif samples_mu and config.gamma > 1.0 and config.s < config.gamma / 2.0:
        diag.append(f"s: measures need s >= gamma/2 (got s={config.s}, gamma={config.gamma})")
    if config.n_modes < 1:
        diag.append(f"n_modes: must be >= 1 (got {config.n_modes})")
    if config.dt <= 0:
        diag.append(f"dt: must be positive (got {config.dt})")
    if config.samples < 1:
        diag.append(f"samples: must be >= 1 (got {config.samples})")
    if not config.r > 0:
        diag.append(f"r: cutoff radius must be positive (got {config.r})")
    if config.experiment == "singular-demo" and config.gamma > 1.0:
        if not (4.0 / 3.0 < config.gamma < 1.5):
            diag.append(
                f"gamma: singular-demo requires gamma in (4/3, 3/2) (got {config.gamma}); "
                "outside that window the partial sums converge")
    if config.experiment == "transport" and config.samples < 1000:
        diag.append(f"samples: transport estimators need >= 1000 (got {config.samples})")
    if config.experiment == "large-deviation" and config.samples < 10_000:
        diag.append(f"samples: the moment scan needs >= 10^4 (got {config.samples})")
    if config.experiment == "liouville" and 2 * config.n_modes > 40:
        diag.append(f"n_modes: dense variational matrix needs 2*n_modes <= 40 (got {config.n_modes})")
    if config.experiment == "dk-diagnostic":
        if max(config.basis_list, default=0) > config.n_modes:
            diag.append("basis_list: entries must not exceed n_modes")
        if config.expect_trend not in ("", "shrinking", "nonshrinking"):
            diag.append("expect_trend: must be 'shrinking', 'nonshrinking' or empty")
    if config.set_kind not in ("sobolev_ball", "half_space"):
        diag.append(f"set_kind: unknown kind {config.set_kind!r}")
    if config.set_component not in ("re", "im"):
        diag.append(f"set_component: must be 're' or 'im' (got {config.set_component!r})")
    return diag


@dataclass(frozen=True)
class ReportBundle:
    """Outcome of one run; wall_time_s is informational and never written."""

    experiment: str
    status: bool
    summary: dict
    files: list
    config_hash: str
    wall_time_s: float


def _params(config) -> GbbmParams:
    return GbbmParams(config.gamma, int(config.s), int(config.n_modes))


def _spec(config, r=None) -> MeasureSpec:
    return MeasureSpec(int(config.s), config.gamma, int(config.n_modes),
                       config.r if r is None else r)


def _set_spec(config) -> transport_lab.SetSpec:
    if config.set_kind == "sobolev_ball":
        sigma = config.set_sigma if config.set_sigma is not None else float(config.s)
        return transport_lab.SetSpec.sobolev_ball(sigma, config.set_radius)
    return transport_lab.SetSpec.half_space(
        config.set_mode, config.set_component, config.set_threshold)


def smooth_profile(n_max: int, amplitude: float = 0.5, decay: float = 0.5) -> SpectralField:
    """Fixed smooth initial state used by trend diagnostics."""
    n = np.arange(1, n_max + 1, dtype=np.float64)
    return SpectralField(amplitude * np.exp(-decay * n) * (1.0 + 0.5j) / abs(1.0 + 0.5j))


# ---------------------------------------------------------------------------
# experiment bodies: each returns (status, summary, rows_for_csv-ish files)
# ---------------------------------------------------------------------------

def _run_simulate(config, meta, out):
    u0 = sample_mu_s(_spec(config, r=math.inf), config.master_seed)
    traj = integrate(u0, _params(config), config.t, config.dt,
                     record_every=config.stride, drift_tol=config.drift_tol)
    files = [
        write_text(os.path.join(out, "trajectory.csv"), trajectory_to_csv(traj), meta),
        write_json(os.path.join(out, "trajectory.json"),
                   {"trajectory": trajectory_to_json(traj)}, meta),
    ]
    summary = {
        "max_rel_drift": traj.max_rel_drift,
        "flagged": traj.flagged,
        "steps": len(traj) - 1,
        "final_conserved": float(traj.conserved_log[-1]),
        "final_energy": float(traj.energy_log[-1]),
    }
    return not traj.flagged, summary, files


def _run_conservation(config, meta, out):
    u0 = sample_mu_s(_spec(config, r=math.inf), config.master_seed)
    traj = integrate(u0, _params(config), config.t, config.dt,
                     record_every=max(config.stride, 1), drift_tol=config.drift_tol)
    rows = [
        (float(t), float(c), float(e))
        for t, c, e in zip(traj.physical_times, traj.conserved_log, traj.energy_log)
    ]
    files = [write_csv(os.path.join(out, "conservation.csv"),
                       ["t", "conserved", "energy"], rows, meta)]
    summary = {"max_rel_drift": traj.max_rel_drift, "tolerance": config.drift_tol}
    return traj.max_rel_drift < config.drift_tol, summary, files


def _run_liouville(config, meta, out):
    p = _params(config)
    u0 = sample_mu_s(_spec(config, r=math.inf), config.master_seed)
    det = jacobian_determinant(u0, p, config.t, config.dt)
    div = divergence_diagnostic(u0, p)
    summary = {
        "jacobian_determinant": det,
        "det_error": abs(det - 1.0),
        "divergence_diagnostic": div,
        "det_tol": config.det_tol,
        "div_tol": config.div_tol,
    }
    files = [write_json(os.path.join(out, "liouville.json"), {"results": summary}, meta)]
    return abs(det - 1.0) < config.det_tol and div < config.div_tol, summary, files


def _run_transport(config, meta, out):
    p = _params(config)
    spec = _spec(config)
    A = _set_spec(config)
    # shared seed: identical samples make the two routes coincide at t = 0
    # and only tighten the 3-sigma comparison at t != 0
    direct = transport_lab.transported_probability_direct(
        A, spec, p, config.t, config.samples, config.master_seed, config.dt)
    weighted = transport_lab.transported_probability_weighted(
        A, spec, p, config.t, config.samples, config.master_seed, config.dt)
    mass = transport_lab.pushforward_mass(
        spec, p, config.t, config.samples, config.master_seed + 1, config.dt)
    rows = [
        ("direct", direct.value, direct.stderr, direct.n_samples, direct.master_seed),
        ("weighted", weighted.value, weighted.stderr, weighted.n_samples, weighted.master_seed),
        ("pushforward_mass", mass.value, mass.stderr, mass.n_samples, mass.master_seed),
    ]
    files = [write_csv(os.path.join(out, "transport.csv"),
                       ["experiment", "value", "stderr", "n_samples", "seed"], rows, meta)]
    agree = direct.agrees_with(weighted)
    mass_ok = abs(mass.value - 1.0) <= 3.0 * mass.stderr
    summary = {
        "direct": direct.value, "direct_stderr": direct.stderr,
        "weighted": weighted.value, "weighted_stderr": weighted.stderr,
        "difference": direct.value - weighted.value,
        "combined_stderr": math.hypot(direct.stderr, weighted.stderr),
        "pushforward_mass": mass.value, "mass_stderr": mass.stderr,
        "estimators_agree_3sigma": agree, "mass_within_3sigma": mass_ok,
    }
    files.append(write_json(os.path.join(out, "transport.json"), {"results": summary}, meta))
    return agree and mass_ok, summary, files


def _run_energy(config, meta, out):
    p = _params(config)
    spec = _spec(config, r=math.inf)
    # exact identity on a handful of sampled states
    residuals = []
    for k in range(5):
        u = sample_mu_s(spec, config.master_seed + 10 + k)
        i1, i2 = energy_lab.energy_derivative_decomposed(u, p, oversample=2)
        residuals.append(abs(i1 + i2 - energy_lab.energy_derivative_spectral(u, p)))
    ibp = [
        energy_lab.ibp_identity_residual(
            sample_mu_s(MeasureSpec(sset, config.gamma, min(32, config.n_modes)),
                        config.master_seed + 20 + sset), sset, 8)
        for sset in (1, 2, 3)
    ]
    b = energy_lab.calibrate_energy_constant(
        spec, p, config.samples, config.master_seed, eps=config.eps, eps1=config.eps1,
        margin=config.margin, oversample=config.oversample)
    table = energy_lab.energy_bound_table(
        spec, p, b, config.samples, config.master_seed + 1, config.oversample)
    violations = int(np.sum(table[:, 2] > 1.0))
    rows = [(i, float(l), float(r), float(q)) for i, (l, r, q) in enumerate(table)]
    files = [
        write_csv(os.path.join(out, "energy_ratios.csv"),
                  ["sample_id", "lhs", "rhs", "ratio"], rows, meta),
        write_json(os.path.join(out, "energy.json"), {"results": {
            "identity_residual_max": max(residuals),
            "ibp_residuals": ibp,
            "kappa": b.kappa, "thetas": list(b.thetas), "C_fit": b.C_fit,
            "violations": violations, "heldout_samples": len(rows),
        }}, meta),
    ]
    ok = max(residuals) < 1e-9 and max(ibp) < 1e-10 and violations == 0
    summary = {"identity_residual_max": max(residuals), "ibp_max": max(ibp),
               "C_fit": b.C_fit, "kappa": b.kappa, "violations": violations}
    return ok, summary, files


def _run_large_deviation(config, meta, out):
    spec = _spec(config, r=math.inf)
    scan = energy_lab.large_deviation_scan(
        spec, config.eps, config.p_list, config.samples, config.master_seed,
        config.oversample)
    slope = energy_lab.loglog_slope(scan)
    files = [
        write_csv(os.path.join(out, "large_deviation.csv"), ["p", "lp_norm"],
                  [(q, v) for q, v in scan], meta),
        write_json(os.path.join(out, "large_deviation.json"),
                   {"results": {"slope": slope, "tolerance": config.slope_tol,
                                "scan": [[q, v] for q, v in scan]}}, meta),
    ]
    return slope <= config.slope_tol, {"slope": slope, "tolerance": config.slope_tol}, files


def _run_singular_demo(config, meta, out):
    sums = transport_lab.singular_partial_sums(
        config.gamma, int(config.s), config.t, config.n_list)
    pairing = transport_lab.singular_pairing_sums(
        config.gamma, int(config.s), config.t, config.n_list)
    exponent = transport_lab.fitted_growth_exponent(config.n_list, sums)
    target = 3.0 - 2.0 * config.gamma
    files = [
        # two-column plotting data; the pairing witness goes alongside
        write_csv(os.path.join(out, "singular_demo.csv"),
                  ["N", "partial_sum"],
                  [(n, float(v)) for n, v in zip(config.n_list, sums)], meta),
        write_csv(os.path.join(out, "singular_pairing.csv"),
                  ["N", "pairing_sum"],
                  [(n, float(v)) for n, v in zip(config.n_list, pairing)], meta),
        write_json(os.path.join(out, "singular_demo.json"), {"results": {
            "fitted_exponent": exponent, "target_exponent": target,
            "tolerance": config.exponent_tol}}, meta),
    ]
    ok = abs(exponent - target) <= config.exponent_tol
    return ok, {"fitted_exponent": exponent, "target_exponent": target}, files


def _classify_trend(increments, shrink_factor: float = 0.5) -> str:
    ratios = [b / a for a, b in zip(increments, increments[1:]) if a > 0]
    if not ratios:
        return "mixed"
    if all(r < shrink_factor for r in ratios):
        return "shrinking"
    if all(r >= shrink_factor for r in ratios):
        return "nonshrinking"
    return "mixed"


def _run_dk_diagnostic(config, meta, out):
    p = _params(config)
    u0 = smooth_profile(min(8, p.n_modes))
    norms = [dk_hilbert_schmidt(u0, p, config.t, b, config.dt)
             for b in config.basis_list]
    sums_sq = [v * v for v in norms]
    increments = [b - a for a, b in zip(sums_sq, sums_sq[1:])]
    trend = _classify_trend(increments)
    rows = list(zip(config.basis_list, norms, sums_sq))
    files = [
        write_csv(os.path.join(out, "dk_diagnostic.csv"),
                  ["basis_dim", "hs_norm", "hs_sum_sq"], rows, meta),
        write_json(os.path.join(out, "dk_diagnostic.json"), {"results": {
            "hs_norms": norms, "increments": increments, "trend": trend,
            "expected": config.expect_trend}}, meta),
    ]
    ok = (not config.expect_trend) or trend == config.expect_trend
    return ok, {"trend": trend, "hs_norms": norms}, files


_RUNNERS = {
    "simulate": _run_simulate,
    "conservation": _run_conservation,
    "liouville": _run_liouville,
    "transport": _run_transport,
    "energy": _run_energy,
    "large-deviation": _run_large_deviation,
    "singular-demo": _run_singular_demo,
    "dk-diagnostic": _run_dk_diagnostic,
}


def run(config: ExperimentConfig) -> ReportBundle:
    """Execute one validated experiment and write its artifacts."""
    problems = validate(config)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    out = config.out_dir or os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(out, exist_ok=True)
    # hash the experiment parameters only: where the files land must not
    # change their bytes
    hashed = {k: v for k, v in config.to_dict().items() if k != "out_dir"}
    chash = config_hash(hashed)
    meta = {"tool": "gbbmlab", "version": __version__,
            "config_hash": chash, "experiment": config.experiment}
    start = time.perf_counter()
    status, summary, files = _RUNNERS[config.experiment](config, meta, out)
    wall = time.perf_counter() - start
    return ReportBundle(config.experiment, status, summary, files, chash, wall)


# ---------------------------------------------------------------------------
# argument parsing: TOML file first, flags override
# ---------------------------------------------------------------------------

_LIST_FIELDS = {"p_list", "n_list", "basis_list"}


def _coerce(name: str, value):
    spec = {f.name: f for f in fields(ExperimentConfig)}[name]
    if name in _LIST_FIELDS:
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        conv = float if name == "p_list" else int
        return tuple(conv(v) for v in value)
    if spec.type in ("float", "float | None") or name in ("r", "set_sigma"):
        return None if value is None else float(value)
    if spec.type == "int":
        return int(value)
    return value


def _add_flags(ap: argparse.ArgumentParser):
    ap.add_argument("--config", help="TOML config file (flags override it)")
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--s", type=int)
    ap.add_argument("--n-modes", type=int, dest="n_modes")
    ap.add_argument("--t", type=float)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--seed", type=int, dest="master_seed")
    ap.add_argument("--r", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--eps1", type=float)
    ap.add_argument("--margin", type=float)
    ap.add_argument("--oversample", type=int)
    ap.add_argument("--drift-tol", type=float, dest="drift_tol")
    ap.add_argument("--stride", type=int)
    ap.add_argument("--p-list", dest="p_list")
    ap.add_argument("--n-list", dest="n_list")
    ap.add_argument("--basis-list", dest="basis_list")
    ap.add_argument("--set-kind", dest="set_kind")
    ap.add_argument("--set-sigma", type=float, dest="set_sigma")
    ap.add_argument("--set-radius", type=float, dest="set_radius")
    ap.add_argument("--set-mode", type=int, dest="set_mode")
    ap.add_argument("--set-component", dest="set_component")
    ap.add_argument("--set-threshold", type=float, dest="set_threshold")
    ap.add_argument("--expect-trend", dest="expect_trend")
    ap.add_argument("--out-dir", dest="out_dir")


def build_config(args: argparse.Namespace) -> tuple[ExperimentConfig, list[str]]:
    """Merge defaults <- TOML <- flags; returns (config, diagnostics)."""
    diag = []
    merged = {"experiment": args.experiment}
    known = {f.name for f in fields(ExperimentConfig)}
    if args.config:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
        for key, value in data.items():
            if key not in known:
                diag.append(f"{key}: unknown config key")
                continue
            merged[key] = _coerce(key, value)
    for key in known:
        val = getattr(args, key, None)
        if val is not None and key != "experiment":
            merged[key] = _coerce(key, val)
    config = ExperimentConfig(**merged)
    return config, diag


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gbbmlab",
        description="Experiment runner for the generalized BBM spectral laboratory")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        _add_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    args = parser.parse_args(argv)

    config, diag = build_config(args)
    diag += validate(config)
    if diag:
        for d in diag:
            print(f"validation: {d}", file=sys.stderr)
        return 2

    bundle = run(config)
    verdict = "pass" if bundle.status else "FAIL"
    print(f"{bundle.experiment}: {verdict} (config {bundle.config_hash}, "
          f"{bundle.wall_time_s:.2f}s)")
    for key, val in bundle.summary.items():
        print(f"  {key}: {val}")
    for path in bundle.files:
        print(f"  wrote {path}")
    return 0 if bundle.status else 1


if __name__ == "__main__":
    raise SystemExit(main())
