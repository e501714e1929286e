"""Monte-Carlo experiment orchestration.

Sweeps the Aloha access probability over a grid, aggregates the achieved
contraction epsilon(T) = V(T)/V(0) per grid point as a geometric mean with
a multiplicative (log-domain) confidence interval, and compares the
empirical optimum against the closed-form prediction evaluated at the
realized effective link distance. Also hosts the contraction-bound
comparison used by the validation suite.

Every run derives its random stream deterministically from
(base_seed, grid index, run index), so identical configs produce
bit-identical results regardless of worker count or completion order.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import stats as _stats

from . import analysis, geometry, gossip
from .channel import ChannelParams, spatial_contention
from .geometry import Window

#: Default seed shared by the CLI and the canonical configuration.
DEFAULT_SEED = 1729

#: 16 log-spaced grid points on [0.005, 0.6], frozen so results stay stable.
CANONICAL_P_GRID = (
    0.005,
    0.0068798993922549205,
    0.009466603129509915,
    0.013025855423486762,
    0.017923314962329392,
    0.0246621207433047,
    0.03393458190271589,
    0.04669330188178395,
    0.06424904384777216,
    0.08840539154424945,
    0.12164403991146798,
    0.1673797512516683,
    0.23031116978242652,
    0.3169035354031271,
    0.4360528881246818,
    0.6,
)


class InvariantViolation(RuntimeError):
    """A sweep produced data that breaks one of its structural guarantees."""


@dataclass(frozen=True)
class SweepConfig:
    """Full description of one access-probability sweep.

    deploy_mode "binomial" places exactly n_nodes uniform points (the node
    density used in the closed forms is then n_nodes/side^2); "ppp" draws a
    Poisson number of points from ``intensity``. r_eff_mode controls where
    the realized effective distance replaces the nominal range in the
    predicted optimum: in both coefficients ("both", default) or only in
    the interference one ("b_only").
    """

    deploy_mode: str = "binomial"
    n_nodes: int = 200
    intensity: float | None = None
    side: float = 100.0
    boundary: str = "open"
    range_r: float = 10.0
    theta: float = 1.0
    alpha: float = 4.0
    channel_mode: str = "analytic"
    p_grid: tuple = CANONICAL_P_GRID
    horizon: int = 400
    runs_per_p: int = 50
    base_seed: int = DEFAULT_SEED
    fixed_geometry: bool = False
    decode_order: str = "match_first"
    r_eff_mode: str = "both"
    eps_floor: float = 1e-16

    def validate(self):
        if self.deploy_mode not in ("binomial", "ppp"):
            raise ValueError(f"deploy_mode must be 'binomial' or 'ppp', got {self.deploy_mode!r}")
        if self.deploy_mode == "binomial":
            if self.n_nodes is None or self.n_nodes < 2:
                raise ValueError(f"binomial mode needs n_nodes >= 2, got {self.n_nodes}")
        else:
            if self.intensity is None or not self.intensity > 0:
                raise ValueError(f"ppp mode needs a positive intensity, got {self.intensity}")
        Window(self.side, self.boundary)  # validates side and boundary
        if not self.range_r > 0:
            raise ValueError(f"range must be positive, got {self.range_r}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        if self.channel_mode not in ("analytic", "exact_sir"):
            raise ValueError(f"channel_mode must be 'analytic' or 'exact_sir', got {self.channel_mode!r}")
        if self.decode_order not in ("match_first", "decode_first"):
            raise ValueError(f"decode_order must be 'match_first' or 'decode_first', got {self.decode_order!r}")
        if self.r_eff_mode not in ("both", "b_only"):
            raise ValueError(f"r_eff_mode must be 'both' or 'b_only', got {self.r_eff_mode!r}")
        if len(self.p_grid) == 0:
            raise ValueError("p_grid must not be empty")
        for p in self.p_grid:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"p_grid entries must lie in (0, 1], got {p}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.runs_per_p < 2:
            raise ValueError(f"runs_per_p must be >= 2 (the CI needs two samples), got {self.runs_per_p}")
        if not self.eps_floor > 0:
            raise ValueError(f"eps_floor must be positive, got {self.eps_floor}")
        return self

    def nominal_intensity(self):
        """Node density entering the closed forms (n/area in binomial mode)."""
        if self.deploy_mode == "ppp":
            return float(self.intensity)
        return self.n_nodes / (self.side * self.side)


_CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(SweepConfig))


def config_from_dict(d):
    """Build and validate a SweepConfig from a plain dict (e.g. parsed JSON)."""
    unknown = sorted(set(d) - set(_CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    d = dict(d)
    if "p_grid" in d:
        d["p_grid"] = tuple(float(p) for p in d["p_grid"])
    return SweepConfig(**d).validate()


def config_to_dict(config):
    d = dataclasses.asdict(config)
    d["p_grid"] = [float(p) for p in config.p_grid]
    return d


def load_config(path):
    """Read a JSON sweep configuration; keys mirror the SweepConfig fields."""
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def canonical_config():
    """The versioned reference configuration used by the acceptance checks."""
    text = resources.files("swarmgossip").joinpath("configs/canonical.json").read_text()
    return config_from_dict(json.loads(text))


class GeoMeanCI(NamedTuple):
    geo_mean: float
    lo: float
    hi: float


def log_domain_ci(samples, level=0.95):
    """Geometric mean with a multiplicative normal-quantile confidence interval.

    Computed on the logs: exp(mean +- z * std / sqrt(n)) with z the normal
    quantile at ``level``. Needs at least two strictly positive samples.
    """
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise ValueError(f"need at least 2 samples, got {s.size}")
    if np.any(s <= 0.0):
        raise ValueError("log-domain statistics need strictly positive samples")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    logs = np.log(s)
    mean = float(logs.mean())
    half = float(_stats.norm.ppf(0.5 + level / 2.0)) * float(logs.std(ddof=1)) / math.sqrt(s.size)
    return GeoMeanCI(math.exp(mean), math.exp(mean - half), math.exp(mean + half))


@dataclass(frozen=True)
class SweepPoint:
    p: float
    geo_mean_epsilon: float
    ci_low: float
    ci_high: float
    runs: int


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    points: tuple
    epsilons: tuple          # per grid point: the raw per-run epsilon values
    r_eff_used: float
    p_star_full: float
    p_star_dense: float
    empirical_argmin: float
    floored_runs: int
    no_link_runs: int
    init_redraws: int


class _RunRecord(NamedTuple):
    epsilon: float
    r_eff: float
    floored: bool
    no_links: bool
    redraws: int


def sample_deployment(config, rng):
    """Draw one deployment per the config (redrawing PPP counts below 2 nodes)."""
    win = Window(config.side, config.boundary)
    for _ in range(1000):
        if config.deploy_mode == "ppp":
            pts = geometry.sample_ppp(config.intensity, win, rng)
            if len(pts) < 2:
                continue  # gossip needs two nodes; vanishing probability at sane intensities
        else:
            pts = geometry.sample_binomial(config.n_nodes, win, rng)
        return geometry.build_disk_graph(pts, config.range_r, win)
    raise InvariantViolation("could not draw a deployment with at least 2 nodes in 1000 attempts")


def fixed_deployment(config):
    """The deterministic deployment shared by fixed-geometry runs of a config."""
    rng = np.random.default_rng(np.random.SeedSequence(config.base_seed, spawn_key=(0,)))
    return sample_deployment(config, rng)


def _channel_params(config, p):
    return ChannelParams(intensity=config.nominal_intensity(), access_p=p,
                         theta=config.theta, alpha=config.alpha)


def _check_run_invariants(trajectory, x0):
    v = trajectory.v_series
    if np.any(np.diff(v) > 1e-12 * max(v[0], 1.0)):
        raise InvariantViolation("disagreement energy increased during a run")
    drift = abs(float(trajectory.x_final.mean()) - float(x0.mean()))
    scale = float(np.max(np.abs(x0))) or 1.0
    if drift > 1e-12 * scale:
        raise InvariantViolation("state average drifted during a run")


def _run_once(config, p, seed_seq, deployment=None):
    rng = np.random.default_rng(seed_seq)
    dep = deployment if deployment is not None else sample_deployment(config, rng)
    try:
        r_eff = geometry.effective_distance(dep)
        no_links = False
    except geometry.NoLinksError:
        r_eff = config.range_r  # documented fallback, counted in the manifest
        no_links = True
    redraws = 0
    while True:
        x0 = rng.uniform(0.0, 1.0, dep.n)
        if gossip.disagreement_energy(x0) > 0.0:
            break
        redraws += 1
        if redraws > 100:
            raise InvariantViolation("could not draw a non-degenerate initial state")
    trajectory = gossip.run_trajectory(dep, _channel_params(config, p), config.channel_mode,
                                       config.horizon, rng, init=x0,
                                       decode_order=config.decode_order)
    _check_run_invariants(trajectory, x0)
    eps = trajectory.epsilon_t
    floored = eps == 0.0
    if floored:
        eps = config.eps_floor
    return _RunRecord(float(eps), float(r_eff), floored, no_links, redraws)


def _sweep_point_task(args):
    config, p_index = args
    dep = fixed_deployment(config) if config.fixed_geometry else None
    p = config.p_grid[p_index]
    records = [
        _run_once(config, p,
                  np.random.SeedSequence(config.base_seed, spawn_key=(1, p_index, run_index)),
                  dep)
        for run_index in range(config.runs_per_p)
    ]
    return p_index, records


def _effective_coefficients(config, intensity, r_eff):
    b = intensity * float(spatial_contention(r_eff, config.theta, config.alpha))
    if config.r_eff_mode == "both":
        a = intensity * math.pi * r_eff * r_eff
    else:  # "b_only": keep the availability coefficient at the nominal range
        a = intensity * math.pi * config.range_r * config.range_r
    return analysis.ProxyCoefficients(a=a, b=b)


def sweep_access_probability(config, workers=1):
    """Run the whole sweep and aggregate per-grid-point statistics.

    Grid points execute independently (optionally on a process pool); the
    reduction is by grid index, so the result does not depend on worker
    count or completion order.
    """
    config.validate()
    n_points = len(config.p_grid)
    tasks = [(config, i) for i in range(n_points)]
    if workers and workers > 1 and n_points > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_points)) as pool:
            by_point = dict(pool.map(_sweep_point_task, tasks))
    else:
        by_point = dict(_sweep_point_task(t) for t in tasks)

    points = []
    epsilons = []
    r_effs = []
    floored = no_links = redraws = 0
    for i in range(n_points):
        records = by_point[i]
        eps = np.array([rec.epsilon for rec in records])
        if np.any(eps <= 0.0):
            raise InvariantViolation("nonpositive epsilon escaped the floor rule")
        ci = log_domain_ci(eps)
        if not ci.lo <= ci.geo_mean <= ci.hi:
            raise InvariantViolation("confidence interval does not bracket the geometric mean")
        points.append(SweepPoint(p=float(config.p_grid[i]), geo_mean_epsilon=ci.geo_mean,
                                 ci_low=ci.lo, ci_high=ci.hi, runs=len(records)))
        epsilons.append(tuple(float(e) for e in eps))
        r_effs.extend(rec.r_eff for rec in records)
        floored += sum(rec.floored for rec in records)
        no_links += sum(rec.no_links for rec in records)
        redraws += sum(rec.redraws for rec in records)

    r_eff_used = float(np.mean(r_effs))
    coeffs = _effective_coefficients(config, config.nominal_intensity(), r_eff_used)
    argmin_point = min(points, key=lambda pt: pt.geo_mean_epsilon)
    return SweepResult(
        config=config,
        points=tuple(points),
        epsilons=tuple(epsilons),
        r_eff_used=r_eff_used,
        p_star_full=analysis.optimal_access(coeffs),
        p_star_dense=analysis.optimal_access_dense(coeffs.b),
        empirical_argmin=argmin_point.p,
        floored_runs=floored,
        no_link_runs=no_links,
        init_redraws=redraws,
    )


@dataclass(frozen=True)
class BoundReport:
    """Empirical mean contraction curve versus its predicted envelope."""

    p: float
    gamma_used: float
    q_lb: float
    mean_curve: np.ndarray
    ci_halfwidth: np.ndarray
    bound_curve: np.ndarray
    violation_fraction: float
    max_excess: float
    within_ci: bool
    holds: bool


def compare_bound(config, gamma_estimate, p, runs=None, level=0.95):
    """Compare mean V(t)/V(0) against (1 - gamma * q_lb(p))**t on a fixed geometry.

    ``holds`` allows at most 1% of time points above the envelope, and any
    such excess must stay within the Monte-Carlo CI half-width of the mean.
    Pass a conservative gamma (e.g. the estimate minus twice its stderr) so
    sampling noise cannot fake a violation.
    """
    config.validate()
    if not 0.0 <= gamma_estimate <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma_estimate}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"access probability must lie in [0, 1], got {p}")
    runs = config.runs_per_p if runs is None else int(runs)
    if runs < 2:
        raise ValueError(f"need at least 2 runs, got {runs}")

    dep = fixed_deployment(config)
    params = _channel_params(config, p)
    curves = np.empty((runs, config.horizon + 1))
    p_key = int(round(p * 1e9))
    for run_index in range(runs):
        seed_seq = np.random.SeedSequence(config.base_seed, spawn_key=(2, p_key, run_index))
        rng = np.random.default_rng(seed_seq)
        while True:
            x0 = rng.uniform(0.0, 1.0, dep.n)
            if gossip.disagreement_energy(x0) > 0.0:
                break
        trajectory = gossip.run_trajectory(dep, params, config.channel_mode, config.horizon,
                                           rng, init=x0, decode_order=config.decode_order)
        curves[run_index] = trajectory.v_series / trajectory.v_series[0]

    mean_curve = curves.mean(axis=0)
    z = float(_stats.norm.ppf(0.5 + level / 2.0))
    ci_half = z * curves.std(axis=0, ddof=1) / math.sqrt(runs)
    qlb = float(analysis.q_lower_bound(p, config.nominal_intensity(), config.range_r,
                                       config.theta, config.alpha))
    t = np.arange(config.horizon + 1)
    bound = (1.0 - gamma_estimate * qlb) ** t
    excess = mean_curve - bound
    violating = excess > 0.0
    within_ci = bool(np.all(excess[violating] <= ci_half[violating])) if violating.any() else True
    violation_fraction = float(violating.mean())
    return BoundReport(
        p=float(p),
        gamma_used=float(gamma_estimate),
        q_lb=qlb,
        mean_curve=mean_curve,
        ci_halfwidth=ci_half,
        bound_curve=bound,
        violation_fraction=violation_fraction,
        max_excess=float(excess.max()),
        within_ci=within_ci,
        holds=violation_fraction <= 0.01 and within_ci,
    )


def atomic_write_text(path, text):
    """Write-then-rename so interrupted runs never leave partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def sweep_csv_text(result):
    lines = ["p,geo_mean_epsilon,ci_low,ci_high,runs"]
    for pt in result.points:
        lines.append(f"{float(pt.p)!r},{float(pt.geo_mean_epsilon)!r},"
                     f"{float(pt.ci_low)!r},{float(pt.ci_high)!r},{pt.runs}")
    return "\n".join(lines) + "\n"


def manifest_dict(result):
    from . import __version__
    return {
        "config": config_to_dict(result.config),
        "base_seed": result.config.base_seed,
        "r_eff_used": result.r_eff_used,
        "p_star_full": result.p_star_full,
        "p_star_dense": result.p_star_dense,
        "empirical_argmin": result.empirical_argmin,
        "floored_runs": result.floored_runs,
        "no_link_runs": result.no_link_runs,
        "init_redraws": result.init_redraws,
        "tool_version": __version__,
    }


def write_sweep_outputs(result, outdir):
    """Write sweep.csv and manifest.json (atomically) into ``outdir``."""
    outdir = Path(outdir)
    csv_path = atomic_write_text(outdir / "sweep.csv", sweep_csv_text(result))
    manifest_path = atomic_write_text(
        outdir / "manifest.json",
        json.dumps(manifest_dict(result), indent=2, sort_keys=True) + "\n")
    return csv_path, manifest_path
