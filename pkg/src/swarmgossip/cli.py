"""Command-line front end.

Subcommands: ``calc`` (closed-form design numbers), ``run`` (one simulated
trajectory), ``sweep`` (the access-probability experiment, CSV + manifest),
``validate-channel`` (brute-force check of the reception law), and
``estimate-gamma`` (sampled contraction factor of a geometry). Every
subcommand honors --seed (default 1729) and is reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, geometry, gossip, harness, mac
from .channel import ChannelParams, closed_form_success, interference_constant, \
    monte_carlo_success, spatial_contention
from .geometry import Window
from .harness import DEFAULT_SEED, InvariantViolation


def _add_theta_flags(sp):
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--theta", type=float, default=None,
                       help="SIR threshold, linear scale (default 1.0)")
    group.add_argument("--theta-db", type=float, default=None,
                       help="SIR threshold in dB (converted to linear at the boundary)")


def _resolve_theta(args, parser):
    if args.theta_db is not None:
        return 10.0 ** (args.theta_db / 10.0)
    theta = 1.0 if args.theta is None else args.theta
    if not theta > 0:
        parser.error(f"--theta must be > 0 (got {theta})")
    return theta


def _add_geometry_flags(sp, default_n=200, default_side=100.0, default_range=10.0):
    sp.add_argument("--lambda", dest="intensity", type=float, default=None,
                    help="node density per unit area (selects random-count deployments)")
    sp.add_argument("--n", type=int, default=None,
                    help=f"exact node count for fixed-count deployments (default {default_n})")
    sp.add_argument("--side", type=float, default=default_side, help="window side length")
    sp.add_argument("--range", dest="range_r", type=float, default=default_range,
                    help="neighbor range R")
    sp.add_argument("--boundary", choices=["open", "torus"], default="open",
                    help="window distance metric")
    sp.add_argument("--points-file", default=None,
                    help="replay a fixed geometry from a text file with one 'x y' pair per line")


def _check(parser, condition, message):
    if not condition:
        parser.error(message)


def _validate_common(args, parser):
    if getattr(args, "alpha", None) is not None:
        _check(parser, args.alpha > 2, f"--alpha must be > 2 (got {args.alpha})")
    if getattr(args, "intensity", None) is not None:
        _check(parser, args.intensity > 0, f"--lambda must be > 0 (got {args.intensity})")
    if getattr(args, "n", None) is not None:
        _check(parser, args.n >= 2, f"--n must be >= 2 (got {args.n})")
    if getattr(args, "side", None) is not None:
        _check(parser, args.side > 0, f"--side must be > 0 (got {args.side})")
    if getattr(args, "range_r", None) is not None:
        _check(parser, args.range_r > 0, f"--range must be > 0 (got {args.range_r})")
    if getattr(args, "horizon", None) is not None:
        _check(parser, args.horizon >= 1, f"--horizon must be >= 1 (got {args.horizon})")
    if getattr(args, "runs", None) is not None:
        _check(parser, args.runs >= 2, f"--runs must be >= 2 (got {args.runs})")
    if getattr(args, "threads", None) is not None:
        _check(parser, args.threads >= 1, f"--threads must be >= 1 (got {args.threads})")


def _resolve_intensity(args, parser):
    """Node density from --lambda, or from --n and --side."""
    if args.intensity is not None:
        return args.intensity
    n = args.n if args.n is not None else 200
    _check(parser, n >= 2, f"--n must be >= 2 (got {n})")
    return n / (args.side * args.side)


def _resolve_outdir(args):
    if args.output:
        return Path(args.output)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return Path("out") / f"{args.command}-{stamp}"


def _parse_p_grid(spec, parser):
    """Parse --p-grid: either comma-separated values or log:LO:HI:N."""
    try:
        if spec.startswith("log:"):
            _, lo, hi, num = spec.split(":")
            grid = np.geomspace(float(lo), float(hi), int(num))
            return tuple(float(p) for p in grid)
        return tuple(float(tok) for tok in spec.split(",") if tok.strip())
    except ValueError:
        parser.error(f"--p-grid must be comma-separated values or log:LO:HI:N (got {spec!r})")


def _deployment_from_args(args, theta, parser, rng):
    """Build one deployment from the geometry flags or a points file."""
    win = Window(args.side, args.boundary)
    if args.points_file:
        points = geometry.load_points(args.points_file)
        _check(parser, len(points) >= 2,
               f"--points-file must supply at least 2 points (got {len(points)})")
        return geometry.build_disk_graph(points, args.range_r, win)
    if args.intensity is not None:
        for _ in range(1000):
            points = geometry.sample_ppp(args.intensity, win, rng)
            if len(points) >= 2:
                return geometry.build_disk_graph(points, args.range_r, win)
        parser.error("--lambda produced fewer than 2 nodes in 1000 draws; raise it")
    n = args.n if args.n is not None else 200
    points = geometry.sample_binomial(n, win, rng)
    return geometry.build_disk_graph(points, args.range_r, win)


# ---------------------------------------------------------------------------
# calc


def _cmd_calc(args, parser):
    theta = _resolve_theta(args, parser)
    lam = _resolve_intensity(args, parser)
    const = interference_constant(args.alpha)
    contention = float(spatial_contention(args.range_r, theta, args.alpha))
    coeffs = analysis.ab_coefficients(lam, args.range_r, theta, args.alpha)
    p_full = analysis.optimal_access(coeffs)
    p_dense = analysis.optimal_access_dense(coeffs.b)

    rows = [
        ("alpha", args.alpha),
        ("theta (linear)", theta),
        ("intensity", lam),
        ("range R", args.range_r),
        ("C(alpha)", const),
        ("K(R)", contention),
        ("a = intensity*pi*R^2", coeffs.a),
        ("b = intensity*K(R)", coeffs.b),
        ("b/a", coeffs.b / coeffs.a),
        ("p_star (full)", p_full),
        ("p_star (dense)", p_dense),
    ]
    q_at = [0.0, p_full / 2.0, p_full, min(1.0, 2.0 * p_full), 1.0]
    for p in q_at:
        q = float(analysis.q_lower_bound(p, lam, args.range_r, theta, args.alpha))
        rows.append((f"q_lb(p={p:.6g})", q))
    q_star = float(analysis.q_lower_bound(p_full, lam, args.range_r, theta, args.alpha))
    gq = args.gamma * q_star
    if 0.0 < gq < 1.0 and 0.0 < args.eps < args.v0:
        bound = analysis.consensus_time_bound(args.gamma, q_star, args.v0, args.eps)
        rows.append((f"T_eps tight (gamma={args.gamma:g}, V0={args.v0:g}, eps={args.eps:g})",
                     bound.tight))
        rows.append(("T_eps loose", bound.loose))
    width = max(len(name) for name, _ in rows) + 2
    for name, value in rows:
        print(f"{name:<{width}}{value:.12g}")
    return 0


# ---------------------------------------------------------------------------
# run


def _cmd_run(args, parser):
    theta = _resolve_theta(args, parser)
    seed_seq = np.random.SeedSequence(args.seed, spawn_key=(0,))
    rng = np.random.default_rng(seed_seq)
    dep = _deployment_from_args(args, theta, parser, rng)
    lam = args.intensity if args.intensity is not None else dep.n / (args.side * args.side)
    try:
        r_eff = geometry.effective_distance(dep)
    except geometry.NoLinksError:
        r_eff = args.range_r
        print(f"note: no links in range; using r_eff = R = {args.range_r:g}", file=sys.stderr)

    if args.p is not None:
        _check(parser, 0.0 <= args.p <= 1.0, f"--p must be in [0, 1] (got {args.p})")
        p = args.p
    else:
        coeffs = analysis.ab_coefficients(lam, r_eff, theta, args.alpha)
        p = analysis.optimal_access(coeffs)

    params = ChannelParams(intensity=lam, access_p=p, theta=theta, alpha=args.alpha)
    run_rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(1,)))
    trajectory = gossip.run_trajectory(dep, params, args.mode, args.horizon, run_rng,
                                       decode_order=args.decode_order,
                                       keep_outcomes=args.dump_slots)

    outdir = _resolve_outdir(args)
    import io
    buf = io.StringIO()
    gossip.write_trajectory_csv(trajectory, buf)
    traj_path = harness.atomic_write_text(outdir / "trajectory.csv", buf.getvalue())
    written = [traj_path]
    if args.dump_slots:
        buf = io.StringIO()
        mac.dump_outcomes(trajectory.outcomes, buf, start_slot=1)
        written.append(harness.atomic_write_text(outdir / "slots.jsonl", buf.getvalue()))

    print(f"nodes              {dep.n}")
    print(f"links              {dep.n_edges}")
    print(f"r_eff              {r_eff:.6g}")
    print(f"access p           {p:.6g}")
    print(f"channel mode       {args.mode}")
    print(f"V(0)               {trajectory.v_series[0]:.6g}")
    print(f"V(T)               {trajectory.v_series[-1]:.6g}")
    print(f"epsilon(T)         {trajectory.epsilon_t:.6g}")
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _apply_overrides(config, args, parser):
    updates = {}
    if args.seed_given:
        updates["base_seed"] = args.seed
    if args.intensity is not None:
        updates["deploy_mode"] = "ppp"
        updates["intensity"] = args.intensity
    if args.n is not None:
        updates["deploy_mode"] = "binomial"
        updates["n_nodes"] = args.n
    if args.side_given:
        updates["side"] = args.side
    if args.range_given:
        updates["range_r"] = args.range_r
    if args.boundary_given:
        updates["boundary"] = args.boundary
    if args.theta is not None or args.theta_db is not None:
        updates["theta"] = _resolve_theta(args, parser)
    if args.alpha_given:
        updates["alpha"] = args.alpha
    if args.mode_given:
        updates["channel_mode"] = args.mode
    if args.horizon_given:
        updates["horizon"] = args.horizon
    if args.runs_given:
        updates["runs_per_p"] = args.runs
    if args.p_grid is not None:
        updates["p_grid"] = _parse_p_grid(args.p_grid, parser)
    if args.fixed_geometry:
        updates["fixed_geometry"] = True
    if args.decode_order_given:
        updates["decode_order"] = args.decode_order
    if args.r_eff_mode_given:
        updates["r_eff_mode"] = args.r_eff_mode
    if not updates:
        return config
    return dataclasses.replace(config, **updates).validate()


def _cmd_sweep(args, parser):
    if args.config:
        if not os.path.exists(args.config):
            print(f"error: config file not found: {args.config}", file=sys.stderr)
            return 1
        config = harness.load_config(args.config)
    else:
        config = harness.canonical_config()
    config = _apply_overrides(config, args, parser)

    result = harness.sweep_access_probability(config, workers=args.threads)
    outdir = _resolve_outdir(args)
    csv_path, manifest_path = harness.write_sweep_outputs(result, outdir)
    print(f"r_eff_used         {result.r_eff_used:.6g}")
    print(f"p_star_full        {result.p_star_full:.6g}")
    print(f"p_star_dense       {result.p_star_dense:.6g}")
    print(f"empirical argmin   {result.empirical_argmin:.6g}")
    print(f"wrote {csv_path}")
    print(f"wrote {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# validate-channel


def _parse_floats(parser, flag, spec):
    try:
        return [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        parser.error(f"{flag} must be comma-separated numbers (got {spec!r})")


def _cmd_validate_channel(args, parser):
    _check(parser, args.trials >= 10_000, f"--trials must be >= 10000 (got {args.trials})")
    theta = _resolve_theta(args, parser)
    alphas = _parse_floats(parser, "--alphas", args.alphas)
    lamps = _parse_floats(parser, "--lamp-grid", args.lamp_grid)
    radii = _parse_floats(parser, "--r-grid", args.r_grid)
    for alpha in alphas:
        _check(parser, alpha > 2, f"--alphas entries must be > 2 (got {alpha})")
        if alpha < 2.2:
            print(f"warning: alpha={alpha:g} sits near the alpha->2 divergence; "
                  "the interference constant is huge and convergence is slow",
                  file=sys.stderr)
    _check(parser, args.side_mult >= 2, f"--side-mult must be >= 2 (got {args.side_mult})")

    worst = 0.0
    failed = False
    point = 0
    for alpha in alphas:
        for lamp in lamps:
            for r in radii:
                params = ChannelParams(intensity=lamp, access_p=1.0, theta=theta, alpha=alpha)
                win = Window(args.side_mult * r, "torus")
                rng = np.random.default_rng(
                    np.random.SeedSequence(args.seed, spawn_key=(3, point)))
                est = monte_carlo_success(params, r, win, args.trials, rng)
                predicted = closed_form_success(params, r)
                se = math.sqrt(predicted * (1.0 - predicted) / args.trials)
                z = (est.point_estimate - predicted) / se if se > 0 else 0.0
                worst = max(worst, abs(z))
                failed = failed or abs(z) > 4.0
                print(f"alpha={alpha:<5g} lambda*p={lamp:<7g} r={r:<5g} "
                      f"closed={predicted:.4e} mc={est.point_estimate:.4e} z={z:+6.2f}")
                point += 1
    verdict = "FAIL" if failed else "PASS"
    print(f"{verdict}: max |z| = {worst:.2f} over {point} points "
          f"({args.trials} trials each, threshold 4)")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# estimate-gamma


def _cmd_estimate_gamma(args, parser):
    theta = _resolve_theta(args, parser)
    _check(parser, 0.0 <= args.p <= 1.0, f"--p must be in [0, 1] (got {args.p})")
    _check(parser, args.samples >= 1, f"--samples must be >= 1 (got {args.samples})")
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0,)))
    dep = _deployment_from_args(args, theta, parser, rng)
    lam = args.intensity if args.intensity is not None else dep.n / (args.side * args.side)
    params = ChannelParams(intensity=lam, access_p=args.p, theta=theta, alpha=args.alpha)
    est_rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(4,)))
    est = analysis.estimate_rho(dep, params, args.samples, est_rng)
    print(f"nodes              {dep.n}")
    print(f"access p           {args.p:.6g}")
    print(f"samples            {est.samples}")
    print(f"rho                {est.rho:.10g}")
    print(f"gamma              {est.gamma:.10g}")
    print(f"stderr             {est.stderr:.4g}")
    print(f"gamma conservative {max(0.0, est.gamma - 2.0 * est.stderr):.10g}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swarmgossip",
        description="Broadcast gossip over an interference-limited wireless swarm: "
                    "closed-form tuning rules and Monte-Carlo experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help=f"base random seed (default {DEFAULT_SEED})")
        sp.add_argument("--output", default=None,
                        help="output directory (default ./out/<command>-<timestamp>)")

    calc = sub.add_parser("calc", help="print the closed-form design numbers")
    _add_theta_flags(calc)
    calc.add_argument("--alpha", type=float, default=4.0, help="path-loss exponent (> 2)")
    calc.add_argument("--lambda", dest="intensity", type=float, default=None,
                      help="node density per unit area")
    calc.add_argument("--n", type=int, default=None, help="node count (with --side, implies density)")
    calc.add_argument("--side", type=float, default=100.0, help="window side length")
    calc.add_argument("--range", dest="range_r", type=float, default=10.0, help="neighbor range R")
    calc.add_argument("--gamma", type=float, default=1.0,
                      help="contraction gap used for the consensus-time rows (default 1.0)")
    calc.add_argument("--v0", type=float, default=1.0, help="initial disagreement for the time bound")
    calc.add_argument("--eps", type=float, default=1e-3, help="target disagreement for the time bound")

    run = sub.add_parser("run", help="simulate one gossip trajectory")
    add_common(run)
    _add_theta_flags(run)
    _add_geometry_flags(run)
    run.add_argument("--alpha", type=float, default=4.0, help="path-loss exponent (> 2)")
    run.add_argument("--p", type=float, default=None,
                     help="access probability (default: predicted optimum for the drawn geometry)")
    run.add_argument("--mode", choices=list(mac.MODES), default="analytic", help="channel mode")
    run.add_argument("--horizon", type=int, default=400, help="number of slots")
    run.add_argument("--decode-order", dest="decode_order", choices=list(mac.DECODE_ORDERS),
                     default="match_first", help="slot pipeline variant")
    run.add_argument("--dump-slots", action="store_true",
                     help="also write slots.jsonl with one record per slot")

    sweep = sub.add_parser("sweep", help="run the access-probability sweep (CSV + manifest)")
    add_common(sweep)
    _add_theta_flags(sweep)
    sweep.add_argument("--config", default=None,
                       help="JSON config file (keys mirror the sweep configuration; "
                            "flags win on conflict). Default: the canonical config")
    sweep.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes (results are identical for any count)")
    sweep.add_argument("--lambda", dest="intensity", type=float, default=None,
                       help="node density (switches to random-count deployments)")
    sweep.add_argument("--n", type=int, default=None,
                       help="node count (switches to fixed-count deployments)")
    sweep.add_argument("--side", type=float, default=None, help="window side length")
    sweep.add_argument("--range", dest="range_r", type=float, default=None, help="neighbor range R")
    sweep.add_argument("--boundary", choices=["open", "torus"], default=None)
    sweep.add_argument("--alpha", type=float, default=None, help="path-loss exponent (> 2)")
    sweep.add_argument("--mode", choices=list(mac.MODES), default=None, help="channel mode")
    sweep.add_argument("--horizon", type=int, default=None, help="slots per run")
    sweep.add_argument("--runs", type=int, default=None, help="runs per grid point (>= 2)")
    sweep.add_argument("--p-grid", default=None,
                       help="comma-separated probabilities or log:LO:HI:N")
    sweep.add_argument("--fixed-geometry", action="store_true",
                       help="share one deployment across all runs")
    sweep.add_argument("--decode-order", dest="decode_order",
                       choices=list(mac.DECODE_ORDERS), default=None)
    sweep.add_argument("--r-eff-mode", dest="r_eff_mode", choices=["both", "b_only"], default=None,
                       help="where the effective distance replaces R in the prediction")

    val = sub.add_parser("validate-channel",
                         help="brute-force Monte-Carlo check of the reception law")
    add_common(val)
    _add_theta_flags(val)
    val.add_argument("--trials", type=int, default=1_000_000,
                     help="Monte-Carlo trials per grid point (>= 10000)")
    val.add_argument("--alphas", default="3,4,5", help="comma-separated path-loss exponents")
    val.add_argument("--lamp-grid", default="0.001,0.005,0.02",
                     help="comma-separated transmitter densities (intensity times p)")
    val.add_argument("--r-grid", default="2,5,10", help="comma-separated link distances")
    val.add_argument("--side-mult", type=float, default=20.0,
                     help="window side as a multiple of the link distance")

    gamma = sub.add_parser("estimate-gamma",
                           help="sample the ideal contraction factor of a geometry")
    add_common(gamma)
    _add_theta_flags(gamma)
    _add_geometry_flags(gamma)
    gamma.add_argument("--alpha", type=float, default=4.0, help="path-loss exponent (> 2)")
    gamma.add_argument("--p", type=float, required=True, help="access probability in [0, 1]")
    gamma.add_argument("--samples", type=int, default=10_000, help="matchings to draw")

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    # remember which override flags were given explicitly (flags win on conflict)
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok.split("=", 1)[0])
    for name, flag in [("seed_given", "--seed"), ("side_given", "--side"),
                       ("range_given", "--range"), ("boundary_given", "--boundary"),
                       ("alpha_given", "--alpha"), ("mode_given", "--mode"),
                       ("horizon_given", "--horizon"), ("runs_given", "--runs"),
                       ("decode_order_given", "--decode-order"),
                       ("r_eff_mode_given", "--r-eff-mode")]:
        setattr(args, name, flag in given)

    _validate_common(args, parser)
    handlers = {
        "calc": _cmd_calc,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "validate-channel": _cmd_validate_channel,
        "estimate-gamma": _cmd_estimate_gamma,
    }
    try:
        return handlers[args.command](args, parser)
    except InvariantViolation as exc:
        print(f"error: invariant violation: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
