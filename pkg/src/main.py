"""Command-line entry point: python -m src.main <subcommand> [options]."""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from src.certificates import (
    CalmnessCert,
    IsolatedSelectionCert,
    StrongSubregAroundCert,
    StrongSubregAtCert,
    certify_calmness,
    certify_isolated_selection,
    certify_strong_around,
    certify_strong_at,
    certify_subreg_at,
    lipschitz_region,
    pinned_value,
    propagate_around_perturbation,
    propagate_calm_perturbation,
    propagate_setvalued_perturbation,
    validate,
)
from src.config import Config, ExperimentConfig
from src.errors import ConfigError, HypothesisError, RegcertError, SolverError
from src.maps import CatalogFunction, Lift, MinkowskiSum, SumMap, parse_family, parse_function, parse_map
from src.moduli import (
    SweepGrids,
    divergence_profile,
    empirical_calmness,
    empirical_isolated_calmness,
    empirical_lipschitz,
    empirical_setvalued_calmness,
    empirical_strong_around,
    empirical_strong_at,
    empirical_subreg_at,
    equi_continuity_modulus,
    growth_factors,
    strong_around_ladder,
)
from src.pathfollow import (
    ParametricGE,
    certify_trajectory,
    follow,
    locate_centers,
    parse_path,
    validate_trajectory,
    warm_start_violations,
)
from src.reporting import DIVERGENCE_HEADER, divergence_rows, write_csv, write_json
from src.spaces import Norm
from src.uniformize import (
    UNIFORM_CSV_HEADER,
    CompactSample,
    certify_samples,
    describe,
    uniform_csv_rows,
    uniform_report,
    uniformize,
    uniformize_at,
    validate_uniform,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

DEFAULT_RADII = (0.1, 0.01, 0.001)


def setup_logging(out_dir: Path, verbose: bool = False):
    """Log to <out>/regcert.log and stderr."""
    out_dir = Config.create_directories(out_dir)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(out_dir / Config.LOG_FILE),
            logging.StreamHandler(sys.stderr),
        ],
        force=True,
    )


# ---------------------------------------------------------------------------
# Shared option handling
# ---------------------------------------------------------------------------

class RunContext:
    """Resolved options for one subcommand run; command-line flags win over the document."""

    def __init__(self, args: argparse.Namespace, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(args.out) if args.out else Config.OUTPUT_DIR
        self.eta = _first(args.eta, cfg.get('experiment', 'eta'), Config.ETA)
        self.tol = _first(args.tol, cfg.get('experiment', 'tol'), Config.DEFAULT_TOL)
        self.workers = _first(args.parallel, cfg.get('experiment', 'parallel'), 1)
        self.safety = cfg.get('experiment', 'safety_factor', Config.SAFETY_FACTOR)
        self.norm = Norm(cfg.get('experiment', 'norm', Config.DEFAULT_NORM))
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive (got {self.eta})")
        if self.workers < 1:
            raise ConfigError(f"parallel must be at least 1 (got {self.workers})")

    def grids(self, section: str) -> SweepGrids:
        get = self.cfg.get
        return SweepGrids(
            step=get(section, 'step', Config.DEFAULT_STEP),
            range_step=get(section, 'range_step'),
            inverse_step=get(section, 'inverse_step') if section == 'estimate' else None,
            pair_steps=get(section, 'pair_steps', Config.PAIR_STEPS),
            workers=self.workers,
        )

    def map(self, section: str, key: str = 'map'):
        return parse_map(self.cfg.require(section, key), self.norm)

    def point(self, section: str, key: str, dim: int, default=None) -> np.ndarray:
        value = self.cfg.get(section, key)
        if value is None:
            if default is None:
                raise ConfigError(f"[{section}] needs {key!r}")
            return np.asarray(default, dtype=float)
        point = np.asarray(value, dtype=float)
        if point.size != dim:
            raise ConfigError(f"[{section}] {key} has {point.size} coordinates, expected {dim}")
        return point


def _first(*values):
    return next(v for v in values if v is not None)


def _load_config(args: argparse.Namespace, command: str) -> ExperimentConfig:
    if args.config is None:
        if command == 'counterexample':
            return ExperimentConfig()
        raise ConfigError(f"'{command}' needs --config")
    cfg = ExperimentConfig.load(args.config)
    operation = cfg.operation
    if operation is not None and operation != command:
        raise ConfigError(f"Document is for '{operation}', not '{command}'")
    return cfg


def _report_validation(name: str, report) -> bool:
    if report.holds:
        print(f"  {name}: holds (worst {report.worst_ratio:.6g} <= {report.bound:.6g})")
    else:
        print(f"  {name}: VIOLATED (worst {report.worst_ratio:.6g} > {report.bound:.6g}, "
              f"witness {report.witness}) {'; '.join(report.problems)}", file=sys.stderr)
    return report.holds


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_estimate(ctx: RunContext) -> int:
    """Run one brute-force estimator and write its records."""
    cfg = ctx.cfg
    kind = cfg.require('estimate', 'kind')
    grids = ctx.grids('estimate')
    record = {'kind': kind}

    if kind in ('calmness', 'lipschitz'):
        g = parse_function(cfg.require('estimate', 'function'), ctx.norm)
        x_bar = ctx.point('estimate', 'x_bar', g.domain_space.dim)
        radius = cfg.require('estimate', 'radius')
        if kind == 'calmness':
            estimates = [empirical_calmness(g, x_bar, radius, grids)]
        else:
            estimates = [empirical_lipschitz(g, lipschitz_region(x_bar, radius, grids), grids.workers)]
    elif kind == 'equi_continuity':
        f = parse_family(cfg.require('estimate', 'family'), ctx.norm)
        t = ctx.point('estimate', 't', f.parameter_space.dim)
        x_bar = ctx.point('estimate', 'x_bar', f.domain_space.dim)
        estimates = [equi_continuity_modulus(f, t, x_bar, cfg.require('estimate', 'alpha'), grids,
                                             cfg.get('estimate', 'radius'))]
    else:
        F = ctx.map('estimate')
        x_bar = ctx.point('estimate', 'x_bar', F.domain_space.dim)
        y_bar = ctx.point('estimate', 'y_bar', F.range_space.dim, np.zeros(F.range_space.dim))
        if kind == 'subreg_at':
            estimates = [empirical_subreg_at(F, x_bar, y_bar, cfg.require('estimate', 'radius'), grids)]
        elif kind == 'strong_at':
            estimates = [empirical_strong_at(F, x_bar, y_bar, cfg.require('estimate', 'radius'), grids)]
        elif kind == 'strong_around':
            a, b = cfg.require('estimate', 'a'), cfg.require('estimate', 'b')
            r0 = cfg.get('estimate', 'r0')
            if r0 is None:
                estimates = strong_around_ladder(F, x_bar, y_bar, a, b, grids)
            else:
                estimates = [empirical_strong_around(F, x_bar, y_bar, a, b, r0, grids)]
        elif kind in ('setvalued_calmness', 'isolated_calmness'):
            estimator = empirical_setvalued_calmness if kind == 'setvalued_calmness' else empirical_isolated_calmness
            estimates = [estimator(F, x_bar, y_bar, cfg.require('estimate', 'radius'),
                                   cfg.get('estimate', 'range_radius', Config.ISOLATED_RANGE_RADIUS), grids)]
        else:
            radii = cfg.require('estimate', 'radii')
            estimates = divergence_profile(F, x_bar, y_bar, radii, grids, cfg.get('estimate', 'mode', 'strong'),
                                           cfg.get('estimate', 'step_ratio', 0.01))
            record['growth_factors'] = growth_factors(estimates)
            write_csv(ctx.out / 'divergence.csv', DIVERGENCE_HEADER, divergence_rows(estimates))

    record['estimates'] = [e.to_record() for e in estimates]
    write_json(ctx.out / 'estimate.json', record)
    for e in estimates:
        print(f"{e.kind}: {e.value:.10g} (radius {e.radius:g}, {e.sample_count} samples, witness {e.witness})")
    return EXIT_OK


def cmd_certify(ctx: RunContext) -> int:
    """
    Base certificate of F, perturbation certificate, propagated certificate of
    the sum, each checked by brute force.
    """
    cfg = ctx.cfg
    rule = cfg.require('certify', 'rule')
    grids = ctx.grids('certify')
    F = ctx.map('certify')
    x_bar = ctx.point('certify', 'x_bar', F.domain_space.dim)
    y_bar = ctx.point('certify', 'y_bar', F.range_space.dim, np.zeros(F.range_space.dim))
    kappa = cfg.get('certify', 'kappa')
    mu = cfg.get('certify', 'mu')
    given = ({'rule': 'given'},)

    if rule == 'around':
        a, b = cfg.require('certify', 'a'), cfg.require('certify', 'b')
        r0 = cfg.get('certify', 'r0', a / Config.RADIUS_LADDER[0])
        if kappa is None:
            base = certify_strong_around(F, x_bar, y_bar, a, b, grids, ctx.eta, r0)
        else:
            base = StrongSubregAroundCert(x_bar, y_bar, kappa, a, b, r0, 0.0, given)
    else:
        alpha = cfg.require('certify', 'alpha')
        if kappa is None:
            base = certify_strong_at(F, x_bar, y_bar, alpha, grids, ctx.eta)
        else:
            base = StrongSubregAtCert(x_bar, y_bar, kappa, alpha, 0.0, given)

    if rule == 'setvalued':
        G = ctx.map('certify', 'perturbation')
        beta = cfg.require('certify', 'beta')
        range_radius = cfg.get('certify', 'range_radius', Config.ISOLATED_RANGE_RADIUS)
        if mu is None:
            pert = certify_isolated_selection(G, x_bar, beta, grids, ctx.eta, range_radius)
        else:
            z_bar = pinned_value(G, x_bar)
            if z_bar is None:
                raise HypothesisError(f"G({x_bar.tolist()}) is not a single point")
            pert = IsolatedSelectionCert(x_bar, z_bar, mu, beta, range_radius, 0.0, given)
        out = propagate_setvalued_perturbation(base, pert, ctx.eta)
        perturbation, target = G, MinkowskiSum(G, F)
    else:
        g = parse_function(cfg.require('certify', 'perturbation'), ctx.norm)
        radius = cfg.require('certify', 'radius')
        mode = 'lipschitz' if rule == 'around' else 'calm'
        if mu is None:
            pert = certify_calmness(g, x_bar, radius, grids, ctx.eta, mode)
        else:
            center_value = g.value(x_bar)
            pert = CalmnessCert(x_bar, mu, radius, float(g.range_space.norms(center_value)), center_value,
                                mode, 0.0, given)
        if rule == 'around':
            out = propagate_around_perturbation(base, pert, ctx.eta)
        else:
            out = propagate_calm_perturbation(base, pert, ctx.eta)
        perturbation, target = g, SumMap(g, F)

    reports = {
        'input': validate(base, F, grids, ctx.safety),
        'perturbation': validate(pert, perturbation, grids, ctx.safety),
        'output': validate(out, target, grids, ctx.safety),
    }
    write_json(ctx.out / 'certify.json', {
        'rule': rule,
        'input': base.to_record(),
        'perturbation': pert.to_record(),
        'output': out.to_record(),
        'validation': {name: r.to_record() for name, r in reports.items()},
    })

    print(f"{rule} rule: kappa {base.kappa:.10g} -> {out.kappa:.10g}")
    held = [_report_validation(name, r) for name, r in reports.items()]
    return EXIT_OK if all(held) else EXIT_VIOLATED


def cmd_uniformize(ctx: RunContext) -> int:
    """Uniform certificate over a sampled compact set of (t, x̄(t))."""
    cfg = ctx.cfg
    f = parse_family(cfg.require('uniformize', 'family'), ctx.norm)
    F = ctx.map('uniformize')
    mode = cfg.get('uniformize', 'mode', 'around')
    grids = ctx.grids('uniformize')
    ts = np.asarray(cfg.require('uniformize', 't_values'), dtype=float).reshape(-1, f.parameter_space.dim)
    xs = cfg.get('uniformize', 'x_values')
    if xs is None:
        guess = ctx.point('uniformize', 'guess', F.domain_space.dim)
        xs = locate_centers(f, F, ts[:, 0], guess,
                            cfg.get('uniformize', 'trust_radius', Config.DEFAULT_TRUST_RADIUS), ctx.tol)
    xs = np.asarray(xs, dtype=float).reshape(len(ts), -1)
    samples = CompactSample.from_arrays(ts, xs, cfg.get('uniformize', 'floor', Config.COVER_RADIUS_FLOOR))

    a = cfg.require('uniformize', 'a')
    b = cfg.get('uniformize', 'b') if mode == 'at' else cfg.require('uniformize', 'b')
    sample_grids = replace(grids, graph_tol=max(grids.graph_tol, ctx.tol))
    base = certify_samples(f, F, samples, sample_grids, a, b, ctx.eta, mode)
    cert = uniformize(f, samples, base, sample_grids) if mode == 'around' else \
        uniformize_at(f, samples, base, sample_grids)
    report = validate_uniform(cert, f, F, samples, sample_grids, ctx.safety)

    write_json(ctx.out / 'uniform.json', uniform_report(cert, report))
    write_csv(ctx.out / 'uniform.csv', UNIFORM_CSV_HEADER, uniform_csv_rows(cert))
    print(describe(cert))
    if not report.holds:
        print(f"Uniform certificate violated at {len(report.violations)} sample points: "
              f"{report.violations[:3]}", file=sys.stderr)
        return EXIT_VIOLATED
    return EXIT_OK


def cmd_follow(ctx: RunContext) -> int:
    """Follow a solution path, then certify it in both modes and audit the warm starts."""
    cfg = ctx.cfg
    f = parse_family(cfg.require('follow', 'family'), ctx.norm)
    F = ctx.map('follow')
    p = parse_path(cfg.require('follow', 'path'))
    ge = ParametricGE(f, F, p, cfg.require('follow', 'horizon'), cfg.require('follow', 't_steps'))
    x0 = ctx.point('follow', 'x0', F.domain_space.dim)
    traj = follow(ge, x0, cfg.get('follow', 'trust_radius', Config.DEFAULT_TRUST_RADIUS), ctx.tol, None,
                  cfg.get('follow', 'points_per_side', Config.SOLVER_POINTS_PER_SIDE),
                  cfg.get('follow', 'max_depth', Config.SOLVER_MAX_DEPTH))
    write_csv(ctx.out / 'trajectory.csv', traj.csv_header(), traj.csv_rows())

    if not traj.complete:
        write_json(ctx.out / 'follow.json', {'trajectory': traj.to_record()})
        print(f"Trajectory stalled at index {traj.stall_index}: {traj.message}", file=sys.stderr)
        return EXIT_VIOLATED

    grids = ctx.grids('follow')
    a = cfg.require('follow', 'a')
    b = cfg.require('follow', 'b')
    certs = {
        'around': certify_trajectory(ge, traj, grids, a, b, 'around', ctx.eta),
        'at': certify_trajectory(ge, traj, grids, a, None, 'at', ctx.eta),
    }
    reports = {mode: validate_trajectory(ge, traj, cert, grids, ctx.safety) for mode, cert in certs.items()}
    violations = warm_start_violations(ge, traj, certs['at'].kappa, ctx.tol)

    write_json(ctx.out / 'follow.json', {
        'trajectory': traj.to_record(),
        'certificates': {mode: uniform_report(cert, reports[mode]) for mode, cert in certs.items()},
        'warm_start_violations': violations,
    })
    print(f"Trajectory complete: {len(traj.ts)} nodes, max residual {max(traj.residuals):.3e}")
    for mode, cert in certs.items():
        print(f"  {mode}: {describe(cert)} ({'holds' if reports[mode].holds else 'VIOLATED'})")

    ok = all(r.holds for r in reports.values()) and not violations
    if violations:
        print(f"{len(violations)} steps exceed the warm-start bound: {violations[:3]}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_counterexample(ctx: RunContext, radii: Optional[List[float]] = None) -> int:
    """
    The sum of a subregular ramp and a calm signed square that is not strongly
    subregular at the origin.

    Confirms three outcomes at each radius δ (grid step δ·step_ratio):
    the ramp's subregularity estimate lies in [0.99, 1.01] and its certificate
    validates, the signed square's calmness estimate lies in [0.99δ, 1.01δ],
    and the strong-subregularity estimate of the sum grows at least ninefold
    per decade of δ.
    """
    cfg = ctx.cfg
    radii = list(radii or cfg.get('counterexample', 'radii') or DEFAULT_RADII)
    step_ratio = cfg.get('counterexample', 'step_ratio', 0.01)
    ramp = Lift(CatalogFunction('ramp'))
    signed_square = CatalogFunction('signed_square')
    perturbed = Lift(CatalogFunction('perturbed_ramp'))
    zero = np.zeros(1)

    rows = []
    subreg_ok = calm_ok = True
    for delta in radii:
        grids = SweepGrids(step=delta * step_ratio, workers=ctx.workers)
        kappa_f = empirical_subreg_at(ramp, zero, zero, delta, grids)
        cert = certify_subreg_at(ramp, zero, zero, delta, grids, ctx.eta)
        cert_report = validate(cert, ramp, grids, ctx.safety)
        mu_g = empirical_calmness(signed_square, zero, delta, grids)
        row_subreg = 0.99 <= kappa_f.value <= 1.01 and cert_report.holds
        row_calm = 0.99 * delta <= mu_g.value <= 1.01 * delta
        subreg_ok &= row_subreg
        calm_ok &= row_calm
        rows.append({
            'radius': delta,
            'subreg_estimate': kappa_f.to_record(),
            'subreg_certificate': cert.to_record(),
            'subreg_validation': cert_report.to_record(),
            'calmness_estimate': mu_g.to_record(),
        })
        print(f"delta={delta:g}: ramp subregularity {kappa_f.value:.6g}, "
              f"signed square calmness {mu_g.value:.6g}")

    profile = divergence_profile(perturbed, zero, zero, radii, SweepGrids(step=radii[0] * step_ratio,
                                                                          workers=ctx.workers),
                                 'strong', step_ratio)
    factors = growth_factors(profile)
    divergence_ok = all(g >= 9 for g in factors)
    write_csv(ctx.out / 'divergence.csv', DIVERGENCE_HEADER, divergence_rows(profile))

    confirmed = {'subregular': subreg_ok, 'calm': calm_ok, 'divergent': divergence_ok}
    write_json(ctx.out / 'counterexample.json', {
        'radii': radii,
        'step_ratio': step_ratio,
        'rows': rows,
        'divergence': [e.to_record() for e in profile],
        'growth_factors': factors,
        'confirmed': confirmed,
    })
    print("strong subregularity of the sum: " +
          ", ".join(f"{e.radius:g} -> {e.value:.6g}" for e in profile))
    print("growth per step: " + ", ".join(f"{g:.4g}" for g in factors))

    failed = [name for name, ok in confirmed.items() if not ok]
    if failed:
        print(f"Not confirmed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VIOLATED
    return EXIT_OK


COMMANDS = {
    'estimate': cmd_estimate,
    'certify': cmd_certify,
    'uniformize': cmd_uniformize,
    'follow': cmd_follow,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _radii(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='regcert',
        description='Brute-force certificates of metric regularity for set-valued maps.',
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name in ('estimate', 'certify', 'uniformize', 'follow', 'counterexample'):
        cmd = sub.add_parser(name)
        cmd.add_argument('--config', type=Path, help='experiment document (INI)')
        cmd.add_argument('--out', type=Path, help=f'output directory (default {Config.OUTPUT_DIR})')
        cmd.add_argument('--parallel', type=int, help='worker threads for sweeps')
        cmd.add_argument('--eta', type=float, help=f'certificate slack (default {Config.ETA})')
        cmd.add_argument('--tol', type=float, help=f'residual / graph tolerance (default {Config.DEFAULT_TOL})')
        cmd.add_argument('--verbose', action='store_true', help='debug logging')
        if name == 'counterexample':
            cmd.add_argument('--radii', type=_radii, help='comma-separated decreasing radii')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else Config.OUTPUT_DIR
    setup_logging(out, args.verbose)

    errors = Config.validate()
    if errors:
        for error in errors:
            print(f"Configuration error: {error}", file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg = _load_config(args, args.command)
        ctx = RunContext(args, cfg)
        if args.command == 'counterexample':
            return cmd_counterexample(ctx, args.radii)
        return COMMANDS[args.command](ctx)
    except RegcertError as e:
        logger.error(f"{args.command}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        logger.warning(f"{args.command}: {e}")
        print(f"Solver failed: {e}", file=sys.stderr)
        return EXIT_VIOLATED
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        print(f"Check the log file for details: {out / Config.LOG_FILE}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    """Main entry point."""
    sys.exit(run())


if __name__ == '__main__':
    main()
