"""
Brute-force estimators of regularity moduli.

Every estimator sweeps a grid, forms the defining quotient at each admissible
sample and reports the supremum together with the sample attaining it. The
conventions shared by all of them:

- the centre point x = x̄ is excluded (nodes within 1e-9 grid steps of it);
- samples where the denominator distance is +inf are skipped;
- a zero distance contributes 0 to metric subregularity, and +inf to the
  strong estimators unless the numerator is 0 as well.

Estimates are sampling-based lower bounds of the true suprema.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import Config
from .errors import GraphError, RegcertError
from .maps import Function, ParametricFunction, SetValuedMap, dist_to_image, dist_to_restricted_image
from .spaces import Ball, Grid, Space
from .sweep import chunked_rows, first_argmax, merge_max, parallel_map, partition

logger = logging.getLogger(__name__)

EXCLUSION_FACTOR = 1e-9


@dataclass(frozen=True)
class SweepGrids:
    """Grid resolutions and worker count shared by the estimators."""

    step: float
    range_step: Optional[float] = None
    inverse_step: Optional[float] = None
    pair_steps: int = Config.PAIR_STEPS
    workers: int = 1
    graph_tol: float = Config.GRAPH_TOL

    def __post_init__(self):
        if not self.step > 0:
            raise RegcertError(f"Grid step must be positive (got {self.step})")
        if self.range_step is None:
            object.__setattr__(self, 'range_step', self.step)
        if self.inverse_step is None:
            object.__setattr__(self, 'inverse_step', self.step)
        if self.pair_steps < 2:
            raise RegcertError(f"pair_steps must be at least 2 (got {self.pair_steps})")

    def domain_grid(self, center, radius: float) -> Grid:
        return Grid.centered(center, radius, self.step)

    def pair_grid(self, center, radius: float) -> Grid:
        """Fixed-count grid used by pairwise sweeps, whose cost grows quadratically."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return Grid(tuple(center - radius), tuple(center + radius), self.pair_steps)

    def with_step(self, step: float) -> 'SweepGrids':
        return replace(self, step=step, range_step=step, inverse_step=step)


@dataclass
class ModulusEstimate:
    """Supremum of a regularity quotient over a sampled window."""

    kind: str
    value: float
    witness: Optional[Dict[str, list]]
    sample_count: int
    radii_used: Dict[str, float]
    grid_step: float
    center: Dict[str, list] = field(default_factory=dict)

    @property
    def radius(self) -> float:
        return self.radii_used.get('radius', self.radii_used.get('a', math.nan))

    def to_record(self) -> dict:
        return {
            'kind': self.kind,
            'value': self.value,
            'witness': self.witness,
            'sample_count': self.sample_count,
            'radii_used': dict(self.radii_used),
            'radius': self.radius,
            'grid_step': self.grid_step,
            'center': dict(self.center),
        }

    @classmethod
    def from_record(cls, record: dict) -> 'ModulusEstimate':
        return cls(
            kind=record['kind'],
            value=float(record['value']),
            witness=record.get('witness'),
            sample_count=int(record['sample_count']),
            radii_used={k: float(v) for k, v in record['radii_used'].items()},
            grid_step=float(record['grid_step']),
            center=dict(record.get('center', {})),
        )


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _ratios(num: np.ndarray, den: np.ndarray, strong: bool) -> np.ndarray:
    """num/den under the estimator conventions; NaN marks skipped samples."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(num.shape, np.nan)
    finite = np.isfinite(den)
    positive = finite & (den > 0)
    out[positive] = num[positive] / den[positive]
    zero = finite & (den == 0)
    if strong:
        out[zero] = np.where(num[zero] > 0, math.inf, 0.0)
    else:
        out[zero] = 0.0
    return out


def _supremum(ratios: np.ndarray) -> Tuple[float, int]:
    idx = first_argmax(ratios)
    if idx < 0 or np.isnan(ratios[idx]):
        return 0.0, -1
    return float(ratios[idx]), idx


def _require_positive(name: str, value: float):
    if not value > 0:
        raise RegcertError(f"{name} must be positive (got {value})")


def _in_domain(F, points: np.ndarray) -> np.ndarray:
    return ~((points < F.domain_lower) | (points > F.domain_upper)).any(axis=1)


def _window_nodes(F, grid: Grid, ball: Ball) -> np.ndarray:
    """Grid nodes inside the ball and the declared domain of F."""
    pts = ball.filter(grid.points())
    return pts[_in_domain(F, pts)]


def _sweep_distances(F: SetValuedMap, xs: np.ndarray, y, ball: Optional[Ball], workers: int) -> np.ndarray:
    """F.distances split across workers, concatenated in row order."""
    m = F.range_space.dim
    ys = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1, m), (len(xs), m))
    ranges = partition(len(xs), workers)
    parts = parallel_map(lambda r: F.distances(xs[r[0]:r[1]], ys[r[0]:r[1]], ball), ranges, workers)
    return np.concatenate(parts) if parts else np.empty(0)


def _exclude_center(space: Space, xs: np.ndarray, x_bar: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    offsets = space.norms(xs - x_bar) if len(xs) else np.empty(0)
    keep = offsets > EXCLUSION_FACTOR * step
    return xs[keep], offsets[keep]


def _nearest(space: Space, xs: np.ndarray, targets: np.ndarray, workers: int) -> Tuple[np.ndarray, np.ndarray]:
    """Distance from each row of xs to the nearest row of targets, and its index."""
    if len(xs) == 0:
        return np.empty(0), np.empty(0, dtype=int)
    block = max(1, Config.MAX_BLOCK // max(1, len(targets)))

    def run(r):
        diffs = space.norms(xs[r[0]:r[1], None, :] - targets[None, :, :])
        j = np.argmin(diffs, axis=1)
        return diffs[np.arange(len(j)), j], j

    parts = parallel_map(run, chunked_rows(len(xs), workers, block), workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def check_on_graph(F: SetValuedMap, x_bar, y_bar, tol: float):
    """Raise GraphError unless dist(ȳ, F(x̄)) <= tol."""
    d = dist_to_image(F, x_bar, y_bar)
    if not d <= tol:
        raise GraphError(f"({np.asarray(x_bar).tolist()}, {np.asarray(y_bar).tolist()}) is not on the "
                         f"graph: dist = {d:.3e} > {tol:.1e}")


def _center(**points) -> Dict[str, list]:
    return {k: np.atleast_1d(np.asarray(v, dtype=float)).tolist() for k, v in points.items()}


def _estimate(kind, ratios, witness_fn, sample_count, radii, step, center) -> ModulusEstimate:
    value, idx = _supremum(ratios)
    witness = witness_fn(idx) if idx >= 0 else None
    logger.debug(f"{kind}: sup = {value:.6g} over {sample_count} samples")
    return ModulusEstimate(kind, value, witness, sample_count, radii, step, center)


# ---------------------------------------------------------------------------
# Subregularity estimators
# ---------------------------------------------------------------------------

def empirical_subreg_at(F: SetValuedMap, x_bar, y_bar, radius: float, grids: SweepGrids,
                        membership_tol: Optional[float] = None) -> ModulusEstimate:
    """
    Metric subregularity modulus at (x̄, ȳ):
    sup over x in B[x̄, radius] of dist(x, F⁻¹(ȳ)) / dist(ȳ, F(x)).

    F⁻¹(ȳ) is approximated by the nodes of an inverse grid over B[x̄, 2·radius]
    whose image lies within membership_tol of ȳ (half the range step by
    default), together with x̄ itself.
    """
    space = F.domain_space
    x_bar = space.point(x_bar)
    y_bar = F.range_space.point(y_bar)
    _require_positive('radius', radius)
    check_on_graph(F, x_bar, y_bar, grids.graph_tol)

    xs = _window_nodes(F, grids.domain_grid(x_bar, radius), Ball(space, tuple(x_bar), radius))
    xs, _ = _exclude_center(space, xs, x_bar, grids.step)

    tol = 0.5 * grids.range_step if membership_tol is None else membership_tol
    candidates = _window_nodes(F, Grid.centered(x_bar, 2 * radius, grids.inverse_step),
                               Ball(space, tuple(x_bar), 2 * radius))
    in_pre = _sweep_distances(F, candidates, y_bar, None, grids.workers) <= tol
    preimage = np.vstack([x_bar.reshape(1, -1), candidates[in_pre]])

    dists = _sweep_distances(F, xs, y_bar, None, grids.workers)
    inv, nearest = _nearest(space, xs, preimage, grids.workers)
    ratios = _ratios(inv, dists, strong=False)

    return _estimate(
        'subreg_at', ratios,
        lambda i: {'x': xs[i].tolist(), 'u': preimage[nearest[i]].tolist()},
        len(xs), {'radius': float(radius), 'membership_tol': float(tol)}, grids.step,
        _center(x_bar=x_bar, y_bar=y_bar),
    )


def empirical_strong_at(F: SetValuedMap, x_bar, y_bar, radius: float, grids: SweepGrids) -> ModulusEstimate:
    """Strong metric subregularity modulus at (x̄, ȳ): sup of ‖x − x̄‖ / dist(ȳ, F(x))."""
    space = F.domain_space
    x_bar = space.point(x_bar)
    y_bar = F.range_space.point(y_bar)
    _require_positive('radius', radius)
    check_on_graph(F, x_bar, y_bar, grids.graph_tol)

    xs = _window_nodes(F, grids.domain_grid(x_bar, radius), Ball(space, tuple(x_bar), radius))
    xs, offsets = _exclude_center(space, xs, x_bar, grids.step)
    dists = _sweep_distances(F, xs, y_bar, None, grids.workers)
    ratios = _ratios(offsets, dists, strong=True)

    return _estimate(
        'strong_at', ratios, lambda i: {'x': xs[i].tolist()},
        len(xs), {'radius': float(radius)}, grids.step, _center(x_bar=x_bar, y_bar=y_bar),
    )


def empirical_strong_around(F: SetValuedMap, x_bar, y_bar, a: float, b: float, r0: float,
                            grids: SweepGrids) -> ModulusEstimate:
    """
    Strong metric subregularity modulus around (x̄, ȳ).

    For every sampled graph pair (x, y) with x in B[x̄, a] and y in B[ȳ, b],
    sweeps u = x + offset over B[x, r0] and takes the supremum of
    ‖u − x‖ / dist(y, F(u) ∩ B[ȳ, b]).

    Raises:
        GraphError: if the window holds no graph samples
    """
    dspace, rspace = F.domain_space, F.range_space
    x_bar = dspace.point(x_bar)
    y_bar = rspace.point(y_bar)
    for name, value in (('a', a), ('b', b), ('r0', r0)):
        _require_positive(name, value)

    window = Ball(rspace, tuple(y_bar), b)
    xs = _window_nodes(F, grids.domain_grid(x_bar, a), Ball(dspace, tuple(x_bar), a))
    gx, gy = F.graph_points(xs, window, grids.range_step)
    if len(gx) == 0:
        raise GraphError(f"No graph samples of F in B[{x_bar.tolist()}, {a}] x B[{y_bar.tolist()}, {b}]")

    origin = np.zeros(dspace.dim)
    offsets = Ball(dspace, tuple(origin), r0).filter(grids.domain_grid(origin, r0).points())
    offsets, _ = _exclude_center(dspace, offsets, origin, grids.step)
    n_off = len(offsets)
    block = max(1, Config.MAX_BLOCK // max(1, n_off))

    def run(r):
        start, stop = r
        us = (gx[start:stop, None, :] + offsets[None, :, :]).reshape(-1, dspace.dim)
        ys = np.repeat(gy[start:stop], n_off, axis=0)
        nums = dspace.norms(us - np.repeat(gx[start:stop], n_off, axis=0))
        ok = _in_domain(F, us)
        dists = np.full(len(us), math.inf)
        if ok.any():
            dists[ok] = F.distances(us[ok], ys[ok], window)
        ratios = _ratios(nums, dists, strong=True)
        value, idx = _supremum(ratios)
        if idx < 0:
            return -math.inf, None
        i = start + idx // n_off
        return value, {'x': gx[i].tolist(), 'y': gy[i].tolist(), 'u': us[idx].tolist()}

    if n_off == 0:
        value, witness = 0.0, None
    else:
        partials = parallel_map(run, chunked_rows(len(gx), grids.workers, block), grids.workers)
        value, witness = merge_max(partials)
        if witness is None:
            value = 0.0

    logger.debug(f"strong_around: sup = {value:.6g} over {len(gx)} graph samples x {n_off} offsets")
    return ModulusEstimate(
        'strong_around', float(value), witness, len(gx) * n_off,
        {'a': float(a), 'b': float(b), 'r0': float(r0)}, grids.step,
        _center(x_bar=x_bar, y_bar=y_bar),
    )


def strong_around_ladder(F: SetValuedMap, x_bar, y_bar, a: float, b: float, grids: SweepGrids,
                         divisors: Sequence[int] = Config.RADIUS_LADDER) -> List[ModulusEstimate]:
    """empirical_strong_around at r0 = a/d for each divisor, reported side by side."""
    return [empirical_strong_around(F, x_bar, y_bar, a, b, a / d, grids) for d in divisors]


# ---------------------------------------------------------------------------
# Single-valued estimators
# ---------------------------------------------------------------------------

def empirical_calmness(g: Function, x_bar, radius: float, grids: SweepGrids) -> ModulusEstimate:
    """Calmness modulus at x̄: sup of ‖g(x) − g(x̄)‖ / ‖x − x̄‖ over B[x̄, radius]."""
    space = g.domain_space
    x_bar = space.point(x_bar)
    _require_positive('radius', radius)
    xs = _window_nodes(g, grids.domain_grid(x_bar, radius), Ball(space, tuple(x_bar), radius))
    xs, offsets = _exclude_center(space, xs, x_bar, grids.step)
    g_bar = g.value(x_bar)
    ranges = partition(len(xs), grids.workers)
    parts = parallel_map(lambda r: g.range_space.norms(g.values(xs[r[0]:r[1]]) - g_bar), ranges, grids.workers)
    nums = np.concatenate(parts) if parts else np.empty(0)
    ratios = _ratios(nums, offsets, strong=False)
    return _estimate(
        'calmness', ratios, lambda i: {'x': xs[i].tolist()},
        len(xs), {'radius': float(radius)}, grids.step, _center(x_bar=x_bar),
    )


def empirical_lipschitz(g: Function, region: Grid, workers: int = 1) -> ModulusEstimate:
    """Sup over distinct node pairs of ‖g(x) − g(u)‖ / ‖x − u‖."""
    if region.count < 2:
        raise RegcertError("Lipschitz estimation needs at least two grid points")
    xs = region.points()
    xs = xs[_in_domain(g, xs)]
    vals = g.values(xs)
    n = len(xs)
    block = max(1, Config.MAX_BLOCK // max(1, n))

    def run(r):
        start, stop = r
        rows = np.arange(start, stop)
        num = g.range_space.norms(vals[start:stop, None, :] - vals[None, :, :])
        den = g.domain_space.norms(xs[start:stop, None, :] - xs[None, :, :])
        upper = np.arange(n)[None, :] > rows[:, None]
        ratios = np.where(upper & (den > 0), num / np.where(den > 0, den, 1.0), np.nan)
        value, idx = _supremum(ratios.reshape(-1))
        if idx < 0:
            return -math.inf, None
        i, j = start + idx // n, idx % n
        return value, {'x': xs[i].tolist(), 'u': xs[j].tolist()}

    value, witness = merge_max(parallel_map(run, chunked_rows(n, workers, block), workers))
    if witness is None:
        value = 0.0
    return ModulusEstimate('lipschitz', float(value), witness, n * (n - 1) // 2,
                           {'region_half_width': float(np.max(np.subtract(region.upper, region.lower)) / 2)},
                           region.step)


def equi_continuity_modulus(f: ParametricFunction, t, x_bar, alpha: float, grids: SweepGrids,
                            x_radius: Optional[float] = None) -> ModulusEstimate:
    """
    Sup over s in B[t, α] and x ≠ u in B[x̄, x_radius] of

        ‖f(s,u) − f(t,u) − (f(s,x) − f(t,x))‖ / ‖x − u‖

    x_radius defaults to α. Both sweeps use fixed-count pair grids.
    """
    _require_positive('alpha', alpha)
    pspace, dspace = f.parameter_space, f.domain_space
    t = pspace.point(t)
    x_bar = dspace.point(x_bar)
    x_radius = alpha if x_radius is None else x_radius
    ss = Ball(pspace, tuple(t), alpha).filter(grids.pair_grid(t, alpha).points())
    xs = Ball(dspace, tuple(x_bar), x_radius).filter(grids.pair_grid(x_bar, x_radius).points())
    n = len(xs)
    base = f.values(t, xs)
    den = dspace.norms(xs[:, None, :] - xs[None, :, :])
    upper = np.triu(np.ones((n, n), dtype=bool), k=1) & (den > 0)
    safe_den = np.where(den > 0, den, 1.0)

    def run(r):
        best, witness = -math.inf, None
        for k in range(r[0], r[1]):
            incr = f.values(ss[k], xs) - base
            num = f.range_space.norms(incr[:, None, :] - incr[None, :, :])
            ratios = np.where(upper, num / safe_den, np.nan)
            value, idx = _supremum(ratios.reshape(-1))
            if idx >= 0 and value > best:
                i, j = idx // n, idx % n
                best, witness = value, {'s': ss[k].tolist(), 'x': xs[i].tolist(), 'u': xs[j].tolist()}
        return best, witness

    value, witness = merge_max(parallel_map(run, partition(len(ss), grids.workers), grids.workers))
    if witness is None:
        value = 0.0
    return ModulusEstimate('equi_continuity', float(value), witness, len(ss) * n * (n - 1) // 2,
                           {'alpha': float(alpha), 'x_radius': float(x_radius)},
                           float(2 * x_radius / (grids.pair_steps - 1)), _center(t=t, x_bar=x_bar))


# ---------------------------------------------------------------------------
# Set-valued calmness
# ---------------------------------------------------------------------------

def _calm_samples(F: SetValuedMap, x_bar, y_bar, radius, range_radius, grids):
    space = F.domain_space
    xs = _window_nodes(F, grids.domain_grid(x_bar, radius), Ball(space, tuple(x_bar), radius))
    xs, _ = _exclude_center(space, xs, x_bar, grids.step)
    return F.graph_points(xs, Ball(F.range_space, tuple(y_bar), range_radius), grids.range_step)


def empirical_setvalued_calmness(F: SetValuedMap, x_bar, y_bar, radius: float, range_radius: float,
                                 grids: SweepGrids) -> ModulusEstimate:
    """Sup over graph pairs (x, y) near (x̄, ȳ), x ≠ x̄, of dist(y, F(x̄)) / ‖x − x̄‖."""
    x_bar = F.domain_space.point(x_bar)
    y_bar = F.range_space.point(y_bar)
    _require_positive('radius', radius)
    gx, gy = _calm_samples(F, x_bar, y_bar, radius, range_radius, grids)
    nums = _sweep_distances(F, np.repeat(x_bar.reshape(1, -1), len(gy), axis=0), gy, None, grids.workers)
    ratios = _ratios(nums, F.domain_space.norms(gx - x_bar), strong=False)
    return _estimate(
        'setvalued_calmness', ratios, lambda i: {'x': gx[i].tolist(), 'y': gy[i].tolist()},
        len(gx), {'radius': float(radius), 'range_radius': float(range_radius)}, grids.step,
        _center(x_bar=x_bar, y_bar=y_bar),
    )


def empirical_isolated_calmness(F: SetValuedMap, x_bar, y_bar, radius: float, range_radius: float,
                                grids: SweepGrids) -> ModulusEstimate:
    """Sup over graph pairs (x, y) near (x̄, ȳ), x ≠ x̄, of ‖y − ȳ‖ / ‖x − x̄‖."""
    x_bar = F.domain_space.point(x_bar)
    y_bar = F.range_space.point(y_bar)
    _require_positive('radius', radius)
    gx, gy = _calm_samples(F, x_bar, y_bar, radius, range_radius, grids)
    ratios = _ratios(F.range_space.norms(gy - y_bar), F.domain_space.norms(gx - x_bar), strong=False)
    return _estimate(
        'isolated_calmness', ratios, lambda i: {'x': gx[i].tolist(), 'y': gy[i].tolist()},
        len(gx), {'radius': float(radius), 'range_radius': float(range_radius)}, grids.step,
        _center(x_bar=x_bar, y_bar=y_bar),
    )


# ---------------------------------------------------------------------------
# Profiles and replay
# ---------------------------------------------------------------------------

def divergence_profile(F: SetValuedMap, x_bar, y_bar, radii: Sequence[float], grids: SweepGrids,
                       mode: str = 'strong', step_ratio: float = 0.01) -> List[ModulusEstimate]:
    """
    Estimates at each radius of a strictly decreasing sequence, with the grid
    step scaled to radius·step_ratio.

    Args:
        mode: 'strong' for empirical_strong_at, 'subreg' for empirical_subreg_at
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise RegcertError(f"Radii must be positive and strictly decreasing (got {radii})")
    if mode not in ('strong', 'subreg'):
        raise RegcertError(f"Unknown divergence mode {mode!r}")
    estimator = empirical_strong_at if mode == 'strong' else empirical_subreg_at
    profile = []
    for r in radii:
        est = estimator(F, x_bar, y_bar, r, grids.with_step(r * step_ratio))
        logger.info(f"Divergence profile ({mode}): radius {r:g} -> {est.value:.6g}")
        profile.append(est)
    return profile


def growth_factors(profile: Sequence[ModulusEstimate]) -> List[float]:
    """Ratio of consecutive estimates in a divergence profile."""
    out = []
    for prev, cur in zip(profile, profile[1:]):
        out.append(cur.value / prev.value if prev.value > 0 else math.inf)
    return out


def replay(estimate: ModulusEstimate, target) -> float:
    """
    Recompute the quotient at an estimate's witness.

    Args:
        estimate: Estimate carrying a witness
        target: The map the estimate was computed for (SetValuedMap,
            Function or ParametricFunction depending on the kind)

    Returns:
        The quotient at the witness (0.0 when there is no witness)
    """
    w = estimate.witness
    if w is None:
        return 0.0
    c = {k: np.asarray(v, dtype=float) for k, v in estimate.center.items()}
    kind = estimate.kind

    if kind == 'strong_at':
        num = target.domain_space.distance(w['x'], c['x_bar'])
        den = dist_to_image(target, w['x'], c['y_bar'])
        return float(_ratios(np.array([num]), np.array([den]), strong=True)[0])
    if kind == 'subreg_at':
        num = target.domain_space.distance(w['x'], w['u'])
        den = dist_to_image(target, w['x'], c['y_bar'])
        return float(_ratios(np.array([num]), np.array([den]), strong=False)[0])
    if kind == 'strong_around':
        window = Ball(target.range_space, tuple(c['y_bar']), estimate.radii_used['b'])
        num = target.domain_space.distance(w['u'], w['x'])
        den = dist_to_restricted_image(target, w['u'], w['y'], window)
        return float(_ratios(np.array([num]), np.array([den]), strong=True)[0])
    if kind == 'calmness':
        num = target.range_space.distance(target.value(w['x']), target.value(c['x_bar']))
        return num / target.domain_space.distance(w['x'], c['x_bar'])
    if kind == 'lipschitz':
        num = target.range_space.distance(target.value(w['x']), target.value(w['u']))
        return num / target.domain_space.distance(w['x'], w['u'])
    if kind == 'equi_continuity':
        s, t = w['s'], c['t']
        incr_u = target.value(s, w['u']) - target.value(t, w['u'])
        incr_x = target.value(s, w['x']) - target.value(t, w['x'])
        return float(target.range_space.norms(incr_u - incr_x)) / target.domain_space.distance(w['x'], w['u'])
    if kind == 'setvalued_calmness':
        num = dist_to_image(target, c['x_bar'], w['y'])
        return num / target.domain_space.distance(w['x'], c['x_bar'])
    if kind == 'isolated_calmness':
        num = target.range_space.distance(w['y'], c['y_bar'])
        return num / target.domain_space.distance(w['x'], c['x_bar'])
    raise RegcertError(f"Cannot replay estimate of kind {kind!r}")
