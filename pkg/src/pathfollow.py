"""
Path-following for parametric generalized equations p(t) ∈ f(t, x) + F(x).

The local solver is a derivative-free multi-resolution grid search around a
warm start. Each level samples the current box, adds the structural
breakpoints of the maps (box faces, kinks) to every axis, keeps the best
candidate and shrinks the box by the refinement factor.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .config import Config
from .errors import (
    DomainError,
    InfeasibleStartError,
    RegcertError,
    SolverError,
    SolverStall,
    SpecError,
    TrustRegionExhausted,
    WarmStartBoundError,
)
from .maps import (
    PackedParameterFamily,
    ParametricFunction,
    SetValuedMap,
    SumMap,
    _loads,
    canonical_json,
    dist_to_image,
)
from .moduli import SweepGrids
from .spaces import Space
from .uniformize import (
    CompactSample,
    UniformCert,
    UniformValidationReport,
    certify_samples,
    uniformize,
    uniformize_at,
    validate_uniform,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

_PATH_RULES = {
    'constant': {'value': 0.0},
    'linear': {'slope': 1.0, 'intercept': 0.0},
    'polynomial': {'coefficients': (0.0,)},
    'sine': {'amplitude': 1.0, 'frequency': 1.0, 'phase': 0.0, 'offset': 0.0},
}


class Path:
    """
    Continuous path t -> p(t) in R^dim, the same rule on every coordinate.

        constant:   value
        linear:     slope·t + intercept
        polynomial: Σ c_k t^k (coefficients in ascending order)
        sine:       amplitude·sin(frequency·t + phase) + offset
    """

    def __init__(self, rule: str, dim: int = 1, **params):
        if rule not in _PATH_RULES:
            raise SpecError(f"Unknown path rule {rule!r}; catalog: {', '.join(sorted(_PATH_RULES))}")
        defaults = _PATH_RULES[rule]
        unknown = set(params) - set(defaults)
        if unknown:
            raise SpecError(f"Unknown parameters for path {rule!r}: {sorted(unknown)}")
        self.rule = rule
        self.space = Space(int(dim))
        self.params = {}
        for key, default in defaults.items():
            value = params.get(key, default)
            if key == 'coefficients':
                value = tuple(float(c) for c in value)
                if not value:
                    raise SpecError("A polynomial path needs at least one coefficient")
            else:
                value = float(value)
            self.params[key] = value

    def values(self, ts) -> np.ndarray:
        """p at each t, as an (N, dim) array."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float)).reshape(-1, 1)
        p = self.params
        if self.rule == 'constant':
            vals = np.full_like(ts, p['value'])
        elif self.rule == 'linear':
            vals = p['slope'] * ts + p['intercept']
        elif self.rule == 'polynomial':
            vals = np.polynomial.polynomial.polyval(ts, p['coefficients'])
        else:
            vals = p['amplitude'] * np.sin(p['frequency'] * ts + p['phase']) + p['offset']
        return np.repeat(vals, self.space.dim, axis=1)

    def __call__(self, t: float) -> np.ndarray:
        return self.values([t])[0]

    def lipschitz_bound(self, horizon: float) -> float:
        """Upper bound of |p'| on [0, horizon]."""
        p = self.params
        if self.rule == 'constant':
            return 0.0
        if self.rule == 'linear':
            return abs(p['slope'])
        if self.rule == 'sine':
            return abs(p['amplitude'] * p['frequency'])
        scale = max(abs(horizon), 1.0)
        return float(sum(k * abs(c) * scale ** (k - 1) for k, c in enumerate(p['coefficients']) if k > 0))

    def to_spec(self) -> dict:
        spec = {'rule': self.rule, 'dim': self.space.dim}
        spec.update({k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()})
        return spec


def parse_path(spec) -> Path:
    spec = dict(_loads(spec))
    rule = spec.pop('rule', None)
    dim = spec.pop('dim', 1)
    try:
        return Path(rule, dim=dim, **spec)
    except (TypeError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"Bad path spec: {e}")


def serialize_path(path: Path) -> str:
    return canonical_json(path.to_spec())


# ---------------------------------------------------------------------------
# Generalized equation
# ---------------------------------------------------------------------------

class ParametricGE:
    """p(t) ∈ f(t, x) + F(x) for t on an evenly spaced grid over [0, T]."""

    def __init__(self, f: ParametricFunction, F: SetValuedMap, p: Path, horizon: float, t_steps: int):
        if f.domain_space.dim != F.domain_space.dim or f.range_space.dim != F.range_space.dim:
            raise DomainError("f and F must share domain and range dimensions")
        if p.space.dim != F.range_space.dim:
            raise DomainError(f"Path dimension {p.space.dim} does not match the range dimension {F.range_space.dim}")
        if f.parameter_space.dim != 1:
            raise DomainError("The parameter of a path-following problem is the scalar t")
        if not horizon >= 0:
            raise RegcertError(f"Horizon must be nonnegative (got {horizon})")
        if t_steps < 1 or (t_steps == 1) != (horizon == 0):
            raise RegcertError(f"t_steps={t_steps} and horizon={horizon}: a single node needs horizon 0 "
                               f"and a positive horizon needs at least two nodes")
        self.f = f
        self.F = F
        self.p = p
        self.horizon = float(horizon)
        self.t_steps = int(t_steps)

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.t_steps)

    @property
    def dt(self) -> float:
        return self.horizon / (self.t_steps - 1) if self.t_steps > 1 else 0.0

    def map_at(self, t: float) -> SumMap:
        """x ⇉ f(t, x) + F(x)."""
        return SumMap(self.f.at([t]), self.F)

    def breakpoints(self) -> List[np.ndarray]:
        fb = self.f.breakpoints()
        Fb = self.F.breakpoints()
        return [np.unique(np.concatenate([a, b])) for a, b in zip(fb, Fb)]

    def check_time(self, t: float):
        if not 0 <= t <= self.horizon:
            raise DomainError(f"t = {t} outside [0, {self.horizon}]")


def residual(ge: ParametricGE, t: float, x) -> float:
    """dist(p(t), f(t, x) + F(x))."""
    ge.check_time(t)
    return dist_to_image(ge.map_at(t), x, ge.p(t))


def _candidate_axes(center, radius, x_warm, trust_radius, points_per_side, breakpoints):
    axes = []
    for k, c in enumerate(center):
        lo = max(c - radius, x_warm[k] - trust_radius)
        hi = min(c + radius, x_warm[k] + trust_radius)
        axis = np.linspace(c - radius, c + radius, 2 * points_per_side + 1)
        axis = axis[(axis >= lo) & (axis <= hi)]
        bp = breakpoints[k]
        bp = bp[(bp >= lo) & (bp <= hi)]
        axes.append(np.unique(np.concatenate([axis, bp, [c]])))
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def solve_step(ge: ParametricGE, t: float, x_warm, trust_radius: float, tol: float,
               kappa: Optional[float] = None,
               points_per_side: int = Config.SOLVER_POINTS_PER_SIDE,
               max_depth: int = Config.SOLVER_MAX_DEPTH,
               refine: float = Config.SOLVER_REFINE_FACTOR) -> np.ndarray:
    """
    Find x in B[x_warm, trust_radius] with residual(ge, t, x) <= tol.

    Args:
        ge: The generalized equation
        t: Parameter value
        x_warm: Warm start
        trust_radius: Search radius around the warm start (sup-norm box)
        tol: Residual tolerance
        kappa: Constant of an attached uniform certificate; when given, the
            result must satisfy ‖x − x_warm‖ <= κ·residual(x_warm) + κ·tol

    Raises:
        TrustRegionExhausted: if every candidate has an empty image
        SolverStall: if tol is not reached at max_depth
        WarmStartBoundError: if the certified error bound is violated
    """
    if not trust_radius > 0:
        raise RegcertError(f"trust_radius must be positive (got {trust_radius})")
    ge.check_time(t)
    space = ge.F.domain_space
    x_warm = space.point(x_warm)
    G = ge.map_at(t)
    target = ge.p(t)
    breakpoints = ge.breakpoints()

    def finish(x, res):
        if kappa is not None:
            bound = kappa * warm_residual + kappa * tol
            step = space.distance(x, x_warm)
            if step > bound:
                raise WarmStartBoundError(f"t={t:g}: step {step:.3e} exceeds certified bound {bound:.3e}")
        logger.debug(f"t={t:g}: residual {res:.3e}")
        return x

    warm_residual = float(G.distances(x_warm.reshape(1, -1), target)[0]) if _in_domain(G, x_warm) else math.inf
    best, best_res = x_warm, warm_residual
    if best_res <= tol:
        return finish(best, best_res)

    center, radius = x_warm, trust_radius
    for depth in range(max_depth):
        cands = _candidate_axes(center, radius, x_warm, trust_radius, points_per_side, breakpoints)
        cands = cands[_in_domain_many(G, cands)]
        res = G.distances(cands, target) if len(cands) else np.empty(0)
        finite = np.isfinite(res)
        if not finite.any():
            if depth == 0 and not math.isfinite(best_res):
                raise TrustRegionExhausted(f"t={t:g}: every candidate in B[{x_warm.tolist()}, {trust_radius:g}] "
                                           f"has an empty image")
        else:
            # lowest residual, then closest to the warm start, then enumeration order
            closeness = space.norms(cands - x_warm)
            order = np.lexsort((np.arange(len(cands)), closeness, np.where(finite, res, math.inf)))
            j = order[0]
            if res[j] < best_res:
                best, best_res = cands[j], float(res[j])
        if best_res <= tol:
            return finish(best, best_res)
        center = best
        radius = radius / refine

    raise SolverStall(f"t={t:g}: residual {best_res:.3e} > tol {tol:.1e} after {max_depth} levels", best_res)


def _in_domain(G: SetValuedMap, x: np.ndarray) -> bool:
    return bool(np.all(x >= G.domain_lower) and np.all(x <= G.domain_upper))


def _in_domain_many(G: SetValuedMap, xs: np.ndarray) -> np.ndarray:
    return ~((xs < G.domain_lower) | (xs > G.domain_upper)).any(axis=1)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Computed solution nodes; status is 'complete' or 'stalled'."""

    ts: List[float] = field(default_factory=list)
    xs: List[np.ndarray] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    step_norms: List[float] = field(default_factory=list)
    status: str = 'complete'
    stall_index: Optional[int] = None
    message: str = ''

    @property
    def complete(self) -> bool:
        return self.status == 'complete'

    def points(self) -> np.ndarray:
        return np.vstack(self.xs)

    def csv_header(self) -> List[str]:
        dim = len(self.xs[0]) if self.xs else 1
        xcols = ['x'] if dim == 1 else [f'x{k}' for k in range(dim)]
        return ['t'] + xcols + ['residual', 'step_norm']

    def csv_rows(self) -> List[list]:
        return [[t] + [float(v) for v in x] + [r, s]
                for t, x, r, s in zip(self.ts, self.xs, self.residuals, self.step_norms)]

    def to_record(self) -> dict:
        return {'status': self.status, 'stall_index': self.stall_index, 'message': self.message,
                'nodes': len(self.ts), 'max_residual': max(self.residuals) if self.residuals else 0.0}


def default_trust_radius(ge: ParametricGE, kappa: float, tol: float) -> float:
    """2·κ·Lip(p)·Δt, or 10·tol when the path does not move."""
    radius = 2 * kappa * ge.p.lipschitz_bound(ge.horizon) * ge.dt
    return radius if radius > 0 else 10 * tol


def follow(ge: ParametricGE, x0, trust_radius: Optional[float], tol: float,
           certificate: Optional[UniformCert] = None,
           points_per_side: int = Config.SOLVER_POINTS_PER_SIDE,
           max_depth: int = Config.SOLVER_MAX_DEPTH) -> Trajectory:
    """
    Warm-started solves along the t-grid.

    A solver failure ends the run with status 'stalled' at that index.

    Raises:
        InfeasibleStartError: if residual(ge, 0, x0) > tol
    """
    space = ge.F.domain_space
    x0 = space.point(x0)
    r0 = residual(ge, 0.0, x0)
    if not r0 <= tol:
        raise InfeasibleStartError(f"x0 = {x0.tolist()} has residual {r0:.3e} > tol {tol:.1e} at t = 0")
    kappa = certificate.kappa if certificate is not None else None
    if trust_radius is None:
        if kappa is None:
            raise RegcertError("A trust radius is needed when no certificate is attached")
        trust_radius = default_trust_radius(ge, kappa, tol)

    traj = Trajectory([0.0], [x0], [r0], [0.0])
    x = x0
    for i, t in enumerate(ge.t_grid[1:], start=1):
        t = float(t)
        try:
            x_new = solve_step(ge, t, x, trust_radius, tol, kappa, points_per_side, max_depth)
        except SolverError as e:
            traj.status = 'stalled'
            traj.stall_index = i
            traj.message = str(e)
            logger.warning(f"Trajectory stalled at index {i}: {e}")
            return traj
        traj.ts.append(t)
        traj.xs.append(x_new)
        traj.residuals.append(residual(ge, t, x_new))
        traj.step_norms.append(space.distance(x_new, x))
        x = x_new

    logger.info(f"Trajectory complete: {len(traj.ts)} nodes, max residual {max(traj.residuals):.3e}")
    return traj


def packed_sample(ge: ParametricGE, trajectory: Trajectory,
                  floor: float = Config.COVER_RADIUS_FLOOR) -> CompactSample:
    """Sample points ((t, p(t)), x(t)) of the packed-parameter family."""
    ts = np.asarray(trajectory.ts)
    params = np.hstack([ts.reshape(-1, 1), ge.p.values(ts)])
    return CompactSample.from_arrays(params, trajectory.points(), floor)


def certify_trajectory(ge: ParametricGE, trajectory: Trajectory, grids: SweepGrids, a: float,
                       b: Optional[float] = None, mode: str = 'around', eta: float = Config.ETA,
                       halvings: int = Config.BISECTION_HALVINGS) -> UniformCert:
    """
    Uniform certificate along a complete trajectory.

    The parameter is packed as q = (t, p(t)) and the family becomes
    f~(q, x) = f(t, x) − p(t), so every node solves 0 ∈ f~(q, x) + F(x).
    'around' mode uses the window (a, b); 'at' mode uses a as the radius.
    """
    if not trajectory.complete:
        raise RegcertError(f"Cannot certify a stalled trajectory (index {trajectory.stall_index})")
    family = PackedParameterFamily(ge.f)
    samples = packed_sample(ge, trajectory)
    grids = replace(grids, graph_tol=max(grids.graph_tol, max(trajectory.residuals)))

    base = certify_samples(family, ge.F, samples, grids, a, b, eta, mode)
    if mode == 'around':
        cert = uniformize(family, samples, base, grids, halvings)
    else:
        cert = uniformize_at(family, samples, base, grids, halvings)
    logger.info(f"Trajectory certificate ({mode}): kappa={cert.kappa:g}")
    return cert


def validate_trajectory(ge: ParametricGE, trajectory: Trajectory, cert: UniformCert, grids: SweepGrids,
                        safety: float = Config.SAFETY_FACTOR) -> UniformValidationReport:
    """validate_uniform on the packed-parameter sample of a trajectory."""
    grids = replace(grids, graph_tol=max(grids.graph_tol, max(trajectory.residuals)))
    return validate_uniform(cert, PackedParameterFamily(ge.f), ge.F, packed_sample(ge, trajectory), grids, safety)


def warm_start_violations(ge: ParametricGE, trajectory: Trajectory, kappa: float, tol: float) -> List[dict]:
    """Steps with ‖x_{i+1} − x_i‖ > κ·residual(t_{i+1}, x_i) + κ·tol."""
    space = ge.F.domain_space
    out = []
    for i in range(len(trajectory.ts) - 1):
        x_i, x_next = trajectory.xs[i], trajectory.xs[i + 1]
        t_next = trajectory.ts[i + 1]
        bound = kappa * residual(ge, t_next, x_i) + kappa * tol
        step = space.distance(x_next, x_i)
        if step > bound:
            out.append({'index': i + 1, 'step_norm': step, 'bound': bound})
    if out:
        logger.warning(f"{len(out)} steps violate the warm-start bound")
    return out


def locate_centers(f: ParametricFunction, F: SetValuedMap, t_values: Sequence[float], guess,
                   trust_radius: float, tol: float,
                   points_per_side: int = Config.SOLVER_POINTS_PER_SIDE,
                   max_depth: int = Config.SOLVER_MAX_DEPTH) -> np.ndarray:
    """Solutions of 0 ∈ f(t, x) + F(x) for each t, each warm-started from the previous one."""
    t_values = [float(t) for t in t_values]
    zero_path = Path('constant', dim=F.range_space.dim, value=0.0)
    horizon = max(t_values)
    lower = min(t_values)
    if lower < 0:
        raise RegcertError("Parameter values must be nonnegative")
    ge = ParametricGE(f, F, zero_path, horizon, 2 if horizon > 0 else 1)
    x = F.domain_space.point(guess)
    centers = []
    for t in t_values:
        x = solve_step(ge, t, x, trust_radius, tol, None, points_per_side, max_depth)
        centers.append(x)
    logger.info(f"Located {len(centers)} centres")
    return np.vstack(centers)
