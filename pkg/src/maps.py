"""
Single-valued and set-valued mappings with exact image sets.

Every set-valued map returns an ImageSet that is either empty, a finite point
set, a normalized union of closed intervals (1-D ranges), or a product of
closed intervals (a possibly unbounded box). Maps whose images are always a
single box (lifts, normal cones of boxes, their sums and scalings) take a
vectorized path through image_bounds(); the rest are evaluated point by point.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, RegcertError, SpecError
from .spaces import Ball, Grid, Norm, Space, dist_point_to_finite_set

logger = logging.getLogger(__name__)

Bounds = Tuple[np.ndarray, np.ndarray]


# ---------------------------------------------------------------------------
# Image sets
# ---------------------------------------------------------------------------

class ImageKind(Enum):
    EMPTY = "empty"
    POINTS = "points"
    INTERVALS = "intervals"
    BOX = "box"


class ImageSet:
    """A closed subset of R^m in one of the supported representations."""

    def __init__(self, kind: ImageKind, dim: int, points: Optional[np.ndarray] = None,
                 intervals: Optional[List[Tuple[float, float]]] = None,
                 lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None):
        self.kind = kind
        self.dim = dim
        self.points = points
        self.intervals = intervals
        self.lower = lower
        self.upper = upper

    @classmethod
    def empty(cls, dim: int) -> 'ImageSet':
        return cls(ImageKind.EMPTY, dim)

    @classmethod
    def from_points(cls, points, dim: int) -> 'ImageSet':
        pts = np.asarray(points, dtype=float).reshape(-1, dim)
        if len(pts) == 0:
            return cls.empty(dim)
        # lexicographic order, duplicates removed
        pts = np.unique(pts, axis=0)
        return cls(ImageKind.POINTS, dim, points=pts)

    @classmethod
    def from_intervals(cls, intervals: Sequence[Tuple[float, float]]) -> 'ImageSet':
        """Normalize a union of closed intervals: drop empties, sort, merge overlaps."""
        cleaned = sorted((float(lo), float(hi)) for lo, hi in intervals if lo <= hi)
        merged: List[Tuple[float, float]] = []
        for lo, hi in cleaned:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        if not merged:
            return cls.empty(1)
        return cls(ImageKind.INTERVALS, 1, intervals=merged)

    @classmethod
    def from_box(cls, lower, upper) -> 'ImageSet':
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if np.any(np.isnan(lower)) or np.any(lower > upper):
            return cls.empty(len(lower))
        if len(lower) == 1:
            return cls.from_intervals([(lower[0], upper[0])])
        return cls(ImageKind.BOX, len(lower), lower=lower, upper=upper)

    @property
    def is_empty(self) -> bool:
        return self.kind == ImageKind.EMPTY

    def distance(self, y, space: Space) -> float:
        """dist(y, self) in the given norm; +inf for the empty set."""
        y = space.point(y)
        if self.kind == ImageKind.EMPTY:
            return math.inf
        if self.kind == ImageKind.POINTS:
            return dist_point_to_finite_set(y, self.points, space)
        if self.kind == ImageKind.INTERVALS:
            return min(max(lo - y[0], y[0] - hi, 0.0) for lo, hi in self.intervals)
        gap = np.maximum(np.maximum(self.lower - y, y - self.upper), 0.0)
        return float(space.norms(gap))

    def contains(self, y, space: Space, tol: float = 0.0) -> bool:
        return self.distance(y, space) <= tol

    def translate(self, shift) -> 'ImageSet':
        shift = np.asarray(shift, dtype=float).reshape(-1)
        if self.kind == ImageKind.EMPTY:
            return self
        if self.kind == ImageKind.POINTS:
            return ImageSet.from_points(self.points + shift, self.dim)
        if self.kind == ImageKind.INTERVALS:
            return ImageSet.from_intervals([(lo + shift[0], hi + shift[0]) for lo, hi in self.intervals])
        return ImageSet.from_box(self.lower + shift, self.upper + shift)

    def scale(self, factor: float) -> 'ImageSet':
        if factor <= 0:
            raise RegcertError(f"Image scaling factor must be positive (got {factor})")
        if self.kind == ImageKind.EMPTY:
            return self
        if self.kind == ImageKind.POINTS:
            return ImageSet.from_points(self.points * factor, self.dim)
        if self.kind == ImageKind.INTERVALS:
            return ImageSet.from_intervals([(lo * factor, hi * factor) for lo, hi in self.intervals])
        return ImageSet.from_box(self.lower * factor, self.upper * factor)

    def minkowski(self, other: 'ImageSet') -> 'ImageSet':
        """{a + b : a in self, b in other}."""
        if self.dim != other.dim:
            raise RegcertError(f"Cannot add images of dimensions {self.dim} and {other.dim}")
        if self.is_empty or other.is_empty:
            return ImageSet.empty(self.dim)
        if self.kind == ImageKind.POINTS and other.kind == ImageKind.POINTS:
            sums = (self.points[:, None, :] + other.points[None, :, :]).reshape(-1, self.dim)
            return ImageSet.from_points(sums, self.dim)
        if self.kind == ImageKind.POINTS and len(self.points) == 1:
            return other.translate(self.points[0])
        if other.kind == ImageKind.POINTS:
            return other.minkowski(self)
        if self.dim == 1:
            return ImageSet.from_intervals([(a + c, b + d) for a, b in _as_intervals(self)
                                            for c, d in _as_intervals(other)])
        if self.kind == ImageKind.BOX and other.kind == ImageKind.BOX:
            return ImageSet.from_box(self.lower + other.lower, self.upper + other.upper)
        raise RegcertError(f"Unsupported image sum: {self.kind.value} + {other.kind.value} in dimension {self.dim}")

    def intersect_ball(self, ball: Ball) -> 'ImageSet':
        """Intersection with a closed ball (interval and box images need a box-shaped ball)."""
        if self.kind == ImageKind.EMPTY:
            return self
        if self.kind == ImageKind.POINTS:
            return ImageSet.from_points(ball.filter(self.points), self.dim)
        _require_box_ball(ball)
        lo_b, hi_b = ball.bounding_box()
        if self.kind == ImageKind.INTERVALS:
            return ImageSet.from_intervals([(max(lo, lo_b[0]), min(hi, hi_b[0])) for lo, hi in self.intervals])
        return ImageSet.from_box(np.maximum(self.lower, lo_b), np.minimum(self.upper, hi_b))

    def sample(self, step: float) -> np.ndarray:
        """Grid sample of a bounded image with spacing at most step, as a (K, dim) array."""
        if self.kind == ImageKind.EMPTY:
            return np.empty((0, self.dim))
        if self.kind == ImageKind.POINTS:
            return self.points.copy()
        if self.kind == ImageKind.INTERVALS:
            chunks = [_sample_box(np.array([lo]), np.array([hi]), step) for lo, hi in self.intervals]
            return np.vstack(chunks)
        return _sample_box(self.lower, self.upper, step)

    def to_record(self) -> dict:
        if self.kind == ImageKind.EMPTY:
            return {'kind': 'empty'}
        if self.kind == ImageKind.POINTS:
            return {'kind': 'points', 'points': self.points.tolist()}
        if self.kind == ImageKind.INTERVALS:
            return {'kind': 'intervals', 'intervals': [list(iv) for iv in self.intervals]}
        return {'kind': 'box', 'lower': self.lower.tolist(), 'upper': self.upper.tolist()}

    def __repr__(self):
        return f"ImageSet({self.to_record()})"


def _as_intervals(image: ImageSet) -> List[Tuple[float, float]]:
    if image.kind == ImageKind.POINTS:
        return [(p[0], p[0]) for p in image.points]
    return list(image.intervals)


def _require_box_ball(ball: Ball):
    if ball.open:
        raise RegcertError("Image restriction needs a closed ball")
    if ball.space.dim > 1 and ball.space.norm != Norm.SUP:
        raise RegcertError("Restricting interval or box images needs the sup-norm in dimension > 1")


def _sample_box(lower: np.ndarray, upper: np.ndarray, step: float) -> np.ndarray:
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise RegcertError("Cannot sample an unbounded image; restrict it to a ball first")
    steps = []
    for lo, hi in zip(lower, upper):
        width = hi - lo
        steps.append(1 if width == 0 else max(2, int(math.ceil(width / step - 1e-9)) + 1))
    return Grid(tuple(lower), tuple(upper), tuple(steps)).points()


def _box_distances(lower: np.ndarray, upper: np.ndarray, ys: np.ndarray, space: Space,
                   centers: Optional[np.ndarray] = None, radius: float = 0.0) -> np.ndarray:
    """
    Row-wise dist(y_i, [lower_i, upper_i] ∩ B[center_i, radius]).

    Rows whose lower bound holds NaN are empty images. The restriction is
    skipped when centers is None.
    """
    empty = np.isnan(lower).any(axis=1)
    with np.errstate(invalid='ignore'):
        if centers is not None:
            if space.dim > 1 and space.norm != Norm.SUP:
                raise RegcertError("Restricted distances need the sup-norm in dimension > 1")
            lower = np.maximum(lower, centers - radius)
            upper = np.minimum(upper, centers + radius)
            empty |= (lower > upper).any(axis=1)
        gap = np.maximum(np.maximum(lower - ys, ys - upper), 0.0)
    gap[empty] = 0.0
    dist = space.norms(gap)
    dist[empty] = math.inf
    return dist


# ---------------------------------------------------------------------------
# Single-valued maps
# ---------------------------------------------------------------------------

def _ramp(x):
    return np.where(x <= 0, 0.0, x)


def _signed_square(x):
    return np.where(x <= 0, x * x, -(x * x))


def _perturbed_ramp(x):
    return np.where(x <= 0, x * x, x - x * x)


# rule -> (elementwise implementation, default parameters, has a kink at 0)
_RULES = {
    'identity': (lambda x: x.copy(), {}, False),
    'scaling': (lambda x, factor: factor * x, {'factor': 1.0}, False),
    'linear': (lambda x, slope, intercept: slope * x + intercept, {'slope': 1.0, 'intercept': 0.0}, False),
    'constant': (lambda x, value: np.full_like(x, value), {'value': 0.0}, False),
    'cubic': (lambda x: x * x * x, {}, False),
    'sine': (lambda x, amplitude, frequency: amplitude * np.sin(frequency * x),
             {'amplitude': 1.0, 'frequency': 1.0}, False),
    'ramp': (_ramp, {}, True),
    'signed_square': (_signed_square, {}, True),
    'perturbed_ramp': (_perturbed_ramp, {}, True),
}

CATALOG_RULES = tuple(sorted(_RULES))


def _box_from_spec(domain, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    if domain is None:
        return np.full(dim, -math.inf), np.full(dim, math.inf)
    arr = np.asarray(domain, dtype=float).reshape(-1, 2)
    if arr.shape[0] != dim:
        raise SpecError(f"Domain box has {arr.shape[0]} axes, expected {dim}")
    if np.any(arr[:, 0] > arr[:, 1]):
        raise SpecError(f"Domain box has lower > upper: {arr.tolist()}")
    return arr[:, 0].copy(), arr[:, 1].copy()


def _box_to_spec(lower: np.ndarray, upper: np.ndarray):
    if np.all(np.isinf(lower)) and np.all(np.isinf(upper)):
        return None
    return [[float(lo), float(hi)] for lo, hi in zip(lower, upper)]


def _check_domain(points: np.ndarray, lower: np.ndarray, upper: np.ndarray, what: str):
    outside = ((points < lower) | (points > upper)).any(axis=1)
    if outside.any():
        bad = points[np.argmax(outside)]
        raise DomainError(f"{what} evaluated outside its domain at {bad.tolist()}")


class Function(ABC):
    """Single-valued map g: R^n -> R^m, total on its declared domain box."""

    def __init__(self, domain_space: Space, range_space: Space, domain=None):
        self.domain_space = domain_space
        self.range_space = range_space
        self.domain_lower, self.domain_upper = _box_from_spec(domain, domain_space.dim)

    def value(self, x) -> np.ndarray:
        """g(x) for a single point."""
        return self.values(self.domain_space.point(x).reshape(1, -1))[0]

    __call__ = value

    def values(self, xs) -> np.ndarray:
        """g at each row of an (N, n) array, returned as (N, m)."""
        xs = self.domain_space.points(xs)
        _check_domain(xs, self.domain_lower, self.domain_upper, self.describe())
        return self._apply(xs)

    @abstractmethod
    def _apply(self, xs: np.ndarray) -> np.ndarray:
        ...

    def breakpoints(self) -> List[np.ndarray]:
        """Per-axis coordinates where the map may fail to be smooth."""
        return [np.empty(0) for _ in range(self.domain_space.dim)]

    @abstractmethod
    def to_spec(self) -> dict:
        ...

    def describe(self) -> str:
        return json.dumps(self.to_spec(), sort_keys=True)

    def _domain_entry(self, spec: dict) -> dict:
        box = _box_to_spec(self.domain_lower, self.domain_upper)
        if box is not None:
            spec['domain'] = box
        return spec


class CatalogFunction(Function):
    """Elementwise catalog rule on R^n."""

    def __init__(self, rule: str, dim: int = 1, norm: Norm = Norm.SUP, domain=None, **params):
        if rule not in _RULES:
            raise SpecError(f"Unknown function rule {rule!r}; catalog: {', '.join(CATALOG_RULES)}")
        impl, defaults, kinked = _RULES[rule]
        unknown = set(params) - set(defaults)
        if unknown:
            raise SpecError(f"Unknown parameters for rule {rule!r}: {sorted(unknown)}")
        space = Space(dim, norm)
        super().__init__(space, space, domain)
        self.rule = rule
        self.params = {k: float(params.get(k, v)) for k, v in defaults.items()}
        self._impl = impl
        self._kinked = kinked

    def _apply(self, xs: np.ndarray) -> np.ndarray:
        return self._impl(xs, **self.params)

    def breakpoints(self) -> List[np.ndarray]:
        if self._kinked:
            return [np.array([0.0]) for _ in range(self.domain_space.dim)]
        return super().breakpoints()

    def to_spec(self) -> dict:
        spec = {'rule': self.rule, 'dim': self.domain_space.dim}
        spec.update(self.params)
        return self._domain_entry(spec)


class FunctionSum(Function):
    """Pointwise sum of functions sharing their spaces."""

    def __init__(self, terms: Sequence[Function]):
        if not terms:
            raise SpecError("A function sum needs at least one term")
        first = terms[0]
        for term in terms[1:]:
            if term.domain_space != first.domain_space or term.range_space != first.range_space:
                raise DomainError("Function sum terms must share domain and range spaces")
        lower = np.max([t.domain_lower for t in terms], axis=0)
        upper = np.min([t.domain_upper for t in terms], axis=0)
        super().__init__(first.domain_space, first.range_space, _box_to_spec(lower, upper))
        self.terms = list(terms)

    def _apply(self, xs: np.ndarray) -> np.ndarray:
        total = self.terms[0]._apply(xs)
        for term in self.terms[1:]:
            total = total + term._apply(xs)
        return total

    def breakpoints(self) -> List[np.ndarray]:
        return _merge_breakpoints([t.breakpoints() for t in self.terms])

    def to_spec(self) -> dict:
        return {'rule': 'sum', 'terms': [t.to_spec() for t in self.terms]}


def _merge_breakpoints(lists: Sequence[List[np.ndarray]]) -> List[np.ndarray]:
    dim = len(lists[0])
    return [np.unique(np.concatenate([bp[k] for bp in lists])) for k in range(dim)]


# ---------------------------------------------------------------------------
# Parametric single-valued maps f: P x X -> Y
# ---------------------------------------------------------------------------

_PARAMETRIC_RULES = {
    'additive': {'scale': 1.0},
    'product': {},
    'sine_family': {'epsilon': 0.1},
}


class ParametricFunction(ABC):
    """f(t, x) with parameter t in R^k."""

    def __init__(self, parameter_space: Space, domain_space: Space, range_space: Space):
        self.parameter_space = parameter_space
        self.domain_space = domain_space
        self.range_space = range_space

    def values(self, ts, xs) -> np.ndarray:
        """f(t_i, x_i) row-wise; a single t or x is broadcast against the other."""
        ts = self.parameter_space.points(ts)
        xs = self.domain_space.points(xs)
        if len(ts) == 1 and len(xs) > 1:
            ts = np.repeat(ts, len(xs), axis=0)
        elif len(xs) == 1 and len(ts) > 1:
            xs = np.repeat(xs, len(ts), axis=0)
        if len(ts) != len(xs):
            raise RegcertError(f"Cannot pair {len(ts)} parameters with {len(xs)} points")
        return self._apply(ts, xs)

    def value(self, t, x) -> np.ndarray:
        return self.values(self.parameter_space.point(t).reshape(1, -1),
                           self.domain_space.point(x).reshape(1, -1))[0]

    @abstractmethod
    def _apply(self, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        ...

    def at(self, t) -> 'FrozenParameter':
        """The single-valued map x -> f(t, x)."""
        return FrozenParameter(self, t)

    def increment(self, s, t) -> 'ParameterIncrement':
        """The map u -> f(s, u) - f(t, u)."""
        return ParameterIncrement(self, s, t)

    def breakpoints(self) -> List[np.ndarray]:
        return [np.empty(0) for _ in range(self.domain_space.dim)]

    @abstractmethod
    def to_spec(self) -> dict:
        ...


class StaticFamily(ParametricFunction):
    """f(t, x) = g(x): no parameter dependence."""

    def __init__(self, g: Function, parameter_dim: int = 1):
        super().__init__(Space(parameter_dim, g.domain_space.norm), g.domain_space, g.range_space)
        self.g = g

    def _apply(self, ts, xs):
        return self.g.values(xs)

    def breakpoints(self):
        return self.g.breakpoints()

    def to_spec(self) -> dict:
        return {'rule': 'static', 'g': self.g.to_spec(), 'parameter_dim': self.parameter_space.dim}


class CatalogFamily(ParametricFunction):
    """
    Catalog parametric rules with a scalar parameter, applied per coordinate:

        additive:    f(t, x) = x + scale * t
        product:     f(t, x) = t * x
        sine_family: f(t, x) = x + epsilon * t * sin(x)
    """

    def __init__(self, rule: str, dim: int = 1, norm: Norm = Norm.SUP, **params):
        if rule not in _PARAMETRIC_RULES:
            raise SpecError(f"Unknown parametric rule {rule!r}; catalog: "
                            f"{', '.join(sorted(_PARAMETRIC_RULES) + ['static'])}")
        defaults = _PARAMETRIC_RULES[rule]
        unknown = set(params) - set(defaults)
        if unknown:
            raise SpecError(f"Unknown parameters for rule {rule!r}: {sorted(unknown)}")
        space = Space(dim, norm)
        super().__init__(Space(1, norm), space, space)
        self.rule = rule
        self.params = {k: float(params.get(k, v)) for k, v in defaults.items()}

    def _apply(self, ts, xs):
        t = ts[:, :1]
        if self.rule == 'additive':
            return xs + self.params['scale'] * t
        if self.rule == 'product':
            return t * xs
        return xs + self.params['epsilon'] * t * np.sin(xs)

    def to_spec(self) -> dict:
        spec = {'rule': self.rule, 'dim': self.domain_space.dim}
        spec.update(self.params)
        return spec


class PackedParameterFamily(ParametricFunction):
    """
    f~((t, y), x) = f(t, x) - y.

    Moves the right-hand side of p(t) in f(t, x) + F(x) into the parameter, so
    solutions become zeros of f~((t, p(t)), .) + F.
    """

    def __init__(self, base: ParametricFunction):
        k = base.parameter_space.dim
        m = base.range_space.dim
        super().__init__(Space(k + m, base.parameter_space.norm), base.domain_space, base.range_space)
        self.base = base
        self._k = k

    def _apply(self, ts, xs):
        return self.base._apply(ts[:, :self._k], xs) - ts[:, self._k:]

    def breakpoints(self):
        return self.base.breakpoints()

    def to_spec(self) -> dict:
        return {'rule': 'packed', 'base': self.base.to_spec()}


class FrozenParameter(Function):
    """x -> f(t, x) for a fixed parameter t."""

    def __init__(self, family: ParametricFunction, t):
        super().__init__(family.domain_space, family.range_space)
        self.family = family
        self.t = family.parameter_space.point(t)

    def _apply(self, xs):
        return self.family._apply(np.repeat(self.t.reshape(1, -1), len(xs), axis=0), xs)

    def breakpoints(self):
        return self.family.breakpoints()

    def to_spec(self) -> dict:
        return {'rule': 'frozen', 'family': self.family.to_spec(), 't': self.t.tolist()}


class ParameterIncrement(Function):
    """u -> f(s, u) - f(t, u)."""

    def __init__(self, family: ParametricFunction, s, t):
        super().__init__(family.domain_space, family.range_space)
        self.family = family
        self.s = family.parameter_space.point(s)
        self.t = family.parameter_space.point(t)

    def _apply(self, xs):
        n = len(xs)
        ss = np.repeat(self.s.reshape(1, -1), n, axis=0)
        tt = np.repeat(self.t.reshape(1, -1), n, axis=0)
        return self.family._apply(ss, xs) - self.family._apply(tt, xs)

    def to_spec(self) -> dict:
        return {'rule': 'increment', 'family': self.family.to_spec(),
                's': self.s.tolist(), 't': self.t.tolist()}


def oscillation_profile(f: ParametricFunction, t_box, x_box, levels: int = 4,
                        base_steps: int = 5) -> List[float]:
    """
    Largest jump of f between neighbouring nodes of successively halved grids
    over the product box t_box x x_box.

    Args:
        f: Parametric map to probe
        t_box: [[lo, hi], ...] per parameter axis
        x_box: [[lo, hi], ...] per domain axis
        levels: Number of refinement levels
        base_steps: Points per axis on the coarsest grid

    Returns:
        One oscillation value per level, coarsest first
    """
    k = f.parameter_space.dim
    boxes = np.vstack([np.asarray(t_box, dtype=float).reshape(-1, 2),
                       np.asarray(x_box, dtype=float).reshape(-1, 2)])
    grid = Grid(tuple(boxes[:, 0]), tuple(boxes[:, 1]), base_steps)
    profile = []
    for _ in range(levels):
        nodes = grid.points()
        vals = f.values(nodes[:, :k], nodes[:, k:])
        shaped = vals.reshape(grid.steps + (vals.shape[1],))
        worst = 0.0
        for axis in range(len(grid.steps)):
            if grid.steps[axis] < 2:
                continue
            jumps = f.range_space.norms(np.diff(shaped, axis=axis))
            worst = max(worst, float(np.max(jumps)))
        profile.append(worst)
        grid = grid.refined()
    return profile


def check_continuity(f: ParametricFunction, t_box, x_box, levels: int = 4) -> bool:
    """True when the oscillation never increases under refinement."""
    profile = oscillation_profile(f, t_box, x_box, levels)
    ok = all(b <= a * (1 + 1e-12) for a, b in zip(profile, profile[1:]))
    if not ok:
        logger.warning(f"Oscillation does not decrease under refinement: {profile}")
    return ok


# ---------------------------------------------------------------------------
# Set-valued maps
# ---------------------------------------------------------------------------

class SetValuedMap(ABC):
    """F: R^n ⇉ R^m evaluated on a declared domain box."""

    box_valued = False

    def __init__(self, domain_space: Space, range_space: Space, domain_lower=None, domain_upper=None):
        self.domain_space = domain_space
        self.range_space = range_space
        n = domain_space.dim
        self.domain_lower = np.full(n, -math.inf) if domain_lower is None else np.asarray(domain_lower, float)
        self.domain_upper = np.full(n, math.inf) if domain_upper is None else np.asarray(domain_upper, float)

    def evaluate(self, x) -> ImageSet:
        x = self.domain_space.point(x)
        _check_domain(x.reshape(1, -1), self.domain_lower, self.domain_upper, self.describe())
        return self._image(x)

    @abstractmethod
    def _image(self, x: np.ndarray) -> ImageSet:
        ...

    def image_bounds(self, xs: np.ndarray) -> Bounds:
        """Per-row lower/upper bounds of box-valued images (NaN rows are empty)."""
        raise NotImplementedError(f"{type(self).__name__} is not box-valued")

    def distances(self, xs, y, ball: Optional[Ball] = None) -> np.ndarray:
        """
        dist(y, F(x_i)) for each row x_i, or dist(y, F(x_i) ∩ ball) when a ball is given.

        y may be a single point or one point per row.
        """
        xs = self.domain_space.points(xs)
        _check_domain(xs, self.domain_lower, self.domain_upper, self.describe())
        ys = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1, self.range_space.dim),
                             (len(xs), self.range_space.dim))
        if ball is None:
            return self._distances(xs, ys, None, 0.0)
        centers = np.broadcast_to(ball.center_array, (len(xs), self.range_space.dim))
        return self._distances(xs, ys, centers, ball.radius)

    def _distances(self, xs, ys, centers, radius) -> np.ndarray:
        if self.box_valued:
            lower, upper = self.image_bounds(xs)
            return _box_distances(lower, upper, ys, self.range_space, centers, radius)
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            image = self._image(x)
            if centers is not None:
                image = image.intersect_ball(Ball(self.range_space, tuple(centers[i]), radius))
            out[i] = image.distance(ys[i], self.range_space)
        return out

    def graph_points(self, xs, window: Ball, range_step: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Sampled pairs (x, y) with y in F(x) ∩ window, for each row x.

        Returns:
            (X, Y) arrays with one graph pair per row
        """
        xs = self.domain_space.points(xs)
        _check_domain(xs, self.domain_lower, self.domain_upper, self.describe())
        gx, gy = [], []
        if self.box_valued:
            _require_box_ball(window)
            lower, upper = self.image_bounds(xs)
            lo_w, hi_w = window.bounding_box()
            with np.errstate(invalid='ignore'):
                lower = np.maximum(lower, lo_w)
                upper = np.minimum(upper, hi_w)
                keep = ~(np.isnan(lower).any(axis=1) | (lower > upper).any(axis=1))
            for x, lo, hi in zip(xs[keep], lower[keep], upper[keep]):
                ys = lo.reshape(1, -1) if np.all(lo == hi) else _sample_box(lo, hi, range_step)
                gx.append(np.repeat(x.reshape(1, -1), len(ys), axis=0))
                gy.append(ys)
        else:
            for x in xs:
                ys = self._image(x).intersect_ball(window).sample(range_step)
                if len(ys):
                    gx.append(np.repeat(x.reshape(1, -1), len(ys), axis=0))
                    gy.append(ys)
        if not gx:
            return np.empty((0, self.domain_space.dim)), np.empty((0, self.range_space.dim))
        return np.vstack(gx), np.vstack(gy)

    def breakpoints(self) -> List[np.ndarray]:
        return [np.empty(0) for _ in range(self.domain_space.dim)]

    @abstractmethod
    def to_spec(self) -> dict:
        ...

    def describe(self) -> str:
        return serialize_map(self)


class Lift(SetValuedMap):
    """x ⇉ {g(x)}."""

    box_valued = True

    def __init__(self, g: Function):
        super().__init__(g.domain_space, g.range_space, g.domain_lower, g.domain_upper)
        self.g = g

    def _image(self, x):
        return ImageSet.from_points(self.g._apply(x.reshape(1, -1)), self.range_space.dim)

    def image_bounds(self, xs):
        vals = self.g._apply(xs)
        return vals, vals.copy()

    def breakpoints(self):
        return self.g.breakpoints()

    def to_spec(self) -> dict:
        return {'type': 'lift', 'g': self.g.to_spec()}


class NormalConeBox(SetValuedMap):
    """
    Normal cone N_C(x) of the box C = [lower, upper], coordinatewise:
    {0} inside, [0, inf) on an upper face, (-inf, 0] on a lower face, empty outside C.
    """

    box_valued = True

    def __init__(self, lower, upper, norm: Norm = Norm.SUP):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise SpecError("Box bounds disagree in dimension")
        if np.any(lower >= upper):
            raise SpecError(f"Box must have nonempty interior (got lower={lower.tolist()}, upper={upper.tolist()})")
        space = Space(len(lower), norm)
        super().__init__(space, space)
        self.lower = lower
        self.upper = upper

    def image_bounds(self, xs):
        lo = np.zeros_like(xs)
        hi = np.zeros_like(xs)
        hi[xs == self.upper] = math.inf
        lo[xs == self.lower] = -math.inf
        outside = ((xs < self.lower) | (xs > self.upper)).any(axis=1)
        lo[outside] = np.nan
        hi[outside] = np.nan
        return lo, hi

    def _image(self, x):
        lo, hi = self.image_bounds(x.reshape(1, -1))
        return ImageSet.from_box(lo[0], hi[0])

    def breakpoints(self):
        return [np.array([lo, hi]) for lo, hi in zip(self.lower, self.upper)]

    def to_spec(self) -> dict:
        return {'type': 'normal_cone_box', 'box': [[float(lo), float(hi)] for lo, hi in zip(self.lower, self.upper)]}


class GraphSampleMap(SetValuedMap):
    """Map given by a finite list of graph pairs; F(x) collects the y's sampled at exactly x."""

    def __init__(self, pairs: Sequence, domain_dim: int = 1, range_dim: int = 1, norm: Norm = Norm.SUP):
        if len(pairs) == 0:
            raise SpecError("A graph sample needs at least one pair")
        xs = np.array([np.atleast_1d(np.asarray(p[0], dtype=float)) for p in pairs])
        ys = np.array([np.atleast_1d(np.asarray(p[1], dtype=float)) for p in pairs])
        if xs.shape[1] != domain_dim or ys.shape[1] != range_dim:
            raise SpecError(f"Graph pairs must be ({domain_dim}-dim, {range_dim}-dim)")
        super().__init__(Space(domain_dim, norm), Space(range_dim, norm), xs.min(axis=0), xs.max(axis=0))
        self.xs = xs
        self.ys = ys

    def _image(self, x):
        match = np.all(self.xs == x, axis=1)
        return ImageSet.from_points(self.ys[match], self.range_space.dim)

    def breakpoints(self):
        return [np.unique(self.xs[:, k]) for k in range(self.domain_space.dim)]

    def to_spec(self) -> dict:
        def unwrap(v):
            return float(v[0]) if len(v) == 1 else [float(c) for c in v]
        return {'type': 'graph_sample', 'pairs': [[unwrap(x), unwrap(y)] for x, y in zip(self.xs, self.ys)]}


class SumMap(SetValuedMap):
    """(g + F)(x) = g(x) + F(x)."""

    def __init__(self, g: Function, F: SetValuedMap):
        if g.domain_space != F.domain_space or g.range_space != F.range_space:
            raise DomainError("Sum needs g and F on the same domain and range spaces")
        super().__init__(F.domain_space, F.range_space,
                         np.maximum(g.domain_lower, F.domain_lower),
                         np.minimum(g.domain_upper, F.domain_upper))
        self.g = g
        self.F = F
        self.box_valued = F.box_valued

    def _image(self, x):
        return self.F._image(x).translate(self.g._apply(x.reshape(1, -1))[0])

    def image_bounds(self, xs):
        lo, hi = self.F.image_bounds(xs)
        shift = self.g._apply(xs)
        return lo + shift, hi + shift

    def _distances(self, xs, ys, centers, radius):
        # dist(y, g(x) + S) = dist(y - g(x), S), evaluated in that form
        shift = self.g._apply(xs)
        shifted_centers = None if centers is None else centers - shift
        return self.F._distances(xs, ys - shift, shifted_centers, radius)

    def breakpoints(self):
        return _merge_breakpoints([self.g.breakpoints(), self.F.breakpoints()])

    def to_spec(self) -> dict:
        return {'type': 'sum', 'g': self.g.to_spec(), 'F': self.F.to_spec()}


class ScaledMap(SetValuedMap):
    """(cF)(x) = c F(x) for c > 0."""

    def __init__(self, F: SetValuedMap, factor: float):
        if not factor > 0:
            raise SpecError(f"Range scaling factor must be positive (got {factor})")
        super().__init__(F.domain_space, F.range_space, F.domain_lower, F.domain_upper)
        self.F = F
        self.factor = float(factor)
        self.box_valued = F.box_valued

    def _image(self, x):
        return self.F._image(x).scale(self.factor)

    def image_bounds(self, xs):
        lo, hi = self.F.image_bounds(xs)
        return lo * self.factor, hi * self.factor

    def breakpoints(self):
        return self.F.breakpoints()

    def to_spec(self) -> dict:
        return {'type': 'scale', 'factor': self.factor, 'F': self.F.to_spec()}


class RangeRestriction(SetValuedMap):
    """x ⇉ F(x) ∩ B[center, radius]."""

    def __init__(self, F: SetValuedMap, center, radius: float):
        super().__init__(F.domain_space, F.range_space, F.domain_lower, F.domain_upper)
        self.F = F
        self.ball = Ball(F.range_space, tuple(F.range_space.point(center)), radius)
        _require_box_ball(self.ball)
        self.box_valued = F.box_valued

    def _image(self, x):
        return self.F._image(x).intersect_ball(self.ball)

    def image_bounds(self, xs):
        lo, hi = self.F.image_bounds(xs)
        lo_b, hi_b = self.ball.bounding_box()
        with np.errstate(invalid='ignore'):
            lo = np.maximum(lo, lo_b)
            hi = np.minimum(hi, hi_b)
            empty = (lo > hi).any(axis=1)
        lo[empty] = np.nan
        hi[empty] = np.nan
        return lo, hi

    def breakpoints(self):
        return self.F.breakpoints()

    def to_spec(self) -> dict:
        return {'type': 'restrict', 'center': list(self.ball.center), 'radius': self.ball.radius,
                'F': self.F.to_spec()}


class MinkowskiSum(SetValuedMap):
    """(G + F)(x) = {u + v : u in G(x), v in F(x)}."""

    def __init__(self, G: SetValuedMap, F: SetValuedMap):
        if G.domain_space != F.domain_space or G.range_space != F.range_space:
            raise DomainError("Minkowski sum needs G and F on the same domain and range spaces")
        super().__init__(F.domain_space, F.range_space,
                         np.maximum(G.domain_lower, F.domain_lower),
                         np.minimum(G.domain_upper, F.domain_upper))
        self.G = G
        self.F = F
        self.box_valued = G.box_valued and F.box_valued

    def _image(self, x):
        return self.G._image(x).minkowski(self.F._image(x))

    def image_bounds(self, xs):
        lo_g, hi_g = self.G.image_bounds(xs)
        lo_f, hi_f = self.F.image_bounds(xs)
        return lo_g + lo_f, hi_g + hi_f

    def breakpoints(self):
        return _merge_breakpoints([self.G.breakpoints(), self.F.breakpoints()])

    def to_spec(self) -> dict:
        return {'type': 'minkowski', 'G': self.G.to_spec(), 'F': self.F.to_spec()}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def evaluate(F: SetValuedMap, x) -> ImageSet:
    return F.evaluate(x)


def dist_to_image(F: SetValuedMap, x, y) -> float:
    """dist(y, F(x)) in the range norm; +inf when F(x) is empty."""
    return float(F.distances(F.domain_space.point(x).reshape(1, -1), y)[0])


def dist_to_restricted_image(F: SetValuedMap, x, y, ball: Ball) -> float:
    """dist(y, F(x) ∩ ball); +inf when the intersection is empty."""
    return float(F.distances(F.domain_space.point(x).reshape(1, -1), y, ball)[0])


def sum_map(g: Function, F: SetValuedMap) -> SumMap:
    """The set-valued map g + F."""
    return SumMap(g, F)


def default_membership_tol(grid: Grid) -> float:
    return 0.5 * grid.step


def preimage_points(F: SetValuedMap, y, search_grid: Grid, membership_tol: Optional[float] = None) -> np.ndarray:
    """Nodes u of search_grid with dist(y, F(u)) <= membership_tol."""
    tol = default_membership_tol(search_grid) if membership_tol is None else membership_tol
    nodes = search_grid.points()
    return nodes[F.distances(nodes, y) <= tol]


def inverse_dist(F: SetValuedMap, y, x, search_grid: Grid, membership_tol: Optional[float] = None) -> float:
    """
    Grid estimate of dist(x, F^{-1}(y)).

    Returns:
        Distance from x to the nearest qualifying grid node, or +inf if none qualifies
    """
    pre = preimage_points(F, y, search_grid, membership_tol)
    return dist_point_to_finite_set(x, pre, F.domain_space)


# ---------------------------------------------------------------------------
# Specification format
# ---------------------------------------------------------------------------

def _loads(spec: Union[str, dict]) -> dict:
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as e:
            raise SpecError(f"Map spec is not valid JSON: {e}")
    if not isinstance(spec, dict):
        raise SpecError(f"Map spec must be an object, got {type(spec).__name__}")
    return spec


def parse_function(spec: Union[str, dict], norm: Norm = Norm.SUP) -> Function:
    """Build a single-valued map from {"rule": ..., params}."""
    spec = dict(_loads(spec))
    rule = spec.pop('rule', None)
    if rule is None:
        raise SpecError(f"Function spec needs a 'rule' key: {spec}")
    if rule == 'sum':
        terms = spec.pop('terms', None)
        if not terms or spec:
            raise SpecError("Function sum spec needs a nonempty 'terms' list and nothing else")
        return FunctionSum([parse_function(t, norm) for t in terms])
    dim = spec.pop('dim', 1)
    domain = spec.pop('domain', None)
    try:
        return CatalogFunction(rule, dim=int(dim), norm=norm, domain=domain, **spec)
    except (TypeError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"Bad parameters for rule {rule!r}: {e}")


def parse_family(spec: Union[str, dict], norm: Norm = Norm.SUP) -> ParametricFunction:
    """Build a parametric map from {"rule": "static" | "additive" | "product" | "sine_family", ...}."""
    spec = dict(_loads(spec))
    rule = spec.pop('rule', None)
    if rule == 'static':
        g = spec.pop('g', None)
        if g is None:
            raise SpecError("Static family needs a 'g' function spec")
        parameter_dim = int(spec.pop('parameter_dim', 1))
        if spec:
            raise SpecError(f"Unknown keys in static family spec: {sorted(spec)}")
        return StaticFamily(parse_function(g, norm), parameter_dim)
    if rule == 'packed':
        base = spec.pop('base', None)
        if base is None:
            raise SpecError("Packed family needs a 'base' family spec")
        if spec:
            raise SpecError(f"Unknown keys in packed family spec: {sorted(spec)}")
        return PackedParameterFamily(parse_family(base, norm))
    dim = int(spec.pop('dim', 1))
    try:
        return CatalogFamily(rule, dim=dim, norm=norm, **spec)
    except (TypeError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"Bad parameters for family {rule!r}: {e}")


_MAP_KEYS = {
    'lift': ('g',),
    'normal_cone_box': ('box',),
    'graph_sample': ('pairs',),
    'sum': ('g', 'F'),
    'minkowski': ('G', 'F'),
    'scale': ('F', 'factor'),
    'restrict': ('F', 'center', 'radius'),
}


def parse_map(spec: Union[str, dict], norm: Norm = Norm.SUP) -> SetValuedMap:
    """
    Build a set-valued map from its specification.

    Accepted types: lift, normal_cone_box, graph_sample, sum, minkowski, scale,
    restrict, or any catalog function rule name as shorthand for its lift.
    """
    spec = dict(_loads(spec))
    kind = spec.pop('type', None)
    unknown = set(spec) - set(_MAP_KEYS.get(kind, spec))
    if unknown:
        raise SpecError(f"Unknown keys in map spec of type {kind!r}: {sorted(unknown)}")
    try:
        if kind == 'lift':
            return Lift(parse_function(spec['g'], norm))
        if kind == 'normal_cone_box':
            box = np.asarray(spec['box'], dtype=float).reshape(-1, 2)
            return NormalConeBox(box[:, 0], box[:, 1], norm)
        if kind == 'graph_sample':
            pairs = spec['pairs']
            dx = len(np.atleast_1d(pairs[0][0])) if pairs else 1
            dy = len(np.atleast_1d(pairs[0][1])) if pairs else 1
            return GraphSampleMap(pairs, dx, dy, norm)
        if kind == 'sum':
            return SumMap(parse_function(spec['g'], norm), parse_map(spec['F'], norm))
        if kind == 'minkowski':
            return MinkowskiSum(parse_map(spec['G'], norm), parse_map(spec['F'], norm))
        if kind == 'scale':
            return ScaledMap(parse_map(spec['F'], norm), float(spec['factor']))
        if kind == 'restrict':
            return RangeRestriction(parse_map(spec['F'], norm), spec['center'], float(spec['radius']))
        if kind in _RULES:
            return Lift(parse_function(dict(spec, rule=kind), norm))
    except KeyError as e:
        raise SpecError(f"Map spec of type {kind!r} is missing key {e}")
    except (TypeError, IndexError) as e:
        raise SpecError(f"Malformed map spec of type {kind!r}: {e}")
    raise SpecError(f"Unknown map type {kind!r}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def serialize_map(F: SetValuedMap) -> str:
    """Canonical text form; serialize_map(parse_map(s)) is a fixed point."""
    return canonical_json(F.to_spec())


def serialize_function(g: Union[Function, ParametricFunction]) -> str:
    return canonical_json(g.to_spec())
