"""Normed finite-dimensional spaces, balls and grids."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


class Norm(Enum):
    """Norms available on R^n."""
    SUP = "sup"
    EUCLIDEAN = "euclidean"
    ONE = "one"


_NORM_ORDERS = {
    Norm.SUP: np.inf,
    Norm.EUCLIDEAN: 2,
    Norm.ONE: 1,
}


@dataclass(frozen=True)
class Space:
    """R^dim with a fixed norm."""

    dim: int
    norm: Norm = Norm.SUP

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise DimensionError(f"Space dimension must be a positive integer (got {self.dim!r})")
        if not isinstance(self.norm, Norm):
            try:
                object.__setattr__(self, 'norm', Norm(self.norm))
            except ValueError:
                raise DimensionError(f"Unknown norm {self.norm!r}; expected one of "
                                     f"{[n.value for n in Norm]}")

    def point(self, x: ArrayLike) -> np.ndarray:
        """Coerce x to a float vector of this space's dimension."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if arr.shape != (self.dim,):
            raise DimensionError(f"Expected a point of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def points(self, xs: ArrayLike) -> np.ndarray:
        """Coerce a collection of points to an (N, dim) array."""
        arr = np.asarray(xs, dtype=float)
        if arr.ndim == 1 and self.dim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim == 1 and arr.shape[0] == self.dim:
            arr = arr.reshape(1, -1)
        elif arr.size == 0:
            return np.empty((0, self.dim))
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionError(f"Expected points of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def norms(self, vectors: np.ndarray) -> np.ndarray:
        """Norm of each vector along the last axis."""
        vectors = np.asarray(vectors, dtype=float)
        if vectors.shape[-1] != self.dim:
            raise DimensionError(f"Expected vectors of dimension {self.dim}, got shape {vectors.shape}")
        return np.linalg.norm(vectors, ord=_NORM_ORDERS[self.norm], axis=-1)

    def distance(self, x: ArrayLike, u: ArrayLike) -> float:
        return norm(self, self.point(x) - self.point(u))


def norm(space: Space, x: ArrayLike) -> float:
    """Norm of a single point x in the given space."""
    return float(space.norms(space.point(x)))


def dist_point_to_finite_set(x: ArrayLike, points: Iterable, space: Space) -> float:
    """
    Distance from x to a finite point set.

    Args:
        x: Query point
        points: Finite collection of points (may be empty)
        space: Space supplying the norm

    Returns:
        Minimum distance, or +inf for an empty set
    """
    x = space.point(x)
    pts = list(points) if not isinstance(points, np.ndarray) else points
    if len(pts) == 0:
        return math.inf
    pts = space.points(pts)
    return float(np.min(space.norms(pts - x)))


@dataclass(frozen=True)
class Ball:
    """Closed (default) or open ball in a space."""

    space: Space
    center: Tuple[float, ...]
    radius: float
    open: bool = False

    def __post_init__(self):
        center = tuple(float(c) for c in self.space.point(self.center))
        object.__setattr__(self, 'center', center)
        if not self.radius >= 0:
            raise ValueError(f"Ball radius must be nonnegative (got {self.radius})")
        object.__setattr__(self, 'radius', float(self.radius))

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center)

    def contains(self, x: ArrayLike) -> bool:
        return bool(self.contains_many(self.space.point(x).reshape(1, -1))[0])

    def contains_many(self, xs: np.ndarray) -> np.ndarray:
        """Membership mask for an (N, dim) array, no slack on the boundary."""
        d = self.space.norms(self.space.points(xs) - self.center_array)
        if self.open:
            return d < self.radius
        return d <= self.radius

    def filter(self, xs: np.ndarray) -> np.ndarray:
        xs = self.space.points(xs)
        return xs[self.contains_many(xs)]

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing the ball (equal to it under the sup-norm)."""
        c = self.center_array
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Grid:
    """Uniform axis-aligned grid over a box, enumerated lexicographically."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    steps: Tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise DimensionError(f"Grid bounds disagree in dimension: {len(lower)} vs {len(upper)}")
        steps = np.atleast_1d(np.asarray(self.steps))
        if steps.size == 1:
            steps = np.repeat(steps, len(lower))
        if steps.size != len(lower):
            raise DimensionError(f"Grid steps given for {steps.size} axes, box has {len(lower)}")
        steps = tuple(int(s) for s in steps)
        for lo, hi, s in zip(lower, upper, steps):
            if s < 1:
                raise ValueError(f"Grid steps must be positive (got {s})")
            if not lo <= hi:
                raise ValueError(f"Grid lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'steps', steps)

    @classmethod
    def centered(cls, center: ArrayLike, radius: float, step: float) -> 'Grid':
        """
        Grid over the box [center - radius, center + radius] with spacing at most step.

        The number of points per axis is odd, so the middle node sits at center
        up to rounding.
        """
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if radius <= 0 or step <= 0:
            return cls(tuple(center), tuple(center), 1)
        per_side = max(1, int(math.ceil(radius / step - 1e-9)))
        return cls(tuple(center - radius), tuple(center + radius), 2 * per_side + 1)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def count(self) -> int:
        return int(np.prod(self.steps))

    @property
    def spacing(self) -> np.ndarray:
        """Distance between neighbouring nodes per axis (0 for single-node axes)."""
        return np.array([
            (hi - lo) / (s - 1) if s > 1 else 0.0
            for lo, hi, s in zip(self.lower, self.upper, self.steps)
        ])

    @property
    def step(self) -> float:
        """Largest per-axis spacing."""
        return float(np.max(self.spacing))

    def axis(self, k: int) -> np.ndarray:
        lo, hi, s = self.lower[k], self.upper[k], self.steps[k]
        if s == 1:
            return np.array([lo])
        coords = lo + (np.arange(s) * (hi - lo)) / (s - 1)
        return np.clip(coords, lo, hi)

    def points(self) -> np.ndarray:
        axes = [self.axis(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def refined(self) -> 'Grid':
        """Grid with the spacing halved; its nodes include every node of self."""
        return Grid(self.lower, self.upper, tuple(2 * s - 1 if s > 1 else 1 for s in self.steps))


def grid_points(grid: Grid) -> np.ndarray:
    """Lexicographic enumeration of a grid's nodes as an (N, dim) array."""
    return grid.points()
