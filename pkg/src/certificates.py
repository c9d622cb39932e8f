"""
Regularity certificates and the perturbation rules that propagate them.

A certificate is an immutable claim (constant, centre, radii) together with
the slack used to create it and the chain of rule applications that produced
it. The propagation rules compute the new constant as κ/(1 − κμ)·(1 + η);
validate() checks any certificate against the brute-force estimators.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import ClassVar, Optional, Tuple, Union

import numpy as np

from .config import Config
from .errors import HypothesisError, RegcertError
from .maps import Function, ImageKind, SetValuedMap
from .moduli import (
    ModulusEstimate,
    SweepGrids,
    empirical_calmness,
    empirical_isolated_calmness,
    empirical_lipschitz,
    empirical_strong_around,
    empirical_strong_at,
    empirical_subreg_at,
)
from .spaces import Grid

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]


class CertKind(Enum):
    SUBREG_AT = 'subregular-at'
    STRONG_AT = 'strong-at'
    STRONG_AROUND = 'strong-around'
    CALM = 'calm'
    ISOLATED_CALM = 'isolated-calm'


def _as_point(v) -> Point:
    return tuple(float(c) for c in np.atleast_1d(np.asarray(v, dtype=float)))


def _require(condition: bool, message: str):
    if not condition:
        raise RegcertError(message)


class _Certificate:
    """Shared serialization for the certificate dataclasses."""

    kind: ClassVar[CertKind]

    def _coerce_points(self, *names):
        for name in names:
            object.__setattr__(self, name, _as_point(getattr(self, name)))
        object.__setattr__(self, 'provenance', tuple(dict(p) for p in self.provenance))

    def to_record(self) -> dict:
        record = {'kind': self.kind.value}
        record.update(asdict(self))
        record['provenance'] = [dict(p) for p in self.provenance]
        return record

    def extend_provenance(self, rule: str, **detail) -> tuple:
        """Provenance of a certificate derived from this one by `rule`."""
        return self.provenance + ({'rule': rule, **detail},)


@dataclass(frozen=True)
class SubregAtCert(_Certificate):
    """dist(x, F⁻¹(ȳ)) ≤ κ·dist(ȳ, F(x)) for x in B[x̄, α]."""

    x_bar: Point
    y_bar: Point
    kappa: float
    alpha: float
    eta: float = 0.0
    provenance: tuple = ()

    kind: ClassVar[CertKind] = CertKind.SUBREG_AT

    def __post_init__(self):
        self._coerce_points('x_bar', 'y_bar')
        _require(self.kappa > 0, f"kappa must be positive (got {self.kappa})")
        _require(self.alpha > 0, f"alpha must be positive (got {self.alpha})")


@dataclass(frozen=True)
class StrongSubregAtCert(_Certificate):
    """‖x − x̄‖ ≤ κ·dist(ȳ, F(x)) for x in B[x̄, α]."""

    x_bar: Point
    y_bar: Point
    kappa: float
    alpha: float
    eta: float = 0.0
    provenance: tuple = ()

    kind: ClassVar[CertKind] = CertKind.STRONG_AT

    def __post_init__(self):
        self._coerce_points('x_bar', 'y_bar')
        _require(self.kappa > 0, f"kappa must be positive (got {self.kappa})")
        _require(self.alpha > 0, f"alpha must be positive (got {self.alpha})")


@dataclass(frozen=True)
class StrongSubregAroundCert(_Certificate):
    """
    For graph pairs (x, y) with x in B[x̄, a], y in B[ȳ, b] and u in B[x, r0]:
    ‖u − x‖ ≤ κ·dist(y, F(u) ∩ B[ȳ, b]).
    """

    x_bar: Point
    y_bar: Point
    kappa: float
    a: float
    b: float
    r0: float
    eta: float = 0.0
    provenance: tuple = ()

    kind: ClassVar[CertKind] = CertKind.STRONG_AROUND

    def __post_init__(self):
        self._coerce_points('x_bar', 'y_bar')
        _require(self.kappa > 0, f"kappa must be positive (got {self.kappa})")
        _require(self.a > 0 and self.b > 0, f"window radii must be positive (got a={self.a}, b={self.b})")
        _require(self.r0 > 0, f"r0 must be positive (got {self.r0})")


@dataclass(frozen=True)
class CalmnessCert(_Certificate):
    """
    ‖g(x) − g(x̄)‖ ≤ μ‖x − x̄‖ on B[x̄, radius] and ‖g(x̄)‖ ≤ value_bound.

    With mode 'lipschitz' the bound is claimed for every pair of points of the
    ball, which is what the around rule needs.
    """

    x_bar: Point
    mu: float
    radius: float
    value_bound: float
    center_value: Point
    mode: str = 'calm'
    eta: float = 0.0
    provenance: tuple = ()

    kind: ClassVar[CertKind] = CertKind.CALM

    def __post_init__(self):
        self._coerce_points('x_bar', 'center_value')
        _require(self.mu >= 0, f"mu must be nonnegative (got {self.mu})")
        _require(self.radius > 0, f"radius must be positive (got {self.radius})")
        _require(self.value_bound >= 0, f"value_bound must be nonnegative (got {self.value_bound})")
        _require(self.mode in ('calm', 'lipschitz'), f"Unknown calmness mode {self.mode!r}")


@dataclass(frozen=True)
class IsolatedSelectionCert(_Certificate):
    """G(x̄) = {z̄} and G(x) ⊂ z̄ + μ‖x − x̄‖·B for x in B[x̄, β]."""

    x_bar: Point
    z_bar: Point
    mu: float
    beta: float
    range_radius: float = Config.ISOLATED_RANGE_RADIUS
    eta: float = 0.0
    provenance: tuple = ()

    kind: ClassVar[CertKind] = CertKind.ISOLATED_CALM

    def __post_init__(self):
        self._coerce_points('x_bar', 'z_bar')
        _require(self.mu >= 0, f"mu must be nonnegative (got {self.mu})")
        _require(self.beta > 0, f"beta must be positive (got {self.beta})")


Certificate = Union[SubregAtCert, StrongSubregAtCert, StrongSubregAroundCert, CalmnessCert, IsolatedSelectionCert]

_BY_KIND = {cls.kind.value: cls for cls in
            (SubregAtCert, StrongSubregAtCert, StrongSubregAroundCert, CalmnessCert, IsolatedSelectionCert)}


def certificate_from_record(record: dict) -> Certificate:
    """Rebuild a certificate from to_record() output."""
    record = dict(record)
    cls = _BY_KIND.get(record.pop('kind', None))
    if cls is None:
        raise RegcertError(f"Unknown certificate kind in record: {record}")
    names = {f.name for f in fields(cls)}
    unknown = set(record) - names
    if unknown:
        raise RegcertError(f"Unknown certificate fields: {sorted(unknown)}")
    return cls(**record)


# ---------------------------------------------------------------------------
# Propagation rules
# ---------------------------------------------------------------------------

def perturbed_constant(kappa: float, mu: float, eta: float) -> float:
    """κ/(1 − κμ)·(1 + η), defined for κμ < 1."""
    if not kappa * mu < 1:
        raise HypothesisError(f"kappa*mu = {kappa * mu:g} must be < 1 (kappa={kappa:g}, mu={mu:g})")
    if not eta > 0:
        raise HypothesisError(f"slack eta must be positive (got {eta})")
    return kappa / (1 - kappa * mu) * (1 + eta)


def _same_center(p: Point, q: Point, what: str):
    if len(p) != len(q) or any(a != b for a, b in zip(p, q)):
        raise HypothesisError(f"{what}: centres differ ({list(p)} vs {list(q)})")


def propagate_calm_perturbation(cert: StrongSubregAtCert, calm: CalmnessCert,
                                eta: float = Config.ETA) -> StrongSubregAtCert:
    """
    Strong subregularity of g + F at (x̄, ȳ + g(x̄)) from strong subregularity of
    F at (x̄, ȳ) and calmness of g at x̄.

    The output radius is min(α, calm.radius).
    """
    _same_center(cert.x_bar, calm.x_bar, "calm perturbation")
    kappa = perturbed_constant(cert.kappa, calm.mu, eta)
    alpha = min(cert.alpha, calm.radius)
    y_bar = tuple(y + g for y, g in zip(cert.y_bar, calm.center_value))
    out = StrongSubregAtCert(
        cert.x_bar, y_bar, kappa, alpha, eta,
        cert.extend_provenance('calm_perturbation', kappa_in=cert.kappa, mu=calm.mu, eta=eta),
    )
    logger.info(f"Calm perturbation: kappa {cert.kappa:g} -> {kappa:g}, radius {alpha:g}")
    return out


def propagate_setvalued_perturbation(cert: StrongSubregAtCert, sel: IsolatedSelectionCert,
                                     eta: float = Config.ETA) -> StrongSubregAtCert:
    """Strong subregularity of G + F at (x̄, ȳ + z̄) on B[x̄, β], for β in (0, α]."""
    _same_center(cert.x_bar, sel.x_bar, "set-valued perturbation")
    if not sel.beta <= cert.alpha:
        raise HypothesisError(f"beta = {sel.beta:g} exceeds the certificate radius alpha = {cert.alpha:g}")
    kappa = perturbed_constant(cert.kappa, sel.mu, eta)
    y_bar = tuple(y + z for y, z in zip(cert.y_bar, sel.z_bar))
    out = StrongSubregAtCert(
        cert.x_bar, y_bar, kappa, sel.beta, eta,
        cert.extend_provenance('setvalued_perturbation', kappa_in=cert.kappa, mu=sel.mu, beta=sel.beta, eta=eta),
    )
    logger.info(f"Set-valued perturbation: kappa {cert.kappa:g} -> {kappa:g}, radius {sel.beta:g}")
    return out


def propagate_around_perturbation(cert: StrongSubregAroundCert, lip: CalmnessCert,
                                  eta: float = Config.ETA) -> StrongSubregAroundCert:
    """
    Strong subregularity of g + F around (x̄, ȳ) from the around-certificate of F
    and a Lipschitz bound μ of g on B[x̄, lip.radius] with ‖g(x̄)‖ ≤ lip.value_bound.

    α = min(a/2, lip.radius) and β = (b − μα)/2, so that 2α ≤ a and
    2β + μα ≤ b hold in floating point.
    """
    _same_center(cert.x_bar, lip.x_bar, "around perturbation")
    if lip.mode != 'lipschitz':
        raise HypothesisError("The around rule needs a Lipschitz bound (CalmnessCert with mode='lipschitz')")
    kappa = perturbed_constant(cert.kappa, lip.mu, eta)
    mu = lip.mu
    alpha = min(cert.a / 2, lip.radius)
    beta = (cert.b - mu * alpha) / 2
    if not beta > 0:
        raise HypothesisError(f"Infeasible window: (b - mu*alpha)/2 = {beta:g} <= 0 "
                              f"(b={cert.b:g}, mu={mu:g}, alpha={alpha:g})")
    while 2 * beta + mu * alpha > cert.b:
        beta = math.nextafter(beta, 0.0)
    if lip.value_bound > beta:
        raise HypothesisError(f"||g(x_bar)|| bound {lip.value_bound:g} exceeds beta = {beta:g}")
    out = StrongSubregAroundCert(
        cert.x_bar, cert.y_bar, kappa, alpha, beta, min(cert.r0, alpha), eta,
        cert.extend_provenance('around_perturbation', kappa_in=cert.kappa, mu=mu, a_in=cert.a, b_in=cert.b, eta=eta),
    )
    logger.info(f"Around perturbation: kappa {cert.kappa:g} -> {kappa:g}, window ({alpha:g}, {beta:g})")
    return out


# ---------------------------------------------------------------------------
# Certificates from estimates
# ---------------------------------------------------------------------------

def base_constant(estimate: ModulusEstimate, eta: float, floor: float = Config.KAPPA_FLOOR) -> float:
    """max(estimate, floor)·(1 + η); an unbounded estimate cannot be certified."""
    if not math.isfinite(estimate.value):
        raise HypothesisError(f"{estimate.kind} estimate is unbounded (witness {estimate.witness})")
    return max(estimate.value, floor) * (1 + eta)


def certify_subreg_at(F: SetValuedMap, x_bar, y_bar, alpha: float, grids: SweepGrids,
                      eta: float = Config.ETA) -> SubregAtCert:
    est = empirical_subreg_at(F, x_bar, y_bar, alpha, grids)
    return SubregAtCert(x_bar, y_bar, base_constant(est, eta), alpha, eta,
                        ({'rule': 'estimate', 'kind': est.kind, 'value': est.value},))


def certify_strong_at(F: SetValuedMap, x_bar, y_bar, alpha: float, grids: SweepGrids,
                      eta: float = Config.ETA) -> StrongSubregAtCert:
    est = empirical_strong_at(F, x_bar, y_bar, alpha, grids)
    return StrongSubregAtCert(x_bar, y_bar, base_constant(est, eta), alpha, eta,
                              ({'rule': 'estimate', 'kind': est.kind, 'value': est.value},))


def certify_strong_around(F: SetValuedMap, x_bar, y_bar, a: float, b: float, grids: SweepGrids,
                          eta: float = Config.ETA, r0: Optional[float] = None) -> StrongSubregAroundCert:
    r0 = a / Config.RADIUS_LADDER[0] if r0 is None else r0
    est = empirical_strong_around(F, x_bar, y_bar, a, b, r0, grids)
    return StrongSubregAroundCert(x_bar, y_bar, base_constant(est, eta), a, b, r0, eta,
                                  ({'rule': 'estimate', 'kind': est.kind, 'value': est.value},))


def lipschitz_region(x_bar, radius: float, grids: SweepGrids) -> Grid:
    return grids.domain_grid(x_bar, radius)


def certify_calmness(g: Function, x_bar, radius: float, grids: SweepGrids, eta: float = Config.ETA,
                     mode: str = 'calm') -> CalmnessCert:
    """Calmness (or Lipschitz, with mode='lipschitz') certificate with μ = estimate·(1 + η)."""
    x_bar = g.domain_space.point(x_bar)
    if mode == 'lipschitz':
        est = empirical_lipschitz(g, lipschitz_region(x_bar, radius, grids), grids.workers)
    else:
        est = empirical_calmness(g, x_bar, radius, grids)
    center_value = g.value(x_bar)
    return CalmnessCert(x_bar, est.value * (1 + eta), radius, float(g.range_space.norms(center_value)),
                        center_value, mode, eta, ({'rule': 'estimate', 'kind': est.kind, 'value': est.value},))


def certify_isolated_selection(G: SetValuedMap, x_bar, beta: float, grids: SweepGrids,
                               eta: float = Config.ETA,
                               range_radius: float = Config.ISOLATED_RANGE_RADIUS) -> IsolatedSelectionCert:
    """Isolated calmness certificate; G(x̄) must be a single point."""
    z_bar = pinned_value(G, x_bar)
    if z_bar is None:
        raise HypothesisError(f"G({np.asarray(x_bar).tolist()}) is not a single point")
    est = empirical_isolated_calmness(G, x_bar, z_bar, beta, range_radius, grids)
    return IsolatedSelectionCert(x_bar, z_bar, est.value * (1 + eta), beta, range_radius, eta,
                                 ({'rule': 'estimate', 'kind': est.kind, 'value': est.value},))


def pinned_value(G: SetValuedMap, x_bar) -> Optional[np.ndarray]:
    image = G.evaluate(x_bar)
    if image.kind == ImageKind.POINTS and len(image.points) == 1:
        return image.points[0]
    if image.kind == ImageKind.INTERVALS and len(image.intervals) == 1 and image.intervals[0][0] == image.intervals[0][1]:
        return np.array([image.intervals[0][0]])
    if image.kind == ImageKind.BOX and np.all(image.lower == image.upper):
        return image.lower.copy()
    return None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """Outcome of checking a certificate against the matching estimator."""

    holds: bool
    worst_ratio: float
    bound: float
    witness: Optional[dict]
    estimate: Optional[ModulusEstimate] = None
    problems: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            'holds': self.holds,
            'worst_ratio': self.worst_ratio,
            'bound': self.bound,
            'witness': self.witness,
            'estimate': self.estimate.to_record() if self.estimate else None,
            'problems': list(self.problems),
        }


def validate(cert: Certificate, target, grids: SweepGrids, safety: float = Config.SAFETY_FACTOR,
             mode: Optional[str] = None) -> ValidationReport:
    """
    Check a certificate against the brute-force estimator of its kind.

    Args:
        cert: Certificate to check
        target: SetValuedMap for subregularity and selection certificates,
            Function for calmness certificates
        grids: Sweep resolution
        safety: Discretization safety factor applied to the certified constant
        mode: For CalmnessCert, 'calm' or 'lipschitz' (defaults to cert.mode)

    Returns:
        ValidationReport; holds iff estimate <= constant * safety
    """
    problems = []
    if isinstance(cert, StrongSubregAtCert):
        est = empirical_strong_at(target, cert.x_bar, cert.y_bar, cert.alpha, grids)
        constant = cert.kappa
    elif isinstance(cert, SubregAtCert):
        est = empirical_subreg_at(target, cert.x_bar, cert.y_bar, cert.alpha, grids)
        constant = cert.kappa
    elif isinstance(cert, StrongSubregAroundCert):
        est = empirical_strong_around(target, cert.x_bar, cert.y_bar, cert.a, cert.b, cert.r0, grids)
        constant = cert.kappa
    elif isinstance(cert, CalmnessCert):
        mode = mode or cert.mode
        if mode == 'lipschitz':
            est = empirical_lipschitz(target, lipschitz_region(cert.x_bar, cert.radius, grids), grids.workers)
        else:
            est = empirical_calmness(target, cert.x_bar, cert.radius, grids)
        constant = cert.mu
        value_norm = float(target.range_space.norms(target.value(cert.x_bar)))
        if value_norm > cert.value_bound:
            problems.append(f"||g(x_bar)|| = {value_norm:g} exceeds value_bound {cert.value_bound:g}")
    elif isinstance(cert, IsolatedSelectionCert):
        pinned = pinned_value(target, cert.x_bar)
        if pinned is None or float(target.range_space.norms(pinned - np.array(cert.z_bar))) > grids.graph_tol:
            problems.append(f"G(x_bar) is not the single point {list(cert.z_bar)}")
        est = empirical_isolated_calmness(target, cert.x_bar, cert.z_bar, cert.beta, cert.range_radius, grids)
        constant = cert.mu
    else:
        raise RegcertError(f"Cannot validate object of type {type(cert).__name__}")

    bound = constant * safety
    holds = est.value <= bound and not problems
    if holds:
        logger.info(f"{cert.kind.value} certificate holds: {est.value:.6g} <= {bound:.6g}")
    else:
        logger.warning(f"{cert.kind.value} certificate violated: {est.value:.6g} > {bound:.6g} "
                       f"at {est.witness} {'; '.join(problems)}")
    return ValidationReport(holds, est.value, bound, est.witness, est, problems)
