"""
Uniform regularity of a parametric family over a sampled compact set.

For G_t(x) = f(t, x) + F(x) and sample points (t_i, x̄_i) of Ω with 0 ∈ G_ti(x̄_i),
each point gets a local record from its base certificate (κ, a, b):

    μ = 1/(2κ),  κ' = 3κ,  β = b/4,
    α: largest value on a halving ladder from min(a/2, κb·(1 − 2⁻²⁰)) whose
       equi-continuity modulus on B[t, α] × B[x̄, 2α] is at most μ,
    r': largest value on a halving ladder from α/2 with
       ‖f(s, x̄) − f(t, x̄)‖ ≤ β for sampled s in B[t, r'].

A greedy pass in sample order then keeps records until every sample point is
inside some kept record's open cover ball, and aggregates κ = max κ',
a = min α, b = min β over the kept records.
In at mode each kept record is also passed through the set-valued rule, with
the parameter increment as the perturbation, and its constant must stay
within κ'.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .certificates import (
    IsolatedSelectionCert,
    StrongSubregAroundCert,
    StrongSubregAtCert,
    certify_strong_around,
    certify_strong_at,
    propagate_setvalued_perturbation,
)
from .config import Config
from .errors import HypothesisError, RegcertError, SearchError
from .maps import ParametricFunction, SetValuedMap, SumMap
from .moduli import SweepGrids, empirical_strong_around, empirical_strong_at, equi_continuity_modulus
from .reporting import format_real
from .spaces import Ball, Space
from .sweep import parallel_map

logger = logging.getLogger(__name__)

STRICT_CAP = 1 - 2.0 ** -20


@dataclass(frozen=True)
class CompactSample:
    """Finite sample of a compact set in P × X."""

    points: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...]
    cover_radius_floor: float = Config.COVER_RADIUS_FLOOR

    def __post_init__(self):
        pts = tuple((tuple(float(v) for v in np.atleast_1d(t)), tuple(float(v) for v in np.atleast_1d(x)))
                    for t, x in self.points)
        if not pts:
            raise RegcertError("A compact sample needs at least one point")
        tdim, xdim = len(pts[0][0]), len(pts[0][1])
        for t, x in pts:
            if len(t) != tdim or len(x) != xdim:
                raise RegcertError(f"Sample point ({list(t)}, {list(x)}) does not match dimensions ({tdim}, {xdim})")
        if not self.cover_radius_floor > 0:
            raise RegcertError(f"cover_radius_floor must be positive (got {self.cover_radius_floor})")
        object.__setattr__(self, 'points', pts)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_arrays(cls, ts, xs, cover_radius_floor: float = Config.COVER_RADIUS_FLOOR) -> 'CompactSample':
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        ts = ts.reshape(len(ts), -1)
        xs = xs.reshape(len(xs), -1)
        return cls(tuple(zip(map(tuple, ts), map(tuple, xs))), cover_radius_floor)


@dataclass(frozen=True)
class LocalUniformRecord:
    """Per-point constants of the uniformization argument."""

    index: int
    t: Tuple[float, ...]
    x_bar: Tuple[float, ...]
    mode: str
    kappa_base: float
    a_base: float
    b_base: float
    mu: float
    kappa: float
    alpha: float
    beta: float
    r_prime: float
    equi_continuity: float

    def to_record(self) -> dict:
        return {
            'index': self.index, 't': list(self.t), 'x_bar': list(self.x_bar), 'mode': self.mode,
            'kappa_base': self.kappa_base, 'a_base': self.a_base, 'b_base': self.b_base,
            'mu': self.mu, 'kappa': self.kappa, 'alpha': self.alpha, 'beta': self.beta,
            'r_prime': self.r_prime, 'equi_continuity': self.equi_continuity,
        }


@dataclass
class UniformCert:
    """
    One constant and window valid at every sample point.

    In 'around' mode (kappa, a, b) are the window constants; in 'at' mode the
    radius is c = a and b is unused.
    """

    kappa: float
    a: float
    b: float
    subcover: List[int]
    records: List[LocalUniformRecord]
    mode: str = 'around'
    r0: Optional[float] = None

    def __post_init__(self):
        if self.r0 is None:
            self.r0 = self.a / Config.RADIUS_LADDER[0]

    @property
    def c(self) -> float:
        return self.a

    @property
    def inner_a(self) -> float:
        return self.a / 3

    @property
    def inner_b(self) -> float:
        return self.b / 3

    def to_record(self) -> dict:
        return {
            'mode': self.mode,
            'kappa': self.kappa,
            'a': self.a,
            'b': self.b,
            'c': self.c,
            'r0': self.r0,
            'inner_a': self.inner_a,
            'inner_b': self.inner_b,
            'subcover': list(self.subcover),
            'records': [r.to_record() for r in self.records],
        }


@dataclass
class UniformValidationReport:
    """Violations of a uniform certificate over the sample, merged by sample index."""

    bound: float
    estimates: List[float] = field(default_factory=list)
    violations: List[dict] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_record(self) -> dict:
        return {'holds': self.holds, 'bound': self.bound, 'estimates': list(self.estimates),
                'violations': list(self.violations)}


# ---------------------------------------------------------------------------
# Local records
# ---------------------------------------------------------------------------

def _halving_ladder(start: float, floor: float, accept, halvings: int, what: str) -> float:
    """First value start/2^k (k = 0..halvings, not below floor) accepted by the predicate."""
    value = start
    for _ in range(halvings + 1):
        if value < floor:
            break
        if accept(value):
            return value
        value = value / 2
    raise SearchError(f"{what}: no admissible radius in {halvings} halvings from {start:g} (floor {floor:g})")


def _parameter_drift(f: ParametricFunction, t: np.ndarray, x_bar: np.ndarray, radius: float,
                     grids: SweepGrids) -> float:
    """max ‖f(s, x̄) − f(t, x̄)‖ over sampled s in B[t, radius]."""
    ss = Ball(f.parameter_space, tuple(t), radius).filter(grids.pair_grid(t, radius).points())
    diffs = f.values(ss, x_bar) - f.value(t, x_bar)
    return float(np.max(f.range_space.norms(diffs)))


def local_uniform_record(f: ParametricFunction, t, x_bar, base_cert, grids: SweepGrids,
                         index: int = 0, floor: float = Config.COVER_RADIUS_FLOOR,
                         halvings: int = Config.BISECTION_HALVINGS) -> LocalUniformRecord:
    """
    Uniformization constants at one sample point.

    Args:
        f: Parametric single-valued part of the family
        t, x_bar: Sample point with 0 ∈ f(t, x̄) + F(x̄)
        base_cert: StrongSubregAroundCert ('around' mode) or
            StrongSubregAtCert ('at' mode) of G_t at (x̄, 0)
        grids: Sweep resolution for the equi-continuity and drift searches
        index: Sample index recorded on the result
        floor: Smallest radius the ladders may try

    Raises:
        SearchError: if a ladder reaches the floor without an admissible radius
    """
    t = f.parameter_space.point(t)
    x_bar = f.domain_space.point(x_bar)
    kappa = base_cert.kappa
    mu = 1 / (2 * kappa)
    kappa_new = 3 * kappa

    if isinstance(base_cert, StrongSubregAroundCert):
        mode = 'around'
        a, b = base_cert.a, base_cert.b
        beta = b / 4
        cap = min(a / 2, kappa * b * STRICT_CAP)
    elif isinstance(base_cert, StrongSubregAtCert):
        mode = 'at'
        a, b = base_cert.alpha, math.nan
        beta = math.nan
        cap = a / 2
    else:
        raise RegcertError(f"Unsupported base certificate {type(base_cert).__name__}")

    equi = {}

    def equi_ok(alpha):
        est = equi_continuity_modulus(f, t, x_bar, alpha, grids, x_radius=2 * alpha)
        equi[alpha] = est.value
        return est.value <= mu

    alpha = _halving_ladder(cap, floor, equi_ok, halvings, f"equi-continuity at sample {index}")
    drift_bound = beta if mode == 'around' else mu * alpha / 2
    r_prime = _halving_ladder(alpha / 2, floor,
                              lambda r: _parameter_drift(f, t, x_bar, r, grids) <= drift_bound,
                              halvings, f"parameter continuity at sample {index}")

    record = LocalUniformRecord(index, tuple(t.tolist()), tuple(x_bar.tolist()), mode, kappa, a, b,
                                mu, kappa_new, alpha, beta, r_prime, equi[alpha])
    logger.debug(f"Record {index}: kappa'={kappa_new:g} alpha={alpha:g} beta={beta:g} r'={r_prime:g}")
    return record


def certify_samples(f: ParametricFunction, F: SetValuedMap, samples: CompactSample, grids: SweepGrids,
                    a: float, b: Optional[float] = None, eta: float = Config.ETA,
                    mode: str = 'around') -> list:
    """
    Brute-force base certificates of G_t = f(t, ·) + F at (x̄, 0) for every sample point.

    'around' mode needs the window (a, b); 'at' mode uses a as the radius.
    """
    zero = np.zeros(F.range_space.dim)
    inner = replace(grids, workers=1)

    def run(i):
        t, x = samples.points[i]
        G = SumMap(f.at(t), F)
        if mode == 'around':
            return certify_strong_around(G, x, zero, a, b, inner, eta)
        return certify_strong_at(G, x, zero, a, inner, eta)

    certs = parallel_map(run, list(range(len(samples))), grids.workers)
    logger.info(f"Base certificates for {len(certs)} sample points ({mode}), "
                f"max kappa {max(c.kappa for c in certs):g}")
    return certs


# ---------------------------------------------------------------------------
# Subcover and aggregation
# ---------------------------------------------------------------------------

def _covers(record: LocalUniformRecord, t: Sequence[float], x: Sequence[float], tspace, xspace) -> bool:
    """Open-ball membership in B_P(t_i, r') × B_X(x_i, r')."""
    dt = tspace.distance(t, record.t)
    dx = xspace.distance(x, record.x_bar)
    return dt < record.r_prime and dx < record.r_prime


def greedy_subcover(samples: CompactSample, records: Sequence[LocalUniformRecord], tspace=None,
                    xspace=None) -> UniformCert:
    """
    Keep records in sample order, skipping points already covered; aggregate
    κ = max κ', a = min α, b = min β over the kept records.
    """
    if len(records) != len(samples):
        raise RegcertError(f"{len(samples)} sample points but {len(records)} records")
    tspace = tspace or Space(len(samples.points[0][0]))
    xspace = xspace or Space(len(samples.points[0][1]))

    selected: List[int] = []
    for i, (t, x) in enumerate(samples.points):
        if any(_covers(records[j], t, x, tspace, xspace) for j in selected):
            continue
        selected.append(i)

    chosen = [records[j] for j in selected]
    mode = chosen[0].mode
    kappa = max(r.kappa for r in chosen)
    a = min(r.alpha for r in chosen)
    b = min(r.beta for r in chosen) if mode == 'around' else math.nan
    logger.info(f"Subcover: {len(selected)} of {len(samples)} records; kappa={kappa:g} a={a:g} b={b:g}")
    return UniformCert(kappa, a, b, selected, list(records), mode)


def _records(f, samples, base_certs, grids, halvings):
    if len(base_certs) != len(samples):
        raise RegcertError(f"{len(samples)} sample points but {len(base_certs)} base certificates")
    inner = replace(grids, workers=1)

    def run(i):
        t, x = samples.points[i]
        return local_uniform_record(f, t, x, base_certs[i], inner, i, samples.cover_radius_floor, halvings)

    records = parallel_map(run, list(range(len(samples))), grids.workers)
    logger.info(f"Built {len(records)} local records")
    return records


def _require_kind(base_certs, kind, what: str):
    wrong = [i for i, c in enumerate(base_certs) if not isinstance(c, kind)]
    if wrong:
        raise RegcertError(f"{what} needs {kind.__name__} base certificates (not at samples {wrong[:5]})")


def uniformize(f: ParametricFunction, samples: CompactSample, base_certs: Sequence[StrongSubregAroundCert],
               grids: SweepGrids, halvings: int = Config.BISECTION_HALVINGS) -> UniformCert:
    """Uniform window constants (κ, a, b) from per-point around-certificates."""
    _require_kind(base_certs, StrongSubregAroundCert, "uniformize")
    records = _records(f, samples, base_certs, grids, halvings)
    return greedy_subcover(samples, records, f.parameter_space, f.domain_space)


def increment_selection(record: LocalUniformRecord, base_cert: StrongSubregAtCert) -> IsolatedSelectionCert:
    """
    The parameter increment u -> f(s, u) - f(t, u) of one record as an isolated
    selection: calm with modulus μ on B[x̄, α], pinned at the origin.
    """
    return IsolatedSelectionCert(base_cert.x_bar, tuple(0.0 for _ in base_cert.y_bar), record.mu, record.alpha,
                                 provenance=({'rule': 'equi_continuity', 'value': record.equi_continuity},))


def uniformize_at(f: ParametricFunction, samples: CompactSample, base_certs: Sequence[StrongSubregAtCert],
                  grids: SweepGrids, halvings: int = Config.BISECTION_HALVINGS,
                  eta: Optional[float] = None) -> UniformCert:
    """
    Uniform (κ, c) from per-point at-certificates.

    Each kept record passes its base certificate and parameter increment
    through the set-valued rule; the resulting constant κ/(1 − κμ)·(1 + η)
    = 2κ(1 + η) must not exceed the record's κ' = 3κ.

    Raises:
        HypothesisError: if the set-valued rule rejects a record or its constant exceeds κ'
    """
    _require_kind(base_certs, StrongSubregAtCert, "uniformize_at")
    records = _records(f, samples, base_certs, grids, halvings)
    cert = greedy_subcover(samples, records, f.parameter_space, f.domain_space)
    for j in cert.subcover:
        base = base_certs[j]
        slack = eta if eta is not None else (base.eta or Config.ETA)
        out = propagate_setvalued_perturbation(base, increment_selection(records[j], base), slack)
        if out.kappa > records[j].kappa:
            raise HypothesisError(f"Sample {j}: set-valued rule constant {out.kappa:g} exceeds "
                                  f"kappa' = {records[j].kappa:g} (slack {slack:g})")
    return cert


def validate_uniform(cert: UniformCert, f: ParametricFunction, F: SetValuedMap, samples: CompactSample,
                     grids: SweepGrids, safety: float = Config.SAFETY_FACTOR) -> UniformValidationReport:
    """Check the uniform constants at every sample point with the brute-force estimators."""
    zero = np.zeros(F.range_space.dim)
    inner = replace(grids, workers=1)
    bound = cert.kappa * safety

    def run(i):
        t, x = samples.points[i]
        G = SumMap(f.at(t), F)
        if cert.mode == 'around':
            return empirical_strong_around(G, x, zero, cert.a, cert.b, cert.r0, inner)
        return empirical_strong_at(G, x, zero, cert.c, inner)

    estimates = parallel_map(run, list(range(len(samples))), grids.workers)
    report = UniformValidationReport(bound, [e.value for e in estimates])
    for i, est in enumerate(estimates):
        if est.value > bound:
            report.violations.append({'index': i, 'value': est.value, 'witness': est.witness})
    if report.holds:
        logger.info(f"Uniform certificate holds at all {len(samples)} sample points")
    else:
        logger.warning(f"Uniform certificate violated at {len(report.violations)} sample points")
    return report


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

UNIFORM_CSV_HEADER = ('index', 'selected', 'kappa', 'alpha', 'beta', 'r_prime', 'mu', 'kappa_base')


def uniform_csv_rows(cert: UniformCert) -> List[list]:
    chosen = set(cert.subcover)
    return [[r.index, int(r.index in chosen), r.kappa, r.alpha, r.beta, r.r_prime, r.mu, r.kappa_base]
            for r in cert.records]


def uniform_report(cert: UniformCert, validation: Optional[UniformValidationReport] = None) -> dict:
    record = cert.to_record()
    record['validation'] = validation.to_record() if validation else None
    return record


def describe(cert: UniformCert) -> str:
    """One-line summary for the console."""
    if cert.mode == 'at':
        return f"kappa={format_real(cert.kappa)} c={format_real(cert.c)} subcover={len(cert.subcover)}"
    return (f"kappa={format_real(cert.kappa)} a={format_real(cert.a)} b={format_real(cert.b)} "
            f"subcover={len(cert.subcover)}")
