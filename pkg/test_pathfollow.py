"""Tests for paths, the local solver and certified trajectories."""

import math
import sys
from pathlib import Path as FilePath

import numpy as np
import pytest
from numpy.testing import assert_allclose

sys.path.insert(0, str(FilePath(__file__).parent))

from src.errors import (
    DomainError,
    InfeasibleStartError,
    RegcertError,
    SolverStall,
    SpecError,
    TrustRegionExhausted,
    WarmStartBoundError,
)
from src.maps import CatalogFamily, CatalogFunction, Lift, NormalConeBox, StaticFamily
from src.moduli import SweepGrids
from src.pathfollow import (
    ParametricGE,
    Path,
    certify_trajectory,
    follow,
    locate_centers,
    parse_path,
    residual,
    serialize_path,
    solve_step,
    validate_trajectory,
    warm_start_violations,
)

TOL = 1e-8


@pytest.fixture
def clipped():
    """p(t) = t in x + N_[-1,1](x): the solution is min(t, 1) on [0, 2]."""
    return ParametricGE(StaticFamily(CatalogFunction('identity')), NormalConeBox([-1.0], [1.0]),
                        Path('linear'), 2.0, 21)


@pytest.fixture
def interior():
    """p(t) = t/2 on [0, 1], solved by x = t/2 inside the box."""
    return ParametricGE(StaticFamily(CatalogFunction('identity')), NormalConeBox([-1.0], [1.0]),
                        Path('linear', slope=0.5), 1.0, 11)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

def test_path_rules():
    assert Path('constant', value=2.0)(1.5)[0] == 2.0
    assert Path('linear', slope=2.0, intercept=1.0)(0.5)[0] == 2.0
    assert Path('polynomial', coefficients=[1.0, 0.0, 3.0])(2.0)[0] == 13.0
    assert Path('sine', amplitude=2.0)(math.pi / 2)[0] == pytest.approx(2.0)
    assert Path('linear', dim=3).values([1.0, 2.0]).shape == (2, 3)


def test_path_lipschitz_bounds():
    assert Path('constant').lipschitz_bound(1.0) == 0.0
    assert Path('linear', slope=-3.0).lipschitz_bound(1.0) == 3.0
    assert Path('sine', amplitude=2.0, frequency=3.0).lipschitz_bound(1.0) == 6.0
    assert Path('polynomial', coefficients=[0.0, 1.0, 1.0]).lipschitz_bound(2.0) == 5.0


def test_path_specs():
    p = parse_path('{"rule": "sine", "frequency": 2.0}')
    assert serialize_path(parse_path(serialize_path(p))) == serialize_path(p)
    with pytest.raises(SpecError):
        parse_path({'rule': 'spiral'})
    with pytest.raises(SpecError):
        Path('linear', speed=1.0)
    with pytest.raises(SpecError):
        Path('polynomial', coefficients=[])


def test_problem_shape_is_checked():
    f = StaticFamily(CatalogFunction('identity'))
    cone = NormalConeBox([-1.0], [1.0])
    with pytest.raises(DomainError):
        ParametricGE(f, cone, Path('linear', dim=2), 1.0, 11)
    with pytest.raises(RegcertError):
        ParametricGE(f, cone, Path('linear'), 1.0, 1)
    with pytest.raises(RegcertError):
        ParametricGE(f, cone, Path('linear'), -1.0, 11)
    single = ParametricGE(f, cone, Path('linear'), 0.0, 1)
    assert single.dt == 0.0


def test_residual_outside_the_parameter_range(clipped):
    assert residual(clipped, 1.5, [1.0]) == 0.0
    with pytest.raises(DomainError):
        residual(clipped, 3.0, [1.0])


# ---------------------------------------------------------------------------
# Local solver
# ---------------------------------------------------------------------------

def test_solver_reaches_tolerance(clipped):
    x = solve_step(clipped, 0.1, [0.0], 0.5, TOL)
    assert abs(x[0] - 0.1) <= TOL


def test_solver_lands_on_the_box_face(clipped):
    x = solve_step(clipped, 1.5, [0.9], 0.5, TOL)
    assert x[0] == 1.0


def test_solver_stalls_when_depth_runs_out(clipped):
    with pytest.raises(SolverStall) as info:
        solve_step(clipped, 0.1, [0.0], 0.5, TOL, max_depth=1)
    assert 0 < info.value.best_residual < 0.05


def test_empty_trust_region(clipped):
    with pytest.raises(TrustRegionExhausted):
        solve_step(clipped, 0.1, [5.0], 0.5, TOL)


def test_certified_step_bound(clipped):
    with pytest.raises(WarmStartBoundError):
        solve_step(clipped, 0.1, [0.0], 0.5, TOL, kappa=1e-6)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_follow_tracks_the_clipped_path(clipped):
    traj = follow(clipped, [0.0], 0.5, TOL)
    assert traj.complete
    assert len(traj.ts) == 21
    assert_allclose(traj.points()[:, 0], np.minimum(traj.ts, 1.0), atol=TOL)
    assert max(traj.residuals) <= TOL
    assert traj.csv_header() == ['t', 'x', 'residual', 'step_norm']
    assert len(traj.csv_rows()) == 21


def test_infeasible_start(clipped):
    with pytest.raises(InfeasibleStartError):
        follow(clipped, [0.5], 0.5, TOL)


def test_follow_needs_a_trust_radius_or_certificate(clipped):
    with pytest.raises(RegcertError):
        follow(clipped, [0.0], None, TOL)


def test_small_trust_region_stalls(clipped):
    traj = follow(clipped, [0.0], 1e-3, TOL)
    assert traj.status == 'stalled'
    assert traj.stall_index == 1
    assert len(traj.ts) == 1
    assert traj.to_record()['status'] == 'stalled'


def test_trajectory_certificate_holds(interior):
    grids = SweepGrids(1e-2)
    traj = follow(interior, [0.0], 0.5, TOL)
    cert = certify_trajectory(interior, traj, grids, 0.25, 0.25)
    assert cert.kappa == pytest.approx(3.15, rel=1e-6)
    assert cert.a == 0.125
    assert validate_trajectory(interior, traj, cert, grids).holds

    at_cert = certify_trajectory(interior, traj, grids, 0.25, mode='at')
    assert at_cert.mode == 'at'
    assert warm_start_violations(interior, traj, at_cert.kappa, TOL) == []
    violations = warm_start_violations(interior, traj, 0.5, TOL)
    assert [v['index'] for v in violations] == list(range(1, 11))


def test_clamped_sine_path_is_tracked_and_certified():
    """p(t) = 1.5 sin t in x + N_[0,1](x): the solution is p clamped to [0, 1]."""
    ge = ParametricGE(StaticFamily(CatalogFunction('identity')), NormalConeBox([0.0], [1.0]),
                      Path('sine', amplitude=1.5), 2 * math.pi, 41)
    traj = follow(ge, [0.0], 0.5, TOL)
    assert traj.complete
    assert len(traj.ts) == 41
    ts = np.asarray(traj.ts)
    assert_allclose(traj.points()[:, 0], np.clip(1.5 * np.sin(ts), 0.0, 1.0), atol=1e-6)

    grids = SweepGrids(1e-2)
    cert = certify_trajectory(ge, traj, grids, 0.25, 0.25)
    assert validate_trajectory(ge, traj, cert, grids).holds

    at_cert = certify_trajectory(ge, traj, grids, 0.25, mode='at')
    assert warm_start_violations(ge, traj, at_cert.kappa, TOL) == []


def test_stalled_trajectory_cannot_be_certified(clipped):
    traj = follow(clipped, [0.0], 1e-3, TOL)
    with pytest.raises(RegcertError):
        certify_trajectory(clipped, traj, SweepGrids(1e-2), 0.25, 0.25)


def test_locate_centers():
    f = CatalogFamily('additive')
    F = Lift(CatalogFunction('constant'))
    centers = locate_centers(f, F, [0.0, 0.1, 0.2], [0.0], 0.5, TOL)
    assert_allclose(centers[:, 0], [0.0, -0.1, -0.2], atol=TOL)
