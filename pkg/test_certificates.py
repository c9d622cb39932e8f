"""Tests for certificates, the perturbation rules and validation."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from src.certificates import (
    CalmnessCert,
    IsolatedSelectionCert,
    StrongSubregAroundCert,
    StrongSubregAtCert,
    SubregAtCert,
    certificate_from_record,
    certify_calmness,
    certify_isolated_selection,
    certify_strong_around,
    certify_strong_at,
    certify_subreg_at,
    perturbed_constant,
    propagate_around_perturbation,
    propagate_calm_perturbation,
    propagate_setvalued_perturbation,
    validate,
)
from src.errors import HypothesisError, RegcertError
from src.maps import CatalogFunction, Lift, MinkowskiSum, NormalConeBox, sum_map
from src.moduli import SweepGrids, empirical_strong_at


@pytest.fixture
def grids():
    return SweepGrids(1e-2)


@pytest.fixture
def identity():
    return Lift(CatalogFunction('identity'))


@pytest.fixture
def wave():
    return CatalogFunction('sine', amplitude=0.1)


def test_perturbed_constant():
    assert perturbed_constant(2.0, 0.25, 0.05) == pytest.approx(4.2)
    with pytest.raises(HypothesisError):
        perturbed_constant(2.0, 0.5, 0.05)
    with pytest.raises(HypothesisError):
        perturbed_constant(2.0, 0.1, 0.0)


def test_certificates_reject_bad_constants():
    with pytest.raises(RegcertError):
        StrongSubregAtCert((0.0,), (0.0,), 0.0, 1.0)
    with pytest.raises(RegcertError):
        StrongSubregAroundCert((0.0,), (0.0,), 1.0, 0.5, 0.5, 0.0)
    with pytest.raises(RegcertError):
        CalmnessCert((0.0,), 0.1, 1.0, 0.0, (0.0,), mode='holder')


def test_estimated_constants_are_floored_and_slackened(identity, grids):
    cert = certify_strong_at(identity, [0.0], [0.0], 0.5, grids, eta=0.05)
    assert cert.kappa == pytest.approx(1.05)
    assert cert.provenance[0]['rule'] == 'estimate'
    subreg = certify_subreg_at(identity, [0.0], [0.0], 0.5, grids)
    assert isinstance(subreg, SubregAtCert)
    assert validate(subreg, identity, grids).holds


def test_unbounded_estimate_cannot_be_certified(grids):
    ramp = Lift(CatalogFunction('ramp'))
    with pytest.raises(HypothesisError):
        certify_strong_around(ramp, [0.0], [0.0], 0.5, 0.5, grids)


# ---------------------------------------------------------------------------
# Calm perturbation
# ---------------------------------------------------------------------------

def test_calm_perturbation_certificate_holds(identity, wave, grids):
    base = certify_strong_at(identity, [0.0], [0.0], 0.5, grids)
    calm = certify_calmness(wave, [0.0], 0.25, grids)
    assert calm.mu == pytest.approx(0.1 * 1.05, rel=1e-3)
    out = propagate_calm_perturbation(base, calm)
    assert out.kappa == pytest.approx(base.kappa / (1 - base.kappa * calm.mu) * 1.05)
    assert out.alpha == 0.25
    assert out.y_bar == (0.0,)
    assert [p['rule'] for p in out.provenance] == ['estimate', 'calm_perturbation']
    assert validate(out, sum_map(wave, identity), grids).holds


def test_calm_perturbation_needs_a_common_center(identity, wave, grids):
    base = certify_strong_at(identity, [0.0], [0.0], 0.5, grids)
    calm = certify_calmness(wave, [0.1], 0.25, grids)
    with pytest.raises(HypothesisError):
        propagate_calm_perturbation(base, calm)


def test_calm_perturbation_needs_small_product():
    base = StrongSubregAtCert((0.0,), (0.0,), 4.0, 1.0)
    calm = CalmnessCert((0.0,), 0.5, 1.0, 0.0, (0.0,))
    with pytest.raises(HypothesisError):
        propagate_calm_perturbation(base, calm)


# ---------------------------------------------------------------------------
# Set-valued perturbation
# ---------------------------------------------------------------------------

def test_setvalued_perturbation_certificate_holds(identity, grids):
    G = Lift(CatalogFunction('scaling', factor=0.2))
    base = certify_strong_at(identity, [0.0], [0.0], 0.5, grids)
    sel = certify_isolated_selection(G, [0.0], 0.25, grids)
    assert sel.z_bar == (0.0,)
    assert sel.mu == pytest.approx(0.2 * 1.05)
    out = propagate_setvalued_perturbation(base, sel)
    assert out.alpha == 0.25
    assert validate(out, MinkowskiSum(G, identity), grids).holds
    assert validate(sel, G, grids).holds


def test_selection_radius_must_fit_inside_alpha(identity, grids):
    base = certify_strong_at(identity, [0.0], [0.0], 0.25, grids)
    sel = IsolatedSelectionCert((0.0,), (0.0,), 0.1, 0.5)
    with pytest.raises(HypothesisError):
        propagate_setvalued_perturbation(base, sel)


def test_isolated_selection_needs_a_single_value(grids):
    cone = NormalConeBox([0.0], [1.0])
    sel = certify_isolated_selection(cone, [0.5], 0.25, grids)
    assert sel.z_bar == (0.0,)
    with pytest.raises(HypothesisError):
        certify_isolated_selection(cone, [1.0], 0.25, grids)


# ---------------------------------------------------------------------------
# Around perturbation
# ---------------------------------------------------------------------------

def test_around_perturbation_certificate_holds(identity, wave, grids):
    base = certify_strong_around(identity, [0.0], [0.0], 0.5, 0.5, grids)
    assert base.r0 == 0.125
    lip = certify_calmness(wave, [0.0], 0.1, grids, mode='lipschitz')
    out = propagate_around_perturbation(base, lip)
    assert out.a == 0.1
    assert 2 * out.b + lip.mu * out.a <= base.b
    assert out.r0 == 0.1
    assert validate(out, sum_map(wave, identity), grids).holds


def test_around_rule_needs_a_lipschitz_bound(identity, wave, grids):
    base = certify_strong_around(identity, [0.0], [0.0], 0.5, 0.5, grids)
    calm = certify_calmness(wave, [0.0], 0.1, grids)
    with pytest.raises(HypothesisError):
        propagate_around_perturbation(base, calm)


def test_around_rule_rejects_infeasible_windows():
    base = StrongSubregAroundCert((0.0,), (0.0,), 1.0, 0.5, 0.05, 0.1)
    steep = CalmnessCert((0.0,), 0.9, 0.1, 0.0, (0.0,), mode='lipschitz')
    with pytest.raises(HypothesisError):
        propagate_around_perturbation(base, steep)
    offset = CalmnessCert((0.0,), 0.1, 0.1, 1.0, (1.0,), mode='lipschitz')
    with pytest.raises(HypothesisError):
        propagate_around_perturbation(StrongSubregAroundCert((0.0,), (0.0,), 1.0, 0.5, 0.5, 0.1), offset)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def test_understated_constant_is_caught():
    F = Lift(CatalogFunction('perturbed_ramp'))
    grids = SweepGrids(1e-8)
    est = empirical_strong_at(F, [0.0], [0.0], 1e-5, grids)
    cert = StrongSubregAtCert((0.0,), (0.0,), est.value / 2, 1e-5)
    report = validate(cert, F, grids)
    assert not report.holds
    assert report.worst_ratio == est.value
    assert report.witness is not None


def test_calmness_value_bound_is_checked(grids):
    g = CatalogFunction('constant', value=1.0)
    cert = CalmnessCert((0.0,), 0.1, 0.5, 0.5, (1.0,))
    report = validate(cert, g, grids)
    assert not report.holds
    assert report.problems


def test_validate_rejects_unknown_objects(identity, grids):
    with pytest.raises(RegcertError):
        validate(object(), identity, grids)


def test_certificate_records_rebuild(identity, wave, grids):
    out = propagate_calm_perturbation(certify_strong_at(identity, [0.0], [0.0], 0.5, grids),
                                      certify_calmness(wave, [0.0], 0.25, grids))
    assert certificate_from_record(out.to_record()) == out
    with pytest.raises(RegcertError):
        certificate_from_record({'kind': 'strong-at', 'colour': 'red'})
    with pytest.raises(RegcertError):
        certificate_from_record({'kind': 'weak'})


@pytest.mark.parametrize("kappa, radius, step", [(100.0, 0.1, 1e-5), (1e6, 1e-5, 1e-8)])
def test_no_finite_constant_validates_at_the_kink(kappa, radius, step):
    F = Lift(CatalogFunction('perturbed_ramp'))
    report = validate(StrongSubregAtCert((0.0,), (0.0,), kappa, radius), F, SweepGrids(step))
    assert not report.holds
    assert report.witness['x'][0] < 0


def test_calm_perturbation_of_a_normal_cone(wave, grids):
    cone = NormalConeBox([0.0], [1.0])
    base = certify_strong_at(cone, [0.0], [-1.0], 0.5, grids)
    assert base.kappa == pytest.approx(1.05)
    out = propagate_calm_perturbation(base, certify_calmness(wave, [0.0], 0.5, grids))
    assert out.y_bar == (-1.0,)
    assert validate(out, sum_map(wave, cone), grids).holds
