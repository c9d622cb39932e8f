"""Tests for set-valued maps, image sets and the map specification format."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, str(Path(__file__).parent))

from src.errors import DomainError, SpecError
from src.maps import (
    CatalogFamily,
    CatalogFunction,
    GraphSampleMap,
    ImageKind,
    ImageSet,
    Lift,
    MinkowskiSum,
    NormalConeBox,
    PackedParameterFamily,
    RangeRestriction,
    ScaledMap,
    check_continuity,
    dist_to_image,
    dist_to_restricted_image,
    evaluate,
    inverse_dist,
    oscillation_profile,
    parse_family,
    parse_function,
    parse_map,
    preimage_points,
    serialize_function,
    serialize_map,
    sum_map,
)
from src.spaces import Ball, Grid, Space


@pytest.fixture
def cone():
    return NormalConeBox([0.0], [1.0])


# ---------------------------------------------------------------------------
# Image sets
# ---------------------------------------------------------------------------

def test_intervals_are_normalized():
    image = ImageSet.from_intervals([(2.0, 3.0), (0.0, 1.0), (0.5, 1.5), (4.0, 3.5)])
    assert image.intervals == [(0.0, 1.5), (2.0, 3.0)]


def test_points_are_sorted_and_deduplicated():
    image = ImageSet.from_points([[1.0], [0.0], [1.0]], 1)
    assert_array_equal(image.points, [[0.0], [1.0]])


def test_empty_image_is_infinitely_far():
    assert ImageSet.empty(1).distance([0.0], Space(1)) == math.inf
    assert ImageSet.from_box([1.0, 0.0], [0.0, 1.0]).is_empty


def test_minkowski_sum_of_images():
    points = ImageSet.from_points([[1.0]], 1)
    ray = ImageSet.from_intervals([(0.0, math.inf)])
    assert points.minkowski(ray).intervals == [(1.0, math.inf)]
    pair = ImageSet.from_points([[0.0], [10.0]], 1)
    unit = ImageSet.from_intervals([(0.0, 1.0)])
    assert pair.minkowski(unit).intervals == [(0.0, 1.0), (10.0, 11.0)]
    assert pair.minkowski(ImageSet.empty(1)).is_empty


def test_intersect_ball_clips_intervals():
    ray = ImageSet.from_intervals([(0.0, math.inf)])
    clipped = ray.intersect_ball(Ball(Space(1), (0.0,), 2.0))
    assert clipped.intervals == [(0.0, 2.0)]


# ---------------------------------------------------------------------------
# Catalog functions and lifts
# ---------------------------------------------------------------------------

def test_perturbed_ramp_matches_closed_form():
    h = CatalogFunction('perturbed_ramp')
    xs = np.linspace(-1.0, 1.0, 2001)
    expected = np.where(xs <= 0, xs ** 2, xs - xs ** 2)
    assert_allclose(h.values(xs)[:, 0], expected, atol=1e-15, rtol=0)


def test_ramp_plus_signed_square_is_perturbed_ramp():
    F = sum_map(CatalogFunction('signed_square'), Lift(CatalogFunction('ramp')))
    h = Lift(CatalogFunction('perturbed_ramp'))
    xs = np.linspace(-1.0, 1.0, 401).reshape(-1, 1)
    for x in xs[::20]:
        assert_array_equal(evaluate(F, x).points, evaluate(h, x).points)


def test_lift_evaluation():
    h = Lift(CatalogFunction('perturbed_ramp'))
    image = evaluate(h, [-0.1])
    assert image.kind == ImageKind.POINTS
    assert image.points[0, 0] == pytest.approx(0.01, abs=1e-15)


@pytest.mark.parametrize("rule, x, expected", [
    ('identity', 0.7, 0.7),
    ('ramp', -0.5, 0.0),
    ('ramp', 0.5, 0.5),
    ('signed_square', -0.5, 0.25),
    ('signed_square', 0.5, -0.25),
    ('cubic', -2.0, -8.0),
])
def test_catalog_values(rule, x, expected):
    assert CatalogFunction(rule).value(x)[0] == expected


def test_kinked_rules_report_breakpoints():
    assert_array_equal(CatalogFunction('ramp').breakpoints()[0], [0.0])
    assert CatalogFunction('identity').breakpoints()[0].size == 0


def test_function_domain_is_enforced():
    g = CatalogFunction('identity', domain=[[0.0, 1.0]])
    with pytest.raises(DomainError):
        g.value(2.0)


def test_unknown_rule_and_parameter():
    with pytest.raises(SpecError):
        CatalogFunction('exponential')
    with pytest.raises(SpecError):
        CatalogFunction('identity', factor=2.0)


# ---------------------------------------------------------------------------
# Set-valued maps
# ---------------------------------------------------------------------------

def test_normal_cone_of_interval(cone):
    assert dist_to_image(cone, [0.5], [3.0]) == 3.0
    assert dist_to_image(cone, [1.0], [3.0]) == 0.0
    assert dist_to_image(cone, [1.0], [-2.0]) == 2.0
    assert dist_to_image(cone, [0.0], [-2.0]) == 0.0
    assert dist_to_image(cone, [1.5], [0.0]) == math.inf


def test_normal_cone_needs_interior():
    with pytest.raises(SpecError):
        NormalConeBox([1.0], [1.0])


def test_restricted_distance(cone):
    ball = Ball(Space(1), (0.0,), 2.0)
    assert dist_to_restricted_image(cone, [1.0], [3.0], ball) == 1.0
    far = Ball(Space(1), (-5.0,), 1.0)
    assert dist_to_restricted_image(cone, [1.0], [0.0], far) == math.inf


def test_sum_translation_identity(cone):
    rng = np.random.default_rng(7)
    g = CatalogFunction('sine', amplitude=0.5)
    G = sum_map(g, cone)
    for _ in range(100):
        x = rng.uniform(0.0, 1.0, size=1)
        if rng.random() < 0.2:
            x = np.array([1.0])
        y = rng.uniform(-3.0, 3.0, size=1)
        assert dist_to_image(G, x, y) == dist_to_image(cone, x, y - g.value(x))


def test_box_normal_cone_in_two_dimensions():
    cone2 = NormalConeBox([0.0, 0.0], [1.0, 1.0])
    image = evaluate(cone2, [1.0, 0.5])
    assert image.kind == ImageKind.BOX
    assert_array_equal(image.lower, [0.0, 0.0])
    assert_array_equal(image.upper, [math.inf, 0.0])
    assert dist_to_image(cone2, [1.0, 0.5], [5.0, 2.0]) == 2.0


def test_scaled_map_scales_distances(cone):
    scaled = ScaledMap(cone, 3.0)
    assert dist_to_image(scaled, [0.5], [1.5]) == 3.0 * dist_to_image(cone, [0.5], [0.5])


def test_range_restriction(cone):
    restricted = RangeRestriction(cone, [0.0], 1.0)
    assert evaluate(restricted, [1.0]).intervals == [(0.0, 1.0)]
    assert dist_to_image(restricted, [1.0], [4.0]) == 3.0


def test_minkowski_sum_of_maps(cone):
    doubled = MinkowskiSum(cone, cone)
    assert doubled.box_valued
    assert dist_to_image(doubled, [1.0], [7.0]) == 0.0
    assert dist_to_image(doubled, [0.5], [7.0]) == 7.0
    assert dist_to_image(doubled, [2.0], [0.0]) == math.inf
    lifted = MinkowskiSum(Lift(CatalogFunction('identity')), cone)
    assert evaluate(lifted, [1.0]).intervals == [(1.0, math.inf)]


def test_graph_sample_map():
    F = GraphSampleMap([[0.0, 1.0], [0.0, 2.0], [1.0, 5.0]])
    assert_array_equal(evaluate(F, [0.0]).points, [[1.0], [2.0]])
    assert evaluate(F, [0.5]).is_empty
    with pytest.raises(DomainError):
        evaluate(F, [3.0])


def test_graph_points_sample_the_window(cone):
    window = Ball(Space(1), (0.0,), 0.5)
    gx, gy = cone.graph_points(np.array([[0.5], [1.0]]), window, 0.25)
    assert_array_equal(gx[:, 0], [0.5, 1.0, 1.0, 1.0])
    assert_array_equal(gy[:, 0], [0.0, 0.0, 0.25, 0.5])


# ---------------------------------------------------------------------------
# Inverse images
# ---------------------------------------------------------------------------

def test_inverse_distance_of_ramp():
    F = Lift(CatalogFunction('ramp'))
    grid = Grid.centered([0.0], 1.0, 1e-3)
    assert inverse_dist(F, [0.0], [0.3], grid) == pytest.approx(0.3, abs=1e-3)
    assert inverse_dist(F, [0.0], [-0.4], grid) == pytest.approx(0.0, abs=1e-12)


def test_empty_preimage_is_infinitely_far():
    F = Lift(CatalogFunction('constant', value=1.0))
    grid = Grid.centered([0.0], 1.0, 0.1)
    assert len(preimage_points(F, [0.0], grid)) == 0
    assert inverse_dist(F, [0.0], [0.0], grid) == math.inf


# ---------------------------------------------------------------------------
# Parametric maps
# ---------------------------------------------------------------------------

def test_packed_parameter_family():
    f = CatalogFamily('sine_family', epsilon=0.1)
    packed = PackedParameterFamily(f)
    assert packed.parameter_space.dim == 2
    value = packed.value([0.5, 0.3], [1.0])
    assert value[0] == pytest.approx(1.0 + 0.05 * math.sin(1.0) - 0.3, abs=1e-15)


def test_parameter_increment():
    f = CatalogFamily('additive', scale=2.0)
    inc = f.increment([1.0], [0.25])
    assert inc.value([7.0])[0] == pytest.approx(1.5)


def test_oscillation_decreases_under_refinement():
    f = CatalogFamily('sine_family', epsilon=0.1)
    profile = oscillation_profile(f, [[0.0, 1.0]], [[-1.0, 1.0]], levels=4)
    assert len(profile) == 4
    assert all(b <= a for a, b in zip(profile, profile[1:]))
    assert check_continuity(f, [[0.0, 1.0]], [[-1.0, 1.0]])


# ---------------------------------------------------------------------------
# Specification format
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("text", [
    '{"F":{"box":[[0.0,1.0]],"type":"normal_cone_box"},"g":{"dim":1,"rule":"identity"},"type":"sum"}',
    '{"F":{"g":{"dim":1,"rule":"ramp"},"type":"lift"},"factor":2.0,"type":"scale"}',
    '{"pairs":[[0.0,1.0],[1.0,2.0]],"type":"graph_sample"}',
    '{"F":{"box":[[0.0,1.0]],"type":"normal_cone_box"},"G":{"box":[[0.0,1.0]],"type":"normal_cone_box"},'
    '"type":"minkowski"}',
])
def test_serialization_is_a_fixed_point(text):
    assert serialize_map(parse_map(text)) == text


def test_catalog_shorthand_is_a_lift():
    F = parse_map({'type': 'perturbed_ramp'})
    assert isinstance(F, Lift)
    assert F.to_spec() == {'type': 'lift', 'g': {'rule': 'perturbed_ramp', 'dim': 1}}


@pytest.mark.parametrize("spec", [
    'not json',
    '[1, 2]',
    '{"type": "mystery"}',
    '{"type": "sum", "g": {"rule": "identity"}}',
    '{"type": "normal_cone_box", "box": [[1.0, 0.0]]}',
    '{"type": "lift", "g": {"rule": "identity"}, "colour": "red"}',
    '{"type": "scale", "F": {"type": "ramp"}, "factor": 2.0, "offset": 1.0}',
])
def test_malformed_specs_are_rejected(spec):
    with pytest.raises(SpecError):
        parse_map(spec)


def test_function_and_family_specs_round_trip():
    g = parse_function({'rule': 'sum', 'terms': [{'rule': 'ramp'}, {'rule': 'signed_square'}]})
    assert serialize_function(parse_function(serialize_function(g))) == serialize_function(g)
    f = parse_family({'rule': 'static', 'g': {'rule': 'identity'}})
    assert f.value([0.3], [2.0])[0] == 2.0
    assert parse_family(serialize_function(f)).to_spec() == f.to_spec()


@pytest.mark.parametrize("spec", [
    {'rule': 'packed'},
    {'rule': 'packed', 'base': {'rule': 'additive'}, 'scale': 2.0},
    {'rule': 'static', 'g': {'rule': 'identity'}, 'colour': 'red'},
])
def test_malformed_family_specs_are_rejected(spec):
    with pytest.raises(SpecError):
        parse_family(spec)


def test_packed_family_spec_round_trip():
    f = parse_family({'rule': 'packed', 'base': {'rule': 'additive'}})
    assert isinstance(f, PackedParameterFamily)
    assert parse_family(serialize_function(f)).to_spec() == f.to_spec()
