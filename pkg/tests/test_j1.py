import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbed_walks.j1 import (
    CadlagStepFunction,
    RangeError,
    TimeChange,
    compose,
    composition_instance,
    evaluation_gaps,
    j1_distance,
    lemma_composition_harness,
    lemma_timechange_harness,
    placement_cost,
    skipped_oscillation,
    sup_distance,
    timechange_instance,
    vanishes,
)

F = Fraction
GRID = 4  # jumps of the random step functions sit on multiples of 1/GRID


@st.composite
def grid_steps(draw, max_jumps=3):
    """Step function on [0, 1] with jumps at multiples of 1/GRID and small integer values."""
    times = draw(st.lists(st.integers(1, GRID - 1), unique=True, max_size=max_jumps))
    vals = draw(st.lists(st.integers(-2, 2), min_size=len(times) + 1, max_size=len(times) + 1))
    bps = [F(0)] + [F(t, GRID) for t in sorted(times)]
    return CadlagStepFunction(tuple(bps), tuple(vals), F(1))


@st.composite
def fraction_steps(draw, max_jumps=4):
    times = draw(st.lists(st.integers(1, 99), unique=True, max_size=max_jumps))
    vals = draw(st.lists(st.integers(-5, 5), min_size=len(times) + 1, max_size=len(times) + 1))
    bps = [F(0)] + [F(t, 100) for t in sorted(times)]
    return CadlagStepFunction(tuple(bps), tuple(F(v, 2) for v in vals), F(1))


def brute_force_j1(f, g, h):
    """Minimum placement cost over placements on the half grid of step h plus g's jump times."""
    K = len(f.jump_times)
    if K == 0:
        return sup_distance(f, g)
    pts = sorted({h / 2 + i * h for i in range(int(1 / h))} | set(g.jump_times))
    return min(placement_cost(f, g, c) for c in itertools.combinations(pts, K))


def test_worked_examples():
    T = F(2)
    one_a = CadlagStepFunction.indicator(F(1), T)
    one_b = CadlagStepFunction.indicator(F(11, 10), T)
    assert j1_distance(one_a, one_b).distance == F(1, 10)
    assert sup_distance(one_a, one_b) == 1
    # jumps of different height: moving does not help beyond the height gap
    half = CadlagStepFunction.indicator(F(1), T, height=F(1, 2))
    assert j1_distance(one_a, half).distance == F(1, 2)
    assert j1_distance(one_a, one_a).distance == 0


def test_composition_with_linear_time_change():
    x = CadlagStepFunction.indicator(F(1), F(2))
    y = TimeChange.linear((F(0), F(1)), (F(0), F(2)))
    assert compose(x, y) == CadlagStepFunction.indicator(F(1, 2), F(1))


def test_range_and_input_errors():
    f = CadlagStepFunction.indicator(1, 2)
    with pytest.raises(RangeError):
        f(3)
    with pytest.raises(RangeError):
        compose(f, TimeChange.linear((0, 1), (0, 3)))
    with pytest.raises(ValueError):
        CadlagStepFunction((0, 2, 1), (0, 1, 2), 3)
    with pytest.raises(ValueError):
        TimeChange((0, 1), (1,), (0,), 1)
    with pytest.raises(ValueError):
        placement_cost(f, f, [])


def test_redundant_breakpoints_are_dropped():
    f = CadlagStepFunction((0, 1, 2), (5, 5, 6), 3)
    assert f.breakpoints == (0, 2) and f.jump_times == (2,)
    assert f.left_limit(2) == 5 and f(2) == 6


@given(fraction_steps())
def test_json_round_trip(f):
    back = CadlagStepFunction.from_json(f.to_json())
    # fractions are written as floats
    assert all(float(back(float(t))) == float(f(t)) for t in f.breakpoints)
    pairs = json.dumps([[0, 1], [0.5, 2]])
    assert CadlagStepFunction.from_json(pairs, horizon=1)(0.75) == 2
    with pytest.raises(ValueError):
        CadlagStepFunction.from_json(pairs)


@given(grid_steps(), grid_steps())
@settings(max_examples=60, deadline=None)
def test_j1_matches_brute_force(f, g):
    d = j1_distance(f, g).distance
    h = F(1, 4 * GRID)
    brute = brute_force_j1(f, g, h)
    # the half grid realizes the infimum up to one grid step
    assert d <= brute <= d + h


@given(fraction_steps(), fraction_steps())
@settings(max_examples=80, deadline=None)
def test_j1_symmetric_and_below_sup(f, g):
    d = j1_distance(f, g).distance
    assert d == j1_distance(g, f).distance
    assert 0 <= d <= sup_distance(f, g)
    assert (d == 0) == (f == g)


@given(fraction_steps(3), fraction_steps(3), fraction_steps(3))
@settings(max_examples=60, deadline=None)
def test_j1_triangle_inequality(f, g, h):
    assert j1_distance(f, h).distance <= j1_distance(f, g).distance + j1_distance(g, h).distance


@given(fraction_steps(), fraction_steps())
@settings(max_examples=80, deadline=None)
def test_certificate_bounds_the_distance(f, g):
    res = j1_distance(f, g)
    assert len(res.placements) == len(f.jump_times)
    assert res.path[0] == (0, 0) and res.path[-1] == (len(f.jump_times), len(g.jump_times))
    if all(p < q for p, q in zip(res.placements, res.placements[1:])) and all(p > 0 for p in res.placements):
        assert placement_cost(f, g, res.placements) >= res.distance
    # every placement is within the distance of the jump it moves
    assert all(abs(p - a) <= res.distance for p, a in zip(res.placements, f.jump_times))


def test_float_inputs_tolerate_rounding():
    f = CadlagStepFunction.indicator(0.1 + 0.2, 1.0)
    g = CadlagStepFunction.indicator(0.3, 1.0)
    assert j1_distance(f, g).distance == pytest.approx(0.0, abs=1e-15)
    assert float(j1_distance(f, CadlagStepFunction.indicator(0.5, 1.0))) == pytest.approx(0.2)


@st.composite
def time_changes(draw, horizon=F(1)):
    """Nondecreasing piecewise-linear map of [0, 1] into [0, 1] with possible jumps and flats."""
    m = draw(st.integers(1, 4))
    cuts = sorted(draw(st.lists(st.integers(1, 19), unique=True, min_size=m - 1, max_size=m - 1)))
    knots = [F(0)] + [F(c, 20) for c in cuts] + [horizon]
    seq = sorted(draw(st.lists(st.integers(0, 24), min_size=2 * m + 1, max_size=2 * m + 1)))
    seq = [F(v, 24) for v in seq]
    return TimeChange(tuple(knots), tuple(seq[0:2 * m:2]), tuple(seq[1:2 * m:2]), seq[-1])


def _same_function(u, v):
    pts = sorted({F(i, 240) for i in range(241)} | set(getattr(u, "knots", ())) | set(getattr(v, "knots", ())))
    return all(u(t) == v(t) and u.left_limit(t) == v.left_limit(t) for t in pts)


@given(time_changes(), time_changes(), time_changes())
@settings(max_examples=80, deadline=None)
def test_composition_is_associative(x, y, z):
    assert _same_function(compose(x, compose(y, z)), compose(compose(x, y), z))


@given(fraction_steps(), time_changes())
@settings(max_examples=80, deadline=None)
def test_step_composition_pointwise(f, y):
    c = compose(f, y)
    for i in range(101):
        t = F(i, 100)
        assert c(t) == f(y(t))


def test_time_change_queries():
    lam = TimeChange((0, 1, 2), (0, 1), (1, 1), 3)
    assert lam.jumps() == [(2, 1, 3)]
    assert lam.flat_levels() == {1}
    assert lam.hitting_time(F(1, 2)) == F(1, 2)
    assert lam.hitting_time(2) == 2 and lam.hitting_time(4) is None
    assert not lam.is_continuous()
    assert TimeChange.identity(2).is_continuous()
    step = TimeChange.from_step(CadlagStepFunction((0, 1), (0, 2), 2))
    assert step.as_step() == CadlagStepFunction((0, 1), (0, 2), 2)
    with pytest.raises(ValueError):
        lam.as_step()


def test_skipped_oscillation():
    # flat at 1/2 on [1/2, 3/4), then a jump back to the diagonal skipping [1/2, 3/4)
    lam = TimeChange((0, F(1, 2), F(3, 4), 1), (0, F(1, 2), F(3, 4)), (F(1, 2), F(1, 2), 1), 1)
    f = CadlagStepFunction((0, F(5, 8), F(11, 16)), (0, 3, 0), 1)
    assert skipped_oscillation(f, lam, 1) == 3
    assert skipped_oscillation(CadlagStepFunction.constant(1, 1), lam, 1) == 0


def test_vanishes():
    assert vanishes([8, 128], [1.0, 0.2])
    assert not vanishes([8, 128], [1.0, 0.9])


@pytest.mark.parametrize("seed", range(6))
def test_composition_harness_passes(seed):
    rep = lemma_composition_harness(seed, n_max=128)
    assert rep.passed, rep.diagnosis
    assert rep.to_dict()["status"] == "PASS"


def test_composition_harness_flags_flat_level():
    inst = composition_instance(3, flat_at_jump=True)
    rep = lemma_composition_harness(3, instance=inst, n_max=64)
    assert rep.status == "OUT_OF_HYPOTHESIS" and "flat" in rep.diagnosis


@pytest.mark.parametrize("seed", range(6))
def test_timechange_harness_passes(seed):
    assert lemma_timechange_harness(seed, n_max=128).passed
    ident = timechange_instance(seed, identity=True)
    assert lemma_timechange_harness(seed, n_max=64, instance=ident).passed


@pytest.mark.parametrize("seed", range(4))
def test_timechange_harness_flags_oscillation(seed):
    inst = timechange_instance(seed, oscillation=0.5)
    rep = lemma_timechange_harness(seed, n_max=128, instance=inst)
    assert rep.status == "OUT_OF_HYPOTHESIS" and "oscillation" in rep.diagnosis


def test_continuity_gaps_vanish():
    z0 = CadlagStepFunction.indicator(F(1), F(2))
    gaps = evaluation_gaps(z0, F(1), lambda n: CadlagStepFunction.indicator(1 + F(1, n), F(2)),
                             lambda n: 1 + F(1, 2 * n), [1, 10, 100])
    assert gaps == [0, 0, 0]
    # a value approaching from outside both one-sided limits leaves a gap
    z = lambda n: CadlagStepFunction((0, 1), (0, F(1, 2)), F(2))
    assert evaluation_gaps(z0, F(1), z, lambda n: F(1), [1]) == [F(1, 2)]
