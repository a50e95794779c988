import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbed_walks.chains import (
    ChainKind,
    InsufficientDataError,
    RandomWalk,
    chain_values_at,
    compose_R,
    coupled_chain_values,
    first_passage_nu,
    lambda_sup_deviation,
    overshoot_below_zero,
    run_chain,
    run_equivalent_model,
    running_neg_min,
    step_chain,
    trajectory_to_csv,
    verify_time_change_identity,
)
from perturbed_walks.harness import ks_two_sample
from perturbed_walks.sampling import CenteredUniform, Laplace, Pareto, Rademacher, RngStream

steps = st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=300)


def _python_chain(kind, x0, xi, eta):
    s = [x0]
    for a, b in zip(xi, eta):
        s.append(step_chain(kind, s[-1], a, b))
    return np.array(s)


def test_step_examples():
    assert step_chain("tilde", 0.0, -1.0, 3.0) == 3.0
    assert step_chain("tilde", 2.0, -1.0, 3.0) == 1.0
    assert step_chain("hat", 0.5, -1.0, 3.0) == 0.0
    assert step_chain("hat", 0.0, -1.0, 3.0) == 3.0
    assert step_chain("grave", -0.5, 1.0, 3.0) == 2.5
    assert step_chain(ChainKind.GRAVE, 1.0, -1.5, 3.0) == -0.5


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        step_chain("tilde", 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        step_chain("hat", -1.0, 1.0, 1.0)
    with pytest.raises(KeyError):
        ChainKind.parse("wiggle")


def test_deterministic_tilde_cycle():
    traj = run_chain(ChainKind.TILDE, -np.ones(8), np.full(8, 3.0))
    assert list(traj.values) == [0, 3, 2, 1, 0, 3, 2, 1, 0]
    assert list(traj.crossing_times) == [0, 4, 8]
    assert traj.eta_draws_used == 2 and traj.xi_draws_used == 6


@given(xi=steps, seed=st.integers(0, 10**6), kind=st.sampled_from(list(ChainKind)),
       x0=st.floats(0.0, 5.0))
@settings(deadline=None)
def test_compiled_chain_matches_reference(xi, seed, kind, x0):
    eta = Pareto(0.5).sample(np.random.default_rng(seed), len(xi))
    traj = run_chain(kind, xi, eta, x0=x0)
    assert np.array_equal(traj.values, _python_chain(kind, x0, xi, eta))
    idx = np.random.default_rng(seed).integers(0, len(xi) + 1, size=7)
    assert np.array_equal(chain_values_at(kind, xi, eta, idx, x0=x0), traj.values[idx])


@given(xi=steps, seed=st.integers(0, 10**6))
@settings(deadline=None)
def test_hat_nonnegative_and_tilde_bounded_below(xi, seed):
    eta = Pareto(0.3).sample(np.random.default_rng(seed), len(xi))
    assert run_chain("hat", xi, eta).values.min() >= 0
    tilde = run_chain("tilde", xi, eta).values
    # Tilde restarts at eta > 0 from any state <= 0, so it never drops below -max|xi|
    assert tilde.min() >= -1.0


@given(xi=st.lists(st.floats(-2, 2), min_size=1, max_size=200), seed=st.integers(0, 10**6))
@settings(deadline=None)
def test_coupled_values_agree_and_hat_tilde_bound(xi, seed):
    xi = np.array(xi)
    eta = Pareto(0.5).sample(np.random.default_rng(seed), len(xi))
    idx = np.arange(len(xi) + 1)
    c = coupled_chain_values(xi, eta, idx)
    for kind in ChainKind:
        assert np.array_equal(c.values[int(kind)], run_chain(kind, xi, eta).values)
    assert c.hat_tilde_gap <= c.max_abs_xi
    assert c.max_abs_xi == np.abs(xi).max()


def test_thinning_keeps_every_kth_state():
    g = RngStream(1).generator()
    xi, eta = Rademacher().sample(g, 1000), Pareto(0.5).sample(g, 1000)
    full = run_chain("grave", xi, eta)
    thin = run_chain("grave", xi, eta, thin=10)
    assert np.array_equal(thin.values, full.values[::10])
    assert thin.n_steps == 1000


def test_run_chain_validation():
    with pytest.raises(ValueError):
        run_chain("tilde", [1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        run_chain("tilde", [1.0], [-1.0])
    with pytest.raises(ValueError):
        run_chain("hat", [1.0], [1.0], x0=-1.0)
    with pytest.raises(ValueError):
        chain_values_at("hat", [1.0], [1.0], [2])


def test_random_walk_helpers():
    w = RandomWalk([1, -2, 3, -1])
    assert list(w.partial_sums) == [0, 1, -1, 2, 1]
    assert w(2) == -1 and len(w) == 4
    assert first_passage_nu(w, 1) == 3
    assert list(running_neg_min(w)) == [0, 0, 1, 1, 1]
    assert list(RandomWalk.from_sums([1, -1, 2]).increments) == [1, -2, 3]
    with pytest.raises(InsufficientDataError):
        first_passage_nu(w, 5)


def test_compose_R_small_example():
    s_xi = RandomWalk([-1.0, -1.0, 1.0])
    zeta = [0.5, 1.0, 2.0]
    # m = 0, 1, 2, 2; nu(m) picks the first zeta partial sum > m: 0.5, 1.5, 3.5, 3.5
    assert list(compose_R(s_xi, zeta)) == [0.5, 0.5, 1.5, 2.5]
    with pytest.raises(InsufficientDataError):
        compose_R(RandomWalk([-5.0]), [1.0])


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("fam", [Rademacher(), CenteredUniform(1.0)], ids=["rademacher", "uniform"])
def test_time_change_identity_exact(alpha, fam):
    for seed in range(5):
        g = RngStream(seed).generator()
        n = 3000
        model = run_equivalent_model(fam.sample(g, n), Pareto(alpha).sample(g, n + 1), n, exact=True)
        assert verify_time_change_identity(model).ok


@given(xi=steps, seed=st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_time_change_identity_property(xi, seed):
    n = len(xi)
    eta = Pareto(0.5).sample(np.random.default_rng(seed), n + 1)
    model = run_equivalent_model(xi, eta, n, exact=True)
    check = verify_time_change_identity(model)
    assert check.ok, check
    # S* starts at 0 and the time change is strictly increasing
    assert model.s_star[0] == 0
    assert np.all(np.diff(model.lam) > 0)


def test_float_mode_agrees_with_exact_mode():
    g = RngStream(9).generator()
    xi, eta = CenteredUniform(1.0).sample(g, 2000), Pareto(0.5).sample(g, 2001)
    exact = run_equivalent_model(xi, eta, 2000, exact=True)
    flt = run_equivalent_model(xi, eta, 2000)
    assert np.array_equal(exact.lam, flt.lam)
    assert np.allclose(exact.as_float("R"), flt.R, rtol=1e-9, atol=1e-9)
    assert verify_time_change_identity(flt, atol=1e-9).ok


def test_equivalent_model_needs_enough_draws():
    with pytest.raises(InsufficientDataError):
        run_equivalent_model([1.0], [1.0], 3)


def test_lambda_deviation_shrinks():
    g = RngStream(4).generator()
    n = 100_001
    model = run_equivalent_model(Rademacher().sample(g, n), Pareto(0.5).sample(g, n + 1), n)
    d = [lambda_sup_deviation(model, v) for v in (1e3, 1e4, 1e5)]
    assert d[0] > d[2]
    with pytest.raises(InsufficientDataError):
        lambda_sup_deviation(model, 1e7)


class _Unlabelled:
    """Wraps a family without its name, forcing overshoot_below_zero to walk."""

    def __init__(self, fam):
        self.sample = fam.sample


def test_overshoot_shortcuts_match_walking():
    g = np.random.default_rng(0)
    levels = g.uniform(0.0, 1.0, 400)
    for fam in (Rademacher(), Laplace(0.5)):
        fast = overshoot_below_zero(fam, levels, g)
        slow = overshoot_below_zero(_Unlabelled(fam), levels, g)
        assert ks_two_sample(fast, slow).p_value > 1e-3
    assert np.array_equal(overshoot_below_zero(Rademacher(), levels, g), np.ceil(levels) - levels)
    walked = overshoot_below_zero(CenteredUniform(1.0), np.full(300, 3.0), g)
    assert np.all((walked >= 0) & (walked <= 1.0))


def test_trajectory_csv(tmp_path):
    traj = run_chain("tilde", -np.ones(4), np.full(4, 2.0))
    trajectory_to_csv(traj, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "n,value,T,lambda_inverse_flag"
    assert len(lines) == 6
