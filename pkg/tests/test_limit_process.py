import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from perturbed_walks import analytics as an
from perturbed_walks.harness import ks_one_sample, ks_two_sample
from perturbed_walks.limit_process import (
    LevelNotCoveredError,
    SubordinatorPath,
    build_limit_path,
    inverse_subordinator,
    jump_log_to_csv,
    limit_path_to_csv,
    overshoot_compose,
    reflection_residual,
    refine_brownian,
    sample_marginal,
    sample_overshoot_ratio,
    sample_w_min,
    scaled_chain_marginal,
    scaled_chain_marginals,
    simulate_brownian,
)
from perturbed_walks.sampling import Pareto, Rademacher, RngStream


def test_fixed_path_inverse_and_overshoot():
    path = SubordinatorPath.from_jumps([(2.0, 5.0), (1.0, 1.0)])
    # U = 0 on [0, 1), 1 on [1, 2), 6 afterwards
    assert inverse_subordinator(path, 0.5) == 1.0
    assert overshoot_compose(path, 0.5) == 1.0
    assert inverse_subordinator(path, 1.0) == 2.0  # inf{s : U(s) > 1}
    assert overshoot_compose(path, 3.0) == 6.0
    assert list(path.value_at([0.5, 1.0, 2.5])) == [0.0, 1.0, 6.0]
    with pytest.raises(LevelNotCoveredError):
        path.inverse(7.0)


@given(levels=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=30), seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_inverse_and_overshoot_are_monotone(levels, seed):
    path = SubordinatorPath.jump_measure(0.6, 1e-3, RngStream(seed))
    y = np.sort(levels)
    inv, ov = path.inverse(y), path.overshoot(y)
    assert np.all(np.diff(inv) >= 0) and np.all(np.diff(ov) >= 0)
    assert np.all(ov > y)
    assert np.allclose(path.value_at(inv), ov)


def test_grid_and_jump_subordinators_extend_on_demand():
    grid = SubordinatorPath.grid(0.5, 1e-3, RngStream(1), block=64)
    assert grid.overshoot(1e4) > 1e4
    jumps = SubordinatorPath.jump_measure(0.5, 1e-2, RngStream(1), block=0.5)
    assert jumps.overshoot(1e3) > 1e3
    assert jumps.dropped_mass_rate() == pytest.approx(0.5 * 0.1 / 0.5)
    with pytest.raises(ValueError):
        SubordinatorPath.jump_measure(0.5, 0.0, RngStream(1))


def test_brownian_grid_and_refinement():
    bm = simulate_brownian(1.0, 2**-8, RngStream(2))
    assert bm.W[0] == 0 and np.all(bm.M >= 0) and np.all(np.diff(bm.M) >= 0)
    assert np.allclose(bm.M, -np.minimum.accumulate(np.minimum(bm.W, 0)))
    fine = refine_brownian(bm, RngStream(3))
    assert fine.dt == bm.dt / 2
    assert np.array_equal(fine.W[::2], bm.W)
    assert np.all(fine.M[::2] >= bm.M)


def test_brownian_increments_are_gaussian():
    bm = simulate_brownian(1.0, 2**-12, RngStream(5))
    inc = np.diff(bm.W) / math.sqrt(bm.dt)
    assert ks_one_sample(inc, stats.norm.cdf).p_value > 1e-3


@given(x0=st.floats(0.0, 2.0), seed=st.integers(0, 10**4))
@settings(max_examples=25, deadline=None)
def test_limit_path_invariants(x0, seed):
    p = build_limit_path(x0, 1.0, 2**-9, 0.5, RngStream(seed))
    assert p.X[0] == pytest.approx(x0)
    assert p.X.min() >= 0
    assert np.all(np.diff(p.L) >= 0) and p.L[0] == 0
    # before M reaches x0 the path is x0 + W and L stays 0
    before = p.M < x0
    assert np.allclose(p.X[before], x0 + p.W[before])
    assert np.all(p.L[before] == 0)


def test_jump_mode_logs_each_atom_once():
    p = build_limit_path(0.0, 1.0, 2**-10, 0.5, RngStream(4), mode="jumps", delta=1e-3)
    assert len(p.jump_times) == len(p.jump_sizes)
    assert np.all(p.jump_sizes >= 1e-3)
    assert np.all(np.diff(p.jump_times) >= 0)
    assert p.meta["dropped_mass_rate"] > 0


def test_reflection_residual_is_small():
    p = build_limit_path(0.0, 1.0, 2**-12, 0.5, RngStream(6))
    assert reflection_residual(p, 0.05) <= 0.02 * max(p.L[-1], 1e-12) + 1e-9
    with pytest.raises(ValueError):
        reflection_residual(p, 0.0)


def test_limit_path_rejects_negative_start():
    with pytest.raises(ValueError):
        build_limit_path(-1.0, 1.0, 0.01, 0.5, RngStream(0))
    with pytest.raises(ValueError):
        build_limit_path(0.0, 1.0, 0.01, 0.5, RngStream(0), mode="other")


def test_w_min_sampler_matches_joint_density():
    g = RngStream(8).generator()
    w, m = sample_w_min(np.full(200_000, 0.7), g)
    assert np.all(m >= 0) and np.all(w + m >= 0)
    # marginal of M(t) is |N(0, t)|
    assert ks_one_sample(m, lambda x: 2 * stats.norm.cdf(x / math.sqrt(0.7)) - 1).p_value > 1e-3
    # P{W + M <= 0.5}: b from max(0, -a) up to 0.5 - a
    ref = integrate.dblquad(lambda b, a: an.joint_w_min_density(0.7, a, b), -10, 0.5,
                            lambda a: max(0.0, -a), lambda a: 0.5 - a)[0]
    assert abs(np.mean(w + m <= 0.5) - ref) < 5 * math.sqrt(ref * (1 - ref) / len(w))


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_overshoot_ratio_law(alpha):
    r = sample_overshoot_ratio(alpha, RngStream(9).generator(), 50_000)
    assert ks_one_sample(r, lambda x: an.dynkin_lamperti_cdf(alpha, 1.0, x)).p_value > 1e-3


def test_exact_marginal_agrees_with_paths():
    exact = sample_marginal(0.5, 0.3, 0.5, 4000, RngStream(10))
    paths = np.array([build_limit_path(0.3, 0.5, 2**-11, 0.5, RngStream(11, i), mode="jumps", delta=1e-5).X[-1]
                      for i in range(4000)])
    assert ks_two_sample(exact, paths).p_value > 1e-3


def test_exact_marginal_accepts_time_arrays():
    t = np.linspace(0.1, 2.0, 500)
    x = sample_marginal(0.5, 1.0, t, None, RngStream(12))
    assert x.shape == t.shape and np.all(x >= 0)


def test_scaled_chains_start_at_scaled_point_and_couple():
    xi_f, eta_f = Rademacher(), Pareto(0.5)
    vals = scaled_chain_marginals(["tilde", "hat", "grave"], xi_f, eta_f, 100.0, [0.0, 1.0], RngStream(13), x=2.0)
    for v in vals:
        assert v[0] == pytest.approx(2.0)
    assert scaled_chain_marginal("hat", xi_f, eta_f, 100.0, 1.0, RngStream(13), x=2.0) == vals[1][1]
    with pytest.raises(ValueError):
        scaled_chain_marginals(["tilde"], xi_f, eta_f, 0.5, [1.0], RngStream(0))


def test_csv_dumps(tmp_path):
    p = build_limit_path(0.0, 0.1, 2**-8, 0.5, RngStream(1), mode="jumps", delta=1e-3)
    limit_path_to_csv(p, tmp_path / "x.csv")
    jump_log_to_csv(p, tmp_path / "j.csv")
    rows = (tmp_path / "x.csv").read_text().splitlines()
    assert rows[0] == "t,W,M,L,X" and len(rows) == len(p.X) + 1
    assert (tmp_path / "j.csv").read_text().startswith("t,size")
