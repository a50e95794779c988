"""Fast worked-example checks across all modules, used by ``perturbed-walks selftest``."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate, stats
from scipy.special import erfc

from . import analytics as an
from . import j1
from .chains import ChainKind, run_chain, run_equivalent_model, step_chain, verify_time_change_identity
from .harness import ks_one_sample, ks_two_sample, laplace_transform_check
from .limit_process import SubordinatorPath, build_limit_path
from .sampling import Pareto, Rademacher, RngStream, normalizer_a, sample_positive_stable


def _close(a, b, tol):
    return abs(a - b) <= tol


def _chain_examples():
    assert step_chain("tilde", 0.0, -1.0, 3.0) == 3.0
    assert step_chain("hat", 0.5, -1.0, 3.0) == 0.0
    assert step_chain("grave", -0.5, 1.0, 3.0) == 2.5
    traj = run_chain(ChainKind.TILDE, -np.ones(8), np.full(8, 3.0))
    assert list(traj.values) == [0, 3, 2, 1, 0, 3, 2, 1, 0]


def _identity_example():
    g = RngStream(5).generator()
    xi = Rademacher().sample(g, 2000)
    eta = Pareto(0.5).sample(g, 2001)
    assert verify_time_change_identity(run_equivalent_model(xi, eta, 2000, exact=True)).ok


def _stable_laplace():
    s = sample_positive_stable(0.5, RngStream(11), 200_000)
    c = laplace_transform_check(s, [1.0], lambda z: math.exp(-z**0.5))[0]
    assert abs(c.z_score) < 4.5, c


def _levy_ks():
    # Gamma(1/2) z^(1/2) exponent: Levy law with scale pi/2
    s = sample_positive_stable(0.5, RngStream(12), 20_000) * math.pi
    assert ks_one_sample(s, lambda x: erfc(np.sqrt(math.pi / (4 * x)))).distance < 0.02


def _subordinator_overshoot():
    path = SubordinatorPath.from_jumps([(2.0, 5.0)])
    assert path.inverse(3.0) == 2.0 and path.overshoot(3.0) == 5.0


def _limit_path():
    p = build_limit_path(0.0, 1.0, 2**-10, 0.5, RngStream(3))
    assert p.X.min() >= 0 and p.L[0] == 0 and np.all(np.diff(p.L) >= 0)


def _analytics_values():
    assert _close(an.dynkin_lamperti_pdf(0.5, 1.0, 2.0), 1 / (2 * math.pi), 1e-12)
    assert an.dynkin_lamperti_pdf(0.5, 1.0, 0.5) == 0.0
    assert _close(an.resolvent_v(1.0, 1.0, 1.0), (1 - math.exp(-2 * math.sqrt(2))) / math.sqrt(2), 1e-12)
    assert _close(an.delta_lambda(0.5, 1.0), 2**0.25 * 2 * math.sqrt(math.pi), 1e-12)
    assert _close(an.excursion_measure_tail(0.5, 1.0), 1.72008, 1e-5)
    assert _close(an.delta_lambda(0.3, 4.0), 2**0.3 * an.delta_lambda(0.3, 1.0), 1e-12)


def _analytics_normalization():
    for a in (0.3, 0.5, 0.7):
        # the ratio is 1/B with B ~ Beta(a, 1 - a); the tail decays like x^(-a)
        assert _close(float(an.dynkin_lamperti_cdf(a, 1.0, 1e12)), stats.beta.sf(1e-12, a, 1 - a), 1e-9)
        assert _close(an.delta_lambda_quadrature(a, 1.0), an.delta_lambda(a, 1.0), 1e-6 * an.delta_lambda(a, 1.0))
    total, _ = integrate.dblquad(lambda b, a: an.joint_w_min_density(0.7, a, b), -15, 15, lambda a: max(0.0, -a), 20)
    assert _close(total, 1.0, 1e-5)
    assert _close(an.resolvent_mass(0.5, 1.0, 1.0), 1.0, 1e-4)


def _ks_examples():
    assert _close(ks_one_sample([0.25, 0.75], lambda x: np.clip(x, 0, 1)).distance, 0.25, 1e-15)
    assert _close(ks_one_sample([0.5], lambda x: np.clip(x, 0, 1)).distance, 0.5, 1e-15)
    assert ks_two_sample([0, 1], [0.5]).distance == 0.5
    assert ks_two_sample([0, 1], [2, 3]).distance == 1.0


def _j1_examples():
    S = j1.CadlagStepFunction
    f = S((0, 1, 2), (0, 1, 0), 3)
    g = S((0, Fraction(11, 10), 2), (0, 1, 0), 3)
    assert j1.j1_distance(f, g).distance == Fraction(1, 10)
    assert j1.j1_distance(S.indicator(1, 3), S.indicator(1, 3, Fraction(1, 2))).distance == Fraction(1, 2)
    assert j1.compose(S.indicator(1, 2), j1.TimeChange.linear((0, 1), (0, 2))) == S.indicator(Fraction(1, 2), 1)


def _harness_examples():
    assert j1.lemma_composition_harness(1, 64).status == "PASS"
    assert j1.lemma_timechange_harness(1, 64).status == "PASS"
    flat = j1.composition_instance(1, flat_at_jump=True)
    assert j1.lemma_composition_harness(1, 64, instance=flat).status == "OUT_OF_HYPOTHESIS"


def _normalizer():
    assert normalizer_a(Pareto(0.5), 100) == 10_000


CHECKS: list[tuple[str, Callable[[], None]]] = [
    ("chain recursions", _chain_examples),
    ("time-change identity", _identity_example),
    ("normalizer a(v)", _normalizer),
    ("stable Laplace transform", _stable_laplace),
    ("stable law vs Levy CDF", _levy_ks),
    ("subordinator inverse/overshoot", _subordinator_overshoot),
    ("limit path invariants", _limit_path),
    ("closed-form values", _analytics_values),
    ("normalizations", _analytics_normalization),
    ("KS worked examples", _ks_examples),
    ("J1 worked examples", _j1_examples),
    ("lemma harnesses", _harness_examples),
]


def run_selftest(log=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
            log(f"PASS  {name}")
        except Exception as err:  # report every failure, keep going
            ok = False
            log(f"FAIL  {name}: {type(err).__name__}: {err}")
    return ok
