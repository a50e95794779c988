"""Closed-form laws and kernels of the limit process, with quadrature cross-checks.

Two conventions matter for normalization:

* the joint law of (W(t), -min W) carries the decaying Gaussian factor
  exp(-(2b + a)^2 / (2t));
* the exit-from-zero term of the resolvent kernel carries the hitting factor
  exp(-x sqrt(2 lambda)), which is what makes int_0^inf r(x, y) dy = 1/lambda.

Local-time estimators built from a simulated :class:`LimitPath` live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf, gamma as gamma_fn

from .limit_process import LimitPath, sample_marginal
from .sampling import RandomSource, as_generator

__all__ = [
    "QuadratureError",
    "QuadratureSpec",
    "dynkin_lamperti_pdf",
    "dynkin_lamperti_cdf",
    "joint_w_min_density",
    "killed_bm_kernel",
    "killed_survival",
    "resolvent_v",
    "delta_lambda",
    "delta_lambda_quadrature",
    "resolvent_kernel_r",
    "resolvent_mass",
    "mc_resolvent",
    "entrance_law_density",
    "entrance_law_mass",
    "levy_tail",
    "excursion_measure_tail",
    "excursion_measure_tail_quadrature",
    "excursion_constant",
    "InsufficientResolutionError",
    "jump_count_local_time",
    "excursion_intervals",
    "excursion_count_local_time",
]


class QuadratureError(RuntimeError):
    pass


class InsufficientResolutionError(ValueError):
    """The simulated path is too coarse for the requested threshold."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    limit: int = 500

    def quad(self, f, a, b, **kw):
        val, err = integrate.quad(f, a, b, epsabs=self.abs_tol, epsrel=self.rel_tol,
                                  limit=self.limit, **kw)
        if err > max(self.abs_tol, self.rel_tol * abs(val)) * 100:
            raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance")
        return val


DEFAULT_QUAD = QuadratureSpec()


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


# ------------------------------------------------------- overshoot law


def dynkin_lamperti_pdf(alpha: float, t: float, x):
    """Density of U(U^{-1}(t)): t^a sin(pi a) / pi / ((x - t)^a x) on x > t."""
    _check_alpha(alpha)
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    c = t**alpha * math.sin(math.pi * alpha) / math.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > t, c / (np.abs(x - t) ** alpha * x), 0.0)
    return float(out) if out.ndim == 0 else out


def dynkin_lamperti_cdf(alpha: float, t: float, x, quad: QuadratureSpec = DEFAULT_QUAD):
    """P{U(U^{-1}(t)) <= x} by quadrature of the density.

    The (x - t)^(-alpha) endpoint singularity is handed to QUADPACK's
    algebraic weight.  Beyond 2t the survival function is integrated in
    w = 1/s, where the density becomes c w^(alpha-1) (1 - t w)^(-alpha).
    """
    _check_alpha(alpha)
    c = t**alpha * math.sin(math.pi * alpha) / math.pi

    def one(xv):
        if xv <= t:
            return 0.0
        # near part: int_t^min(x,2t) c (s-t)^-a / s ds
        b = min(xv, 2 * t)
        h = b - t
        if h < 1e-6 * t:
            # int_0^h u^-a / (t + u) du, two terms of the series in h/t (error ~ (h/t)^2)
            near = c * h ** (1 - alpha) / t * (1 / (1 - alpha) - h / t / (2 - alpha))
        else:
            near = quad.quad(lambda s: c / s, t, b, weight="alg", wvar=(-alpha, 0.0))
        if xv <= 2 * t:
            return min(near, 1.0)
        tail = quad.quad(lambda w: c * (1.0 - t * w) ** (-alpha), 0.0, 1.0 / xv, weight="alg",
                         wvar=(alpha - 1.0, 0.0))
        return min(max(1.0 - tail, near), 1.0)

    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return one(float(x))
    return np.array([one(float(v)) for v in x.ravel()]).reshape(x.shape)


# ------------------------------------------------------ Brownian kernels


def joint_w_min_density(t: float, a, b):
    """Density of (W(t), -min_{s<=t} W(s)) at (a, b) on {b >= 0, a + b >= 0}."""
    if not t > 0:
        raise ValueError("t must be positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = 2 * b + a
    out = np.where((b >= 0) & (a + b >= 0), math.sqrt(2.0 / (math.pi * t**3)) * s * np.exp(-s * s / (2 * t)), 0.0)
    return float(out) if out.ndim == 0 else out


def killed_bm_kernel(t: float, x, y):
    """Transition density of Brownian motion killed at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.exp(-(x - y) ** 2 / (2 * t)) * -np.expm1(-2 * x * y / t) / math.sqrt(2 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def killed_survival(t: float, x):
    """P_x{Brownian motion has not hit 0 by t} = erf(x / sqrt(2t))."""
    return erf(np.asarray(x, dtype=float) / math.sqrt(2 * t))


def resolvent_v(lam: float, x, y):
    """Resolvent density of Brownian motion killed at 0."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r = math.sqrt(2 * lam)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # e^{-r|x-y|} - e^{-r(x+y)} without cancellation near x = 0 or y = 0
    out = np.exp(-r * np.abs(x - y)) * -np.expm1(-2 * r * np.minimum(x, y)) / r
    return float(out) if out.ndim == 0 else out


def delta_lambda(alpha: float, lam: float) -> float:
    """int_0^inf (1 - exp(-x sqrt(2 lam))) x^(-1-alpha) dx in closed form."""
    _check_alpha(alpha)
    return (2 * lam) ** (alpha / 2) * gamma_fn(1 - alpha) / alpha


def delta_lambda_quadrature(alpha: float, lam: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    r = math.sqrt(2 * lam)
    # split at 1: near zero the integrand ~ r x^-alpha (algebraic weight), tail decays as x^-1-alpha
    near = quad.quad(lambda x: -math.expm1(-r * x) / x if x > 0 else r, 0.0, 1.0, weight="alg", wvar=(-alpha, 0.0))
    far = quad.quad(lambda w: -math.expm1(-r / w) * w ** (alpha - 1), 0.0, 1.0)  # x = 1/w
    return near + far


def _exit_integral(alpha: float, lam: float, y: float, quad: QuadratureSpec) -> float:
    """int_0^inf v^lam(z, y) z^(-1-alpha) dz.

    v(z, y)/z stays bounded as z -> 0 (v ~ 2 z exp(-y r)).  On [0, 1] the
    substitution u = z^(1-alpha) absorbs the z^(-alpha) factor exactly.
    """
    r = math.sqrt(2 * lam)
    p = 1.0 - alpha

    def g(z):
        if z == 0.0:
            return 2.0 * math.exp(-r * y)
        return float(resolvent_v(lam, z, y)) / z

    smooth = lambda u: g(u ** (1.0 / p)) / p
    body = lambda z: g(z) * z ** (-alpha)
    # v(., y) has a kink of width 1/r at y; every panel edge below lands on it or around it
    w = 20.0 / r
    near = sorted({0.0, min(y, 1.0), 1.0})
    total = sum(quad.quad(smooth, lo**p, hi**p) for lo, hi in zip(near, near[1:]) if hi > lo)
    far = sorted({1.0, max(1.0, y - w), max(1.0, y), max(1.0, y + w)})
    total += sum(quad.quad(body, lo, hi) for lo, hi in zip(far, far[1:]) if hi > lo)
    total += quad.quad(body, far[-1], np.inf)
    return total


def resolvent_kernel_r(alpha: float, lam: float, x, y, quad: QuadratureSpec = DEFAULT_QUAD):
    """r^lam(x, y) = v(x, y) + exp(-x sqrt(2 lam)) / Delta_lam * int_0^inf v(z, y) z^(-1-alpha) dz."""
    _check_alpha(alpha)
    r = math.sqrt(2 * lam)
    d = delta_lambda(alpha, lam)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    xs, ys = np.broadcast_arrays(xs, ys)
    cache: dict[float, float] = {}
    out = np.empty(xs.shape)
    for i, (xv, yv) in enumerate(zip(xs.ravel(), ys.ravel())):
        if yv not in cache:
            cache[yv] = _exit_integral(alpha, lam, yv, quad)
        out.ravel()[i] = resolvent_v(lam, xv, yv) + math.exp(-r * xv) * cache[yv] / d
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(out.ravel()[0])
    return out


def resolvent_mass(alpha: float, lam: float, x: float, quad: QuadratureSpec = DEFAULT_QUAD,
                   f=None) -> float:
    """int_0^inf r^lam(x, y) f(y) dy (f = 1 by default) by nested quadrature."""
    f = f or (lambda y: 1.0)
    g = lambda y: resolvent_kernel_r(alpha, lam, x, y, quad) * f(y)
    # the exit term decays only like y^(-1-alpha): finite panels, then y = 1/w on the tail
    outer = QuadratureSpec(abs_tol=quad.abs_tol * 100, rel_tol=quad.rel_tol * 100, limit=quad.limit)
    cuts = sorted({0.0, x, 1.0, 5.0, 50.0})
    total = sum(outer.quad(g, lo, hi) for lo, hi in zip(cuts, cuts[1:]))
    # g(1/w)/w^2 ~ w^(alpha-1): pass that factor to the algebraic weight
    h = lambda w: g(1.0 / max(w, 1e-8)) * max(w, 1e-8) ** (-1.0 - alpha)
    total += outer.quad(h, 0.0, 1.0 / cuts[-1], weight="alg", wvar=(alpha - 1.0, 0.0))
    return total


def mc_resolvent(alpha: float, lam: float, x0: float, f, n: int, stream: RandomSource) -> tuple[float, float]:
    """Monte Carlo E int_0^inf e^{-lam s} f(X(s)) ds with its standard error.

    Uses the identity int e^{-lam s} g(s) ds = E g(tau) / lam with tau ~ Exp(lam)
    and the exact marginal sampler, so the estimate carries no time-step bias.
    """
    rng = as_generator(stream)
    tau = rng.exponential(1.0 / lam, size=n)
    vals = np.asarray(f(sample_marginal(alpha, x0, tau, None, rng)), dtype=float) / lam
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


# -------------------------------------------------------- entrance law


def entrance_law_density(alpha: float, t: float, y, quad: QuadratureSpec = DEFAULT_QUAD):
    """alpha / (2^(alpha/2) Gamma(1-alpha)) int_0^inf p^0_t(x, y) x^(-1-alpha) dx."""
    _check_alpha(alpha)
    c = alpha / (2 ** (alpha / 2) * gamma_fn(1 - alpha))

    def one(yv):
        # p^0_t(x, y)/x is bounded near x = 0
        def g(xv):
            if xv == 0.0:
                return 2 * yv / t * math.exp(-yv * yv / (2 * t)) / math.sqrt(2 * math.pi * t)
            return float(killed_bm_kernel(t, xv, yv)) / xv

        s = math.sqrt(t)
        near = quad.quad(g, 0.0, s, weight="alg", wvar=(-alpha, 0.0))
        # p^0_t(., y) is a bump of width sqrt(t) around y; keep it inside one panel
        cuts = sorted({s, max(s, yv - 12 * s), max(s, yv + 12 * s)})
        far = sum(quad.quad(lambda xv: g(xv) * xv ** (-alpha), lo, hi) for lo, hi in zip(cuts, cuts[1:]))
        return c * (near + far)

    ys = np.asarray(y, dtype=float)
    if ys.ndim == 0:
        return one(float(ys))
    return np.array([one(float(v)) for v in ys.ravel()]).reshape(ys.shape)


def entrance_law_mass(alpha: float, t: float) -> float:
    """Total mass of the entrance law at time t: t^(-a/2) Gamma((1-a)/2) / (sqrt(pi) 2^a Gamma(1-a))."""
    _check_alpha(alpha)
    return t ** (-alpha / 2) * gamma_fn((1 - alpha) / 2) / (math.sqrt(math.pi) * 2**alpha * gamma_fn(1 - alpha))


# ------------------------------------------------ Levy and excursion measures


def levy_tail(alpha: float, eps: float) -> float:
    """nu([eps, inf)) for nu(du) = alpha u^(-1-alpha) du."""
    return eps ** (-alpha)


def excursion_constant(alpha: float) -> float:
    """Gamma((1-alpha)/2) / sqrt(pi 2^alpha)."""
    _check_alpha(alpha)
    return gamma_fn((1 - alpha) / 2) / math.sqrt(math.pi * 2**alpha)


def excursion_measure_tail(alpha: float, eps: float) -> float:
    """rho([eps, inf)): mass of excursion lengths >= eps per unit local time."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return excursion_constant(alpha) * eps ** (-alpha / 2)


def excursion_measure_tail_quadrature(alpha: float, eps: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """int_eps^inf int_0^inf u (2 pi z^3)^(-1/2) exp(-u^2/(2z)) alpha u^(-1-alpha) du dz, both by quadrature."""

    def inner(z):
        # substitute u = sqrt(z) w: integrand alpha w^-alpha exp(-w^2/2) / sqrt(2 pi) * z^(-1-alpha/2)
        g = lambda w: math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi)
        head = quad.quad(g, 0.0, 1.0, weight="alg", wvar=(-alpha, 0.0))
        tail = quad.quad(lambda w: g(w) * w ** (-alpha), 1.0, np.inf)
        return alpha * (head + tail) * z ** (-1 - alpha / 2)

    # outer in s = 1/z so the range is finite
    return quad.quad(lambda s: inner(1.0 / s) / (s * s), 0.0, 1.0 / eps)


# ------------------------------------------------ local-time estimators


def jump_count_local_time(path: LimitPath, eps: float, t: float | None = None) -> float:
    """eps^alpha * #{jumps of X on [0, t] with size >= eps}."""
    delta = path.subordinator.delta
    if path.subordinator.mode == "jumps" and delta is not None and delta > eps:
        raise InsufficientResolutionError(f"jumps below delta={delta} are not simulated; eps={eps}")
    t_end = path.times[-1] if t is None else t
    alpha = path.meta["alpha"]
    mask = (path.jump_times <= t_end + 1e-12) & (path.jump_sizes >= eps)
    return eps**alpha * int(mask.sum())


def excursion_intervals(path: LimitPath, threshold: float | None = None):
    """Excursions of X away from 0 read off the grid.

    An excursion is a maximal run of grid points with X > threshold; it ends at
    the first grid point where X <= threshold (default 2 sqrt(dt)).  Returns
    (start_times, lengths).
    """
    thr = 2 * math.sqrt(path.dt) if threshold is None else threshold
    above = path.X > thr
    # runs: start where above turns on, stop where it turns off
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return starts * path.dt, (stops - starts) * path.dt


def excursion_count_local_time(path: LimitPath, eps: float, t: float | None = None,
                               threshold: float | None = None) -> float:
    """eps^(alpha/2) * #{excursions started in [0, t] of length >= eps} / C(alpha).

    The excursion straddling t is counted with its length truncated at t, the
    same convention as the jump count (which includes the jump at L(t)).
    """
    if eps < 10 * path.dt:
        raise InsufficientResolutionError(f"dt={path.dt} too coarse for eps={eps}")
    alpha = path.meta["alpha"]
    t_end = path.times[-1] if t is None else t
    start, length = excursion_intervals(path, threshold)
    length = np.minimum(start + length, t_end) - start
    # the initial run from x0 > 0 is not an excursion from the zero set
    from_zero = ~((start == 0) & (path.x0 > 0))
    inside = (start <= t_end) & (length >= eps) & from_zero
    return eps ** (alpha / 2) * int(inside.sum()) / excursion_constant(alpha)
