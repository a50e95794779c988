"""Random-variate generation for the perturbed-walk experiments.

Every sampler takes an explicit random source.  Reproducible runs pass an
:class:`RngStream`, which maps ``(seed, index)`` to an independent Philox
generator, so replicate ``r`` of an experiment always reads stream ``r``
regardless of how replicates are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gamma as gamma_fn

__all__ = [
    "RngStream",
    "as_generator",
    "Rademacher",
    "CenteredUniform",
    "Gaussian",
    "CenteredTwoPoint",
    "Laplace",
    "Pareto",
    "ParetoLog",
    "StableParams",
    "xi_family_from_dict",
    "eta_family_from_dict",
    "sample_xi",
    "sample_eta",
    "normalizer_a",
    "sample_positive_stable",
    "subordinator_increment",
]


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by a master seed and an index."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        # children of stream (seed, i) live at seed' = hash of (seed, i); keeps
        # the (seed, index) pair the only state
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index, index))
        return RngStream(int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1)), index)


RandomSource = Union[RngStream, np.random.Generator, int, None]


def as_generator(source: RandomSource) -> np.random.Generator:
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, RngStream):
        return source.generator()
    return np.random.Generator(np.random.Philox(source))


# ---------------------------------------------------------------- xi families


@dataclass(frozen=True)
class Rademacher:
    """Symmetric +-1 steps."""

    family = "rademacher"

    @property
    def sigma(self) -> float:
        return 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return 2.0 * rng.integers(0, 2, size=n).astype(np.float64) - 1.0

    def to_dict(self) -> dict:
        return {"family": self.family}


@dataclass(frozen=True)
class CenteredUniform:
    halfwidth: float

    family = "uniform"

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")

    @property
    def sigma(self) -> float:
        return self.halfwidth / math.sqrt(3.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-self.halfwidth, self.halfwidth, size=n)

    def to_dict(self) -> dict:
        return {"family": self.family, "halfwidth": self.halfwidth}


@dataclass(frozen=True)
class Gaussian:
    sd: float = 1.0

    family = "gaussian"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    @property
    def sigma(self) -> float:
        return self.sd

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sd * rng.standard_normal(n)

    def to_dict(self) -> dict:
        return {"family": self.family, "sd": self.sd}


@dataclass(frozen=True)
class CenteredTwoPoint:
    """Value ``a`` with probability ``p``, ``b`` otherwise; requires p*a + (1-p)*b = 0."""

    p: float
    a: float
    b: float

    family = "two_point"

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.a == self.b:
            raise ValueError("degenerate two-point law")
        mean = self.p * self.a + (1 - self.p) * self.b
        if abs(mean) > 1e-12 * max(abs(self.a), abs(self.b)):
            raise ValueError(f"two-point law has mean {mean}, expected 0")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.p * self.a**2 + (1 - self.p) * self.b**2)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.where(rng.random(n) < self.p, self.a, self.b).astype(np.float64)

    def to_dict(self) -> dict:
        return {"family": self.family, "p": self.p, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Laplace:
    """Two-sided exponential steps.  Undershoots below a level are Exp(scale)."""

    scale: float = 1.0

    family = "laplace"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0) * self.scale

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.laplace(0.0, self.scale, size=n)

    def to_dict(self) -> dict:
        return {"family": self.family, "scale": self.scale}


# --------------------------------------------------------------- eta families


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class Pareto:
    """P{eta > x} = (x / xmin)^(-alpha) for x >= xmin."""

    alpha: float
    xmin: float = 1.0

    family = "pareto"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.xmin > 0:
            raise ValueError("xmin must be positive")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.xmin, 1.0, (np.maximum(x, self.xmin) / self.xmin) ** -self.alpha)

    def quantile_upper(self, u):
        """Inverse of the tail: the x with P{eta > x} = u."""
        return self.xmin * np.asarray(u, dtype=float) ** (-1.0 / self.alpha)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # 1 - random() lies in (0, 1]; avoids u = 0
        return self.quantile_upper(1.0 - rng.random(n))

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "xmin": self.xmin}


@dataclass(frozen=True)
class ParetoLog:
    """P{eta > x} = (x/xmin)^(-alpha) * (1 + log(x/xmin))^beta, x >= xmin.

    The tail is nonincreasing only when ``beta <= alpha``.
    """

    alpha: float
    xmin: float = 1.0
    beta: float = 1.0

    family = "pareto_log"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.xmin > 0:
            raise ValueError("xmin must be positive")
        if self.beta > self.alpha:
            raise ValueError("beta must not exceed alpha (tail would increase)")

    def _log_tail(self, s):
        return -self.alpha * s + self.beta * np.log1p(s)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        s = np.log(np.maximum(x, self.xmin) / self.xmin)
        return np.where(x < self.xmin, 1.0, np.exp(self._log_tail(s)))

    def quantile_upper(self, u, rel_tol: float = 1e-13):
        target = np.log(np.asarray(u, dtype=float))
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        while np.any(self._log_tail(hi) > target):
            hi = np.where(self._log_tail(hi) > target, 2.0 * hi, hi)
        # log-tail is monotone in s; plain bisection
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            above = self._log_tail(mid) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo <= rel_tol * np.maximum(hi, 1.0)):
                break
        return self.xmin * np.exp(0.5 * (lo + hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.quantile_upper(1.0 - rng.random(n))

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "xmin": self.xmin, "beta": self.beta}


_XI = {"rademacher": Rademacher, "uniform": CenteredUniform, "gaussian": Gaussian,
       "two_point": CenteredTwoPoint, "laplace": Laplace}
_ETA = {"pareto": Pareto, "pareto_log": ParetoLog}


def _from_dict(table, record):
    record = dict(record)
    try:
        cls = table[record.pop("family")]
    except KeyError as err:
        raise ValueError(f"unknown family {err.args[0]!r}") from None
    return cls(**record)


def xi_family_from_dict(record: dict):
    return _from_dict(_XI, record)


def eta_family_from_dict(record: dict):
    return _from_dict(_ETA, record)


def sample_xi(family, stream: RandomSource, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return family.sample(as_generator(stream), n)


def sample_eta(family, stream: RandomSource, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return family.sample(as_generator(stream), n)


def normalizer_a(family, v: float) -> float:
    """The level a(v) with v * P{eta > a(v)} = 1."""
    if not v > 0:
        raise ValueError("v must be positive")
    if v <= 1.0:
        # tail is 1 up to xmin; for v < 1 no exact root exists and xmin is the closest level
        return float(family.xmin)
    return float(family.quantile_upper(1.0 / v))


# ------------------------------------------------------------- stable laws


@dataclass(frozen=True)
class StableParams:
    """Drift-free alpha-stable subordinator with E exp(-z U(t)) = exp(-Gamma(1-alpha) t z^alpha)."""

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    def laplace_exponent(self, z):
        return gamma_fn(1.0 - self.alpha) * np.asarray(z, dtype=float) ** self.alpha

    def scale(self, dt: float) -> float:
        """U(dt) equals scale(dt) times a standard positive stable variate."""
        return (gamma_fn(1.0 - self.alpha) * dt) ** (1.0 / self.alpha)


def sample_positive_stable(alpha: float, stream: RandomSource, n: int) -> np.ndarray:
    """Standard positive stable draws, E exp(-z S) = exp(-z^alpha).

    Kanter's representation: with V uniform on (0, pi) and E unit exponential,
    S = sin(alpha V) / sin(V)^(1/alpha) * (sin((1-alpha) V) / E)^((1-alpha)/alpha).
    """
    _check_alpha(alpha)
    rng = as_generator(stream)
    v = math.pi * (1.0 - rng.random(n))  # (0, pi]
    v = np.where(v >= math.pi, math.pi * 0.5, v)
    e = rng.standard_exponential(n)
    a = np.sin(alpha * v) / np.sin(v) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * v) / e) ** ((1.0 - alpha) / alpha)
    return a * b


def subordinator_increment(params: StableParams, dt: float, stream: RandomSource, size=None):
    """Draw(s) distributed as U_alpha(dt)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = 1 if size is None else int(size)
    out = params.scale(dt) * sample_positive_stable(params.alpha, stream, n)
    return float(out[0]) if size is None else out
