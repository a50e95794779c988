"""The limit process X(t) = x + W(t) + U(U^{-1}((M(t) - x)^+)) on a time grid.

W is a Brownian grid path, M its running maximum of -W, U an alpha-stable
subordinator independent of W and U^{-1}(y) = inf{s : U(s) > y}.  The local
time at zero is L(t) = U^{-1}((M(t) - x)^+).

Two subordinator representations are available:

``grid``   cumulative exact increments on a mesh of the subordinator's own
           time axis; marginals are exact at mesh points.
``jumps``  atoms (t_k, u_k) of a Poisson measure with intensity
           Leb x alpha u^{-1-alpha} du restricted to u >= delta; the dropped
           small jumps carry mean mass alpha delta^(1-alpha) / (1-alpha)
           per unit of subordinator time.

Both are extended lazily in fixed-size blocks, so the realised path depends
only on the stream and never on the levels queried.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .chains import ChainKind, chain_values_at
from .sampling import RandomSource, RngStream, StableParams, as_generator, sample_positive_stable

__all__ = [
    "LevelNotCoveredError",
    "BrownianGrid",
    "simulate_brownian",
    "refine_brownian",
    "SubordinatorPath",
    "inverse_subordinator",
    "overshoot_compose",
    "LimitPath",
    "build_limit_path",
    "reflection_residual",
    "sample_w_min",
    "sample_marginal",
    "sample_overshoot_ratio",
    "scaled_chain_marginal",
    "scaled_chain_marginals",
    "limit_path_to_csv",
    "jump_log_to_csv",
]


class LevelNotCoveredError(RuntimeError):
    """The stored subordinator path never exceeds the queried level."""


# ----------------------------------------------------------------- Brownian


@dataclass(frozen=True)
class BrownianGrid:
    dt: float
    W: np.ndarray
    M: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.W))

    @property
    def horizon(self) -> float:
        return self.dt * (len(self.W) - 1)


def _running_neg_min(w):
    return np.maximum.accumulate(-w)


def simulate_brownian(T: float, dt: float, stream: RandomSource) -> BrownianGrid:
    if not dt > 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    n = int(math.ceil(T / dt - 1e-9))
    rng = as_generator(stream)
    w = np.empty(n + 1)
    w[0] = 0.0
    np.cumsum(math.sqrt(dt) * rng.standard_normal(n), out=w[1:])
    return BrownianGrid(dt=dt, W=w, M=_running_neg_min(w))


def refine_brownian(grid: BrownianGrid, stream: RandomSource) -> BrownianGrid:
    """Halve the mesh by Brownian-bridge midpoints; existing points are kept."""
    rng = as_generator(stream)
    w = grid.W
    mid = 0.5 * (w[:-1] + w[1:]) + math.sqrt(grid.dt / 4.0) * rng.standard_normal(len(w) - 1)
    out = np.empty(2 * len(w) - 1)
    out[0::2] = w
    out[1::2] = mid
    return BrownianGrid(dt=grid.dt / 2.0, W=out, M=_running_neg_min(out))


# -------------------------------------------------------------- subordinator


class SubordinatorPath:
    """Nondecreasing pure-jump path stored as (time, value-after) pairs.

    ``times[i]`` are increasing and ``values[i] = U(times[i])``; U is constant
    between stored times in ``jumps`` mode and is read at mesh points in
    ``grid`` mode.
    """

    def __init__(self, times, values, mode: str, alpha: float | None = None,
                 h: float | None = None, delta: float | None = None, rng=None,
                 block: float | int | None = None):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.mode = mode
        self.alpha = alpha
        self.h = h
        self.delta = delta
        self._rng = rng
        self._block = block
        self._horizon = float(self.times[-1]) if len(self.times) else 0.0

    # -- constructors
    @classmethod
    def grid(cls, alpha: float, h: float, stream: RandomSource, block: int = 4096) -> "SubordinatorPath":
        path = cls(np.zeros(0), np.zeros(0), "grid", alpha=alpha, h=h,
                   rng=as_generator(stream), block=block)
        path._extend()
        return path

    @classmethod
    def jump_measure(cls, alpha: float, delta: float, stream: RandomSource,
                     block: float = 1.0) -> "SubordinatorPath":
        if not delta > 0:
            raise ValueError("delta must be positive")
        path = cls(np.zeros(0), np.zeros(0), "jumps", alpha=alpha, delta=delta,
                   rng=as_generator(stream), block=block)
        path._extend()
        return path

    @classmethod
    def from_jumps(cls, jumps) -> "SubordinatorPath":
        """Fixed path from (time, size) atoms; queries beyond its range raise."""
        jumps = sorted(jumps)
        t = np.array([j[0] for j in jumps], dtype=float)
        u = np.array([j[1] for j in jumps], dtype=float)
        return cls(t, np.cumsum(u), "jumps")

    # -- extension
    @property
    def extendable(self) -> bool:
        return self._rng is not None

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.values]))

    def dropped_mass_rate(self) -> float:
        """Mean mass per unit time of the jumps below delta that are not simulated."""
        if self.mode != "jumps" or self.delta is None:
            return 0.0
        a = self.alpha
        return a * self.delta ** (1.0 - a) / (1.0 - a)

    def _extend(self) -> None:
        rng = self._rng
        last = self.values[-1] if len(self.values) else 0.0
        if self.mode == "grid":
            k0 = len(self.times)
            inc = StableParams(self.alpha).scale(self.h) * sample_positive_stable(self.alpha, rng, self._block)
            t = self.h * np.arange(k0 + 1, k0 + self._block + 1)
            v = last + np.cumsum(inc)
            start = k0 * self.h
        else:
            rate = self.delta ** (-self.alpha)
            start = self._horizon
            k = rng.poisson(rate * self._block)
            t = start + np.sort(rng.random(k)) * self._block
            u = self.delta * (1.0 - rng.random(k)) ** (-1.0 / self.alpha)
            v = last + np.cumsum(u)
        self.times = np.concatenate([self.times, t])
        self.values = np.concatenate([self.values, v])
        self._horizon = start + (self._block * (self.h if self.mode == "grid" else 1.0))

    def _cover(self, level: float) -> None:
        while not (len(self.values) and self.values[-1] > level):
            if not self.extendable:
                raise LevelNotCoveredError(f"path never exceeds level {level}")
            self._extend()

    def _index(self, y):
        y = np.asarray(y, dtype=float)
        if y.size:
            self._cover(float(np.max(y)))
        return np.searchsorted(self.values, y, side="right")

    # -- queries
    def inverse(self, y):
        """U^{-1}(y) = inf{s : U(s) > y}."""
        i = self._index(y)
        return self.times[i]

    def overshoot(self, y):
        """U(U^{-1}(y)), the first value strictly above y."""
        i = self._index(y)
        return self.values[i]

    def value_at(self, s):
        i = np.searchsorted(self.times, np.asarray(s, dtype=float), side="right")
        return np.where(i > 0, self.values[np.maximum(i - 1, 0)], 0.0)


def inverse_subordinator(path: SubordinatorPath, y):
    out = path.inverse(y)
    return float(out) if np.ndim(out) == 0 else out


def overshoot_compose(path: SubordinatorPath, y):
    out = path.overshoot(y)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- limit path


@dataclass
class LimitPath:
    x0: float
    dt: float
    W: np.ndarray
    M: np.ndarray
    y: np.ndarray
    L: np.ndarray
    O: np.ndarray
    X: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    subordinator: SubordinatorPath
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.X))

    def index_at(self, t: float) -> int:
        return min(int(round(t / self.dt)), len(self.X) - 1)


def build_limit_path(x0: float, T: float, dt: float, alpha: float, stream: RandomSource,
                     mode: str = "grid", h: float | None = None, delta: float = 1e-4,
                     brownian: BrownianGrid | None = None,
                     subordinator: SubordinatorPath | None = None) -> LimitPath:
    """Evaluate the representation of X on a Brownian grid.

    ``stream`` is split into two children: 0 drives W, 1 drives U.  Pass
    ``brownian`` or ``subordinator`` to reuse a fixed component.
    """
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    if isinstance(stream, RngStream):
        w_src, u_src = stream.child(0), stream.child(1)
    else:
        g = as_generator(stream)
        w_src, u_src = g, g
    bm = brownian if brownian is not None else simulate_brownian(T, dt, w_src)
    if subordinator is None:
        if mode == "grid":
            subordinator = SubordinatorPath.grid(alpha, h if h is not None else 1e-3, u_src)
        elif mode == "jumps":
            subordinator = SubordinatorPath.jump_measure(alpha, delta, u_src)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    W, M = bm.W, bm.M
    y = np.maximum(M - x0, 0.0)
    pos = y > 0
    L = np.zeros_like(y)
    O = np.zeros_like(y)
    if pos.any():
        L[pos] = subordinator.inverse(y[pos])
        O[pos] = subordinator.overshoot(y[pos])
    # same as x0 + W + O, arranged so X >= 0 survives rounding
    X = np.where(pos, (W + M) + (O - y), x0 + W)

    if subordinator.mode == "jumps" and len(subordinator.times):
        k = np.searchsorted(subordinator.times, L[-1], side="right")
        atom_t = subordinator.times[:k]
        jump_idx = np.searchsorted(L, atom_t, side="left")
        jump_times = jump_idx * bm.dt
        jump_sizes = subordinator.sizes[:k]
    else:
        dO = np.diff(O)
        idx = np.flatnonzero(dO > 0) + 1
        jump_times = idx * bm.dt
        jump_sizes = dO[idx - 1]
    return LimitPath(x0=float(x0), dt=bm.dt, W=W, M=M, y=y, L=L, O=O, X=X,
                     jump_times=jump_times, jump_sizes=jump_sizes, subordinator=subordinator,
                     meta={"alpha": alpha, "mode": subordinator.mode, "h": subordinator.h,
                           "delta": subordinator.delta,
                           "dropped_mass_rate": subordinator.dropped_mass_rate()})


def reflection_residual(path: LimitPath, eps: float) -> float:
    """sum_i 1{X(t_i) > eps} (L(t_{i+1}) - L(t_i)); vanishes for the exact process."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    dL = np.diff(path.L)
    return float(np.sum(dL[path.X[:-1] > eps]))


# ------------------------------------------------------ exact marginal laws


def sample_w_min(t, rng: np.random.Generator):
    """Exact draws of (W(t), M(t)) with M(t) = -min_{s<=t} W(s); ``t`` is an array."""
    t = np.asarray(t, dtype=float)
    b = np.sqrt(t) * rng.standard_normal(t.shape)  # B = -W
    e = rng.standard_exponential(t.shape)
    # max of a Brownian bridge from 0 to b over [0, t]
    m = 0.5 * (b + np.sqrt(b * b + 2.0 * t * e))
    return -b, m


def sample_overshoot_ratio(alpha: float, rng: np.random.Generator, n) -> np.ndarray:
    """U(U^{-1}(1)); its reciprocal is Beta(alpha, 1 - alpha)."""
    return 1.0 / rng.beta(alpha, 1.0 - alpha, size=n)


def sample_marginal(alpha: float, x0: float, t, n: int | None, stream: RandomSource) -> np.ndarray:
    """Exact draws of X(t) started at x0, using the scaling U(U^{-1}(y)) = y U(U^{-1}(1)).

    ``t`` may be a scalar (then ``n`` draws) or an array of times (one draw each).
    """
    rng = as_generator(stream)
    t_arr = np.full(n, float(t)) if np.ndim(t) == 0 else np.asarray(t, dtype=float)
    w, m = sample_w_min(t_arr, rng)
    ratio = sample_overshoot_ratio(alpha, rng, t_arr.shape)
    y = np.maximum(m - x0, 0.0)
    return np.where(y > 0, (w + m) + y * (ratio - 1.0), x0 + w)


# ------------------------------------------------------------ scaled chains


def _chain_draws(xi_family, eta_family, n: int, stream: RandomSource):
    g = as_generator(stream)
    n = max(n, 1)
    return xi_family.sample(g, n), eta_family.sample(g, n)


def scaled_chain_marginal(kind, xi_family, eta_family, v: float, t: float,
                          stream: RandomSource, x: float = 0.0) -> float:
    """One draw of S(floor(v t)) / (sigma sqrt(v)), chain started at x sigma sqrt(v)."""
    vals = scaled_chain_marginals([kind], xi_family, eta_family, v, [t], stream, x=x)
    return float(vals[0][0])


def scaled_chain_marginals(kinds, xi_family, eta_family, v: float, ts, stream: RandomSource,
                           x: float = 0.0) -> list[np.ndarray]:
    """Coupled draws for several chain kinds and times from one pair of draw sequences.

    Returns one array per kind with the scaled value at each time in ``ts``.
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    norm = xi_family.sigma * math.sqrt(v)
    idx = np.floor(np.asarray(ts, dtype=float) * v + 1e-9).astype(np.int64)
    n = int(idx.max()) if len(idx) else 0
    xi, eta = _chain_draws(xi_family, eta_family, n, stream)
    x0 = x * norm
    return [chain_values_at(ChainKind.parse(k), xi, eta, idx, x0=x0) / norm for k in kinds]


# ---------------------------------------------------------------- dump files


def limit_path_to_csv(path: LimitPath, fname) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "W", "M", "L", "X"])
        for row in zip(path.times, path.W, path.M, path.L, path.X):
            w.writerow([repr(float(v)) for v in row])


def jump_log_to_csv(path: LimitPath, fname) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "size"])
        for row in zip(path.jump_times, path.jump_sizes):
            w.writerow([repr(float(v)) for v in row])
