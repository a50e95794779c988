"""Perturbed random walks and the bookkeeping of the equivalent gap-free model.

Three chains share one driving pair of sequences (xi_k) and (eta_k):

* ``TILDE``: positive -> add xi; nonpositive -> restart at eta.
* ``HAT``:   positive -> add xi, clamped at 0; exactly 0 -> restart at eta.
* ``GRAVE``: positive -> add xi; nonpositive -> add eta.

Index convention: ``xi[k]`` and ``eta[k]`` hold xi_{k+1}, eta_{k+1}, so the
transition S(k) -> S(k+1) reads position ``k`` of either array.

The equivalent model ``S*`` consumes the two sequences without gaps.  Its
identity S*(lambda(n)) = R(n) is checked exactly by running the model over
dyadic integers (every float is m * 2^e, so all draws are rescaled to
integers by one common power of two and added without rounding).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np

__all__ = [
    "ChainKind",
    "InsufficientDataError",
    "step_chain",
    "ChainTrajectory",
    "run_chain",
    "chain_values_at",
    "CoupledValues",
    "coupled_chain_values",
    "RandomWalk",
    "first_passage_nu",
    "running_neg_min",
    "compose_R",
    "EquivalentModel",
    "run_equivalent_model",
    "IdentityCheck",
    "verify_time_change_identity",
    "lambda_sup_deviation",
    "overshoot_below_zero",
    "trajectory_to_csv",
]


class ChainKind(enum.IntEnum):
    TILDE = 0
    HAT = 1
    GRAVE = 2

    @classmethod
    def parse(cls, name) -> "ChainKind":
        if isinstance(name, ChainKind):
            return name
        return cls[str(name).upper()]


class InsufficientDataError(RuntimeError):
    """Raised when a finite sample of draws cannot answer the query."""


def step_chain(kind, current: float, xi: float, eta: float) -> float:
    """One transition of the chain of the given kind."""
    kind = ChainKind.parse(kind)
    if not eta > 0:
        raise ValueError("eta must be positive")
    if kind is ChainKind.TILDE:
        return current + xi if current > 0 else eta
    if kind is ChainKind.HAT:
        if current < 0:
            raise ValueError(f"HAT chain cannot sit at negative state {current}")
        if current == 0:
            return eta
        nxt = current + xi
        return nxt if nxt > 0 else 0.0
    return current + xi if current > 0 else current + eta


@numba.njit(cache=True, nogil=True)
def _step(kind, s, xi, eta):
    if kind == 0:
        if s > 0:
            return s + xi, 1
        return eta, 0
    if kind == 1:
        if s == 0:
            return eta, 0
        nxt = s + xi
        if nxt > 0:
            return nxt, 1
        return 0.0, 1
    if s > 0:
        return s + xi, 1
    return s + eta, 0


@numba.njit(cache=True, nogil=True)
def _chain_path(kind, x0, xi, eta):
    n = xi.shape[0]
    out = np.empty(n + 1)
    out[0] = x0
    s = x0
    used_xi = 0
    for k in range(n):
        s, took_xi = _step(kind, s, xi[k], eta[k])
        used_xi += took_xi
        out[k + 1] = s
    return out, used_xi


@numba.njit(cache=True, nogil=True)
def _chain_at(kind, x0, xi, eta, idx):
    # idx sorted ascending, entries in [0, len(xi)]
    out = np.empty(idx.shape[0])
    s = x0
    j = 0
    while j < idx.shape[0] and idx[j] == 0:
        out[j] = s
        j += 1
    for k in range(xi.shape[0]):
        if j >= idx.shape[0]:
            break
        s, _ = _step(kind, s, xi[k], eta[k])
        while j < idx.shape[0] and idx[j] == k + 1:
            out[j] = s
            j += 1
    return out


@dataclass(frozen=True)
class ChainTrajectory:
    """A stored chain path with its visits to (-inf, 0] and overshoots there."""

    kind: ChainKind
    x0: float
    values: np.ndarray
    crossing_times: np.ndarray
    overshoots: np.ndarray
    xi_draws_used: int
    eta_draws_used: int
    thin: int = 1

    @property
    def n_steps(self) -> int:
        return (len(self.values) - 1) * self.thin


def run_chain(kind, xi, eta, x0: float = 0.0, thin: int = 1) -> ChainTrajectory:
    """Run ``len(xi)`` transitions.  ``thin > 1`` keeps every thin-th state only."""
    kind = ChainKind.parse(kind)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    if xi.shape != eta.shape or xi.ndim != 1 or len(xi) < 1:
        raise ValueError("xi and eta must be 1-d arrays of equal length >= 1")
    if kind is ChainKind.HAT and x0 < 0:
        raise ValueError("HAT chain must start at a nonnegative state")
    if np.any(eta <= 0):
        raise ValueError("eta draws must be positive")
    values, used_xi = _chain_path(int(kind), float(x0), xi, eta)
    crossing = np.flatnonzero(values <= 0)
    n = len(xi)
    return ChainTrajectory(
        kind=kind,
        x0=float(x0),
        values=values[::thin].copy() if thin > 1 else values,
        crossing_times=crossing,
        overshoots=0.0 - values[crossing],
        xi_draws_used=int(used_xi),
        eta_draws_used=int(n - used_xi),
        thin=int(thin),
    )


def chain_values_at(kind, xi, eta, indices, x0: float = 0.0) -> np.ndarray:
    """Chain states S(i) for the requested step indices, without storing the path."""
    kind = ChainKind.parse(kind)
    indices = np.asarray(indices, dtype=np.int64)
    order = np.argsort(indices, kind="stable")
    idx = indices[order]
    if len(idx) and (idx[0] < 0 or idx[-1] > len(xi)):
        raise ValueError("indices out of range")
    vals = _chain_at(int(kind), float(x0), np.ascontiguousarray(xi, dtype=np.float64),
                     np.ascontiguousarray(eta, dtype=np.float64), idx)
    out = np.empty_like(vals)
    out[order] = vals
    return out


@numba.njit(cache=True, nogil=True)
def _coupled_at(x0, xi, eta, idx):
    # all three kinds on shared draws, plus the running Hat/Tilde gap and max|xi|
    out = np.empty((3, idx.shape[0]))
    s = np.array([x0, x0, x0])
    gap = 0.0
    big = 0.0
    j = 0
    while j < idx.shape[0] and idx[j] == 0:
        out[:, j] = s
        j += 1
    for k in range(xi.shape[0]):
        if j >= idx.shape[0]:
            break
        for kind in range(3):
            s[kind], _ = _step(kind, s[kind], xi[k], eta[k])
        big = max(big, abs(xi[k]))
        gap = max(gap, abs(s[1] - s[0]))
        while j < idx.shape[0] and idx[j] == k + 1:
            out[:, j] = s
            j += 1
    return out, gap, big


class CoupledValues(NamedTuple):
    """States of the Tilde, Hat and Grave chains driven by the same draws."""

    values: np.ndarray  # shape (3, len(indices)), rows in ChainKind order
    hat_tilde_gap: float  # max over steps of |Hat - Tilde|
    max_abs_xi: float  # max |xi_k| over the same steps


def coupled_chain_values(xi, eta, indices, x0: float = 0.0) -> CoupledValues:
    """All three chains at the requested indices in one pass over the draws.

    The gap statistics run up to the largest requested index.
    """
    indices = np.asarray(indices, dtype=np.int64)
    order = np.argsort(indices, kind="stable")
    idx = indices[order]
    if len(idx) and (idx[0] < 0 or idx[-1] > len(xi)):
        raise ValueError("indices out of range")
    if x0 < 0:
        raise ValueError("chains start at a nonnegative state")
    vals, gap, big = _coupled_at(float(x0), np.ascontiguousarray(xi, dtype=np.float64),
                                 np.ascontiguousarray(eta, dtype=np.float64), idx)
    out = np.empty_like(vals)
    out[:, order] = vals
    return CoupledValues(out, float(gap), float(big))


# ------------------------------------------------------------ random walks


class RandomWalk:
    """Partial sums S(0) = 0, S(k) = X_1 + ... + X_k."""

    def __init__(self, increments):
        inc = np.asarray(increments)
        self.increments = inc
        self.partial_sums = np.concatenate([np.zeros(1, dtype=inc.dtype), np.cumsum(inc)])

    @classmethod
    def from_sums(cls, sums) -> "RandomWalk":
        """Build from S(1), S(2), ... (S(0) = 0 implied)."""
        sums = np.asarray(sums)
        return cls(np.diff(np.concatenate([np.zeros(1, dtype=sums.dtype), sums])))

    def __len__(self) -> int:
        return len(self.increments)

    def __call__(self, k):
        return self.partial_sums[k]


def first_passage_nu(walk: RandomWalk, t) -> int:
    """min{k >= 1 : S(k) > t}."""
    sums = walk.partial_sums[1:]
    hits = np.flatnonzero(sums > t)
    if len(hits) == 0:
        raise InsufficientDataError(f"walk of length {len(walk)} never exceeds {t}")
    return int(hits[0]) + 1


def running_neg_min(walk: RandomWalk, n: int | None = None) -> np.ndarray:
    """m(j) = -min_{0<=k<=j} S(k) for j = 0..n."""
    sums = walk.partial_sums if n is None else walk.partial_sums[: n + 1]
    return -np.minimum.accumulate(sums)


def compose_R(s_xi: RandomWalk, zeta, n: int | None = None) -> np.ndarray:
    """R(j) = S_xi(j) + S_zeta(nu_zeta(m(j))), j = 0..n."""
    m = running_neg_min(s_xi, n)
    zw = zeta if isinstance(zeta, RandomWalk) else RandomWalk(zeta)
    zsums = zw.partial_sums[1:]
    if len(zsums) and np.any(np.diff(zsums) <= 0):
        raise ValueError("zeta increments must be positive")
    # zsums increasing: nu(m) - 1 = number of partial sums <= m
    pos = np.searchsorted(zsums, m, side="right")
    if len(pos) and pos.max() >= len(zsums):
        raise InsufficientDataError("not enough zeta draws to pass the running minimum")
    return s_xi.partial_sums[: len(m)] + zsums[pos]


# -------------------------------------------------------- equivalent model


def _to_dyadic(*arrays):
    """Rescale float arrays to Python ints by a single common power of two."""
    ratios = [[float(x).as_integer_ratio() for x in a] for a in arrays]
    shift = max((d.bit_length() - 1 for r in ratios for _, d in r), default=0)
    out = [np.array([num << (shift - (den.bit_length() - 1)) for num, den in r] or [], dtype=object)
           for r in ratios]
    return out, shift


@dataclass
class EquivalentModel:
    """S*, its bookkeeping sequences and the time-changed sequence R.

    Sequences are float arrays, or object arrays of Python ints when built with
    ``exact=True``; divide by ``scale`` to return to the original units.
    """

    s_star: np.ndarray
    T: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    s_xi: np.ndarray
    m: np.ndarray
    R: np.ndarray
    max_abs_xi: np.ndarray
    scale: int = 1
    exact: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.R) - 1

    def as_float(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        if self.exact:
            return np.array([float(x) / self.scale for x in arr]) if len(arr) else np.zeros(0)
        return np.asarray(arr, dtype=float)


def run_equivalent_model(xi, eta, n: int, exact: bool = False) -> EquivalentModel:
    """Run S* from 0 until lambda(n) is reached, then build R(0..n).

    ``xi`` must hold at least n draws and ``eta`` at least n + 1.
    S*(k+1) = S*(k) + xi_{k+1-T(k+1)} if S*(k) > 0, else eta_{T(k+1)}.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if len(xi) < n or len(eta) < n + 1:
        raise InsufficientDataError("need len(xi) >= n and len(eta) >= n + 1")
    if np.any(eta <= 0):
        raise ValueError("eta draws must be positive")
    xi, eta = xi[:n], eta[: n + 1]
    if exact:
        (xi_v, eta_v), shift = _to_dyadic(xi, eta)
        xs, es = list(xi_v), list(eta_v)
        zero = 0
        scale = 1 << shift
    else:
        xs, es = xi.tolist(), eta.tolist()
        zero = 0.0
        scale = 1

    s = [zero]
    T = [1]
    nonpos = 0  # #{1 <= j <= k : S*(j) <= 0}
    lam = []
    k = 0
    while len(lam) <= n:
        t_next = 1 + nonpos
        if s[k] > 0:
            val = s[k] + xs[k - t_next]  # xi index (k+1) - T(k+1), 1-based
        else:
            val = es[t_next - 1]
        k += 1
        s.append(val)
        T.append(t_next)
        if val <= 0:
            nonpos += 1
        else:
            d = k - t_next
            while len(lam) <= min(d, n):
                lam.append(k)

    s_star = np.array(s, dtype=object if exact else float)
    T_arr = np.array(T, dtype=np.int64)
    theta = np.concatenate([[0], np.flatnonzero(s_star[1:] <= 0) + 1]).astype(np.int64)
    theta = theta[theta + 1 < len(s_star)]
    gamma = -s_star[theta]
    zeta = s_star[theta + 1] + gamma

    if exact:
        s_xi = np.array([zero] + list(np.cumsum(np.array(xs, dtype=object))), dtype=object)
        m = -np.minimum.accumulate(s_xi)
    else:
        s_xi = np.concatenate([[0.0], np.cumsum(xs)])
        m = -np.minimum.accumulate(s_xi)
    R = _compose_R_generic(s_xi, m, zeta)
    max_abs = np.maximum.accumulate(np.abs(np.concatenate([[0.0], xi])))
    return EquivalentModel(
        s_star=s_star, T=T_arr, lam=np.array(lam, dtype=np.int64), theta=theta,
        gamma=gamma, zeta=zeta, eta=np.array(es[: len(zeta)], dtype=object if exact else float),
        s_xi=s_xi, m=m, R=R, max_abs_xi=max_abs, scale=scale, exact=exact,
        meta={"n_steps": len(s_star) - 1},
    )


def _compose_R_generic(s_xi, m, zeta):
    # same as compose_R but keeps object (exact int) arrays intact
    zsums = np.cumsum(zeta) if len(zeta) else zeta
    out = np.empty(len(m), dtype=s_xi.dtype)
    j = 0
    for i, level in enumerate(m):
        # m is nondecreasing so the passage index only moves forward
        while j < len(zsums) and not zsums[j] > level:
            j += 1
        if j >= len(zsums):
            raise InsufficientDataError("not enough zeta draws to pass the running minimum")
        out[i] = s_xi[i] + zsums[j]
    return out


class IdentityCheck(NamedTuple):
    ok: bool
    first_failure: int | None


def verify_time_change_identity(model: EquivalentModel, atol: float = 0.0) -> IdentityCheck:
    """Check S*(lambda(j)) == R(j) for every j; report the first index that fails."""
    lhs = model.s_star[model.lam]
    for j, (a, b) in enumerate(zip(lhs, model.R)):
        if atol == 0.0:
            if a != b:
                return IdentityCheck(False, j)
        elif abs(float(a - b)) / model.scale > atol:
            return IdentityCheck(False, j)
    return IdentityCheck(True, None)


def lambda_sup_deviation(model: EquivalentModel, v: float, horizon: float = 1.0) -> float:
    """sup_{t <= horizon} |lambda(floor(v t)) / v - t|, evaluated on the jump points of the floor."""
    top = int(np.floor(v * horizon))
    if top > model.n:
        raise InsufficientDataError(f"model covers n <= {model.n}, need {top}")
    j = np.arange(top + 1)
    lam = model.lam[: top + 1] / v
    # on [j/v, (j+1)/v) the deviation is largest at one of the two ends
    left = np.abs(lam - j / v)
    right = np.abs(lam - np.minimum((j + 1) / v, horizon))
    return float(max(left.max(), right.max()))


def overshoot_below_zero(xi_family, levels, rng: np.random.Generator, max_steps: int = 10**7) -> np.ndarray:
    """gamma = -(first value <= 0) of the xi-walk started at each level > 0.

    Exact shortcuts: Rademacher walks step through every integer offset, so the
    walk first lands at level - ceil(level); Laplace steps are memoryless below
    any threshold, so the undershoot is Exp(scale).  Other families are walked.
    """
    levels = np.asarray(levels, dtype=float)
    name = getattr(xi_family, "family", "")
    if name == "rademacher":
        return np.ceil(levels) - levels
    if name == "laplace":
        return rng.exponential(xi_family.scale, size=levels.shape)
    out = np.empty_like(levels)
    for i, level in enumerate(levels):
        pos, steps = level, 0
        while pos > 0:
            block = xi_family.sample(rng, 4096)
            path = pos + np.cumsum(block)
            hit = np.flatnonzero(path <= 0)
            if len(hit):
                pos = path[hit[0]]
                break
            pos = path[-1]
            steps += 4096
            if steps > max_steps:
                raise InsufficientDataError(f"walk from {level} did not reach 0 in {max_steps} steps")
        out[i] = -pos
    return out


def trajectory_to_csv(traj: ChainTrajectory, path) -> None:
    """Columns: n, value, T, lambda_inverse_flag (1 where n = lambda(j) for some j)."""
    values = traj.values
    full = traj.thin == 1
    nonpos = (values[1:] <= 0) if full else None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "value", "T", "lambda_inverse_flag"])
        count = 0
        last_d = -1
        for i, val in enumerate(values):
            n = i * traj.thin
            if full:
                T = 1 + count
                if i >= 1 and nonpos[i - 1]:
                    count += 1
                d = n - T
                flag = int(n >= 1 and val > 0 and d > last_d)
                if flag:
                    last_d = d
                w.writerow([n, repr(float(val)), T, flag])
            else:
                w.writerow([n, repr(float(val)), "", ""])
