"""Cadlag step functions, monotone time changes and the Skorokhod J1 distance.

Arithmetic is plain Python, so inputs given as :class:`fractions.Fraction`
compose and compare exactly.

The J1 distance between step functions f, g on [0, T] is

    inf over increasing homeomorphisms lam of max(sup|lam - id|, sup|f o lam - g|).

Only the placement of f's jumps matters: f o lam jumps at s_i = lam^{-1}(a_i),
and lam can be taken piecewise linear through the points (s_i, a_i), so
sup|lam - id| = max|s_i - a_i|.  Feasibility of a radius r is then a path
problem on the lattice of states (k, j) = (#f-jumps placed, #g-jumps passed);
every visited state needs |F_k - G_j| <= r, and placing jumps as early as
possible is optimal.  The optimum is one of finitely many candidate radii, so
a binary search over them gives the exact distance.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "RangeError",
    "CadlagStepFunction",
    "TimeChange",
    "compose",
    "sup_distance",
    "J1Result",
    "j1_distance",
    "placement_cost",
    "HarnessReport",
    "vanishes",
    "CompositionInstance",
    "composition_instance",
    "lemma_composition_harness",
    "TimeChangeInstance",
    "timechange_instance",
    "lemma_timechange_harness",
    "evaluation_gaps",
]


class RangeError(ValueError):
    """A time change leaves the domain of the function it is composed with."""


def _is_exact(*xs) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in xs)


# ------------------------------------------------------------ step functions


@dataclass(frozen=True)
class CadlagStepFunction:
    """Right-continuous step function on [0, horizon].

    ``values[i]`` holds on [breakpoints[i], breakpoints[i+1]).  Breakpoints
    where the value does not change are dropped on construction, so
    ``breakpoints[1:]`` is exactly the discontinuity set.
    """

    breakpoints: tuple
    values: tuple
    horizon: float

    def __post_init__(self):
        bp, vals = tuple(self.breakpoints), tuple(self.values)
        if len(bp) != len(vals) or not bp:
            raise ValueError("need one value per breakpoint and at least one breakpoint")
        if bp[0] != 0:
            raise ValueError("first breakpoint must be 0")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bp[-1] > self.horizon:
            raise ValueError("breakpoints must lie in [0, horizon]")
        keep = [0] + [i for i in range(1, len(bp)) if vals[i] != vals[i - 1]]
        object.__setattr__(self, "breakpoints", tuple(bp[i] for i in keep))
        object.__setattr__(self, "values", tuple(vals[i] for i in keep))

    @classmethod
    def constant(cls, value, horizon) -> "CadlagStepFunction":
        return cls((0,), (value,), horizon)

    @classmethod
    def indicator(cls, start, horizon, height=1) -> "CadlagStepFunction":
        """height * 1_[start, inf) restricted to [0, horizon]."""
        if start <= 0:
            return cls.constant(height, horizon)
        return cls((0, start), (0 * height, height), horizon)

    @classmethod
    def from_pairs(cls, pairs, horizon) -> "CadlagStepFunction":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), horizon)

    def __call__(self, t):
        if t < 0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        return self.values[bisect.bisect_right(self.breakpoints, t) - 1]

    def left_limit(self, t):
        if t <= 0:
            return self.values[0]
        return self.values[bisect.bisect_left(self.breakpoints, t) - 1]

    @property
    def jump_times(self) -> tuple:
        return self.breakpoints[1:]

    def disc(self) -> frozenset:
        return frozenset(self.breakpoints[1:])

    def restrict(self, horizon) -> "CadlagStepFunction":
        k = bisect.bisect_right(self.breakpoints, horizon)
        return CadlagStepFunction(self.breakpoints[:k], self.values[:k], horizon)

    def with_horizon(self, horizon) -> "CadlagStepFunction":
        if horizon < self.horizon:
            return self.restrict(horizon)
        return CadlagStepFunction(self.breakpoints, self.values, horizon)

    def map_values(self, fn: Callable) -> "CadlagStepFunction":
        return CadlagStepFunction(self.breakpoints, tuple(fn(v) for v in self.values), self.horizon)

    def to_json(self) -> str:
        return json.dumps({"horizon": _jsonable(self.horizon),
                           "steps": [[_jsonable(t), _jsonable(v)] for t, v in zip(self.breakpoints, self.values)]})

    @classmethod
    def from_json(cls, text: str, horizon=None) -> "CadlagStepFunction":
        data = json.loads(text)
        if isinstance(data, list):
            if horizon is None:
                raise ValueError("a bare list of pairs needs an explicit horizon")
            return cls.from_pairs(data, horizon)
        return cls.from_pairs(data["steps"], data["horizon"] if horizon is None else horizon)


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x) if x.denominator != 1 else int(x)
    return x


# -------------------------------------------------------------- time changes


@dataclass(frozen=True)
class TimeChange:
    """Nondecreasing cadlag piecewise-linear map on [0, horizon].

    On [knots[i], knots[i+1]) it runs linearly from ``left[i]`` up to the left
    limit ``right[i]``; jumps happen where ``right[i] < left[i+1]``.
    ``terminal`` is the value at the horizon.  Step functions are the special
    case left == right.
    """

    knots: tuple
    left: tuple
    right: tuple
    terminal: float

    def __post_init__(self):
        k, lo, hi = tuple(self.knots), tuple(self.left), tuple(self.right)
        if len(k) < 2 or len(lo) != len(k) - 1 or len(hi) != len(k) - 1:
            raise ValueError("need m+1 knots and m left/right values")
        if k[0] != 0 or any(a >= b for a, b in zip(k, k[1:])):
            raise ValueError("knots must start at 0 and increase strictly")
        seq = [v for pair in zip(lo, hi) for v in pair] + [self.terminal]
        if any(a > b for a, b in zip(seq, seq[1:])):
            raise ValueError("time change must be nondecreasing")
        if seq[0] < 0:
            raise ValueError("time change must be nonnegative")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "left", lo)
        object.__setattr__(self, "right", hi)

    @property
    def horizon(self):
        return self.knots[-1]

    @classmethod
    def identity(cls, horizon) -> "TimeChange":
        return cls((0, horizon), (0 * horizon,), (horizon,), horizon)

    @classmethod
    def linear(cls, knots, values) -> "TimeChange":
        """Continuous piecewise-linear interpolation of (knots, values)."""
        knots, values = tuple(knots), tuple(values)
        return cls(knots, values[:-1], values[1:], values[-1])

    @classmethod
    def from_step(cls, f: CadlagStepFunction) -> "TimeChange":
        knots = f.breakpoints if f.breakpoints[-1] < f.horizon else f.breakpoints[:-1]
        vals = f.values[: len(knots)]
        return cls(knots + (f.horizon,), vals, vals, f(f.horizon))

    def _piece(self, t) -> int:
        return min(bisect.bisect_right(self.knots, t) - 1, len(self.left) - 1)

    def __call__(self, t):
        if t < 0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        if t == self.horizon:
            return self.terminal
        i = self._piece(t)
        a, b = self.knots[i], self.knots[i + 1]
        return self.left[i] + (self.right[i] - self.left[i]) * (t - a) / (b - a)

    def left_limit(self, t):
        if t <= 0:
            return self.left[0]
        i = bisect.bisect_left(self.knots, t) - 1
        a, b = self.knots[i], self.knots[i + 1]
        return self.left[i] + (self.right[i] - self.left[i]) * (t - a) / (b - a)

    def minimum(self):
        return self.left[0]

    def maximum(self):
        return self.terminal

    def is_continuous(self) -> bool:
        ends = list(self.left[1:]) + [self.terminal]
        return all(r == l for r, l in zip(self.right, ends))

    def jumps(self) -> list[tuple]:
        """(time, left limit, value) for every jump."""
        ends = list(self.left[1:]) + [self.terminal]
        return [(self.knots[i + 1], r, l) for i, (r, l) in enumerate(zip(self.right, ends)) if l != r]

    def flat_levels(self) -> set:
        """Levels c whose preimage {t : y(t) = c} has more than one point."""
        return {lo for lo, hi in zip(self.left, self.right) if lo == hi}

    def hitting_time(self, c):
        """inf{t : y(t) >= c}, or None if the level is never reached."""
        for i, (lo, hi) in enumerate(zip(self.left, self.right)):
            if lo >= c:
                return self.knots[i]
            if hi > c:
                a, b = self.knots[i], self.knots[i + 1]
                return a + (c - lo) * (b - a) / (hi - lo)
        return self.horizon if self.terminal >= c else None

    def as_step(self) -> CadlagStepFunction:
        if any(lo != hi for lo, hi in zip(self.left, self.right)):
            raise ValueError("time change is not piecewise constant")
        bps = list(self.knots[:-1])
        vals = list(self.left)
        if self.terminal != self.right[-1]:
            bps.append(self.horizon)
            vals.append(self.terminal)
        return CadlagStepFunction(tuple(bps), tuple(vals), self.horizon)


def _as_time_change(y) -> TimeChange:
    return TimeChange.from_step(y) if isinstance(y, CadlagStepFunction) else y


def _hit_levels(y: TimeChange, levels) -> dict:
    """Map each hitting time inf{t : y(t) >= c} to the largest level c hit there.

    y(t) >= c holds exactly at a hitting time; the recorded level guards the
    evaluation against rounding just below c.
    """
    out = {0 * y.horizon: y.minimum()}
    for c in levels:
        t = y.hitting_time(c)
        if t is not None:
            out[t] = max(out.get(t, c), c)
    return out


def compose(x, y):
    """x o y.  A step function composed with a time change is a step function;
    a time change composed with a time change is a time change."""
    y = _as_time_change(y)
    x_horizon = x.horizon
    if y.minimum() < 0 or y.maximum() > x_horizon:
        raise RangeError(f"range [{y.minimum()}, {y.maximum()}] not inside [0, {x_horizon}]")
    if isinstance(x, CadlagStepFunction):
        # x o y changes only when y reaches a breakpoint of x
        floor = _hit_levels(y, x.breakpoints[1:])
        times = sorted(floor)
        return CadlagStepFunction(tuple(times), tuple(x(max(y(t), floor[t])) for t in times), y.horizon)
    if not isinstance(x, TimeChange):
        raise TypeError("x must be a CadlagStepFunction or TimeChange")
    floor = _hit_levels(y, x.knots)
    for k in y.knots:
        floor.setdefault(k, y(k))
    cuts = sorted(floor)
    left, right = [], []
    for u, w in zip(cuts, cuts[1:]):
        i = y._piece(u)
        zu = max(y(u), floor[u])
        left.append(x(zu))
        # y is linear on [u, w) and x is linear on the range it sweeps there
        right.append(x.left_limit(y.left_limit(w)) if y.right[i] > y.left[i] else x(zu))
    return TimeChange(tuple(cuts), tuple(left), tuple(right), x(y.terminal))


def sup_distance(f, g):
    """Exact sup_{[0,T]} |f - g| for step functions or time changes on a common horizon."""
    if f.horizon != g.horizon:
        raise ValueError("horizons differ")
    if isinstance(f, CadlagStepFunction) and isinstance(g, CadlagStepFunction):
        return max(abs(f(t) - g(t)) for t in set(f.breakpoints) | set(g.breakpoints))
    f, g = _as_time_change(f), _as_time_change(g)
    cuts = sorted(set(f.knots) | set(g.knots))
    best = abs(f.terminal - g.terminal)
    # both linear between consecutive cuts: extremes at the left value and the left limit
    for u, w in zip(cuts, cuts[1:]):
        best = max(best, abs(f(u) - g(u)), abs(f.left_limit(w) - g.left_limit(w)))
    return best


# ---------------------------------------------------------------- J1 distance


@dataclass(frozen=True)
class J1Result:
    """Distance with the optimal matching as certificate.

    ``placements[i]`` is where f's (i+1)-th jump goes under the time change;
    ``path`` lists the lattice states (k, j) visited.
    """

    distance: float
    placements: tuple
    path: tuple

    def __float__(self) -> float:
        return float(self.distance)


def _feasible(f: CadlagStepFunction, g: CadlagStepFunction, r, slack):
    a, F = f.breakpoints, f.values
    b, G = g.breakpoints, g.values
    K, J, T = len(a) - 1, len(b) - 1, f.horizon
    rr = r + slack
    ok = lambda k, j: abs(F[k] - G[j]) <= rr
    if not ok(0, 0):
        return None
    nxt_b = lambda j: b[j + 1] if j < J else T
    best: dict = {(0, 0): (0 * T, None)}
    for k in range(K + 1):
        for j in range(J + 1):
            if (k, j) not in best:
                continue
            s = best[(k, j)][0]
            cur = max(s, b[j])
            cand = []
            if j < J and cur <= b[j + 1] and ok(k, j + 1):
                cand.append(((k, j + 1), s))
            if k < K and ok(k + 1, j):
                lo = max(a[k + 1] - rr, cur)
                hi = min(a[k + 1] + rr, nxt_b(j))
                if lo <= hi:
                    cand.append(((k + 1, j), lo))
            if k < K and j < J and cur <= b[j + 1] and abs(a[k + 1] - b[j + 1]) <= rr and ok(k + 1, j + 1):
                cand.append(((k + 1, j + 1), b[j + 1]))
            for state, s_new in cand:
                if state not in best or s_new < best[state][0]:
                    best[state] = (s_new, (k, j))
    if (K, J) not in best:
        return None
    path = [(K, J)]
    while best[path[-1]][1] is not None:
        path.append(best[path[-1]][1])
    path.reverse()
    placements = [best[st][0] for prev, st in zip(path, path[1:]) if st[0] > prev[0]]
    return tuple(placements), tuple(path)


def j1_distance(f: CadlagStepFunction, g: CadlagStepFunction, T=None) -> J1Result:
    """Exact J1 distance between two step functions on [0, T], with certificate."""
    if T is not None:
        f, g = f.with_horizon(T), g.with_horizon(T)
    if f.horizon != g.horizon:
        raise ValueError("functions must share the horizon")
    a, b = f.breakpoints[1:], g.breakpoints[1:]
    cands = {0 * f.horizon}
    cands.update(abs(x - y) for x in f.values for y in g.values)
    cands.update(abs(x - y) for x in a for y in b)
    cands = sorted(cands)
    if _is_exact(f.horizon, *f.breakpoints, *f.values, *g.breakpoints, *g.values):
        slack = 0
    else:
        scale = max([1.0] + [abs(float(v)) for v in (*f.values, *g.values, f.horizon)])
        slack = 1e-12 * scale
    lo, hi = 0, len(cands) - 1
    found = _feasible(f, g, cands[hi], slack)
    if found is None:  # cannot happen for well-formed input
        raise RuntimeError("largest candidate radius infeasible")
    while lo < hi:
        mid = (lo + hi) // 2
        res = _feasible(f, g, cands[mid], slack)
        if res is None:
            lo = mid + 1
        else:
            hi, found = mid, res
    return J1Result(cands[hi], *found)


def placement_cost(f: CadlagStepFunction, g: CadlagStepFunction, placements: Sequence) -> float:
    """max(sup|lam - id|, sup|f o lam - g|) for the time change sending placements[i] to f's i-th jump.

    Placements must be strictly increasing; a placement equal to a jump time
    of g makes the two jumps simultaneous.
    """
    a = f.breakpoints[1:]
    if len(placements) != len(a):
        raise ValueError("one placement per jump of f")
    if any(p >= q for p, q in zip(placements, placements[1:])):
        raise ValueError("placements must increase strictly")
    cost = max([0.0] + [abs(p - x) for p, x in zip(placements, a)])
    events = sorted(set(placements) | set(g.breakpoints) | {0})
    fl = CadlagStepFunction((0,) + tuple(placements), f.values, f.horizon)
    return max([cost] + [abs(fl(t) - g(t)) for t in events if t <= f.horizon])


# ---------------------------------------------------------------- harnesses


@dataclass
class HarnessReport:
    """Outcome of a convergence harness: PASS, FAIL or OUT_OF_HYPOTHESIS."""

    status: str
    ns: list
    input_distances: list
    output_distances: list
    diagnosis: str = ""
    label: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self) -> dict:
        return {"status": self.status, "label": self.label, "diagnosis": self.diagnosis,
                "ns": list(self.ns), "input": [float(q) for q in self.input_distances],
                "output": [float(q) for q in self.output_distances]}


def vanishes(ns: Sequence[int], qs: Sequence[float]) -> bool:
    """q at the largest n is at most q at the smallest n times (n_first/n_max)^(1/2)."""
    q0, q1 = float(qs[0]), float(qs[-1])
    return q1 <= q0 * math.sqrt(ns[0] / ns[-1]) + 1e-12


def _default_ns(n_max: int) -> list[int]:
    ns, n = [], 8
    while n < n_max:
        ns.append(n)
        n *= 2
    return ns + [n_max]


def _verdict(ns, inp, out, label, tol_factor=10.0) -> HarnessReport:
    if not vanishes(ns, inp):
        return HarnessReport("OUT_OF_HYPOTHESIS", ns, inp, out, "input distances do not vanish", label)
    # inputs vanish, so domination at n_max forces the outputs to vanish too
    ok = out[-1] <= tol_factor * inp[-1] + 1e-12
    diag = "" if ok else f"output {float(out[-1]):.3g} vs input {float(inp[-1]):.3g} at n={ns[-1]}"
    return HarnessReport("PASS" if ok else "FAIL", ns, inp, out, diag, label)


@dataclass
class CompositionInstance:
    """x_n -> x_0 and y_n -> y_0 with y_0 continuous; n-th terms given by callables."""

    x0: CadlagStepFunction
    y0: TimeChange
    x: Callable[[int], CadlagStepFunction]
    y: Callable[[int], TimeChange]
    label: str = ""

    def hypothesis_violation(self) -> str | None:
        if not self.y0.is_continuous():
            return "y_0 is not continuous"
        bad = self.y0.flat_levels() & self.x0.disc()
        if bad:
            return f"y_0 is flat at discontinuity level(s) {sorted(map(float, bad))} of x_0"
        return None


def _spread_jumps(rng, count, lo, hi, gap):
    """count sorted points in [lo, hi] with consecutive spacing at least gap."""
    slack = (hi - lo) - gap * (count - 1)
    if slack < 0:
        raise ValueError("interval too short for the requested spacing")
    return [lo + float(u) + gap * i for i, u in enumerate(np.sort(rng.uniform(0, slack, size=count)))]


def _step_values(rng, count, min_jump=0.2):
    vals = [float(rng.uniform(-1, 1))]
    for _ in range(count):
        step = float(rng.uniform(min_jump, 1.0)) * (1 if rng.random() < 0.5 else -1)
        vals.append(vals[-1] + step)
    return vals


def composition_instance(seed: int, flat_at_jump: bool = False) -> CompositionInstance:
    """Random instance for the composition lemma.

    y_0 is continuous piecewise linear with slopes in [0.5, 2] and y_n(t) =
    y_0(floor(n t)/n); x_n moves each jump of x_0 by at most 1/n and each value
    by at most 1/(2n).  With ``flat_at_jump`` y_0 gets a flat piece at a jump
    level of x_0, which breaks the level-set hypothesis.
    """
    rng = np.random.default_rng(seed)
    T, Tx = 1.0, 3.0
    m = int(rng.integers(2, 5))
    knots = [0.0] + sorted(float(k) for k in rng.uniform(0.05, 0.95, size=m - 1)) + [T]
    slopes = rng.uniform(0.5, 2.0, size=m)
    vals = [float(rng.uniform(0.0, 0.2))]
    for s, (u, w) in zip(slopes, zip(knots, knots[1:])):
        vals.append(vals[-1] + float(s) * (w - u))
    K = int(rng.integers(1, 5))
    # a jump level next to y_0(0) or y_0(T) maps next to the horizon, where
    # convergence on a bounded interval sets in only for very large n
    for _ in range(1000):
        jumps = _spread_jumps(rng, K, 0.2, Tx - 0.2, 0.3)
        if all(abs(j - vals[0]) > 0.15 and abs(j - vals[-1]) > 0.15 for j in jumps):
            break
    if flat_at_jump:
        # make y_0 flat on its second piece at the level of a jump of x_0
        c = 0.5 * (vals[1] + vals[2])
        jumps = sorted(set(jumps) | {c})
        vals = vals[:1] + [c, c] + [c + (v - vals[2]) for v in vals[3:]]
        if vals[-1] > Tx:
            vals[-1] = Tx
    levels = _step_values(rng, len(jumps))
    x0 = CadlagStepFunction(tuple([0.0] + jumps), tuple(levels), Tx)
    y0 = TimeChange.linear(tuple(knots), tuple(vals))
    d = rng.uniform(-1, 1, size=len(jumps))
    e = rng.uniform(-0.5, 0.5, size=len(levels))

    def x(n):
        return CadlagStepFunction(tuple([0.0] + [j + float(di) / n for j, di in zip(jumps, d)]),
                                  tuple(v + float(ei) / n for v, ei in zip(levels, e)), Tx)

    def y(n):
        grid = [k / n for k in range(n)]
        return TimeChange.from_step(CadlagStepFunction(tuple(grid), tuple(y0(t) for t in grid), T))

    label = f"composition seed={seed}" + (" flat" if flat_at_jump else "")
    return CompositionInstance(x0, y0, x, y, label)


def lemma_composition_harness(seed: int, n_max: int = 256, instance: CompositionInstance | None = None,
                              ns: Sequence[int] | None = None) -> HarnessReport:
    """Track d_J1(x_n o y_n, x_0 o y_0) against d_J1(x_n, x_0) + sup|y_n - y_0|."""
    inst = instance if instance is not None else composition_instance(seed)
    ns = list(ns) if ns is not None else _default_ns(n_max)
    why = inst.hypothesis_violation()
    if why:
        return HarnessReport("OUT_OF_HYPOTHESIS", ns, [], [], why, inst.label)
    target = compose(inst.x0, inst.y0)
    inp, out = [], []
    for n in ns:
        xn, yn = inst.x(n), inst.y(n)
        inp.append(j1_distance(xn, inst.x0).distance + sup_distance(yn, inst.y0))
        out.append(j1_distance(compose(xn, yn), target).distance)
    return _verdict(ns, inp, out, inst.label)


@dataclass
class TimeChangeInstance:
    """lam_n -> id uniformly, f_n o lam_n -> f_0; all functions on [0, T], f_n on [0, T + 1]."""

    f0: CadlagStepFunction
    f: Callable[[int], CadlagStepFunction]
    lam: Callable[[int], TimeChange]
    label: str = ""


def skipped_oscillation(f: CadlagStepFunction, lam: TimeChange, T) -> float:
    """sup over jumps (u = lam(t-), v = lam(t)) of sup_{s in [u, v) cap [0, T]} |f(s) - f(u-)|."""
    worst = 0.0
    for _, u, v in lam.jumps():
        if u > T:
            continue
        ref = f.left_limit(u)
        top = min(v, T)
        vals = [f(u)] + [f(b) for b in f.breakpoints if u < b < top]
        worst = max([worst] + [abs(x - ref) for x in vals])
    return worst


def timechange_instance(seed: int, oscillation: float | None = None, identity: bool = False) -> TimeChangeInstance:
    """Random instance for the time-change lemma.

    lam_n is the identity except for at least one flat spot [p, p + w/n)
    followed by a jump back to the diagonal (unless ``identity``); f_n moves the jumps of f_0 by at most 1/n and carries
    a bump of height h/n (|h| <= 1) inside every skipped interval.  With
    ``oscillation`` the bump height is that constant instead, which breaks the
    oscillation hypothesis when nonzero.
    """
    rng = np.random.default_rng(seed)
    T = 1.0
    K = int(rng.integers(1, 4))
    jumps = _spread_jumps(rng, K, 0.2, 0.85, 0.3)
    levels = _step_values(rng, K)
    d = rng.uniform(-1, 1, size=K)
    n_min = 8

    def clear(p, w):
        # for every n >= n_min the skipped window (p, p + w/n) lies in [p, p + w/n_min];
        # jump j of f_n sits in the segment between j and j + d/n_min
        return all(p + w / n_min + 0.02 < min(j, j + dj / n_min) or p - 0.02 > max(j, j + dj / n_min)
                   for j, dj in zip(jumps, d))

    spots = []
    if not identity:
        wanted = int(rng.integers(1, 4))
        while not spots:
            for _ in range(wanted):
                for _ in range(1000):
                    p, w = float(rng.uniform(0.05, 0.75)), float(rng.uniform(0.5, 1.5))
                    if clear(p, w) and all(abs(p - q) > 0.2 for q, _, _ in spots):
                        spots.append((p, w, float(rng.uniform(-1, 1))))
                        break
            if not spots:
                # no room between the jumps: drop the last one and try again
                jumps, levels, d = jumps[:-1], levels[:-1], d[:-1]
    spots.sort()
    K = len(jumps)
    f0 = CadlagStepFunction(tuple([0.0] + jumps), tuple(levels), T)

    def lam(n):
        knots, left, right = [0.0], [], []
        for p, w, _ in spots:
            left += [knots[-1], p]
            right += [p, p]
            knots += [p, p + w / n]
        left.append(knots[-1])
        right.append(T)
        knots.append(T)
        return TimeChange(tuple(knots), tuple(left), tuple(right), T)

    def f(n):
        pts = {0.0: 0.0}
        for j, dj in zip(jumps, d):
            pts[j + float(dj) / n] = 0.0
        bumps = []
        for p, w, h in spots:
            height = oscillation if oscillation is not None else h / n
            a, b = p + w / (3 * n), p + 2 * w / (3 * n)
            bumps.append((a, b, height))
            pts[a] = pts[b] = 0.0
        shifted = CadlagStepFunction(tuple([0.0] + [j + float(dj) / n for j, dj in zip(jumps, d)]),
                                     tuple(levels), T + 1)
        times = sorted(pts)
        vals = [shifted(t) + sum(h for a, b, h in bumps if a <= t < b) for t in times]
        return CadlagStepFunction(tuple(times), tuple(vals), T + 1)

    label = f"timechange seed={seed}" + (" identity" if identity else "") + \
        (f" oscillation={oscillation}" if oscillation is not None else "")
    return TimeChangeInstance(f0, f, lam, label)


def lemma_timechange_harness(seed: int, n_max: int = 256, instance: TimeChangeInstance | None = None,
                             ns: Sequence[int] | None = None) -> HarnessReport:
    """Track d_J1(f_n, f_0) against the three hypothesis quantities.

    Inputs per n: sup|lam_n - id| + d_J1(f_n o lam_n, f_0) + skipped oscillation.
    """
    inst = instance if instance is not None else timechange_instance(seed)
    ns = list(ns) if ns is not None else _default_ns(n_max)
    T = inst.f0.horizon
    inp, out, parts = [], [], []
    for n in ns:
        lam, fn = inst.lam(n), inst.f(n)
        drift = sup_distance(lam, TimeChange.identity(T))
        conv = j1_distance(compose(fn, lam), inst.f0).distance
        osc = skipped_oscillation(fn, lam, T)
        parts.append((drift, conv, osc))
        inp.append(drift + conv + osc)
        out.append(j1_distance(fn.restrict(T), inst.f0).distance)
    for name, k in (("sup|lam_n - id|", 0), ("d(f_n o lam_n, f_0)", 1), ("skipped oscillation", 2)):
        q = [p[k] for p in parts]
        if not vanishes(ns, q):
            return HarnessReport("OUT_OF_HYPOTHESIS", ns, inp, out, f"{name} does not vanish", inst.label)
    return _verdict(ns, inp, out, inst.label)


def evaluation_gaps(z0: CadlagStepFunction, u0, z: Callable[[int], CadlagStepFunction],
                      u: Callable[[int], float], ns: Sequence[int]) -> list[float]:
    """Distance of z_n(u_n) to {z_0(u_0-), z_0(u_0)} for each n.

    For z_n -> z_0 in J1 and u_n -> u_0 these must tend to 0.
    """
    targets = (z0.left_limit(u0), z0(u0))
    return [min(abs(z(n)(u(n)) - c) for c in targets) for n in ns]
