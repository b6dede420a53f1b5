"""Bidding strategies on quantile space and their continuous-auction utilities.

A quantile strategy maps theta in [0, 1] (the buyer's valuation quantile)
to a nonnegative bid. All strategies here are right-continuous; the dual
functionals additionally require them weakly increasing with value 0 at
theta = 0, which the gap computations validate at call time.

``deviation_utility`` evaluates, against N-1 opponents who all follow a
common strategy ``lam``, both the utility of following ``lam`` oneself and
the utility of the one-shot deviation to the continuous equilibrium bid
beta(theta). Ties are handled exactly: following a step strategy ties
with every opponent whose quantile falls in the same level set, while the
deviation bid beta(theta) ties only on a measure-zero set and is treated
as winning against strictly lower bids only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .auctions import FORMATS, equilibrium_bid
from .priors import DomainError, Prior

__all__ = [
    "QuantileStrategy", "PowerCurve", "StepFunction", "SlopedStep",
    "EquilibriumPerturbation", "deviation_utility", "follow_win_probability",
    "strictly_below_measure", "validate_dual_strategy",
]


class QuantileStrategy:
    """Interface: value/inverse on arrays, breakpoints for quadrature."""

    is_strict: bool = False

    def value(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, y: np.ndarray) -> np.ndarray:
        """inf{theta : lam(theta) >= y}, capped to [0, 1]."""
        y = np.asarray(y, dtype=float)
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        top = self.value(np.ones_like(y))
        hi_mask = y > top
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            ge = self.value(mid) >= y
            hi = np.where(ge, mid, hi)
            lo = np.where(ge, lo, mid)
        out = np.where(hi_mask, 1.0, hi)
        return out

    def breakpoints(self):
        """Interior points where the strategy jumps or kinks."""
        return np.empty(0)

    def max_level(self) -> float:
        return float(self.value(np.ones(1))[0])


@dataclass(frozen=True)
class PowerCurve(QuantileStrategy):
    """lam(theta) = c * theta^p. Strictly increasing when c > 0."""

    c: float
    p: float

    def __post_init__(self):
        if self.c < 0.0 or self.p <= 0.0:
            raise DomainError("PowerCurve needs c >= 0 and p > 0")
        object.__setattr__(self, "is_strict", self.c > 0.0)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.c * theta ** self.p

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.c == 0.0:
            return np.where(y <= 0.0, 0.0, 1.0)
        return np.minimum((np.maximum(y, 0.0) / self.c) ** (1.0 / self.p), 1.0)


@dataclass(frozen=True)
class StepFunction(QuantileStrategy):
    """Right-continuous step strategy.

    ``breaks``: strictly increasing jump points in (0, 1).
    ``levels``: one bid per flat, len(breaks) + 1 of them; the flat
    [breaks[j-1], breaks[j]) bids levels[j]. Levels need not be monotone;
    adjacent equal levels are merged. Level sets may then still be
    non-contiguous for non-monotone inputs, which the tie-handling below
    accounts for by total level measure.
    """

    breaks: np.ndarray
    levels: np.ndarray
    _starts: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        br = np.asarray(self.breaks, dtype=float).ravel()
        lv = np.asarray(self.levels, dtype=float).ravel()
        if lv.size != br.size + 1:
            raise DomainError("need one level per flat (len(breaks) + 1)")
        if br.size and (np.any(np.diff(br) <= 0.0) or br[0] <= 0.0 or br[-1] >= 1.0):
            raise DomainError("breaks must be strictly increasing inside (0, 1)")
        if np.any(lv < 0.0):
            raise DomainError("bids must be nonnegative")
        keep = np.concatenate(([True], np.diff(lv) != 0.0))
        lv = lv[keep]
        br = br[keep[1:]]
        br = br.copy()
        lv = lv.copy()
        br.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "levels", lv)
        starts = np.concatenate(([0.0], br))
        starts.setflags(write=False)
        object.__setattr__(self, "_starts", starts)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        idx = np.searchsorted(self.breaks, theta, side="right")
        return self.levels[idx]

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if np.all(np.diff(self.levels) > 0.0):
            idx = np.searchsorted(self.levels, y, side="left")
            return np.where(idx < self.levels.size, self._starts[np.minimum(idx, self.levels.size - 1)], 1.0)
        return super().inverse(y)

    def breakpoints(self):
        return self.breaks

    def flat_bounds(self, theta):
        """Start and end of the flat containing each theta."""
        theta = np.asarray(theta, dtype=float)
        idx = np.searchsorted(self.breaks, theta, side="right")
        ends = np.concatenate((self.breaks, [1.0]))
        return self._starts[idx], ends[idx]

    def level_measures(self):
        """Distinct levels with their total measures (handles repeats)."""
        widths = np.diff(np.concatenate(([0.0], self.breaks, [1.0])))
        order = np.argsort(self.levels, kind="stable")
        lv = self.levels[order]
        wd = widths[order]
        uniq, inv = np.unique(lv, return_inverse=True)
        mass = np.zeros(uniq.size)
        np.add.at(mass, inv, wd)
        return uniq, mass


@dataclass(frozen=True)
class SlopedStep(QuantileStrategy):
    """Step strategy plus a strictly increasing linear term."""

    step: StepFunction
    slope: float

    def __post_init__(self):
        if self.slope <= 0.0:
            raise DomainError("slope must be positive")
        lv = self.step.levels
        if np.any(np.diff(lv) < 0.0):
            raise DomainError("SlopedStep needs a weakly increasing step part")
        object.__setattr__(self, "is_strict", True)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.step.value(theta) + self.slope * theta

    def breakpoints(self):
        return self.step.breaks


_DIRECTIONS = ("scale", "linear", "quadratic", "cubic", "sqrt", "sine")


@dataclass(frozen=True)
class EquilibriumPerturbation(QuantileStrategy):
    """lam = beta + t * d(theta) for a named direction d."""

    format: str
    prior: Prior
    n_buyers: int
    t: float
    direction: str

    def __post_init__(self):
        if self.direction not in _DIRECTIONS:
            raise DomainError(f"direction must be one of {_DIRECTIONS}")
        grid = np.linspace(0.0, 1.0, 2049)
        vals = self.value(grid)
        if np.any(np.diff(vals) <= 0.0) or vals[0] < -1e-15:
            raise DomainError("perturbation is not strictly increasing from 0")
        object.__setattr__(self, "is_strict", True)

    def _d(self, theta):
        d = self.direction
        if d == "scale":
            return equilibrium_bid(self.format, self.prior, self.n_buyers, theta)
        if d == "linear":
            return theta
        if d == "quadratic":
            return theta ** 2
        if d == "cubic":
            return theta ** 3
        if d == "sqrt":
            return np.sqrt(theta)
        return np.sin(0.5 * math.pi * theta)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        beta = equilibrium_bid(self.format, self.prior, self.n_buyers, theta)
        return beta + self.t * self._d(theta)


# -- utilities against N-1 iid followers of lam -------------------------------

def strictly_below_measure(lam: QuantileStrategy, bids: np.ndarray) -> np.ndarray:
    """measure{theta : lam(theta) < b} for each b.

    For weakly increasing lam this is inf{theta : lam(theta) >= b}; for a
    non-monotone step it is accumulated from the level measures.
    """
    bids = np.asarray(bids, dtype=float)
    if isinstance(lam, StepFunction) and np.any(np.diff(lam.levels) < 0.0):
        uniq, mass = lam.level_measures()
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        idx = np.searchsorted(uniq, bids, side="left")
        return cum[idx]
    return lam.inverse(bids)


def follow_win_probability(lam: QuantileStrategy, theta: np.ndarray,
                           n_buyers: int) -> np.ndarray:
    """Win probability of bidding lam(theta) against N-1 iid followers of
    lam, with uniform tie splitting.

    Strict lam: theta^(N-1). Step lam: with L the measure strictly below
    the own level and E the measure at it, ((L+E)^N - L^N) / (N E).
    """
    theta = np.asarray(theta, dtype=float)
    N = n_buyers
    if lam.is_strict:
        return theta ** (N - 1)
    if isinstance(lam, StepFunction):
        own = lam.value(theta)
        uniq, mass = lam.level_measures()
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        idx = np.searchsorted(uniq, own, side="left")
        L = cum[idx]
        E = mass[idx]
        return ((L + E) ** N - L ** N) / (N * E)
    raise DomainError("follow utilities need a strict or step strategy")


def deviation_utility(fmt: str, lam: QuantileStrategy, prior: Prior,
                      n_buyers: int, theta):
    """(U_follow, U_deviate) at each theta.

    U_follow: own bid lam(theta), everyone ties within level sets.
    U_deviate: own bid beta(theta) against the N-1 followers of lam,
    winning with probability P^(N-1) where P is the measure of opponents
    bidding strictly below (ties with the deviation bid have measure zero
    along the theta integrals these feed).
    """
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    theta = np.asarray(theta, dtype=float)
    N = n_buyers
    v = prior.quantile(theta)
    beta = equilibrium_bid(fmt, prior, N, theta)
    own = lam.value(theta)
    W = follow_win_probability(lam, theta, N)
    P = strictly_below_measure(lam, beta)
    if fmt == "first_price":
        u_follow = W * (v - own)
        u_dev = P ** (N - 1) * (v - beta)
    else:
        u_follow = W * v - own
        u_dev = P ** (N - 1) * v - beta
    return u_follow, u_dev


def validate_dual_strategy(lam: QuantileStrategy, max_bid: float) -> None:
    """Dual functionals assume lam weakly increasing, 0 at 0, capped bids."""
    grid = np.linspace(0.0, 1.0, 4097)
    vals = lam.value(grid)
    if vals[0] > 1e-12:
        raise DomainError("dual strategies must bid 0 at theta = 0")
    if np.any(np.diff(vals) < -1e-12):
        raise DomainError("dual strategies must be weakly increasing")
    if vals[-1] > max_bid + 1e-9:
        raise DomainError("strategy bids above the admissible cap")
