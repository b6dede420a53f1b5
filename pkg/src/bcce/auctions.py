"""Discretized sealed-bid auctions and their symmetric equilibrium bids.

Two payment formats on a common allocation rule (highest bid wins, ties
split uniformly):

* ``first_price``: winners pay their own bid, losers pay nothing.
* ``all_pay``: every buyer pays their own bid.

A :class:`DiscreteAuction` couples a valuation grid with probability
weights and a bid grid. Buyers are symmetric: each draws a valuation
independently from the same weights.

``equilibrium_bid`` evaluates the symmetric equilibrium bid function of
the *continuous* auction in quantile space,

    first price:  (1/theta^(N-1)) * int_0^theta (N-1) s^(N-2) v(s) ds
    all pay:                       int_0^theta (N-1) s^(N-2) v(s) ds

with v the prior's quantile function. Power-law and uniform priors use
the closed forms; other priors are integrated in value space, where the
integrand (N-1) F(x)^(N-2) x f(x) is smooth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .priors import DomainError, Prior
from .quadrature import integrate

__all__ = [
    "FORMATS", "DiscreteAuction", "PureStrategy", "discretize", "make_auction",
    "allocation", "utility", "interim_utility", "utility_table",
    "win_probability", "equilibrium_bid",
]

FORMATS = ("first_price", "all_pay")


def _check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    return fmt


@dataclass(frozen=True)
class DiscreteAuction:
    """Symmetric discretized auction instance.

    valuations: sorted grid V, first element 0
    bids:       sorted grid B, first element 0
    weights:    probability weights on V, nonnegative, sum 1
    """

    format: str
    n_buyers: int
    valuations: np.ndarray
    bids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        _check_format(self.format)
        if self.n_buyers < 2:
            raise DomainError("need at least two buyers")
        v = np.ascontiguousarray(np.asarray(self.valuations, dtype=float))
        b = np.ascontiguousarray(np.asarray(self.bids, dtype=float))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if v.size < 1 or np.any(np.diff(v) <= 0.0) or v[0] < 0.0:
            raise DomainError("valuations must be sorted, distinct, nonnegative")
        if b.size < 1 or np.any(np.diff(b) <= 0.0) or b[0] != 0.0:
            raise DomainError("bids must be sorted, distinct, starting at 0")
        if w.size != v.size or np.any(w < -1e-15) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must match valuations and sum to 1")
        for arr in (v, b, w):
            arr.setflags(write=False)
        object.__setattr__(self, "valuations", v)
        object.__setattr__(self, "bids", b)
        object.__setattr__(self, "weights", w)

    @property
    def n_valuations(self) -> int:
        return int(self.valuations.size)

    @property
    def n_bids(self) -> int:
        return int(self.bids.size)

    @property
    def max_bid(self) -> float:
        return float(self.bids[-1])


@dataclass(frozen=True)
class PureStrategy:
    """Map from valuation index to bid index."""

    bid_index: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.bid_index, dtype=np.int64))
        if idx.ndim != 1 or np.any(idx < 0):
            raise DomainError("bid_index must be a 1-d array of grid indices")
        idx.setflags(write=False)
        object.__setattr__(self, "bid_index", idx)

    def key(self) -> bytes:
        return self.bid_index.tobytes()


def discretize(prior: Prior, n: int, scheme: str = "naive"):
    """Valuation grid, bid grid and weights for grid resolution ``n``.

    ``naive``: V = B = {0, v_max/n, ..., v_max}.
    ``half_bids``: same V, bids halved (B = V / 2).
    """
    if n < 2:
        raise DomainError(f"grid resolution must be >= 2, got {n}")
    if scheme not in ("naive", "half_bids"):
        raise DomainError(f"unknown scheme {scheme!r}")
    v = np.linspace(0.0, prior.v_max, n + 1)
    b = v.copy() if scheme == "naive" else v / 2.0
    return v, b, prior.grid_weights(v)


def make_auction(fmt: str, n_buyers: int, prior: Prior, n: int,
                 scheme: str = "naive") -> DiscreteAuction:
    v, b, w = discretize(prior, n, scheme)
    return DiscreteAuction(fmt, n_buyers, v, b, w)


# -- single-profile mechanics -----------------------------------------------

def allocation(bids) -> np.ndarray:
    """Win probability of each buyer: 1/#argmax for the high bidders."""
    b = np.asarray(bids, dtype=float)
    if b.size == 0:
        raise DomainError("allocation needs at least one bid")
    top = b == b.max()
    return top / top.sum()


def utility(fmt: str, bids, i: int, v_i: float) -> float:
    """Ex-post utility of buyer ``i`` with valuation ``v_i`` at a bid profile."""
    _check_format(fmt)
    x = allocation(bids)
    b_i = float(np.asarray(bids, dtype=float)[i])
    if fmt == "first_price":
        return float(x[i] * (v_i - b_i))
    return float(x[i] * v_i - b_i)


def interim_utility(auction: DiscreteAuction, v_index: int, bid: float,
                    opponents) -> float:
    """Expected utility of bidding ``bid`` at valuation index ``v_index``
    against opponents who map their own valuation draws through pure
    strategies. ``opponents`` is one PureStrategy (shared by all N-1
    opponents) or a list of N-1 of them. Exact enumeration over all
    opponent valuation profiles.
    """
    n_opp = auction.n_buyers - 1
    if isinstance(opponents, PureStrategy):
        opponents = [opponents] * n_opp
    if len(opponents) != n_opp:
        raise DomainError(f"need {n_opp} opponent strategies")
    nv = auction.n_valuations
    if nv ** n_opp > 2_000_000:
        raise DomainError("opponent profile enumeration too large")
    v_i = float(auction.valuations[v_index])
    total = 0.0
    for prof in itertools.product(range(nv), repeat=n_opp):
        w = 1.0
        for k in prof:
            w *= auction.weights[k]
        if w == 0.0:
            continue
        bids = [bid] + [float(auction.bids[opponents[j].bid_index[prof[j]]])
                        for j in range(n_opp)]
        total += w * utility(auction.format, bids, 0, v_i)
    return total


# -- interim utilities against an iid opponent bid distribution --------------

def win_probability(below: float, at: float, n_buyers: int) -> float:
    """Win probability of a bid with iid opponents, each independently
    bidding strictly below it with probability ``below`` and exactly at it
    with probability ``at``. Averages the uniform tie split in closed form:

        ((below + at)^N - below^N) / (N * at)   for at > 0.
    """
    if at > 0.0:
        return ((below + at) ** n_buyers - below ** n_buyers) / (n_buyers * at)
    return below ** (n_buyers - 1)


def utility_table(auction: DiscreteAuction, bid_pmf: np.ndarray) -> np.ndarray:
    """(n_valuations, n_bids) interim utilities when every opponent bids
    iid from ``bid_pmf`` over the auction's bid grid."""
    q = np.asarray(bid_pmf, dtype=float)
    nb = auction.n_bids
    if q.shape != (nb,):
        raise DomainError("bid_pmf must live on the auction bid grid")
    below = np.concatenate(([0.0], np.cumsum(q)[:-1]))
    win = np.array([win_probability(below[b], q[b], auction.n_buyers)
                    for b in range(nb)])
    v = auction.valuations[:, None]
    b = auction.bids[None, :]
    if auction.format == "first_price":
        return win[None, :] * (v - b)
    return win[None, :] * v - b


def strategy_pmf(auction: DiscreteAuction, strategy: PureStrategy) -> np.ndarray:
    """Bid distribution induced by one buyer following ``strategy``."""
    if strategy.bid_index.size != auction.n_valuations or \
            strategy.bid_index.max(initial=0) >= auction.n_bids:
        raise DomainError("strategy does not match the auction grids")
    q = np.zeros(auction.n_bids)
    np.add.at(q, strategy.bid_index, auction.weights)
    return q


# -- continuous equilibrium bid ----------------------------------------------

def _power_c(alpha: float, n_buyers: int) -> float:
    return (n_buyers - 1) / (n_buyers - 1 + 1.0 / alpha)


def equilibrium_bid(fmt: str, prior: Prior, n_buyers: int, theta):
    """Symmetric equilibrium bid of the continuous auction at quantile
    ``theta`` (scalar or array)."""
    _check_format(fmt)
    if n_buyers < 2:
        raise DomainError("need at least two buyers")
    t = np.asarray(theta, dtype=float)
    if np.any(t < -1e-15) or np.any(t > 1.0 + 1e-15):
        raise DomainError("quantile argument outside [0, 1]")
    t = np.clip(t, 0.0, 1.0)
    N = n_buyers
    fam = prior.family
    if fam in ("uniform", "power_law"):
        alpha = 1.0 if fam == "uniform" else prior.alpha
        c = _power_c(alpha, N)
        if fmt == "first_price":
            out = c * t ** (1.0 / alpha) * prior.v_max
        else:
            out = c * t ** (N - 1 + 1.0 / alpha) * prior.v_max
        return out if out.ndim else float(out)
    t1 = np.atleast_1d(t)
    out = _integral_grid(prior, N, t1)
    if fmt == "first_price":
        pos = t1 > 0.0
        res = np.zeros_like(out)
        res[pos] = out[pos] / t1[pos] ** (N - 1)
        out = np.minimum(res, prior.quantile(t1))
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)


def equilibrium_bid_inverse(fmt: str, prior: Prior, n_buyers: int, y: float) -> float:
    """Quantile at which the equilibrium bid reaches ``y``; clamps to
    [0, 1] outside the bid range."""
    _check_format(fmt)
    N = n_buyers
    top = float(equilibrium_bid(fmt, prior, N, 1.0))
    if y <= 0.0:
        return 0.0
    if y >= top:
        return 1.0
    fam = prior.family
    if fam in ("uniform", "power_law"):
        alpha = 1.0 if fam == "uniform" else prior.alpha
        c = _power_c(alpha, N) * prior.v_max
        if fmt == "first_price":
            return float((y / c) ** alpha)
        return float((y / c) ** (1.0 / (N - 1 + 1.0 / alpha)))
    lo, hi = 0.0, 1.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if equilibrium_bid(fmt, prior, N, mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi


def _integral_grid(prior: Prior, N: int, t: np.ndarray) -> np.ndarray:
    """int_0^theta (N-1) s^(N-2) v(s) ds at each theta, by accumulating
    value-space segments between the sorted distinct quantiles."""
    def integrand(x):
        f = prior.pdf(x)
        F = prior.cdf(x)
        return (N - 1) * F ** (N - 2) * x * f

    order = np.argsort(t)
    vals = prior.quantile(t[order])
    out_sorted = np.empty(t.size)
    acc = 0.0
    prev = 0.0
    for j, v in enumerate(np.atleast_1d(vals)):
        if v > prev:
            acc += integrate(integrand, prev, float(v), tol=1e-12)
            prev = float(v)
        out_sorted[j] = acc
    out = np.empty(t.size)
    out[order] = out_sorted
    return out
