"""Distances to equilibrium and the theoretical bounds relating them.

The central distance is a one-sided modification of the squared
Wasserstein-2 deviation from the equilibrium bid curve beta: bids are
compared to beta directly while they stay below beta(1), and linearly
extended above,

    branch(x) = (x - beta)^2 / 2                     if x <= beta(1)
                (beta(1)-beta)^2/2
                  + (beta(1)-beta) * (x - beta(1))   otherwise,

integrated against theta^(N-2) d theta in quantile space. The linear
extension is what the dual certificates control for bids above the
equilibrium range.

``bound_constants`` and ``theorem_bound`` evaluate the prior-dependent
constants C, D and the resulting explicit distance bound

    N * [F(4 delta) + int_{F(4 delta)}^1 (4 delta / v(theta)) d theta] / min{C, D}

with delta the discretization fineness. Power-law and uniform priors use
closed forms; other priors are handled numerically on a log-spaced grid.
All constants are computed on the unit-scaled prior; squared-distance
quantities scale by v_max^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .auctions import (DiscreteAuction, PureStrategy, equilibrium_bid,
                       equilibrium_bid_inverse)
from .priors import DomainError, Prior
from .quadrature import integrate_piecewise
from .strategies import (QuantileStrategy, StepFunction, deviation_utility,
                         strictly_below_measure)

__all__ = [
    "wasserstein2", "modified_wasserstein", "embed_strategy", "monotonize",
    "fineness", "bound_constants", "theorem_bound", "approx_slack",
    "BoundConstants", "BoundReport", "transport_slack", "distribution_distance",
]


# -- plain squared distance on discrete objects -------------------------------

def _tensor_w2(auction: DiscreteAuction, sigma1: np.ndarray, prior: Prior) -> float:
    theta = prior.cdf(auction.valuations)
    beta = equilibrium_bid(auction.format, prior, auction.n_buyers, theta)
    sq = (auction.bids[None, :] - np.asarray(beta)[:, None]) ** 2
    return float(np.sum(auction.weights[:, None] * sigma1 * sq))


def wasserstein2(obj, prior: Prior) -> float:
    """Expected squared distance of bids from the equilibrium bid curve.

    Accepts a marginal tensor (uses its one-buyer marginal) or a strategy
    distribution (averages over its atoms).
    """
    if hasattr(obj, "sigma1"):
        return _tensor_w2(obj.auction, obj.sigma1, prior)
    if hasattr(obj, "atoms"):
        auction = obj.auction
        theta = prior.cdf(auction.valuations)
        beta = np.asarray(equilibrium_bid(auction.format, prior,
                                          auction.n_buyers, theta))
        total = 0.0
        for strat, w in obj.atoms:
            sq = (auction.bids[strat.bid_index] - beta) ** 2
            total += w * float(np.dot(auction.weights, sq))
        return total
    raise DomainError("unsupported object for wasserstein2")


# -- modified distance in quantile space --------------------------------------

def branch_values(lam_vals, beta_vals, beta_top):
    """The one-sided branch integrand (quadratic below beta(1), linear above)."""
    lam_vals = np.asarray(lam_vals, dtype=float)
    beta_vals = np.asarray(beta_vals, dtype=float)
    gap = beta_top - beta_vals
    quad = 0.5 * (lam_vals - beta_vals) ** 2
    lin = 0.5 * gap * gap + gap * (lam_vals - beta_top)
    return np.where(lam_vals <= beta_top, quad, lin)


def _mw_breakpoints(fmt, prior, N, lam: QuantileStrategy, beta_top: float):
    pts = list(np.asarray(lam.breakpoints(), dtype=float))
    if lam.max_level() > beta_top:
        pts.append(float(np.asarray(lam.inverse(np.array([beta_top])))[0]))
    return pts


def modified_wasserstein(fmt: str, prior: Prior, n_buyers: int,
                         lam: QuantileStrategy, max_bid: float | None = None,
                         *, tol: float = 1e-11) -> float:
    """One-buyer modified squared distance of the quantile strategy ``lam``
    from the equilibrium bid curve."""
    if max_bid is not None and lam.max_level() > max_bid + 1e-9:
        raise DomainError("strategy bids above the admissible cap")
    N = n_buyers
    beta_top = float(equilibrium_bid(fmt, prior, N, 1.0))

    def f(theta):
        beta = equilibrium_bid(fmt, prior, N, theta)
        vals = branch_values(lam.value(theta), beta, beta_top)
        if N > 2:
            vals = theta ** (N - 2) * vals
        return vals

    pts = _mw_breakpoints(fmt, prior, N, lam, beta_top)
    return integrate_piecewise(f, 0.0, 1.0, pts, tol=tol)


def embed_strategy(auction: DiscreteAuction, strategy: PureStrategy,
                   prior: Prior) -> StepFunction:
    """Right-continuous quantile embedding of a grid strategy: the flat
    [F(v_k), F(v_{k+1})) bids the strategy's bid at v_k."""
    theta = np.asarray(prior.cdf(auction.valuations), dtype=float)
    levels = auction.bids[strategy.bid_index]
    return StepFunction(theta[1:], levels)


def distribution_distance(dist, prior: Prior, *, tol: float = 1e-11) -> float:
    """N times the atom-averaged modified distance of a strategy
    distribution; the quantity the theorem bound dominates."""
    auction = dist.auction
    total = 0.0
    for strat, w in dist.atoms:
        lam = embed_strategy(auction, strat, prior)
        total += w * modified_wasserstein(auction.format, prior,
                                          auction.n_buyers, lam, tol=tol)
    return auction.n_buyers * total


# -- monotone rearrangement ----------------------------------------------------

def monotonize(obj):
    """Sorted rearrangement preserving the multiset of (bid, mass) pairs.

    Grid strategies sort their bid assignment along the valuation order;
    step strategies reassemble their flats in increasing level order.
    Idempotent.
    """
    if isinstance(obj, PureStrategy):
        return PureStrategy(np.sort(obj.bid_index))
    if isinstance(obj, StepFunction):
        widths = np.diff(np.concatenate(([0.0], obj.breaks, [1.0])))
        order = np.argsort(obj.levels, kind="stable")
        lv = obj.levels[order]
        cum = np.cumsum(widths[order])
        return StepFunction(cum[:-1], lv)
    raise DomainError("monotonize expects a grid or step strategy")


# -- grid fineness -------------------------------------------------------------

def _cover_radius(grid: np.ndarray, hi: float) -> float:
    g = np.asarray(grid, dtype=float)
    r = max(float(g[0]), float(hi - g[-1]))
    if g.size > 1:
        r = max(r, float(np.max(np.diff(g)) / 2.0))
    return r


def fineness(auction: DiscreteAuction, v_max: float | None = None,
             max_bid: float | None = None) -> float:
    """Largest distance from a point of [0, v_max] to the valuation grid or
    from a point of [0, max_bid] to the bid grid. Defaults take each grid's
    top point as the interval end."""
    rv = _cover_radius(auction.valuations,
                       auction.valuations[-1] if v_max is None else v_max)
    rb = _cover_radius(auction.bids,
                       auction.bids[-1] if max_bid is None else max_bid)
    return max(rv, rb)


# -- prior-dependent constants ---------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    C: float
    D: float
    K: float
    flags: dict


def _power_alpha(prior: Prior):
    if prior.family == "uniform":
        return 1.0
    if prior.family == "power_law":
        return float(prior.alpha)
    return None


def bound_constants(fmt: str, prior: Prior, n_buyers: int,
                    max_bid: float) -> BoundConstants:
    """Unit-scale constants C (marginal payment curvature) and D (transport
    coefficient) entering the distance bound, with K = 1/min{C, D}.

    First price needs the quantile-to-value ratio theta/v strictly
    decreasing; priors violating that get a nonpositive C and a flag, not
    an error. The cap 1/(v(1) max_bid) applies to C only.
    """
    N = n_buyers
    if N < 2:
        raise DomainError("need at least two buyers")
    s = prior.v_max
    mb = max_bid / s
    if mb <= 0.0:
        raise DomainError("max_bid must be positive")
    cap = 1.0 / mb
    alpha = _power_alpha(prior)
    flags = {"family": prior.family, "numeric": alpha is None}
    if alpha is not None:
        if fmt == "first_price":
            c_shape = (1.0 - alpha) / (alpha * (N - 1))
            d_shape = 1.0 / (alpha * (2 * N - 3)) if alpha <= 2.0 else 0.0
        else:
            c_shape = 1.0 / (alpha * (N - 1))
            d_shape = 1.0 / (alpha * (2 * N - 3))
    else:
        unit = replace(prior, v_max=1.0)
        theta = np.geomspace(1e-6, 1.0, 10_001)
        v = np.asarray(unit.quantile(theta))
        vp = np.asarray(unit.quantile_derivative(theta))
        if fmt == "first_price":
            c_shape = float(np.min((theta * vp - v) / ((N - 1) * v * v)))
            d_shape = float(np.min(vp * theta ** 2 / ((2 * N - 3) * v ** 3)))
        else:
            c_shape = float(np.min(vp / ((N - 1) * v * v)))
            d_shape = float(np.min(vp / ((2 * N - 3) * v ** 3)))
    flags["shape_positive"] = c_shape > 0.0 and d_shape > 0.0
    flags["cap_active"] = cap < c_shape
    C = min(c_shape, cap)
    D = d_shape
    low = min(C, D)
    K = 1.0 / low if low > 0.0 else math.inf
    return BoundConstants(C=C, D=D, K=K, flags=flags)


@dataclass(frozen=True)
class BoundReport:
    value: float
    constants: BoundConstants
    delta: float
    degenerate: bool
    closed_form: bool


def theorem_bound(fmt: str, prior: Prior, n_buyers: int, delta: float,
                  max_bid: float) -> BoundReport:
    """Explicit bound on N times the expected modified distance of any
    boundable outcome of the discretized auction, at fineness ``delta``.

    Power-law and uniform priors evaluate the closed form
    K*N*(4d*a/(a-1) - (4d)^a/(a-1)) (a != 1) or K*N*4d*(1 - ln 4d) (a = 1)
    with d the unit-scale fineness; the general form integrates
    4d / v(theta) numerically. Scales by v_max^2.
    """
    if delta <= 0.0:
        raise DomainError("fineness must be positive")
    N = n_buyers
    s = prior.v_max
    consts = bound_constants(fmt, prior, N, max_bid)
    d = delta / s
    alpha = _power_alpha(prior)
    degenerate = 4.0 * d >= 1.0
    if degenerate:
        inner = 1.0
        closed = alpha is not None
    elif alpha is not None:
        x = 4.0 * d
        if alpha == 1.0:
            inner = x * (1.0 - math.log(x))
        else:
            inner = (x * alpha - x ** alpha) / (alpha - 1.0)
        closed = True
    else:
        unit = replace(prior, v_max=1.0)
        x = 4.0 * d
        fd = float(unit.cdf(x))
        tail = integrate_piecewise(lambda t: x / np.asarray(unit.quantile(t)),
                                   fd, 1.0, [], tol=1e-11)
        inner = fd + tail
        closed = False
    value = N * consts.K * inner * s * s
    return BoundReport(value=value, constants=consts, delta=delta,
                       degenerate=degenerate, closed_form=closed)


def approx_slack(theta, delta: float, prior: Prior):
    """Pointwise slack min{v(theta), 4 delta} of the discretization's
    approximate-equilibrium guarantee."""
    v = np.asarray(prior.quantile(theta), dtype=float)
    out = np.minimum(v, 4.0 * delta)
    return out if out.ndim else float(out)


# -- transport inequality ---------------------------------------------------------

def _dev_minus_follow_integral(fmt: str, prior: Prior, N: int,
                               lam: QuantileStrategy, pts, *, tol: float) -> float:
    def f(theta):
        v = np.asarray(prior.quantile(theta))
        u_follow, u_dev = deviation_utility(fmt, lam, prior, N, theta)
        return (u_dev - u_follow) / v

    return integrate_piecewise(f, 0.0, 1.0, pts, tol=tol)


def _transport_pts(fmt, prior, N, lam: StepFunction, beta_top):
    pts = list(np.asarray(lam.breakpoints(), dtype=float))
    for l in np.unique(lam.levels):
        if 0.0 < l < beta_top:
            pts.append(equilibrium_bid_inverse(fmt, prior, N, l))
    return pts


def transport_slack(fmt: str, prior: Prior, n_buyers: int,
                    lam: StepFunction, *, tol: float = 1e-11) -> dict:
    """Slack of the transport inequality comparing a step strategy with its
    monotone rearrangement:

        int (1/v) [ (U_dev - U_follow)(lam) - (U_dev - U_follow)(mon lam) ]
            >= D * (mw(lam) - mw(mon lam)).

    Returns lhs, rhs and slack = lhs - rhs.
    """
    N = n_buyers
    mon = monotonize(lam)
    beta_top = float(equilibrium_bid(fmt, prior, N, 1.0))
    lhs = (_dev_minus_follow_integral(fmt, prior, N, lam,
                                      _transport_pts(fmt, prior, N, lam, beta_top), tol=tol)
           - _dev_minus_follow_integral(fmt, prior, N, mon,
                                        _transport_pts(fmt, prior, N, mon, beta_top), tol=tol))
    D = bound_constants(fmt, prior, N, 1.0).D
    dmw = (modified_wasserstein(fmt, prior, N, lam, tol=tol)
           - modified_wasserstein(fmt, prior, N, mon, tol=tol))
    rhs = D * dmw
    return {"lhs": lhs, "rhs": rhs, "slack": lhs - rhs, "D": D}
