"""Numerical verification of the continuous-auction dual certificates.

Feasibility of the distance-bounding dual quantities reduces to the
nonnegativity of a gap functional

    gap(lam) = N * [ int eps(theta) w(theta) (U_dev - U_follow) d theta
                     - int alpha(theta | lam) d theta ]

over admissible quantile strategies lam (weakly increasing, 0 at 0,
bids capped). Two certificate families are covered:

* the *strict* certificate, whose objective alpha is the one-sided
  quadratic branch around the equilibrium bid curve with weights
  eps = beta(1) - beta(theta) and w = 1/theta for first price, and
  eps = theta^(N-2) (beta(1) - beta(theta)), w = 1 for all pay;

* the *weak* certificate with weight 1/v(theta) and a signed objective
  built from the inverse bid function,

      alpha_fp = theta^(N-2) [ (theta/v)(lam - beta)
                               - (N-1) int_theta^T (1 - beta(s)/v(s)) ds ]
      alpha_ap = (lam - beta)/v - (N-1) theta^(N-2) (T - theta)

  where T = beta^{-1}(min{lam(theta), beta(1)}). The upper limit uses the
  minimum: that convention is forced jointly by the variational identity
  (see the *_objective_derivative functions), the gap(beta) = 0 anchor,
  and the domain of beta^{-1}.

Both certificates are exactly tight along strictly increasing strategies,
so computed gaps sit at numerical zero there; step strategies can carry
strictly positive gaps. The functional's weights make the strict first
price integrand 1/theta-weighted, which is integrable only because
admissible strategies bid 0 near 0; the integral is truncated at
THETA_MIN with an explicit bound on the discarded tail.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .auctions import (FORMATS, equilibrium_bid, equilibrium_bid_inverse,
                       _power_c)
from .metrics import branch_values, modified_wasserstein
from .priors import DomainError, Prior
from .quadrature import fixed_panels, integrate, integrate_piecewise
from .strategies import (EquilibriumPerturbation, PowerCurve, QuantileStrategy,
                         SlopedStep, StepFunction, deviation_utility,
                         strictly_below_measure, validate_dual_strategy)

__all__ = [
    "dual_gap_strict", "dual_gap_strict_report", "dual_gap_weak",
    "dual_gap_weak_report", "strict_step_report", "StrictDualReport",
    "WeakDualReport", "strict_objective_derivative", "weak_objective_derivative",
    "power_curve_family", "monotone_step_family", "perturbation_family",
    "verify_convex_prior_example", "verify_complete_info_example",
    "deviation_utility",
]

THETA_MIN_WEAK = 1e-12
STEP_BREAK_FLOOR = 1e-7


def _check_args(fmt, n_buyers):
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    if n_buyers < 2:
        raise DomainError("need at least two buyers")


def _beta_top(fmt, prior, N):
    return float(equilibrium_bid(fmt, prior, N, 1.0))


def _splits(fmt, prior, N, lam: QuantileStrategy, beta_top: float):
    """Kink points of the gap integrands: strategy jumps, the crossings of
    beta with the strategy's levels (deviation win kinks), and the point
    where the strategy crosses beta(1) (objective branch switch)."""
    pts = set(float(p) for p in np.asarray(lam.breakpoints()))
    if isinstance(lam, StepFunction):
        levels = np.unique(lam.levels)
    else:
        levels = np.array([lam.max_level()])
    for l in levels:
        if 0.0 < l < beta_top:
            pts.add(equilibrium_bid_inverse(fmt, prior, N, float(l)))
    if lam.max_level() > beta_top:
        pts.add(float(np.asarray(lam.inverse(np.array([beta_top])))[0]))
    return sorted(pts)


def _validate_for_dual(lam: QuantileStrategy, max_bid: float):
    validate_dual_strategy(lam, max_bid)
    br = np.asarray(lam.breakpoints(), dtype=float)
    if br.size and br.min() < STEP_BREAK_FLOOR:
        raise DomainError("strategy jumps below the integration floor")


def _lhs_integral_fp(f, pts, tol):
    """First-price deviation integrals carry the 1/theta weight; with an
    admissible strategy (zero bid at zero) the integrand has at worst an
    integrable power singularity at 0. Substitute theta = u^4 on the
    leftmost piece to flatten it before the adaptive pass."""
    inner = [p for p in pts if 0.0 < p < 1.0]
    s0 = min([1e-3] + [0.5 * p for p in inner])
    left = integrate(lambda u: f(u ** 4) * 4.0 * u ** 3, 0.0, s0 ** 0.25,
                     tol=0.5 * tol)
    right = integrate_piecewise(f, s0, 1.0, pts, tol=0.5 * tol)
    return left + right


# -- strict certificate --------------------------------------------------------

@dataclass(frozen=True)
class StrictDualReport:
    gap: float
    lhs: float
    objective: float
    refinement_delta: float
    n_buyers: int
    format: str
    epsilon_variant: str


def _strict_lhs_integrand(fmt, prior, N, lam, beta_top, epsilon_variant,
                          follow_mode="exact"):
    def f(theta):
        theta = np.asarray(theta, dtype=float)
        v = np.asarray(prior.quantile(theta))
        beta = np.asarray(equilibrium_bid(fmt, prior, N, theta))
        if follow_mode == "exact":
            u_follow, u_dev = deviation_utility(fmt, lam, prior, N, theta)
        else:
            # limit of strictly increasing approximants from above
            own = np.asarray(lam.value(theta), dtype=float)
            P = strictly_below_measure(lam, beta)
            if fmt == "first_price":
                u_follow = theta ** (N - 1) * (v - own)
                u_dev = P ** (N - 1) * (v - beta)
            else:
                u_follow = theta ** (N - 1) * v - own
                u_dev = P ** (N - 1) * v - beta
        eps = beta_top - beta
        if fmt == "all_pay" and epsilon_variant == "standard" and N > 2:
            eps = theta ** (N - 2) * eps
        if fmt == "first_price":
            return eps / theta * (u_dev - u_follow)
        return eps * (u_dev - u_follow)

    return f


def _strict_objective_integrand(fmt, prior, N, lam, beta_top):
    def f(theta):
        theta = np.asarray(theta, dtype=float)
        beta = np.asarray(equilibrium_bid(fmt, prior, N, theta))
        vals = branch_values(lam.value(theta), beta, beta_top)
        if N > 2:
            vals = theta ** (N - 2) * vals
        return vals

    return f


def dual_gap_strict_report(fmt: str, prior: Prior, n_buyers: int,
                           lam: QuantileStrategy, max_bid: float = 1.0,
                           *, epsilon_variant: str = "standard",
                           tol: float = 1e-10) -> StrictDualReport:
    """Gap of the strict certificate at ``lam``, with a panel-doubling
    refinement check on both integrals."""
    _check_args(fmt, n_buyers)
    if epsilon_variant not in ("standard", "flat"):
        raise DomainError("epsilon_variant must be 'standard' or 'flat'")
    N = n_buyers
    _validate_for_dual(lam, max_bid)
    beta_top = _beta_top(fmt, prior, N)
    pts = _splits(fmt, prior, N, lam, beta_top)
    f_lhs = _strict_lhs_integrand(fmt, prior, N, lam, beta_top, epsilon_variant)
    f_obj = _strict_objective_integrand(fmt, prior, N, lam, beta_top)
    if fmt == "first_price":
        lhs = _lhs_integral_fp(f_lhs, pts, tol)
    else:
        lhs = integrate_piecewise(f_lhs, 0.0, 1.0, pts, tol=tol)
    obj = integrate_piecewise(f_obj, 0.0, 1.0, pts, tol=tol)
    refine = _refinement_delta(f_lhs, f_obj, 0.0, pts)
    return StrictDualReport(gap=N * (lhs - obj), lhs=N * lhs, objective=N * obj,
                            refinement_delta=refine, n_buyers=N, format=fmt,
                            epsilon_variant=epsilon_variant)


def _refinement_delta(f_lhs, f_obj, lo, pts, panels: int = 64) -> float:
    """Largest change in either integral when panel counts double."""
    edges = [lo] + [p for p in pts if lo < p < 1.0] + [1.0]
    delta = 0.0
    for f in (f_lhs, f_obj):
        for a, b in zip(edges[:-1], edges[1:]):
            coarse = fixed_panels(f, a, b, panels)
            fine = fixed_panels(f, a, b, 2 * panels)
            delta = max(delta, abs(fine - coarse))
    return delta


def dual_gap_strict(fmt: str, prior: Prior, n_buyers: int,
                    lam: QuantileStrategy, max_bid: float = 1.0,
                    *, epsilon_variant: str = "standard",
                    tol: float = 1e-10) -> float:
    return dual_gap_strict_report(fmt, prior, n_buyers, lam, max_bid,
                                  epsilon_variant=epsilon_variant, tol=tol).gap


def strict_step_report(fmt: str, prior: Prior, n_buyers: int,
                       lam: StepFunction, max_bid: float = 1.0,
                       *, tol: float = 1e-10) -> dict:
    """Per-buyer strict-certificate quantities at a step strategy, both
    with exact tie handling and in the limit of strictly increasing
    approximants (whose follow term keeps the theta^(N-1) win rate).

    The two differ because the strict functional is not continuous at
    steps; the signed difference of the step evaluation and the objective
    is the step's certificate violation.
    """
    _check_args(fmt, n_buyers)
    if not isinstance(lam, StepFunction):
        raise DomainError("step report needs a step strategy")
    N = n_buyers
    _validate_for_dual(lam, max_bid)
    beta_top = _beta_top(fmt, prior, N)
    pts = _splits(fmt, prior, N, lam, beta_top)
    f_exact = _strict_lhs_integrand(fmt, prior, N, lam, beta_top,
                                    "standard", "exact")
    f_limit = _strict_lhs_integrand(fmt, prior, N, lam, beta_top,
                                    "standard", "limit")
    if fmt == "first_price":
        lhs_step = _lhs_integral_fp(f_exact, pts, tol)
        lhs_limit = _lhs_integral_fp(f_limit, pts, tol)
    else:
        lhs_step = integrate_piecewise(f_exact, 0.0, 1.0, pts, tol=tol)
        lhs_limit = integrate_piecewise(f_limit, 0.0, 1.0, pts, tol=tol)
    objective = integrate_piecewise(
        _strict_objective_integrand(fmt, prior, N, lam, beta_top),
        0.0, 1.0, pts, tol=tol)
    return {"lhs_step": lhs_step, "lhs_limit": lhs_limit,
            "objective": objective, "gap_step": lhs_step - objective,
            "gap_limit": lhs_limit - objective}


# -- weak certificate -----------------------------------------------------------

@dataclass(frozen=True)
class WeakDualReport:
    gap: float
    lhs: float
    objective: float
    refinement_delta: float
    n_buyers: int
    format: str


class _BetaTable:
    """Vectorized beta and beta^{-1}. Closed forms for power-law shapes,
    a dense monotone table otherwise."""

    def __init__(self, fmt, prior, N):
        self.fmt = fmt
        self.prior = prior
        self.N = N
        self.top = _beta_top(fmt, prior, N)
        fam = prior.family
        self.alpha = 1.0 if fam == "uniform" else (
            prior.alpha if fam == "power_law" else None)
        if self.alpha is not None:
            self.c = _power_c(self.alpha, N) * prior.v_max
            self.exponent = (1.0 / self.alpha if fmt == "first_price"
                             else N - 1 + 1.0 / self.alpha)
        else:
            grid = np.linspace(0.0, 1.0, 8193)
            self._grid = grid
            self._vals = np.asarray(equilibrium_bid(fmt, prior, N, grid))

    def value(self, theta):
        if self.alpha is not None:
            return self.c * np.asarray(theta, dtype=float) ** self.exponent
        return np.interp(theta, self._grid, self._vals)

    def inverse(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, self.top)
        if self.alpha is not None:
            return (y / self.c) ** (1.0 / self.exponent)
        return np.interp(y, self._vals, self._grid)


def _weak_alpha_integrand(fmt, prior, N, lam, table: _BetaTable):
    """alpha(theta | lam), with the inner integral reduced in closed form:
    the first-price integrand 1 - beta/v is the constant 1 - c for
    power-law shapes (beta = c v there), and the all-pay inner integral is
    (N-1) theta^(N-2) (T - theta) for every prior."""
    def f(theta):
        theta = np.asarray(theta, dtype=float)
        v = np.asarray(prior.quantile(theta))
        beta = table.value(theta)
        own = np.asarray(lam.value(theta), dtype=float)
        T = table.inverse(np.minimum(own, table.top))
        if fmt == "all_pay":
            inner = (N - 1) * theta ** (N - 2) * (T - theta)
            return (own - beta) / v - inner
        if table.alpha is not None:
            inner = (N - 1) * (1.0 - _power_c(table.alpha, N)) * (T - theta)
        else:
            inner = np.array([
                (N - 1) * integrate_piecewise(
                    lambda s: 1.0 - table.value(s) / np.asarray(prior.quantile(s)),
                    float(t), float(Tt), [], tol=1e-11)
                for t, Tt in zip(np.atleast_1d(theta), np.atleast_1d(T))
            ]).reshape(theta.shape)
        out = (theta / v) * (own - beta) - inner
        if N > 2:
            out = theta ** (N - 2) * out
        return out

    return f


def _weak_lhs_integrand(fmt, prior, N, lam):
    def f(theta):
        theta = np.asarray(theta, dtype=float)
        v = np.asarray(prior.quantile(theta))
        u_follow, u_dev = deviation_utility(fmt, lam, prior, N, theta)
        return (u_dev - u_follow) / v

    return f


def dual_gap_weak_report(fmt: str, prior: Prior, n_buyers: int,
                         lam: QuantileStrategy, max_bid: float = 1.0,
                         *, tol: float = 1e-10) -> WeakDualReport:
    _check_args(fmt, n_buyers)
    N = n_buyers
    _validate_for_dual(lam, max_bid)
    table = _BetaTable(fmt, prior, N)
    pts = _splits(fmt, prior, N, lam, table.top)
    f_lhs = _weak_lhs_integrand(fmt, prior, N, lam)
    f_obj = _weak_alpha_integrand(fmt, prior, N, lam, table)
    lhs = integrate_piecewise(f_lhs, THETA_MIN_WEAK, 1.0, pts, tol=tol)
    obj = integrate_piecewise(f_obj, THETA_MIN_WEAK, 1.0, pts, tol=tol)
    refine = _refinement_delta(f_lhs, f_obj, THETA_MIN_WEAK, pts)
    return WeakDualReport(gap=N * (lhs - obj), lhs=N * lhs, objective=N * obj,
                          refinement_delta=refine, n_buyers=N, format=fmt)


def dual_gap_weak(fmt: str, prior: Prior, n_buyers: int,
                  lam: QuantileStrategy, max_bid: float = 1.0,
                  *, tol: float = 1e-10) -> float:
    return dual_gap_weak_report(fmt, prior, n_buyers, lam, max_bid,
                                tol=tol).gap


# -- analytic objective derivatives ---------------------------------------------

def strict_objective_derivative(fmt: str, prior: Prior, n_buyers: int,
                                lam: QuantileStrategy, direction,
                                *, tol: float = 1e-10) -> float:
    """d/dt of the strict objective at lam along ``direction`` (a callable
    of theta): the branch derivative is (lam - beta) below beta(1) and
    (beta(1) - beta) above."""
    _check_args(fmt, n_buyers)
    N = n_buyers
    beta_top = _beta_top(fmt, prior, N)

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        beta = np.asarray(equilibrium_bid(fmt, prior, N, theta))
        own = np.asarray(lam.value(theta), dtype=float)
        d = np.asarray(direction(theta), dtype=float)
        g = np.where(own <= beta_top, own - beta, beta_top - beta) * d
        if N > 2:
            g = theta ** (N - 2) * g
        return g

    pts = _splits(fmt, prior, N, lam, beta_top)
    return N * integrate_piecewise(f, 0.0, 1.0, pts, tol=tol)


def weak_objective_derivative(fmt: str, prior: Prior, n_buyers: int,
                              lam: QuantileStrategy, direction,
                              *, tol: float = 1e-10) -> float:
    """d/dt of the weak objective along ``direction``; the variational
    derivative of alpha is theta^(N-2) [theta/v - g(lam)] (first price,
    g(mu) = beta^{-1}(mu)/v(beta^{-1}(mu))) and
    1/v - theta^(N-2)/(T^(N-2) v(T)) (all pay), each with the inner term
    active only while lam(theta) < beta(1)."""
    _check_args(fmt, n_buyers)
    N = n_buyers
    table = _BetaTable(fmt, prior, N)

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        v = np.asarray(prior.quantile(theta))
        own = np.asarray(lam.value(theta), dtype=float)
        active = own < table.top
        T = table.inverse(np.minimum(own, table.top))
        vT = np.asarray(prior.quantile(T))
        d = np.asarray(direction(theta), dtype=float)
        if fmt == "first_price":
            g = np.where(active & (vT > 0.0), T / np.where(vT > 0.0, vT, 1.0), 0.0)
            out = theta ** (N - 2) * (theta / v - g) * d
        else:
            safe = active & (vT > 0.0) & (T > 0.0)
            inner = np.zeros_like(theta)
            inner[safe] = theta[safe] ** (N - 2) / (T[safe] ** (N - 2) * vT[safe])
            out = (1.0 / v - inner) * d
        return out

    pts = _splits(fmt, prior, N, lam, table.top)
    return N * integrate_piecewise(f, THETA_MIN_WEAK, 1.0, pts, tol=tol)


# -- sweep families ---------------------------------------------------------------

def power_curve_family(max_bid: float = 1.0, n_scales: int = 10,
                       n_powers: int = 20):
    """Grid of strictly increasing power strategies c * theta^p."""
    out = []
    for c in np.linspace(0.1 * max_bid, max_bid, n_scales):
        for p in np.geomspace(0.3, 4.0, n_powers):
            out.append(PowerCurve(float(c), float(p)))
    return out


def monotone_step_family(n_flats: int = 6, n_levels: int = 5,
                         max_bid: float = 1.0):
    """All weakly increasing step strategies on the uniform quantile grid
    with the given number of flats, levels from a uniform bid grid, and a
    zero bid on the first flat."""
    breaks = np.arange(1, n_flats) / n_flats
    grid = np.linspace(0.0, max_bid, n_levels)
    out = []
    for rest in itertools.combinations_with_replacement(range(n_levels),
                                                        n_flats - 1):
        levels = np.concatenate(([0.0], grid[list(rest)]))
        out.append(StepFunction(breaks, levels))
    return out


def perturbation_family(fmt: str, prior: Prior, n_buyers: int,
                        scales=(-0.05, -0.02, 0.02, 0.05, 0.1)):
    """Valid strictly increasing perturbations of the equilibrium curve."""
    out = []
    for direction in ("scale", "linear", "quadratic", "cubic", "sqrt", "sine"):
        for t in scales:
            try:
                out.append(EquilibriumPerturbation(fmt, prior, n_buyers,
                                                   float(t), direction))
            except DomainError:
                continue
    return out


# -- worked counterexamples --------------------------------------------------------

def verify_convex_prior_example(*, eps: float = 1e-3, delta: float = 0.05,
                                n_grid: int = 10_000) -> dict:
    """Convex-prior robustness example: a candidate outcome whose follow
    utility (1-eps) theta^(3/2) / 3 + eps (1-delta) sqrt(theta) / 2 beats
    every deviation against the bid distribution with cdf
    G(b) = eps + (9/4)(1-eps) b^2 on [0, 2/3].

    The deviation value of bidding b at valuation v = sqrt(theta) is
    f(b) = (v - b) G(b); its interior stationary maximizer is
    b* = v/3 + sqrt(v^2/9 - 4 eps/(27(1-eps))) when defined. Checks the
    closed-form maximizer against golden-section search and returns the
    minimal follow-minus-deviation margin on a theta grid in [0.05, 1].
    """
    a = 2.25 * (1.0 - eps)

    def cap_value(b, v):
        return (v - b) * np.minimum(eps + a * b * b, 1.0)

    def best_response(v):
        disc = v * v / 9.0 - eps / (3.0 * a)
        cands = [0.0, min(v, 2.0 / 3.0)]
        if disc >= 0.0:
            b_star = v / 3.0 + math.sqrt(disc)
            if 0.0 <= b_star <= min(v, 2.0 / 3.0):
                cands.append(b_star)
        vals = [cap_value(b, v) for b in cands]
        i = int(np.argmax(vals))
        return cands[i], vals[i]

    def golden(v):
        lo, hi = 0.0, min(v, 2.0 / 3.0)
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        f1, f2 = cap_value(x1, v), cap_value(x2, v)
        for _ in range(200):
            if f1 < f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + invphi * (hi - lo)
                f2 = cap_value(x2, v)
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - invphi * (hi - lo)
                f1 = cap_value(x1, v)
        return max(f1, f2)

    thetas = np.linspace(0.05, 1.0, n_grid)
    margins = np.empty(n_grid)
    max_err = 0.0
    for i, th in enumerate(thetas):
        v = math.sqrt(th)
        follow = (1.0 - eps) * th ** 1.5 / 3.0 + eps * (1.0 - delta) * v / 2.0
        _, cap = best_response(v)
        margins[i] = follow - cap
        if i % 500 == 0:
            max_err = max(max_err, abs(cap - golden(v)))
    return {"min_margin": float(margins.min()),
            "argmin_theta": float(thetas[int(np.argmin(margins))]),
            "maximizer_check_error": max_err,
            "feasible": bool(margins.min() > 0.0)}


def verify_complete_info_example() -> dict:
    """Complete-information example: both buyers draw a common bid from
    H(b) = min{0.16/(1-b), 0.32/(1.2-b), 1} (an atom of 0.16 at zero, a
    density to 0.88) and tie. Follow utilities are (1/2) E_H[v_i - b];
    deviation caps sup_b (v_i - b) H(b) are piecewise monotone with exact
    suprema 0.16 (v1 = 1) and 0.32 (v2 = 1.2). Both buyers strictly
    prefer following, although the outcome is far from the equilibrium of
    the corresponding auction.
    """
    v1, v2 = 1.0, 1.2
    b_switch = 0.8
    b_top = 0.88
    atom = 0.16

    def h1(b):
        return 0.16 / (1.0 - b) ** 2

    def h2(b):
        return 0.32 / (1.2 - b) ** 2

    def expect(v):
        head = atom * v
        mid = integrate_piecewise(lambda b: (v - b) * h1(b), 0.0, b_switch, [],
                                  tol=1e-12)
        tail = integrate_piecewise(lambda b: (v - b) * h2(b), b_switch, b_top,
                                   [], tol=1e-12)
        return head + mid + tail

    u1 = 0.5 * expect(v1)
    u2 = 0.5 * expect(v2)
    # piecewise monotone caps: evaluate the piece endpoints
    cap1 = max(atom * v1,
               0.16,                                   # (1-b) * 0.16/(1-b) on [0, 0.8]
               (v1 - b_switch) * 0.32 / (1.2 - b_switch),
               v1 - b_top)
    cap2 = max(atom * v2,
               (v2 - 0.0) * 0.16 / 1.0,
               (v2 - b_switch) * 0.32 / (1.2 - b_switch),
               0.32,                                   # constant piece on [0.8, 0.88]
               v2 - b_top)
    return {"u1": u1, "u2": u2, "cap1": cap1, "cap2": cap2,
            "feasible": bool(u1 > cap1 and u2 > cap2)}
