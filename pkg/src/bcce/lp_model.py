"""Linear programs over Bayes coarse correlated equilibria of the
discretized auctions.

Two formulations are provided.

* The *pair relaxation* (two buyers) keeps only the first and second
  order marginals of the outcome distribution: sigma1(v, b), the bid
  distribution conditional on a valuation, and sigma2((v1, b1), (v2, b2)),
  the joint bid distribution of an unordered pair of buyers conditional
  on their valuations. Exchangeability makes sigma2 symmetric, so it is
  stored once per unordered index pair. Constraints: each sigma1 row is
  a distribution, sigma2 is consistent with sigma1, and no buyer gains
  by switching to a fixed bid before seeing the recommendation
  (obedience). With notion="bce" the obedience rows are conditioned on
  the recommended bid as well, which is a strictly stronger system.

* The *extended formulation* enumerates full pure strategy profiles
  lambda = (lambda_1, ..., lambda_N), lambda_i : V -> B, and imposes the
  coarse obedience rows exactly. It is exponentially large and only
  meant as ground truth on tiny instances.

Every matrix is assembled in COO triplets; conversion to CSR sums
duplicate entries, which is exactly the accumulation the symmetric
sigma2 storage needs when both ordered copies of a pair are generated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .auctions import DiscreteAuction, equilibrium_bid
from .priors import DomainError, Prior

__all__ = [
    "LpProblem", "MarginalTensor", "pair_count", "pair_index",
    "build_wasserstein_lp", "build_concentration_lp", "build_extended_lp",
    "marginalize", "explicit_uniform_bcce", "check_feasibility",
    "profile_strategies", "extended_matched_objective",
]

COEF_DROP = 1e-14
EXTENDED_COLUMN_LIMIT = 1_000_000
WINDOW_CUSHION = 1e-12

NOTIONS = ("bcce", "bce")


@dataclass
class LpProblem:
    """A linear program in row form: optimize c @ x subject to
    A x (rel) rhs and x >= 0, rel entries one of '<', '=', '>'."""

    name: str
    sense: str
    c: np.ndarray
    A: sp.csr_matrix
    rel: np.ndarray
    rhs: np.ndarray
    row_labels: list
    col_labels: list
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ np.asarray(x, dtype=float))


def pair_count(n_single: int) -> int:
    return n_single * (n_single + 1) // 2


def pair_index(p, q, n_single: int):
    """Canonical index of the unordered pair {p, q} of single indices."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    return lo * n_single - lo * (lo - 1) // 2 + (hi - lo)


def _require_two_buyers(auction: DiscreteAuction):
    if auction.n_buyers != 2:
        raise DomainError("the pair relaxation is only defined for two buyers")


def _utility_matrix(auction: DiscreteAuction, v: float) -> np.ndarray:
    """U[b, b2]: utility of bidding B[b] against a single opponent at B[b2]
    for a buyer with valuation v."""
    B = auction.bids
    win = (B[:, None] > B[None, :]) + 0.5 * (B[:, None] == B[None, :])
    if auction.format == "first_price":
        return (v - B)[:, None] * win
    return v * win - B[:, None]


def _equilibrium_targets(auction: DiscreteAuction, prior: Prior) -> np.ndarray:
    theta = np.asarray(prior.cdf(auction.valuations))
    return np.asarray(equilibrium_bid(auction.format, prior,
                                      auction.n_buyers, theta))


def _relaxation_constraints(auction: DiscreteAuction, notion: str):
    _require_two_buyers(auction)
    if notion not in NOTIONS:
        raise DomainError(f"notion must be one of {NOTIONS}, got {notion!r}")
    nv, nb = auction.n_valuations, auction.n_bids
    P = nv * nb
    n1 = P
    n_cols = n1 + pair_count(P)
    W = auction.weights

    rows, cols, data = [], [], []
    rel, rhs, labels = [], [], []
    r = 0

    # each sigma1 row is a probability distribution
    for iv in range(nv):
        rows.append(np.full(nb, r))
        cols.append(np.arange(iv * nb, (iv + 1) * nb, dtype=np.int64))
        data.append(np.ones(nb))
        rel.append("=")
        rhs.append(1.0)
        labels.append(f"PR_v{iv:02d}")
        r += 1

    # sigma2 marginalizes to sigma1 against every opponent valuation
    ib2 = np.arange(nb, dtype=np.int64)
    for iv1 in range(nv):
        for ib1 in range(nb):
            p = iv1 * nb + ib1
            for iv2 in range(nv):
                q = iv2 * nb + ib2
                rows.append(np.full(nb + 1, r))
                cols.append(np.concatenate(
                    (n1 + pair_index(p, q, P), [p])))
                data.append(np.concatenate((np.ones(nb), [-1.0])))
                rel.append("=")
                rhs.append(0.0)
                labels.append(f"RS_v{iv1:02d}b{ib1:02d}_v{iv2:02d}")
                r += 1

    # obedience rows
    iv2_m, ib2_m = np.meshgrid(np.arange(nv, dtype=np.int64),
                               np.arange(nb, dtype=np.int64), indexing="ij")
    q_flat = (iv2_m * nb + ib2_m).ravel()
    w_flat = W[iv2_m.ravel()]
    for iv1 in range(nv):
        U = _utility_matrix(auction, auction.valuations[iv1])
        if notion == "bcce":
            for ibp in range(nb):
                # gain of switching every recommendation to B[ibp]
                cc, dd = [], []
                for ib1 in range(nb):
                    p = iv1 * nb + ib1
                    coef = w_flat * (U[ibp, ib2_m.ravel()] - U[ib1, ib2_m.ravel()])
                    keep = np.abs(coef) > COEF_DROP
                    cc.append(n1 + pair_index(p, q_flat[keep], P))
                    dd.append(coef[keep])
                cc = np.concatenate(cc) if cc else np.empty(0, np.int64)
                dd = np.concatenate(dd) if dd else np.empty(0)
                rows.append(np.full(cc.size, r))
                cols.append(cc)
                data.append(dd)
                rel.append("<")
                rhs.append(0.0)
                labels.append(f"BC_v{iv1:02d}_b{ibp:02d}")
                r += 1
        else:
            for ib1 in range(nb):
                p = iv1 * nb + ib1
                for ibp in range(nb):
                    if ibp == ib1:
                        continue
                    coef = w_flat * (U[ibp, ib2_m.ravel()] - U[ib1, ib2_m.ravel()])
                    keep = np.abs(coef) > COEF_DROP
                    cc = n1 + pair_index(p, q_flat[keep], P)
                    rows.append(np.full(cc.size, r))
                    cols.append(cc)
                    data.append(coef[keep])
                    rel.append("<")
                    rhs.append(0.0)
                    labels.append(f"BE_v{iv1:02d}b{ib1:02d}_b{ibp:02d}")
                    r += 1

    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, n_cols)).tocsr()
    col_labels = [f"S1_v{iv:02d}_b{ib:02d}"
                  for iv in range(nv) for ib in range(nb)]
    for p in range(P):
        for q in range(p, P):
            col_labels.append(
                f"S2_v{p // nb:02d}b{p % nb:02d}_v{q // nb:02d}b{q % nb:02d}")
    return A, np.array(rel), np.array(rhs), labels, col_labels


def build_wasserstein_lp(auction: DiscreteAuction, prior: Prior,
                         notion: str = "bcce") -> LpProblem:
    """Maximize the squared quadratic transport distance between the bid
    marginal and the continuous equilibrium bid over the relaxation."""
    A, rel, rhs, labels, col_labels = _relaxation_constraints(auction, notion)
    nv, nb = auction.n_valuations, auction.n_bids
    beta = _equilibrium_targets(auction, prior)
    c = np.zeros(A.shape[1])
    c[:nv * nb] = (auction.weights[:, None]
                   * (auction.bids[None, :] - beta[:, None]) ** 2).ravel()
    return LpProblem(name="wasserstein_sq", sense="max", c=c, A=A, rel=rel,
                     rhs=rhs, row_labels=labels, col_labels=col_labels,
                     meta={"notion": notion, "format": auction.format,
                           "prior": prior.to_dict(), "kind": "wasserstein"})


def build_concentration_lp(auction: DiscreteAuction, prior: Prior,
                           window: float, notion: str = "bcce") -> LpProblem:
    """Minimize the sigma1 mass whose bid lies within ``window`` of the
    equilibrium bid at the valuation's quantile (summed over valuations,
    unweighted)."""
    if window < 0:
        raise DomainError("window must be nonnegative")
    A, rel, rhs, labels, col_labels = _relaxation_constraints(auction, notion)
    nv, nb = auction.n_valuations, auction.n_bids
    beta = _equilibrium_targets(auction, prior)
    inside = (np.abs(auction.bids[None, :] - beta[:, None])
              <= window + WINDOW_CUSHION)
    c = np.zeros(A.shape[1])
    c[:nv * nb] = inside.astype(float).ravel()
    return LpProblem(name="concentration", sense="min", c=c, A=A, rel=rel,
                     rhs=rhs, row_labels=labels, col_labels=col_labels,
                     meta={"notion": notion, "format": auction.format,
                           "prior": prior.to_dict(), "window": window,
                           "kind": "concentration"})


# -- extended formulation ---------------------------------------------------------

def profile_strategies(auction: DiscreteAuction):
    """All pure strategy profiles in column order: tuples of length
    n_buyers * n_valuations of bid indices, buyer-major."""
    nv, nb, N = auction.n_valuations, auction.n_bids, auction.n_buyers
    n_cols = nb ** (N * nv)
    if n_cols > EXTENDED_COLUMN_LIMIT:
        raise DomainError(f"extended formulation would need {n_cols} columns")
    return list(itertools.product(range(nb), repeat=N * nv))


def _profile_utility(auction: DiscreteAuction, v: float, own_bid: float,
                     other_bids) -> float:
    bids = np.array([own_bid] + list(other_bids))
    top = bids.max()
    n_top = int((bids == top).sum())
    win = (1.0 / n_top) if bids[0] == top else 0.0
    if auction.format == "first_price":
        return win * (v - own_bid)
    return win * v - own_bid


def extended_matched_objective(auction: DiscreteAuction,
                               prior: Prior) -> np.ndarray:
    """Objective aligned with the relaxation distance: the per profile
    average over buyers and valuations of the squared bid error."""
    beta = _equilibrium_targets(auction, prior)
    nv, nb, N = auction.n_valuations, auction.n_bids, auction.n_buyers
    W = auction.weights
    err = W[:, None] * (auction.bids[None, :] - beta[:, None]) ** 2
    c = []
    for prof in profile_strategies(auction):
        total = 0.0
        for i in range(N):
            strat = prof[i * nv:(i + 1) * nv]
            total += sum(err[iv, strat[iv]] for iv in range(nv))
        c.append(total / N)
    return np.array(c)


def build_extended_lp(auction: DiscreteAuction, prior: Prior = None,
                      objective: np.ndarray = None) -> LpProblem:
    """Exact coarse obedience LP over distributions of full pure strategy
    profiles. Tiny instances only."""
    nv, nb, N = auction.n_valuations, auction.n_bids, auction.n_buyers
    profiles = profile_strategies(auction)
    n_cols = len(profiles)
    W = auction.weights
    V = auction.valuations
    B = auction.bids

    if objective is None:
        if prior is None:
            raise DomainError("need a prior or an explicit objective")
        c = extended_matched_objective(auction, prior)
    else:
        c = np.asarray(objective, dtype=float)
        if c.shape != (n_cols,):
            raise DomainError("objective length does not match column count")

    rows, cols, data = [], [], []
    rel, rhs, labels = [], [], []
    rows.append(np.zeros(n_cols, dtype=np.int64))
    cols.append(np.arange(n_cols, dtype=np.int64))
    data.append(np.ones(n_cols))
    rel.append("=")
    rhs.append(1.0)
    labels.append("NORM")
    r = 1

    opponent_vals = list(itertools.product(range(nv), repeat=N - 1))
    for i in range(N):
        others = [j for j in range(N) if j != i]
        for iv in range(nv):
            v = V[iv]
            for ibp in range(nb):
                cc, dd = [], []
                for k, prof in enumerate(profiles):
                    own = prof[i * nv + iv]
                    coef = 0.0
                    for vo in opponent_vals:
                        w = 1.0
                        other_bids = []
                        for j, ivo in zip(others, vo):
                            w *= W[ivo]
                            other_bids.append(B[prof[j * nv + ivo]])
                        coef += w * (
                            _profile_utility(auction, v, B[ibp], other_bids)
                            - _profile_utility(auction, v, B[own], other_bids))
                    if abs(coef) > COEF_DROP:
                        cc.append(k)
                        dd.append(coef)
                rows.append(np.full(len(cc), r, dtype=np.int64))
                cols.append(np.array(cc, dtype=np.int64))
                data.append(np.array(dd))
                rel.append("<")
                rhs.append(0.0)
                labels.append(f"CC_i{i}_v{iv:02d}_b{ibp:02d}")
                r += 1

    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, n_cols)).tocsr()
    col_labels = ["P_" + "".join(str(s) for s in prof) for prof in profiles]
    return LpProblem(name="extended_cce", sense="max", c=c, A=A,
                     rel=np.array(rel), rhs=np.array(rhs), row_labels=labels,
                     col_labels=col_labels,
                     meta={"kind": "extended", "format": auction.format})


# -- marginal tensors -------------------------------------------------------------

@dataclass
class MarginalTensor:
    """First and second order conditional bid marginals of an exchangeable
    outcome. sigma1[iv, ib] = P[bid | valuation]; sigma2 stores the
    symmetric P[b1, b2 | v1, v2] once per unordered pair of (valuation,
    bid) single indices."""

    auction: DiscreteAuction
    sigma1: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        nv, nb = self.auction.n_valuations, self.auction.n_bids
        P = nv * nb
        if self.sigma1.shape != (nv, nb):
            raise DomainError("sigma1 has the wrong shape")
        if self.sigma2.shape != (pair_count(P),):
            raise DomainError("sigma2 has the wrong length")

    @classmethod
    def from_x(cls, auction: DiscreteAuction, x: np.ndarray) -> "MarginalTensor":
        nv, nb = auction.n_valuations, auction.n_bids
        P = nv * nb
        x = np.asarray(x, dtype=float)
        if x.shape != (P + pair_count(P),):
            raise DomainError("solution vector has the wrong length")
        return cls(auction, x[:P].reshape(nv, nb).copy(), x[P:].copy())

    def to_x(self) -> np.ndarray:
        return np.concatenate((self.sigma1.ravel(), self.sigma2))

    def sigma2_dense(self) -> np.ndarray:
        """Ordered view S[iv1, ib1, iv2, ib2]."""
        nv, nb = self.auction.n_valuations, self.auction.n_bids
        P = nv * nb
        p, q = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
        dense = self.sigma2[pair_index(p, q, P)]
        return dense.reshape(nv, nb, nv, nb)


def marginalize(auction: DiscreteAuction, x: np.ndarray) -> MarginalTensor:
    """Project an extended profile distribution onto the pair relaxation
    coordinates, averaging over buyer identities."""
    nv, nb, N = auction.n_valuations, auction.n_bids, auction.n_buyers
    profiles = profile_strategies(auction)
    x = np.asarray(x, dtype=float)
    if x.shape != (len(profiles),):
        raise DomainError("profile distribution has the wrong length")
    P = nv * nb
    sigma1 = np.zeros((nv, nb))
    dense = np.zeros((P, P))
    for prob, prof in zip(x, profiles):
        if prob == 0.0:
            continue
        strats = [prof[i * nv:(i + 1) * nv] for i in range(N)]
        for s in strats:
            for iv in range(nv):
                sigma1[iv, s[iv]] += prob / N
        for i in range(N):
            for j in range(N):
                if i == j:
                    continue
                for iv1 in range(nv):
                    p = iv1 * nb + strats[i][iv1]
                    for iv2 in range(nv):
                        q = iv2 * nb + strats[j][iv2]
                        dense[p, q] += prob / (N * (N - 1))
    pp, qq = np.triu_indices(P)
    sigma2 = dense[pp, qq]
    return MarginalTensor(auction, sigma1, sigma2)


def explicit_uniform_bcce(auction: DiscreteAuction) -> MarginalTensor:
    """Closed-form equilibrium family for the uniform prior with bids on
    half the valuation grid: conditional on any valuation pair, bid half
    of one's valuation with probability 2K/(2K+1) and zero otherwise,
    perfectly correlated (K = number of valuation points)."""
    nv, nb = auction.n_valuations, auction.n_bids
    if auction.n_buyers != 2:
        raise DomainError("the explicit family is for two buyers")
    if not np.allclose(auction.bids, auction.valuations / 2.0):
        raise DomainError("needs the half valuation bid grid")
    if not np.allclose(auction.weights, 1.0 / nv):
        raise DomainError("needs uniform valuation weights")
    K = nv
    q2 = 2.0 * K / (2.0 * K + 1.0)
    q0 = 1.0 / (2.0 * K + 1.0)
    P = nv * nb
    sigma1 = np.zeros((nv, nb))
    for iv in range(nv):
        sigma1[iv, iv] += q2
        sigma1[iv, 0] += q0
    sigma2 = np.zeros(pair_count(P))
    for iv1 in range(nv):
        for iv2 in range(nv):
            hi = pair_index(iv1 * nb + iv1, iv2 * nb + iv2, P)
            lo = pair_index(iv1 * nb, iv2 * nb, P)
            sigma2[hi] = q2
            sigma2[lo] += q0 if hi == lo else 0.0
            if hi != lo:
                sigma2[lo] = q0
    return MarginalTensor(auction, sigma1, sigma2)


def check_feasibility(tensor: MarginalTensor, notion: str = "bcce",
                      tol: float = 1e-9) -> dict:
    """Residuals of the relaxation constraints at a tensor, computed
    directly from the marginals (independently of the LP assembly)."""
    if notion not in NOTIONS:
        raise DomainError(f"notion must be one of {NOTIONS}, got {notion!r}")
    auction = tensor.auction
    nv, nb = auction.n_valuations, auction.n_bids
    W = auction.weights
    S1 = tensor.sigma1
    S = tensor.sigma2_dense()

    prob = float(np.abs(S1.sum(axis=1) - 1.0).max())
    # sum over b2 of S[v1, b1, v2, :] must reproduce sigma1[v1, b1]
    restrict = float(np.abs(S.sum(axis=3) - S1[:, :, None]).max())
    min_entry = float(min(S1.min(), tensor.sigma2.min()))

    obedience = -np.inf
    for iv1 in range(nv):
        U = _utility_matrix(auction, auction.valuations[iv1])
        # R[b1, b2] = sum_v2 W[v2] S[v1, b1, v2, b2]
        R = np.einsum("j,bjc->bc", W, S[iv1])
        if notion == "bcce":
            qv = R.sum(axis=0)
            follow = float(np.einsum("bc,bc->", U, R))
            gains = U @ qv - follow
        else:
            follow = np.einsum("bc,bc->b", U, R)
            gains = (U @ R.T).T - follow[:, None]
        obedience = max(obedience, float(np.max(gains)))

    feasible = (prob <= tol and restrict <= tol and min_entry >= -tol
                and obedience <= tol)
    return {"prob": prob, "restrict": restrict, "obedience": obedience,
            "min_entry": min_entry, "feasible": bool(feasible)}
