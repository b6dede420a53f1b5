"""Valuation priors on [0, v_max]: cdf, density, quantile, grid weights.

Four families, all with closed-form cdf and quantile:

* ``uniform``
* ``power_law`` with shape alpha > 0, cdf (v / v_max)^alpha
* ``exponential`` truncated to the support, rate lam > 0
* ``gaussian`` truncated to the support, location mu and scale sigma
  given on the unit-scaled support

A prior is serialized as a flat dict {"family": ..., "v_max": ..., and the
shape parameters}. ``Prior.from_dict`` inverts ``Prior.to_dict``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfinv

__all__ = ["Prior", "DomainError"]

_SQRT2 = math.sqrt(2.0)


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain."""


def _phi(z):
    return 0.5 * (1.0 + erf(z / _SQRT2))


@dataclass(frozen=True)
class Prior:
    family: str
    v_max: float = 1.0
    alpha: float | None = None
    lam: float | None = None
    mu: float | None = None
    sigma: float | None = None
    _norm: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        if self.v_max <= 0.0:
            raise DomainError(f"v_max must be positive, got {self.v_max}")
        fam = self.family
        if fam == "uniform":
            pass
        elif fam == "power_law":
            if self.alpha is None or self.alpha <= 0.0:
                raise DomainError(f"power_law needs alpha > 0, got {self.alpha}")
        elif fam == "exponential":
            if self.lam is None or self.lam <= 0.0:
                raise DomainError(f"exponential needs lam > 0, got {self.lam}")
            object.__setattr__(self, "_norm", (-math.expm1(-self.lam),))
        elif fam == "gaussian":
            if self.mu is None or self.sigma is None or self.sigma <= 0.0:
                raise DomainError("gaussian needs mu and sigma > 0")
            lo = _phi((0.0 - self.mu) / self.sigma)
            hi = _phi((1.0 - self.mu) / self.sigma)
            object.__setattr__(self, "_norm", (float(lo), float(hi - lo)))
        else:
            raise DomainError(f"unknown prior family {fam!r}")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = {"family": self.family, "v_max": self.v_max}
        for k in ("alpha", "lam", "mu", "sigma"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @staticmethod
    def from_dict(d: dict) -> "Prior":
        d = dict(d)
        fam = d.pop("family")
        return Prior(family=fam, **d)

    def label(self) -> str:
        parts = []
        for k in ("alpha", "lam", "mu", "sigma"):
            v = getattr(self, k)
            if v is not None:
                parts.append(f"{k}={v:g}")
        return ";".join(parts)

    # -- distribution functions -------------------------------------------
    # All accept scalars or arrays; scalar in, scalar out.

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < -1e-15) or np.any(v > self.v_max * (1.0 + 1e-15)):
            raise DomainError("valuation outside [0, v_max]")
        x = np.clip(v / self.v_max, 0.0, 1.0)
        fam = self.family
        if fam == "uniform":
            out = x
        elif fam == "power_law":
            out = x ** self.alpha
        elif fam == "exponential":
            out = -np.expm1(-self.lam * x) / self._norm[0]
        else:
            lo, width = self._norm
            out = (_phi((x - self.mu) / self.sigma) - lo) / width
        return out if out.ndim else float(out)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < -1e-15) or np.any(v > self.v_max * (1.0 + 1e-15)):
            raise DomainError("valuation outside [0, v_max]")
        x = np.clip(v / self.v_max, 0.0, 1.0)
        fam = self.family
        if fam == "uniform":
            out = np.ones_like(x)
        elif fam == "power_law":
            a = self.alpha
            with np.errstate(divide="ignore", over="ignore"):
                out = np.where(x > 0.0, a * x ** (a - 1.0), np.inf if a < 1.0 else (1.0 if a == 1.0 else 0.0))
        elif fam == "exponential":
            out = self.lam * np.exp(-self.lam * x) / self._norm[0]
        else:
            lo, width = self._norm
            z = (x - self.mu) / self.sigma
            out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi) * width)
        out = out / self.v_max
        return out if out.ndim else float(out)

    def quantile(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < -1e-15) or np.any(theta > 1.0 + 1e-15):
            raise DomainError("quantile argument outside [0, 1]")
        t = np.clip(theta, 0.0, 1.0)
        fam = self.family
        if fam == "uniform":
            x = t
        elif fam == "power_law":
            x = t ** (1.0 / self.alpha)
        elif fam == "exponential":
            x = -np.log1p(-t * self._norm[0]) / self.lam
        else:
            lo, width = self._norm
            x = self.mu + self.sigma * _SQRT2 * erfinv(2.0 * (lo + t * width) - 1.0)
            x = np.clip(x, 0.0, 1.0)
        out = x * self.v_max
        return out if out.ndim else float(out)

    def quantile_derivative(self, theta):
        """d quantile / d theta = 1 / pdf(quantile(theta))."""
        v = self.quantile(theta)
        return 1.0 / self.pdf(v)

    # -- grid weights -------------------------------------------------------

    def grid_weights(self, valuations: np.ndarray) -> np.ndarray:
        """Probability weights for a sorted valuation grid.

        Uniform family: the uniform discrete distribution on the grid.
        Power law: cdf increments F(min(v + h, v_max)) - F(v) with h the
        grid pitch, so the top point can carry zero mass.
        Exponential and gaussian: density-proportional, normalized.
        """
        v = np.asarray(valuations, dtype=float)
        fam = self.family
        if fam == "uniform":
            w = np.full(v.size, 1.0 / v.size)
        elif fam == "power_law":
            h = v[1] - v[0] if v.size > 1 else self.v_max
            w = self.cdf(np.minimum(v + h, self.v_max)) - self.cdf(v)
            w = np.asarray(w, dtype=float)
            s = w.sum()
            if not math.isclose(s, 1.0, rel_tol=0, abs_tol=1e-9):
                w = w / s
        else:
            w = np.asarray(self.pdf(v), dtype=float)
            w = w / w.sum()
        return w
