"""Tukey's HSD all-pairs comparison and the studentized range distribution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy import integrate, special

_QUAD = dict(epsabs=1e-11, epsrel=1e-10, limit=200)


def _normal_range_cdf(w: float, k: int) -> float:
    """P(range of k iid standard normals <= w)."""
    if w <= 0:
        return 0.0

    def integrand(z):
        inner = special.ndtr(z) - special.ndtr(z - w)
        return math.exp(-0.5 * z * z) * inner ** (k - 1)

    # Integrand is negligible outside [-9, w + 9].
    val, _ = integrate.quad(integrand, -9.0, w + 9.0, points=[0.0, w], **_QUAD)
    return min(1.0, k * val / math.sqrt(2.0 * math.pi))


def _log_scale_density(s: float, df: float) -> float:
    """log density of sqrt(chi2_df / df)."""
    if s <= 0:
        return -math.inf
    half = 0.5 * df
    return (
        math.log(2.0 * df * s)
        + (half - 1.0) * math.log(df * s * s)
        - 0.5 * df * s * s
        - half * math.log(2.0)
        - special.gammaln(half)
    )


@lru_cache(maxsize=4096)
def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """CDF of the studentized range statistic with ``k`` means and ``df`` error df.

    ``df = inf`` gives the range of standard normals. Evaluated by adaptive
    quadrature: the normal-range CDF integrated against the density of the
    pooled standard deviation.
    """
    k = int(k)
    if k < 2:
        raise ValueError("studentized range needs k >= 2")
    if not df > 0:
        raise ValueError("degrees of freedom must be positive")
    if q <= 0:
        return 0.0
    if math.isinf(q):
        return 1.0
    if math.isinf(df):
        return _normal_range_cdf(q, k)

    sigma = 1.0 / math.sqrt(2.0 * df)
    lo = max(0.0, 1.0 - 40.0 * sigma)
    hi = 1.0 + 40.0 * sigma if df > 4 else 60.0

    def integrand(s):
        return _normal_range_cdf(q * s, k) * math.exp(_log_scale_density(s, df))

    peak = [1.0] if lo < 1.0 < hi else None
    val, _ = integrate.quad(integrand, lo, hi, points=peak, **_QUAD)
    return min(1.0, max(0.0, val))


def studentized_range_sf(q: float, k: int, df: float) -> float:
    return 1.0 - studentized_range_cdf(float(q), int(k), float(df))


@dataclass(frozen=True)
class PairResult:
    group_a: str
    group_b: str
    mean_diff: float  # mean(group_a) - mean(group_b)
    q: float
    p_value: float
    significant: bool


@dataclass
class GroupComparison:
    labels: list
    means: dict
    sizes: dict
    df: int
    msw: float
    pairwise: list = field(default_factory=list)
    alpha: float = 0.05

    def pair(self, a, b) -> PairResult:
        for r in self.pairwise:
            if (r.group_a, r.group_b) in ((a, b), (b, a)):
                return r
        raise KeyError((a, b))

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "means": dict(self.means),
            "sizes": dict(self.sizes),
            "df": self.df,
            "msw": self.msw,
            "alpha": self.alpha,
            "pairwise": [r.__dict__ for r in self.pairwise],
        }


def tukey_hsd(groups: dict, alpha: float = 0.05) -> GroupComparison:
    """Tukey-Kramer HSD over named groups of per-case values.

    Unequal group sizes use the Tukey-Kramer standard error.
    """
    if len(groups) < 2:
        raise ValueError("Tukey HSD needs at least 2 groups")
    labels = list(groups)
    data = {}
    for name in labels:
        v = np.asarray(groups[name], dtype=np.float64).ravel()
        if v.size < 2:
            raise ValueError(f"group {name!r} needs at least 2 values, has {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"group {name!r} contains non-finite values")
        data[name] = v
    k = len(labels)
    n_total = sum(v.size for v in data.values())
    df = n_total - k
    if df < 1:
        raise ValueError("total within-group degrees of freedom < 1")
    ss_within = sum(float(((v - v.mean()) ** 2).sum()) for v in data.values())
    msw = ss_within / df

    means = {name: float(data[name].mean()) for name in labels}
    sizes = {name: int(data[name].size) for name in labels}
    out = GroupComparison(labels, means, sizes, df, msw, alpha=alpha)
    for a, b in combinations(labels, 2):
        diff = means[a] - means[b]
        se = math.sqrt(msw / 2.0 * (1.0 / sizes[a] + 1.0 / sizes[b]))
        if diff == 0:
            q, p = 0.0, 1.0
        elif se == 0:
            q, p = math.inf, 0.0
        else:
            q = abs(diff) / se
            p = studentized_range_sf(q, k, df)
        out.pairwise.append(PairResult(a, b, diff, q, p, p < alpha))
    return out
