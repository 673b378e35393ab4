"""Closed-form near-optimality guarantees for greedy designs.

Two relaxations of supermodularity drive the guarantees. For a normalized
monotone decreasing cost f over multisets:

- alpha-supermodularity (multiplicative): gain_u(A) >= alpha(|A|,|B|) * gain_u(B)
  for all nested A within B. The greedy value after ell steps then satisfies

      f(G_ell) <= [1 - prod_{h<ell} (1 - 1/alpha_t(h))] * f(D_star),
      alpha_t(h) = sum_{s<k} alpha(h, h+s)^{-1},

  which is itself bounded by the exponential form 1 - exp(-alpha_bar*ell/k)
  with alpha_bar the minimum alpha over a < ell, b < ell+k.

- epsilon-supermodularity (additive): gain_u(B) - gain_u(A) <= epsilon(|A|,|B|).
  Then

      f(G_ell) <= [1-(1-1/k)^ell] f(D_star)
                  + (1/k) sum_{s<k} sum_{h<ell} epsilon(h,h+s) (1-1/k)^(ell-1-h)

  with the looser exponential form (1-e^{-ell/k})(f(D_star) + k*epsilon_bar).

For the A criterion a closed-form alpha lower bound is available from the pool
spectrum alone (:func:`alpha_bound_a`, optionally tightened by
:func:`alpha_bound_tightened`); for the E criterion a closed-form epsilon upper
bound is :func:`epsilon_bound_e`. The "equivalent" summaries alpha_hat and
epsilon_hat compress a per-step bound sequence into the single constant that
reproduces the same certificate value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg, model
from .errors import DegenerateFactor, InvalidAlpha, RankDeficientTarget

__all__ = [
    "AlphaCertificate",
    "EpsilonCertificate",
    "DGuarantee",
    "alpha_bound_a",
    "alpha_bound_tightened",
    "alpha_guarantee",
    "alpha_certificate_from_bounds",
    "epsilon_bound_e",
    "epsilon_guarantee",
    "epsilon_certificate_from_bounds",
    "equivalent_alpha",
    "equivalent_epsilon",
    "d_guarantee",
]

#: Relative threshold below which the target map counts as row-rank deficient.
RANK_RTOL = 1e-12


def _increment_lmax_values(pool: model.Pool) -> np.ndarray:
    """lambda_max(M_e) for every experiment, sorted descending, cached."""
    key = "increment_lmax"
    if key not in pool._cache:
        vals = np.array(
            [linalg.extreme_eigs(linalg.SymMatrix(e.M))[1] for e in pool.experiments]
        )
        vals.sort()
        pool._cache[key] = vals[::-1]
    return pool._cache[key]


def _target_extreme_singvals(pool: model.Pool) -> tuple[float, float]:
    key = "target_singvals"
    if key not in pool._cache:
        s = np.linalg.svd(pool.target, compute_uv=False)
        pool._cache[key] = (float(s[-1]), float(s[0]))
    return pool._cache[key]


def _prior_precision_extremes(pool: model.Pool) -> tuple[float, float]:
    """(lambda_min, lambda_max) of R_theta^{-1}."""
    key = "prior_precision_eigs"
    if key not in pool._cache:
        lo, hi = linalg.extreme_eigs(linalg.SymMatrix(pool.prior_cov))
        pool._cache[key] = (1.0 / hi, 1.0 / lo)
    return pool._cache[key]


def _check_target_rank(pool: model.Pool) -> tuple[float, float]:
    smin, smax = _target_extreme_singvals(pool)
    if smin <= RANK_RTOL * smax:
        raise RankDeficientTarget(
            f"target map has sigma_min {smin:.3e} <= {RANK_RTOL} * sigma_max "
            f"{smax:.3e}; the alpha bound degenerates to 0"
        )
    return smin, smax


def alpha_bound_a(pool: model.Pool, a: int) -> float:
    """Closed-form alpha lower bound for the A criterion at early-set size a.

    kappa(H)^{-2} * lmin(R_theta^{-1}) / (lmax(R_theta^{-1}) + a * l_max)

    where l_max is the largest information-increment eigenvalue in the pool.
    The bound does not depend on the late-set size b.
    """
    if a < 0:
        raise ValueError("a must be >= 0")
    smin, smax = _check_target_rank(pool)
    lmin_prec, lmax_prec = _prior_precision_extremes(pool)
    l_max = float(_increment_lmax_values(pool)[0]) if pool.n_experiments else 0.0
    kappa_sq = (smax / smin) ** 2
    return lmin_prec / (kappa_sq * (lmax_prec + a * l_max))


def alpha_bound_tightened(
    pool: model.Pool, a: int, with_replacement: bool = True
) -> float:
    """Sharper variant: a * l_max is replaced by the sum of the a largest
    increment eigenvalues. With replacement the largest value may repeat, so
    the bound coincides with :func:`alpha_bound_a`; without replacement each
    experiment contributes at most once and the bound can only improve.
    """
    if a < 0:
        raise ValueError("a must be >= 0")
    smin, smax = _check_target_rank(pool)
    lmin_prec, lmax_prec = _prior_precision_extremes(pool)
    vals = _increment_lmax_values(pool)
    if with_replacement:
        top_sum = a * float(vals[0]) if pool.n_experiments else 0.0
    else:
        top_sum = float(vals[: min(a, len(vals))].sum())
    kappa_sq = (smax / smin) ** 2
    return lmin_prec / (kappa_sq * (lmax_prec + top_sum))


@dataclass(frozen=True)
class AlphaCertificate:
    """Multiplicative near-optimality certificate.

    The guarantee reads f(greedy_ell) <= factor_product * f(optimum_k); the
    exponential form factor_exp is never larger. equivalent_alpha is the
    constant alpha reproducing factor_product.
    """

    k: int
    ell: int
    per_a: tuple[float, ...]
    alpha_bar: float
    factor_product: float
    factor_exp: float
    equivalent_alpha: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ell": self.ell,
            "per_a": list(self.per_a),
            "alpha_bar": self.alpha_bar,
            "factor_product": self.factor_product,
            "factor_exp": self.factor_exp,
            "equivalent_alpha": self.equivalent_alpha,
            "params": self.params,
        }


@dataclass(frozen=True)
class EpsilonCertificate:
    """Additive near-optimality certificate.

    The guarantee reads
    f(greedy_ell) <= multiplicative_factor * f(optimum_k) + additive_product.
    When f_star is known the looser exponential bound
    (1 - e^{-ell/k}) (f_star + k * epsilon_bar) is also evaluated.
    """

    k: int
    ell: int
    per_ab: dict
    epsilon_bar: float
    multiplicative_factor: float
    additive_product: float
    additive_exp: float
    equivalent_epsilon: float
    f_star: float | None = None
    exponential_bound: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ell": self.ell,
            "per_ab": {f"{a},{b}": v for (a, b), v in sorted(self.per_ab.items())},
            "epsilon_bar": self.epsilon_bar,
            "multiplicative_factor": self.multiplicative_factor,
            "additive_product": self.additive_product,
            "additive_exp": self.additive_exp,
            "equivalent_epsilon": self.equivalent_epsilon,
            "f_star": self.f_star,
            "exponential_bound": self.exponential_bound,
            "params": self.params,
        }


def equivalent_alpha(factor_product: float, k: int, ell: int) -> float:
    """The constant alpha whose product-form factor equals factor_product.

    Solving 1 - (1 - alpha/k)^ell = factor_product for alpha gives
    alpha_hat = k * (1 - (1 - factor_product)^(1/ell)).
    """
    if factor_product >= 1.0:
        raise DegenerateFactor(
            f"factor_product {factor_product} >= 1; no finite equivalent alpha"
        )
    return k * (1.0 - (1.0 - factor_product) ** (1.0 / ell))


def equivalent_epsilon(additive_product: float, k: int, ell: int) -> float:
    """The constant epsilon whose additive term equals additive_product."""
    weight_sum = sum((1.0 - 1.0 / k) ** (ell - 1 - h) for h in range(ell))
    return additive_product / weight_sum


def alpha_guarantee(
    alpha_fn: Callable[[int, int], float],
    k: int,
    ell: int,
    params: dict | None = None,
) -> AlphaCertificate:
    """Evaluate the multiplicative guarantee for a per-size alpha table.

    ``alpha_fn(a, b)`` is queried for 0 <= a < ell, a <= b < ell + k. Values
    above 1 are projected to 1 before use (a cost that is alpha-supermodular
    with some alpha is also alpha'-supermodular for every alpha' <= alpha, and
    the chained factor formula requires alpha <= 1). Values <= 0 raise
    InvalidAlpha.
    """
    if k < 1 or ell < 1:
        raise ValueError("k and ell must be >= 1")
    table: dict[tuple[int, int], float] = {}
    for a in range(ell):
        for b in range(a, ell + k):
            v = float(alpha_fn(a, b))
            if not v > 0.0:
                raise InvalidAlpha(f"alpha({a},{b}) = {v}; must be positive")
            table[(a, b)] = min(v, 1.0)
    alpha_bar = min(table.values())
    log_prod = 0.0
    degenerate = False
    per_a = []
    for h in range(ell):
        alpha_t = sum(1.0 / table[(h, h + s)] for s in range(k))
        term = 1.0 - 1.0 / alpha_t
        per_a.append(min(table[(h, b)] for b in range(h, ell + k)))
        if term <= 0.0:
            degenerate = True
        else:
            log_prod += math.log(term)
    factor_product = 1.0 if degenerate else 1.0 - math.exp(log_prod)
    factor_exp = 1.0 - math.exp(-alpha_bar * ell / k)
    # factor_product = 1 (some chain term hit zero, e.g. alpha(a, a) = 1 at
    # k = 1) is reproduced exactly by the constant alpha = k, the limit of the
    # closed form as the factor approaches 1 from below.
    alpha_hat = float(k) if factor_product >= 1.0 else equivalent_alpha(factor_product, k, ell)
    return AlphaCertificate(
        k=k,
        ell=ell,
        per_a=tuple(per_a),
        alpha_bar=alpha_bar,
        factor_product=factor_product,
        factor_exp=factor_exp,
        equivalent_alpha=alpha_hat,
        params=dict(params or {}),
    )


def alpha_certificate_from_bounds(
    pool: model.Pool,
    k: int,
    ell: int | None = None,
    tightened: bool = False,
    with_replacement: bool = True,
) -> AlphaCertificate:
    """Guarantee for the A criterion using the closed-form alpha bounds."""
    ell = k if ell is None else ell
    if tightened:
        per_a = [
            alpha_bound_tightened(pool, a, with_replacement=with_replacement)
            for a in range(ell)
        ]
    else:
        per_a = [alpha_bound_a(pool, a) for a in range(ell)]
    smin, smax = _target_extreme_singvals(pool)
    lmin_prec, lmax_prec = _prior_precision_extremes(pool)
    params = {
        "kappa_target": smax / smin,
        "lmin_prior_precision": lmin_prec,
        "lmax_prior_precision": lmax_prec,
        "lmax_increment": float(_increment_lmax_values(pool)[0]),
        "tightened": tightened,
        "with_replacement": with_replacement,
    }
    return alpha_guarantee(lambda a, b: per_a[a], k, ell, params=params)


def epsilon_bound_e(pool: model.Pool, a: int, b: int) -> float:
    """Closed-form epsilon upper bound for the E criterion:
    (b - a) * sigma_max(H)^2 * lambda_max(R_theta)^2 * l_max.
    """
    if a < 0 or b < a:
        raise ValueError("need b >= a >= 0")
    _, smax = _target_extreme_singvals(pool)
    _, lmax_cov = linalg.extreme_eigs(linalg.SymMatrix(pool.prior_cov))
    l_max = float(_increment_lmax_values(pool)[0]) if pool.n_experiments else 0.0
    return (b - a) * smax**2 * lmax_cov**2 * l_max


def epsilon_guarantee(
    epsilon_fn: Callable[[int, int], float],
    k: int,
    ell: int,
    f_star: float | None = None,
    params: dict | None = None,
) -> EpsilonCertificate:
    """Evaluate the additive guarantee for a per-size epsilon table."""
    if k < 1 or ell < 1:
        raise ValueError("k and ell must be >= 1")
    per_ab = {
        (a, b): float(epsilon_fn(a, b))
        for a in range(ell)
        for b in range(a, ell + k)
    }
    epsilon_bar = max(per_ab.values())
    decay = 1.0 - 1.0 / k
    additive_product = (
        sum(
            per_ab[(h, h + s)] * decay ** (ell - 1 - h)
            for s in range(k)
            for h in range(ell)
        )
        / k
    )
    multiplicative_factor = 1.0 - decay**ell
    additive_exp = (1.0 - math.exp(-ell / k)) * k * epsilon_bar
    exponential_bound = (
        (1.0 - math.exp(-ell / k)) * (f_star + k * epsilon_bar)
        if f_star is not None
        else None
    )
    return EpsilonCertificate(
        k=k,
        ell=ell,
        per_ab=per_ab,
        epsilon_bar=epsilon_bar,
        multiplicative_factor=multiplicative_factor,
        additive_product=additive_product,
        additive_exp=additive_exp,
        equivalent_epsilon=equivalent_epsilon(additive_product, k, ell),
        f_star=f_star,
        exponential_bound=exponential_bound,
        params=dict(params or {}),
    )


def epsilon_certificate_from_bounds(
    pool: model.Pool, k: int, ell: int | None = None, f_star: float | None = None
) -> EpsilonCertificate:
    """Guarantee for the E criterion using the closed-form epsilon bound."""
    ell = k if ell is None else ell
    _, smax = _target_extreme_singvals(pool)
    _, lmax_cov = linalg.extreme_eigs(linalg.SymMatrix(pool.prior_cov))
    params = {
        "sigma_max_target": smax,
        "lmax_prior_cov": lmax_cov,
        "lmax_increment": float(_increment_lmax_values(pool)[0]),
    }
    return epsilon_guarantee(
        lambda a, b: epsilon_bound_e(pool, a, b), k, ell, f_star=f_star, params=params
    )


@dataclass(frozen=True)
class DGuarantee:
    """Classical supermodular guarantee constants for the D criterion."""

    finite: float
    exponential: float


def d_guarantee(k: int) -> DGuarantee:
    """1 - (1 - 1/k)^k (finite form) and 1 - 1/e (exponential form)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return DGuarantee(
        finite=1.0 - (1.0 - 1.0 / k) ** k, exponential=1.0 - math.exp(-1.0)
    )
