"""Brute-force ground truth at desk scale.

Exact optima by multiset enumeration, exhaustive alpha/epsilon statistics over
all nested design pairs, Monte-Carlo validation of the error covariance, and a
perturbation check that the affine estimator is MSE-optimal. Everything here
exists for correctness, not speed; enumerations are guarded and refuse to run
past ~10^6 evaluations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from . import criteria, linalg, model
from .errors import AllDegenerate, TooLarge

__all__ = [
    "OracleReport",
    "AffineEstimator",
    "OptimalityReport",
    "optimal_design_bruteforce",
    "exhaustive_alpha",
    "exhaustive_epsilon",
    "exhaustive_tables",
    "monte_carlo_mse",
    "estimator_optimality_check",
]

#: Enumerations larger than this raise TooLarge.
MAX_ENUM = 10**6

#: Gain-ratio denominators at or below this are skipped (they impose no
#: constraint on alpha) and reported in the skip counts.
DEGENERATE_DENOM = 1e-12

#: Equal-cost tolerance for the brute-force argmin tie-break.
VALUE_TIE_TOL = 1e-12


def _multiset_count(n: int, size: int) -> int:
    return math.comb(n + size - 1, size) if size >= 0 else 0


def _count_vectors(n: int, size: int):
    """All length-n nonnegative integer vectors summing to size, as tuples,
    in the deterministic order induced by combinations_with_replacement."""
    for combo in itertools.combinations_with_replacement(range(n), size):
        vec = [0] * n
        for idx in combo:
            vec[idx] += 1
        yield tuple(vec)


class _CostCache:
    """Memoized normalized criterion costs keyed by design count vectors."""

    def __init__(self, pool: model.Pool, criterion: criteria.Criterion):
        self.pool = pool
        self.criterion = criterion
        self.ids = pool.ids
        self._costs: dict[tuple[int, ...], float] = {}

    def cost(self, counts: tuple[int, ...]) -> float:
        if counts not in self._costs:
            design = model.Design.from_counts(
                {self.ids[i]: c for i, c in enumerate(counts) if c}
            )
            self._costs[counts] = criteria.cost(self.criterion, self.pool, design)
        return self._costs[counts]

    def gain(self, counts: tuple[int, ...], u_index: int) -> float:
        plus = list(counts)
        plus[u_index] += 1
        return self.cost(counts) - self.cost(tuple(plus))


@dataclass
class OracleReport:
    """Result of a brute-force enumeration."""

    optimal_design: model.Design
    optimal_value: float
    criterion: criteria.Criterion
    k: int
    with_replacement: bool
    n_enumerated: int
    alpha_table: dict | None = None
    epsilon_table: dict | None = None
    instance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "optimal_design": self.optimal_design.counts,
            "optimal_value": self.optimal_value,
            "criterion": self.criterion.value,
            "k": self.k,
            "with_replacement": self.with_replacement,
            "n_enumerated": self.n_enumerated,
            "instance": self.instance,
        }
        if self.alpha_table is not None:
            d["alpha_table"] = {f"{a},{b}": v for (a, b), v in sorted(self.alpha_table.items())}
        if self.epsilon_table is not None:
            d["epsilon_table"] = {f"{a},{b}": v for (a, b), v in sorted(self.epsilon_table.items())}
        return d


def optimal_design_bruteforce(
    pool: model.Pool,
    criterion: criteria.Criterion,
    k: int,
    with_replacement: bool = True,
) -> OracleReport:
    """Exact argmin over all designs of size <= k.

    Ties within 1e-12 go to the lexicographically smallest count vector
    (counts ordered by ascending experiment id).
    """
    n = pool.n_experiments
    if with_replacement:
        # Sum over sizes 0..k of C(n+s-1, s) telescopes to C(n+k, k).
        guard = math.comb(n + k, k)
    else:
        guard = sum(math.comb(n, s) for s in range(min(k, n) + 1))
    if guard > MAX_ENUM:
        raise TooLarge(
            f"enumerating {guard} designs of size <= {k} over {n} experiments "
            f"exceeds {MAX_ENUM}"
        )
    cache = _CostCache(pool, criterion)
    best_counts: tuple[int, ...] | None = None
    best_value = math.inf
    n_enumerated = 0
    for size in range(k + 1):
        if with_replacement:
            vectors = _count_vectors(n, size)
        else:
            vectors = (
                tuple(1 if i in combo else 0 for i in range(n))
                for combo in itertools.combinations(range(n), size)
            )
        for counts in vectors:
            value = cache.cost(counts)
            n_enumerated += 1
            if value < best_value - VALUE_TIE_TOL:
                best_value, best_counts = value, counts
            elif value <= best_value + VALUE_TIE_TOL and counts < best_counts:
                best_counts = counts
    design = model.Design.from_counts(
        {pool.ids[i]: c for i, c in enumerate(best_counts) if c}
    )
    return OracleReport(
        optimal_design=design,
        optimal_value=best_value,
        criterion=criterion,
        k=k,
        with_replacement=with_replacement,
        n_enumerated=n_enumerated,
        instance={"n_experiments": n, "p": pool.p},
    )


def _pair_guard(n: int, a: int, b: int, max_b_universe: int | None) -> None:
    if a < 0 or b < a:
        raise ValueError("need b >= a >= 0")
    if max_b_universe is not None and b > max_b_universe:
        raise TooLarge(f"b = {b} exceeds max_b_universe = {max_b_universe}")
    triples = _multiset_count(n, a) * _multiset_count(n, b - a) * n
    if triples > MAX_ENUM:
        raise TooLarge(
            f"enumerating {triples} (A, B, u) triples for (a={a}, b={b}) "
            f"exceeds {MAX_ENUM}"
        )


def _iter_nested_pairs(n: int, a: int, b: int):
    """Yield (A_counts, B_counts) with A dominated count-wise by B."""
    for base in _count_vectors(n, a):
        for extra in _count_vectors(n, b - a):
            yield base, tuple(x + y for x, y in zip(base, extra))


def _alpha_scan(
    pool: model.Pool,
    criterion: criteria.Criterion,
    a: int,
    b: int,
    cache: _CostCache,
) -> tuple[float, int, int]:
    """(min ratio, skipped pairs, total pairs); min is +inf if all skipped."""
    n = pool.n_experiments
    best = math.inf
    skipped = 0
    total = 0
    for A, B in _iter_nested_pairs(n, a, b):
        for u in range(n):
            total += 1
            denom = cache.gain(B, u)
            if denom <= DEGENERATE_DENOM:
                skipped += 1
                continue
            best = min(best, cache.gain(A, u) / denom)
    return best, skipped, total


def exhaustive_alpha(
    pool: model.Pool,
    criterion: criteria.Criterion,
    a: int,
    b: int,
    max_b_universe: int | None = None,
    _cache: _CostCache | None = None,
) -> float:
    """Exact min over nested pairs |A|=a within |B|=b and u in the pool of
    gain_u(A) / gain_u(B).

    Pairs whose denominator gain_u(B) is <= 1e-12 impose no constraint and are
    skipped; if every pair is skipped, AllDegenerate is raised.
    """
    n = pool.n_experiments
    _pair_guard(n, a, b, max_b_universe)
    cache = _cache or _CostCache(pool, criterion)
    best, skipped, _ = _alpha_scan(pool, criterion, a, b, cache)
    if math.isinf(best):
        raise AllDegenerate(
            f"all {skipped} gain ratios at (a={a}, b={b}) had near-zero denominators"
        )
    return float(best)


def exhaustive_epsilon(
    pool: model.Pool,
    criterion: criteria.Criterion,
    a: int,
    b: int,
    max_b_universe: int | None = None,
    _cache: _CostCache | None = None,
) -> float:
    """Exact max over nested pairs and u of gain_u(B) - gain_u(A)."""
    n = pool.n_experiments
    _pair_guard(n, a, b, max_b_universe)
    cache = _cache or _CostCache(pool, criterion)
    best = -math.inf
    for A, B in _iter_nested_pairs(n, a, b):
        for u in range(n):
            best = max(best, cache.gain(B, u) - cache.gain(A, u))
    return float(best)


def exhaustive_tables(
    pool: model.Pool, criterion: criteria.Criterion, ell: int, k: int
) -> tuple[dict, dict, dict]:
    """alpha, epsilon, and skipped-pair tables over a < ell, a <= b < ell + k,
    sharing one cost cache. Alpha entries where every ratio is degenerate hold
    None."""
    cache = _CostCache(pool, criterion)
    alpha_table: dict[tuple[int, int], float | None] = {}
    epsilon_table: dict[tuple[int, int], float] = {}
    skipped_table: dict[tuple[int, int], int] = {}
    for a in range(ell):
        for b in range(a, ell + k):
            _pair_guard(pool.n_experiments, a, b, None)
            best, skipped, _ = _alpha_scan(pool, criterion, a, b, cache)
            alpha_table[(a, b)] = None if math.isinf(best) else float(best)
            skipped_table[(a, b)] = skipped
            epsilon_table[(a, b)] = exhaustive_epsilon(
                pool, criterion, a, b, _cache=cache
            )
    return alpha_table, epsilon_table, skipped_table


@dataclass(frozen=True)
class AffineEstimator:
    """The optimal affine estimator z_hat = L y_stacked + b for one design.

    Rows of the stacked observation follow ascending experiment id, each id
    repeated by its multiplicity.
    """

    L: np.ndarray
    b: np.ndarray
    A_stacked: np.ndarray
    R_stacked: np.ndarray

    @classmethod
    def from_design(cls, pool: model.Pool, design: model.Design) -> "AffineEstimator":
        blocks_A, blocks_R = [], []
        for id, count in design.items:
            e = pool.experiment(id)
            blocks_A.extend([e.A] * count)
            blocks_R.extend([e.R] * count)
        if blocks_A:
            A_st = np.vstack(blocks_A)
            R_st = block_diag(*blocks_R)
        else:
            A_st = np.zeros((0, pool.p))
            R_st = np.zeros((0, 0))
        F = linalg.cholesky(model.information_matrix(pool, design))
        HYinv = linalg.solve_psd(F, pool.target.T).T
        if A_st.shape[0]:
            Fr = linalg.cholesky(linalg.SymMatrix(R_st))
            L = HYinv @ linalg.solve_psd(Fr, A_st).T
        else:
            L = np.zeros((pool.m, 0))
        b = (pool.target - L @ A_st) @ pool.prior_mean
        return cls(L=L, b=b, A_stacked=A_st, R_stacked=R_st)

    def predict(self, y_stacked: np.ndarray) -> np.ndarray:
        return self.L @ y_stacked + self.b


def monte_carlo_mse(
    pool: model.Pool, design: model.Design, n_draws: int, seed: int
) -> tuple[float, float]:
    """Empirical mean of ||z - z_hat||^2 under the generative model, with its
    standard error. Used to validate trace K(D)."""
    if n_draws < 1000:
        raise ValueError("n_draws must be >= 1000 for a meaningful standard error")
    est = AffineEstimator.from_design(pool, design)
    rng = np.random.default_rng(seed)
    L_theta = linalg.cholesky(linalg.SymMatrix(pool.prior_cov)).L
    thetas = pool.prior_mean + rng.standard_normal((n_draws, pool.p)) @ L_theta.T
    n_rows = est.A_stacked.shape[0]
    if n_rows:
        L_noise = linalg.cholesky(linalg.SymMatrix(est.R_stacked)).L
        noise = rng.standard_normal((n_draws, n_rows)) @ L_noise.T
        ys = thetas @ est.A_stacked.T + noise
        z_hat = ys @ est.L.T + est.b
    else:
        z_hat = np.broadcast_to(est.b, (n_draws, pool.m))
    z = thetas @ pool.target.T
    sq_err = np.sum((z - z_hat) ** 2, axis=1)
    return float(sq_err.mean()), float(sq_err.std(ddof=1) / math.sqrt(n_draws))


@dataclass(frozen=True)
class OptimalityReport:
    n_perturbations: int
    n_positive: int
    min_excess: float

    @property
    def passed(self) -> bool:
        return self.n_positive == self.n_perturbations


def estimator_optimality_check(
    pool: model.Pool, design: model.Design, n_perturbations: int, seed: int
) -> OptimalityReport:
    """Check that perturbing the optimal affine coefficients raises the MSE.

    For L = L_star + Delta (with the offset re-chosen to keep the estimator
    unbiased) the error covariance exceeds K(D) by
    Delta (A R_theta A^T + R) Delta^T, so each nonzero perturbation must add
    a strictly positive trace excess.
    """
    if design.size == 0:
        raise ValueError("design must be nonempty")
    est = AffineEstimator.from_design(pool, design)
    S = est.A_stacked @ pool.prior_cov @ est.A_stacked.T + est.R_stacked
    S = (S + S.T) / 2.0
    rng = np.random.default_rng(seed)
    n_rows = est.A_stacked.shape[0]
    excesses = []
    for _ in range(n_perturbations):
        delta = rng.standard_normal((pool.m, n_rows))
        excesses.append(float(np.einsum("ij,ij->", delta @ S, delta)))
    positive = sum(1 for x in excesses if x > 0.0)
    return OptimalityReport(
        n_perturbations=n_perturbations,
        n_positive=positive,
        min_excess=min(excesses),
    )
