"""Normalized A/E/D design criteria and their incremental gains.

Each cost is normalized against the empty design, so cost(empty) == 0 exactly:

    a_cost(D) = trace K(D)  - trace(H R_theta H^T)
    e_cost(D) = lmax  K(D)  - lmax(H R_theta H^T)
    d_cost(D) = logdet K(D) - logdet(H R_theta H^T)

Gains are cost decreases, gain_u(X) = cost(X) - cost(X + u), nonnegative for
all three criteria (the error covariance shrinks, in the PSD order, as the
design grows). The A criterion has a trace-linear fast path that reuses the
cached inverse of the information matrix; E and D recompute their spectral
statistic on the Woodbury-updated inverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg, model
from .errors import InternalConsistencyError, NotPositiveDefinite

__all__ = [
    "Criterion",
    "GainRecord",
    "a_cost",
    "e_cost",
    "d_cost",
    "cost",
    "cost_from_state",
    "a_gain_fast",
    "gain",
]

#: Gains below this raise InternalConsistencyError; gains in (-GAIN_TOL, 0)
#: clamp to zero (monotonicity holds mathematically, so only round-off can
#: produce small negatives).
GAIN_TOL = 1e-9


class Criterion(enum.Enum):
    A = "A"
    E = "E"
    D = "D"

    @classmethod
    def from_string(cls, s: str) -> "Criterion":
        try:
            return cls(s.strip().upper())
        except ValueError:
            raise ValueError(f"unknown criterion {s!r}; expected one of A, E, D") from None


@dataclass(frozen=True)
class GainRecord:
    experiment_id: int
    gain: float


def _prior_target_cov(pool: model.Pool) -> np.ndarray:
    key = "prior_target_cov"
    if key not in pool._cache:
        K0 = pool.target @ pool.prior_cov @ pool.target.T
        pool._cache[key] = (K0 + K0.T) / 2.0
    return pool._cache[key]


def _norm_const(pool: model.Pool, criterion: Criterion) -> float:
    """Statistic of K(empty) = H R_theta H^T, cached per pool and criterion."""
    key = ("norm", criterion)
    if key not in pool._cache:
        K0 = _prior_target_cov(pool)
        pool._cache[key] = _statistic(criterion, K0)
    return pool._cache[key]


def _statistic(criterion: Criterion, K: np.ndarray) -> float:
    if criterion is Criterion.A:
        return float(np.trace(K))
    if criterion is Criterion.E:
        return linalg.extreme_eigs(K)[1]
    try:
        return linalg.logdet(linalg.cholesky(linalg.SymMatrix(K)))
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            "D criterion needs an SPD target covariance; "
            f"the target map is row-rank deficient or m > p ({exc})"
        ) from exc


def cost(criterion: Criterion, pool: model.Pool, design: model.Design) -> float:
    """Normalized criterion value of a design (0 for the empty design)."""
    if design.size == 0:
        return 0.0
    K = model.error_covariance(pool, design).mat
    return _statistic(criterion, K) - _norm_const(pool, criterion)


def a_cost(pool: model.Pool, design: model.Design) -> float:
    return cost(Criterion.A, pool, design)


def e_cost(pool: model.Pool, design: model.Design) -> float:
    return cost(Criterion.E, pool, design)


def d_cost(pool: model.Pool, design: model.Design) -> float:
    return cost(Criterion.D, pool, design)


def cost_from_state(
    criterion: Criterion, pool: model.Pool, state: model.DesignState
) -> float:
    """Criterion value computed from a state's cached inverse."""
    if state.size == 0:
        return 0.0
    K = pool.target @ state.Y_inv @ pool.target.T
    return _statistic(criterion, (K + K.T) / 2.0) - _norm_const(pool, criterion)


def _checked(gain_value: float, experiment_id: int) -> GainRecord:
    if gain_value < -GAIN_TOL:
        raise InternalConsistencyError(
            f"negative gain {gain_value:.3e} for experiment {experiment_id}; "
            "monotonicity violated beyond tolerance"
        )
    return GainRecord(experiment_id=experiment_id, gain=max(gain_value, 0.0))


def a_gain_fast(state: model.DesignState, u: model.Experiment) -> GainRecord:
    """A-criterion gain via the rank-update identity, no refactorization.

    gain_u(X) = trace[H Y(X)^{-1} M_u (Y(X) + M_u)^{-1} H^T]

    evaluated with M_u = B^T B (B the whitened observation rows) so the cost
    per candidate is O(n_u p^2) on identity targets.
    """
    pool = state.pool
    W = linalg.woodbury_update(state.Y_inv, u.A, u.R).mat
    B = u.whitened
    if pool.target_is_identity():
        G = state.Y_inv
    else:
        G = pool.target_gram() @ state.Y_inv
    # trace(G M_u W) with M_u = B^T B, cycled into two thin products.
    val = float(np.einsum("ij,ji->", B @ W, G @ B.T))
    return _checked(val, u.id)


def gain(
    criterion: Criterion,
    pool: model.Pool,
    state: model.DesignState,
    u: model.Experiment,
) -> GainRecord:
    """cost(X) - cost(X + u) for the given criterion.

    Dispatches to the trace fast path for A; for E and D the spectral
    statistic is recomputed on the Woodbury-updated inverse.
    """
    if criterion is Criterion.A:
        return a_gain_fast(state, u)
    W = linalg.woodbury_update(state.Y_inv, u.A, u.R).mat
    K = pool.target @ W @ pool.target.T
    new_cost = _statistic(criterion, (K + K.T) / 2.0) - _norm_const(pool, criterion)
    return _checked(state.criterion_value - new_cost, u.id)
