"""Measurement model: experiments, pools, designs, and the Bayesian estimator.

An experiment e observes y_e = A_e theta + v_e with v_e ~ (0, R_e). A pool
bundles a finite set of experiments with the prior (theta_bar, R_theta) and a
target map H; the quantity being estimated is z = H theta. A design is a
multiset of experiment ids (repetitions allowed). Selecting design D yields the
information matrix

    Y(D) = R_theta^{-1} + sum_{e in D} M_e,      M_e = A_e^T R_e^{-1} A_e,

error covariance K(D) = H Y(D)^{-1} H^T, and the affine minimum-MSE estimator
implemented by :func:`estimate`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    MissingObservation,
    NotPositiveDefinite,
    UnknownExperimentId,
)

__all__ = [
    "Experiment",
    "Pool",
    "Design",
    "DesignState",
    "EstimateResult",
    "make_experiment",
    "information_matrix",
    "error_covariance",
    "estimate",
    "pool_to_dict",
    "pool_from_dict",
    "load_pool",
    "save_pool",
    "pool_hash",
]


@dataclass(frozen=True)
class Experiment:
    """One measurement channel.

    Fields
    ------
    id : integer key, unique within a pool.
    A : n_e x p observation matrix.
    R : n_e x n_e SPD noise covariance.
    M : cached p x p information increment A^T R^{-1} A.
    gamma : trace(M), the experiment's SNR.
    whitened : cached L_R^{-1} A (so M = whitened^T whitened), used by the
        incremental-gain fast paths.
    """

    id: int
    A: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    gamma: float
    whitened: np.ndarray = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]


def make_experiment(id: int, A, R) -> Experiment:
    """Build an Experiment, caching M = A^T R^{-1} A and gamma = trace(M).

    Raises NotPositiveDefinite if R is not SPD and DimensionMismatch if R's
    size does not match A's row count.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[0] != R.shape[1]:
        raise DimensionMismatch(f"noise covariance must be square, got {R.shape}")
    if R.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"noise covariance is {R.shape[0]} x {R.shape[0]} "
            f"but A has {A.shape[0]} rows"
        )
    F = linalg.cholesky(linalg.sym(R))
    B = linalg.whiten_rows(F, A)
    M = B.T @ B
    M = (M + M.T) / 2.0
    for arr in (A, R, M, B):
        arr.setflags(write=False)
    return Experiment(id=int(id), A=A, R=R, M=M, gamma=float(np.trace(M)), whitened=B)


@dataclass
class Pool:
    """The ground set of experiments plus prior and target map.

    Immutable by convention after construction. Derived quantities that every
    design evaluation needs (the prior precision R_theta^{-1}, criterion
    normalization constants, spectral statistics of H and the M_e) are cached
    on the instance.
    """

    experiments: tuple[Experiment, ...]
    prior_mean: np.ndarray = field(repr=False)
    prior_cov: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.experiments = tuple(self.experiments)
        self.prior_mean = np.asarray(self.prior_mean, dtype=float).reshape(-1)
        self.prior_cov = np.asarray(self.prior_cov, dtype=float)
        self.target = np.atleast_2d(np.asarray(self.target, dtype=float))
        p = self.prior_mean.shape[0]
        if self.prior_cov.shape != (p, p):
            raise DimensionMismatch(
                f"prior covariance shape {self.prior_cov.shape} does not match p={p}"
            )
        if self.target.shape[1] != p:
            raise DimensionMismatch(
                f"target has {self.target.shape[1]} columns, expected p={p}"
            )
        for e in self.experiments:
            if e.p != p:
                raise DimensionMismatch(
                    f"experiment {e.id} has p={e.p}, pool has p={p}"
                )
        ids = [e.id for e in self.experiments]
        if len(set(ids)) != len(ids):
            raise DimensionMismatch("experiment ids must be unique")
        # R_theta^{-1}, computed once per pool (it appears in every Y(D)).
        F = linalg.cholesky(linalg.sym(self.prior_cov))
        prec = linalg.solve_psd(F, np.eye(p))
        self.prior_precision = (prec + prec.T) / 2.0
        self.prior_precision.setflags(write=False)
        self._by_id = {e.id: e for e in self.experiments}
        self._cache: dict = {}

    @property
    def p(self) -> int:
        return self.prior_mean.shape[0]

    @property
    def m(self) -> int:
        return self.target.shape[0]

    @property
    def n_experiments(self) -> int:
        return len(self.experiments)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._by_id))

    def experiment(self, id: int) -> Experiment:
        try:
            return self._by_id[id]
        except KeyError:
            raise UnknownExperimentId(f"experiment id {id} not in pool") from None

    def target_gram(self) -> np.ndarray:
        """H^T H, cached."""
        if "target_gram" not in self._cache:
            g = self.target.T @ self.target
            self._cache["target_gram"] = (g + g.T) / 2.0
        return self._cache["target_gram"]

    def target_is_identity(self) -> bool:
        if "target_identity" not in self._cache:
            H = self.target
            self._cache["target_identity"] = H.shape[0] == H.shape[1] and np.array_equal(
                H, np.eye(H.shape[0])
            )
        return self._cache["target_identity"]


@dataclass(frozen=True)
class Design:
    """A multiset of experiment ids, stored as sorted (id, count) pairs."""

    items: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "items",
            tuple(sorted((int(i), int(c)) for i, c in self.items)),
        )
        if any(c <= 0 for _, c in self.items):
            raise DimensionMismatch("design multiplicities must be positive")
        ids = [i for i, _ in self.items]
        if len(set(ids)) != len(ids):
            raise DimensionMismatch("design ids must be unique in the count map")

    @classmethod
    def empty(cls) -> "Design":
        return cls(items=())

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "Design":
        for i, c in counts.items():
            if c < 0:
                raise ValueError(f"negative multiplicity {c} for experiment {i}")
        return cls(items=tuple((i, c) for i, c in counts.items() if c))

    @classmethod
    def from_ids(cls, ids: Iterable[int]) -> "Design":
        counts: dict[int, int] = {}
        for i in ids:
            counts[int(i)] = counts.get(int(i), 0) + 1
        return cls.from_counts(counts)

    @property
    def counts(self) -> dict[int, int]:
        return dict(self.items)

    @property
    def size(self) -> int:
        return sum(c for _, c in self.items)

    def __contains__(self, id: int) -> bool:
        return any(i == id for i, _ in self.items)


@dataclass
class DesignState:
    """Incremental solver state for one growing design.

    Holds Y(D), its cached inverse (maintained by Woodbury updates, never by
    refactorization), and the current normalized criterion value. Single
    writer; treat instances as owned by one greedy run.
    """

    pool: Pool
    counts: dict[int, int]
    Y: np.ndarray
    Y_inv: np.ndarray
    criterion_value: float

    @classmethod
    def initial(cls, pool: Pool) -> "DesignState":
        return cls(
            pool=pool,
            counts={},
            Y=pool.prior_precision.copy(),
            Y_inv=pool.prior_cov.copy(),
            criterion_value=0.0,
        )

    @property
    def design(self) -> Design:
        return Design.from_counts(self.counts)

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    def add(self, e: Experiment) -> "DesignState":
        """Return a new state with experiment e selected once more.

        The inverse is updated with the matrix inversion lemma against the
        small n_e x n_e capacitance block; criterion_value is left for the
        caller to fill in (it depends on the criterion).
        """
        counts = dict(self.counts)
        counts[e.id] = counts.get(e.id, 0) + 1
        Y_inv = linalg.woodbury_update(self.Y_inv, e.A, e.R).mat
        return DesignState(
            pool=self.pool,
            counts=counts,
            Y=self.Y + e.M,
            Y_inv=Y_inv,
            criterion_value=float("nan"),
        )


def information_matrix(pool: Pool, design: Design) -> linalg.SymMatrix:
    """Y(D) = R_theta^{-1} + sum over the design of count * M_e."""
    Y = pool.prior_precision.copy()
    for id, count in design.items:
        Y += count * pool.experiment(id).M
    return linalg.SymMatrix(Y)


def error_covariance(pool: Pool, design: Design) -> linalg.SymMatrix:
    """K(D) = H Y(D)^{-1} H^T."""
    F = linalg.cholesky(information_matrix(pool, design))
    X = linalg.solve_psd(F, pool.target.T)
    K = pool.target @ X
    return linalg.SymMatrix((K + K.T) / 2.0)


@dataclass(frozen=True)
class EstimateResult:
    """Estimator output: z_hat and its error covariance K(D)."""

    z_hat: np.ndarray
    K: np.ndarray


def estimate(
    pool: Pool, design: Design, observations: Mapping[int, "np.ndarray | list | float"]
) -> EstimateResult:
    """Affine minimum-MSE estimate of z = H theta from designed observations.

    ``observations[id]`` must reshape to (count, n_e): one observation vector
    per occurrence of the experiment in the design. The estimator is

        z_hat = H Y(D)^{-1} [ sum_e A_e^T R_e^{-1} y_e + R_theta^{-1} theta_bar ]

    with the sum running over occurrences.
    """
    rhs = pool.prior_precision @ pool.prior_mean
    for id, count in design.items:
        e = pool.experiment(id)
        if id not in observations:
            raise MissingObservation(f"no observation supplied for experiment {id}")
        ys = np.asarray(observations[id], dtype=float).reshape(-1)
        if ys.size != count * e.n_rows:
            raise DimensionMismatch(
                f"experiment {id}: expected {count} x {e.n_rows} observation values, "
                f"got {ys.size}"
            )
        ys = ys.reshape(count, e.n_rows)
        F = linalg.cholesky(linalg.sym(e.R))
        rhs += e.A.T @ linalg.solve_psd(F, ys.sum(axis=0))
    F = linalg.cholesky(information_matrix(pool, design))
    theta_hat = linalg.solve_psd(F, rhs)
    X = linalg.solve_psd(F, pool.target.T)
    K = pool.target @ X
    return EstimateResult(z_hat=pool.target @ theta_hat, K=(K + K.T) / 2.0)


# ---------------------------------------------------------------------------
# Pool serialization (JSON, row-major matrices, IEEE doubles in decimal).


def pool_to_dict(pool: Pool) -> dict:
    return {
        "p": pool.p,
        "prior_mean": pool.prior_mean.tolist(),
        "prior_cov": pool.prior_cov.tolist(),
        "target": pool.target.tolist(),
        "experiments": [
            {"id": e.id, "A": e.A.tolist(), "R": e.R.tolist()}
            for e in pool.experiments
        ],
    }


def pool_from_dict(d: dict) -> Pool:
    p = int(d["p"])
    experiments = tuple(
        make_experiment(entry["id"], entry["A"], entry["R"])
        for entry in d["experiments"]
    )
    pool = Pool(
        experiments=experiments,
        prior_mean=np.asarray(d["prior_mean"], dtype=float),
        prior_cov=np.asarray(d["prior_cov"], dtype=float),
        target=np.asarray(d["target"], dtype=float),
    )
    if pool.p != p:
        raise DimensionMismatch(f"header p={p} does not match prior dimension {pool.p}")
    return pool


def load_pool(path) -> Pool:
    with open(path, "r", encoding="utf-8") as fh:
        return pool_from_dict(json.load(fh))


def save_pool(pool: Pool, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pool_to_dict(pool), fh, indent=2)
        fh.write("\n")


def pool_hash(pool: Pool) -> str:
    """sha256 over the canonical JSON serialization of the pool."""
    payload = json.dumps(pool_to_dict(pool), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
