"""Greedy multiset design construction.

At each of ell steps the candidate with the largest gain is selected (ties go
to the lowest experiment id, with gains compared at absolute tolerance 1e-12).
With replacement the same experiment may be chosen repeatedly; ell may exceed
the budget k used later by the certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import criteria, model
from .errors import PoolExhausted

__all__ = ["GreedyStep", "GreedyTrace", "greedy_design"]

#: Gains within this absolute tolerance are considered tied.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class GreedyStep:
    h: int
    chosen_id: int
    gain: float
    cost_after: float


@dataclass(frozen=True)
class GreedyTrace:
    steps: tuple[GreedyStep, ...]
    final: model.Design
    criterion: criteria.Criterion
    ell: int

    @property
    def final_cost(self) -> float:
        return self.steps[-1].cost_after if self.steps else 0.0

    def cost_at(self, size: int) -> float:
        """Cost of the greedy prefix of the given size (greedy is nested)."""
        if size == 0:
            return 0.0
        return self.steps[size - 1].cost_after


def greedy_design(
    pool: model.Pool,
    criterion: criteria.Criterion,
    ell: int,
    with_replacement: bool = True,
) -> GreedyTrace:
    """Run the greedy recursion for ell steps and return its trace."""
    if pool.n_experiments == 0:
        raise PoolExhausted("pool is empty")
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if not with_replacement and ell > pool.n_experiments:
        raise PoolExhausted(
            f"cannot select {ell} distinct experiments from a pool of "
            f"{pool.n_experiments}"
        )

    state = model.DesignState.initial(pool)
    available = list(pool.ids)
    steps: list[GreedyStep] = []
    for h in range(ell):
        gains = [
            (id, criteria.gain(criterion, pool, state, pool.experiment(id)).gain)
            for id in available
        ]
        gmax = max(g for _, g in gains)
        best_id, best_gain = next(
            (id, g) for id, g in gains if g >= gmax - TIE_TOL
        )
        chosen = pool.experiment(best_id)
        state = state.add(chosen)
        state.criterion_value = criteria.cost_from_state(criterion, pool, state)
        steps.append(
            GreedyStep(
                h=h,
                chosen_id=best_id,
                gain=best_gain,
                cost_after=state.criterion_value,
            )
        )
        if not with_replacement:
            available.remove(best_id)
    return GreedyTrace(
        steps=tuple(steps), final=state.design, criterion=criterion, ell=ell
    )
