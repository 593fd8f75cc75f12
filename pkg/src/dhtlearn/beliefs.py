"""Belief vectors and the three update rules.

Beliefs live in the log domain.  The min of probabilities is the min of their
logs, so the min-rule and its trimmed variant are exact here, and a belief of
``1e-800`` on the true state stays strictly positive instead of underflowing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Mapping, Sequence, Set, Tuple

import numpy as np

from .exceptions import DomainError, InputError, NumericDegeneracyError

NORMALIZATION_TOL = 1e-9


def log_normalize(v: np.ndarray) -> np.ndarray:
    """Subtract the row-wise log-sum-exp; works on ``(m,)`` or ``(k, m)`` arrays.

    Raises NumericDegeneracyError if any row is entirely ``-inf``.
    """
    v = np.asarray(v, dtype=float)
    top = v.max(axis=-1, keepdims=True)
    if (top == -np.inf).any():
        raise NumericDegeneracyError("unnormalized belief is zero on every hypothesis")
    with np.errstate(under="ignore"):
        lse = top + np.log(np.exp(v - top).sum(axis=-1, keepdims=True))
    return v - lse


@dataclass(frozen=True, eq=False)
class BeliefVector:
    """Probability distribution over hypotheses, stored as natural logs."""

    log_values: np.ndarray

    def __post_init__(self):
        lv = np.array(self.log_values, dtype=float)
        if lv.ndim != 1 or lv.size < 1:
            raise InputError("belief vector must be a non-empty 1-d array")
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise InputError("belief log-values must be finite or -inf")
        total = float(np.exp(lv).sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InputError(f"belief vector sums to {total!r}, not 1")
        lv.setflags(write=False)
        object.__setattr__(self, "log_values", lv)

    @classmethod
    def from_probs(cls, probs) -> "BeliefVector":
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise InputError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    @classmethod
    def uniform(cls, m: int) -> "BeliefVector":
        return cls(np.full(m, -np.log(m)))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def m(self) -> int:
        return self.log_values.size

    def __len__(self):
        return self.m

    def __eq__(self, other):
        if not isinstance(other, BeliefVector):
            return NotImplemented
        return np.array_equal(self.log_values, other.log_values)

    def __repr__(self):
        return f"BeliefVector(probs={np.round(self.probs, 6).tolist()})"


@dataclass(frozen=True)
class AgentState:
    local: BeliefVector
    actual: BeliefVector


def _log_of(x) -> np.ndarray:
    """Log-values of a BeliefVector or any object exposing ``log_values``."""
    return np.asarray(x.log_values, dtype=float)


def bayes_update(prior: BeliefVector, likelihood_column) -> BeliefVector:
    """Posterior proportional to ``likelihood * prior``, renormalized."""
    col = np.asarray(likelihood_column, dtype=float)
    if col.shape != (prior.m,):
        raise InputError(f"likelihood column has shape {col.shape}, expected ({prior.m},)")
    if np.any(col <= 0):
        raise DomainError("likelihoods must be strictly positive")
    return BeliefVector(log_normalize(prior.log_values + np.log(col)))


def min_rule_update(local_new: BeliefVector, neighbor_actuals: Sequence) -> BeliefVector:
    """Hypothesis-wise min of the fresh local belief and the neighbors' actual beliefs."""
    if not len(neighbor_actuals):
        return local_new
    v = local_new.log_values
    for nb in neighbor_actuals:
        v = np.minimum(v, _log_of(nb))
    return BeliefVector(log_normalize(v))


def lfrhe_filter(neighbor_values: Iterable[Tuple[int, float]], f: int) -> Set[int]:
    """Drop the ``f`` highest and ``f`` lowest values; return the kept agent ids.

    Sorted by value descending with ties broken by ascending id.
    """
    if f < 0:
        raise InputError(f"f must be nonnegative, got {f}")
    ranked = sorted(neighbor_values, key=lambda item: (-item[1], item[0]))
    if len(ranked) < 2 * f + 1:
        raise InputError(f"filtering needs at least {2 * f + 1} values, got {len(ranked)}")
    return {agent for agent, _ in ranked[f:len(ranked) - f]}


def lfrhe_update(local_new: BeliefVector, neighbor_actuals: Mapping[int, object], f: int) -> BeliefVector:
    """Trimmed min-rule; falls back to the local belief when ``|N_i| < 2f + 1``.

    The retained set is computed separately for every hypothesis.
    """
    if len(neighbor_actuals) < 2 * f + 1:
        return local_new
    logs = {j: _log_of(b) for j, b in neighbor_actuals.items()}
    v = local_new.log_values.copy()
    for th in range(local_new.m):
        kept = lfrhe_filter(((j, lv[th]) for j, lv in logs.items()), f)
        v[th] = min([v[th]] + [logs[j][th] for j in kept])
    return BeliefVector(log_normalize(v))


def normalization_error(log_rows: np.ndarray) -> np.ndarray:
    """``|sum(exp(row)) - 1|`` for each row."""
    return np.abs(np.exp(np.asarray(log_rows)).sum(axis=-1) - 1.0)


def stack(vectors: Sequence[BeliefVector]) -> np.ndarray:
    return np.stack([_log_of(v) for v in vectors])


def unstack(rows: np.ndarray) -> List[BeliefVector]:
    return [BeliefVector(r) for r in rows]
