"""Byzantine agents: placement checks and a small library of message strategies.

Adversaries never run the learning protocol.  Their only effect on the network
is the per-edge messages produced here, which may differ between out-neighbors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Optional

import numpy as np

from .exceptions import ConfigError, InputError
from .graph import DirectedGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdversaryMessage:
    """Per-hypothesis values in ``[0, 1]``; need not sum to one."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or np.any(np.isnan(v)) or np.any(v < 0) or np.any(v > 1):
            raise InputError(f"adversary message entries must lie in [0, 1], got {v.tolist()}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def clamped(cls, values) -> "AdversaryMessage":
        raw = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0)
        clipped = np.clip(raw, 0.0, 1.0)
        if not np.array_equal(raw, clipped):
            log.warning("adversary message %s clamped to [0, 1]", raw.tolist())
        return cls(clipped)

    @property
    def log_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values)


@dataclass(frozen=True)
class Snapshot:
    """Read-only view of the network handed to strategies (full knowledge)."""

    t: int
    graph: DirectedGraph
    truth: int
    local_log: Optional[np.ndarray] = None
    actual_log: Optional[np.ndarray] = None


class Strategy:
    """Base class; subclasses implement ``emit`` and register an ``id``."""

    id: str = ""

    def emit(self, t, sender, target, truth, m, rng, snapshot=None) -> Optional[np.ndarray]:
        raise NotImplementedError

    def params(self) -> Dict[str, Any]:
        return {}

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class ZeroOnTruth(Strategy):
    id = "zero-on-truth"

    def emit(self, t, sender, target, truth, m, rng, snapshot=None):
        v = np.ones(m)
        v[truth] = 0.0
        return v


class Mirror(Strategy):
    """Claim certainty in one false hypothesis (the first false one by default)."""

    id = "mirror"

    def __init__(self, hypothesis: Optional[int] = None):
        self.hypothesis = hypothesis

    def emit(self, t, sender, target, truth, m, rng, snapshot=None):
        h = self.hypothesis
        if h is None:
            h = 1 if truth == 0 else 0
        if not 0 <= h < m:
            raise ConfigError(f"mirror hypothesis {h} out of range")
        v = np.zeros(m)
        v[h] = 1.0
        return v

    def params(self):
        return {} if self.hypothesis is None else {"hypothesis": self.hypothesis}


class RandomJam(Strategy):
    id = "random-jam"

    def emit(self, t, sender, target, truth, m, rng, snapshot=None):
        return rng.random(m)


class SplitBrain(Strategy):
    """Alternate zero-on-truth and all-ones across out-neighbors (and over time)."""

    id = "split-brain"

    def emit(self, t, sender, target, truth, m, rng, snapshot=None):
        if snapshot is not None:
            rank = sorted(snapshot.graph.out_neighbors[sender]).index(target)
        else:
            rank = target
        if (rank + t) % 2 == 0:
            return ZeroOnTruth().emit(t, sender, target, truth, m, rng)
        return np.ones(m)


class Omission(Strategy):
    """Send nothing; receivers treat the sender as absent for that round."""

    id = "omission"

    def emit(self, t, sender, target, truth, m, rng, snapshot=None):
        return None


STRATEGIES = {cls.id: cls for cls in (ZeroOnTruth, Mirror, RandomJam, SplitBrain, Omission)}
BUILTIN_STRATEGIES = ("zero-on-truth", "mirror", "random-jam", "split-brain")


def make_strategy(strategy_id: str, **params) -> Strategy:
    try:
        cls = STRATEGIES[strategy_id]
    except KeyError:
        raise ConfigError(f"unknown adversary strategy {strategy_id!r}; known: {sorted(STRATEGIES)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for strategy {strategy_id!r}: {exc}") from None


def emit_message(strategy, t: int, sender: int, target: int, truth: int, m: int, rng,
                 snapshot: Optional[Snapshot] = None) -> Optional[AdversaryMessage]:
    """Message from adversary ``sender`` to out-neighbor ``target`` at round ``t``.

    ``strategy`` is a Strategy instance or a registered id.  Returns ``None``
    when the strategy withholds its message.
    """
    if isinstance(strategy, str):
        strategy = make_strategy(strategy)
    if snapshot is not None and target not in snapshot.graph.out_neighbors[sender]:
        raise InputError(f"agent {target} is not an out-neighbor of {sender}")
    raw = strategy.emit(t, sender, target, truth, m, rng, snapshot)
    if raw is None:
        return None
    return AdversaryMessage.clamped(raw)


@dataclass(frozen=True)
class AdversaryConfig:
    adversarial_set: FrozenSet[int] = frozenset()
    f: int = 0
    strategy: Optional[Strategy] = None

    def __post_init__(self):
        object.__setattr__(self, "adversarial_set", frozenset(int(a) for a in self.adversarial_set))
        if isinstance(self.f, bool) or not isinstance(self.f, int) or self.f < 0:
            raise ConfigError(f"f must be a nonnegative integer, got {self.f!r}")
        if self.adversarial_set and self.strategy is None:
            raise ConfigError("adversarial agents need a strategy")

    def regular_set(self, n: int) -> FrozenSet[int]:
        return frozenset(range(n)) - self.adversarial_set

    def validate(self, g: DirectedGraph) -> None:
        bad = sorted(a for a in self.adversarial_set if not 0 <= a < g.node_count)
        if bad:
            raise ConfigError(f"adversarial ids out of range: {bad}")
        if not self.regular_set(g.node_count):
            raise ConfigError("at least one agent must be regular")


def f_local_violations(g: DirectedGraph, A: Iterable[int], f: int) -> Dict[int, int]:
    """Regular agents with more than ``f`` adversarial neighbors, mapped to that count."""
    adv = frozenset(A)
    out = {}
    for i in g.nodes:
        if i in adv:
            continue
        k = len(g.in_neighbors[i] & adv)
        if k > f:
            out[i] = k
    return out


def validate_f_local(g: DirectedGraph, A: Iterable[int], f: int) -> bool:
    """True iff every regular agent has at most ``f`` adversarial neighbors."""
    adv = frozenset(A)
    if any(not 0 <= a < g.node_count for a in adv):
        raise InputError("adversarial set must be a subset of the nodes")
    return not f_local_violations(g, adv, f)
