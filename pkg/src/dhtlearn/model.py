"""Hypotheses, private signal structures, and the observation model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import CapacityError, ConfigError, DomainError, InputError

ROW_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-9
SOURCE_TOL = 1e-12
JOINT_MAX_ENTRIES = 2 ** 20


@dataclass(frozen=True)
class HypothesisSet:
    labels: Tuple[str, ...]
    true_index: int = 0

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ConfigError("need at least two hypotheses")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"hypothesis labels must be unique: {labels}")
        if not 0 <= self.true_index < len(labels):
            raise ConfigError(f"true_index {self.true_index} out of range for {len(labels)} hypotheses")

    @property
    def m(self) -> int:
        return len(self.labels)

    def index(self, label_or_index: Union[str, int]) -> int:
        if isinstance(label_or_index, (int, np.integer)):
            return int(label_or_index)
        return self.labels.index(label_or_index)


@dataclass(frozen=True, eq=False)
class SignalStructure:
    """Likelihood table of one agent: row ``p`` is ``l_i(. | theta_p)``."""

    agent: int
    likelihood: np.ndarray

    def __post_init__(self):
        table = np.array(self.likelihood, dtype=float)
        if table.ndim != 2 or table.shape[1] < 1:
            raise ConfigError(f"agent {self.agent}: likelihood must be an (m, |S_i|) table")
        if not np.all(np.isfinite(table)) or np.any(table <= 0):
            raise ConfigError(f"agent {self.agent}: likelihood entries must be strictly positive")
        sums = table.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ConfigError(f"agent {self.agent}: likelihood rows must sum to 1, got {sums.tolist()}")
        table.setflags(write=False)
        object.__setattr__(self, "likelihood", table)

    @property
    def signal_space_size(self) -> int:
        return self.likelihood.shape[1]

    @property
    def m(self) -> int:
        return self.likelihood.shape[0]

    def row(self, p: int) -> np.ndarray:
        return self.likelihood[p]

    def column(self, signal: int) -> np.ndarray:
        """Likelihood of ``signal`` under every hypothesis."""
        return self.likelihood[:, signal]


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Per-agent signal structures, optionally tied together by a joint table.

    For ``kind == "joint"``, ``joint[p]`` is an array of shape
    ``(|S_0|, ..., |S_{n-1}|)`` holding ``l(s | theta_p)``.
    """

    hypotheses: HypothesisSet
    structures: Tuple[SignalStructure, ...]
    kind: str = "independent"
    joint: Optional[np.ndarray] = None

    def __post_init__(self):
        structures = tuple(self.structures)
        object.__setattr__(self, "structures", structures)
        m = self.hypotheses.m
        if not structures:
            raise ConfigError("observation model needs at least one agent")
        for idx, s in enumerate(structures):
            if s.agent != idx:
                raise ConfigError(f"signal structure #{idx} is labelled agent {s.agent}")
            if s.m != m:
                raise ConfigError(f"agent {idx}: likelihood has {s.m} rows, expected {m}")
        if self.kind == "independent":
            if self.joint is not None:
                raise ConfigError("independent model must not carry a joint table")
        elif self.kind == "joint":
            self._validate_joint()
        else:
            raise ConfigError(f"unknown observation model kind {self.kind!r}")

    def _validate_joint(self):
        sizes = tuple(s.signal_space_size for s in self.structures)
        total = int(np.prod(sizes, dtype=np.int64))
        if total > JOINT_MAX_ENTRIES:
            raise CapacityError(f"joint signal space has {total} entries (limit {JOINT_MAX_ENTRIES})")
        if self.joint is None:
            raise ConfigError("joint model requires a joint table")
        table = np.array(self.joint, dtype=float)
        m = self.hypotheses.m
        if table.shape != (m,) + sizes:
            raise ConfigError(f"joint table shape {table.shape} != {(m,) + sizes}")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ConfigError("joint table entries must be finite and nonnegative")
        flat = table.reshape(m, -1)
        if np.any(np.abs(flat.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ConfigError("joint table rows must sum to 1")
        n = len(sizes)
        for i, s in enumerate(self.structures):
            axes = tuple(a + 1 for a in range(n) if a != i)
            marginal = table.sum(axis=axes) if axes else table
            if np.any(np.abs(marginal - s.likelihood) > MARGINAL_TOL):
                raise ConfigError(f"joint table does not marginalize to agent {i}'s likelihood")
        table.setflags(write=False)
        object.__setattr__(self, "joint", table)

    @classmethod
    def independent(cls, hypotheses: HypothesisSet, tables: Sequence) -> "ObservationModel":
        return cls(hypotheses, tuple(SignalStructure(i, t) for i, t in enumerate(tables)))

    @classmethod
    def from_joint(cls, hypotheses: HypothesisSet, joint) -> "ObservationModel":
        """Build a joint model, deriving each agent's marginal from ``joint``."""
        table = np.asarray(joint, dtype=float)
        n = table.ndim - 1
        structures = []
        for i in range(n):
            axes = tuple(a + 1 for a in range(n) if a != i)
            structures.append(SignalStructure(i, table.sum(axis=axes) if axes else table))
        return cls(hypotheses, tuple(structures), kind="joint", joint=table)

    @property
    def n(self) -> int:
        return len(self.structures)

    @property
    def m(self) -> int:
        return self.hypotheses.m

    @property
    def true_index(self) -> int:
        return self.hypotheses.true_index

    def with_truth(self, true_index: int) -> "ObservationModel":
        h = HypothesisSet(self.hypotheses.labels, true_index)
        return ObservationModel(h, self.structures, self.kind, self.joint)


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in nats; terms with ``p(w) = 0`` contribute nothing."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InputError(f"distributions must be 1-d and of equal length, got {p.shape} and {q.shape}")
    if np.any(q <= 0):
        raise DomainError("KL divergence undefined: q has a zero (or negative) entry")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InputError("p is not a probability distribution")
    mask = p > 0
    d = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    return max(d, 0.0)


def _rows_differ(s: SignalStructure, p: int, q: int) -> bool:
    return bool(np.any(np.abs(s.row(p) - s.row(q)) > SOURCE_TOL))


def _check_hypothesis(model: ObservationModel, p: int) -> int:
    if not 0 <= p < model.m:
        raise InputError(f"hypothesis index {p} out of range 0..{model.m - 1}")
    return p


def source_set(model: ObservationModel, p: int, q: int) -> FrozenSet[int]:
    """Agents whose private likelihoods distinguish ``theta_p`` from ``theta_q``."""
    _check_hypothesis(model, p)
    _check_hypothesis(model, q)
    if p == q:
        raise InputError("source set needs two distinct hypotheses")
    return frozenset(s.agent for s in model.structures if _rows_differ(s, p, q))


def equivalence_set(model: ObservationModel, i: int) -> FrozenSet[int]:
    """Hypotheses agent ``i`` cannot tell apart from the true one."""
    if not 0 <= i < model.n:
        raise InputError(f"agent id {i} out of range 0..{model.n - 1}")
    s = model.structures[i]
    star = model.true_index
    return frozenset(th for th in range(model.m) if th == star or not _rows_differ(s, th, star))


def hypothesis_pairs(m: int) -> List[Tuple[int, int]]:
    return list(itertools.combinations(range(m), 2))


@dataclass(frozen=True)
class IdentifiabilityReport:
    source_sets: Dict[Tuple[int, int], FrozenSet[int]] = field(default_factory=dict)

    @property
    def failed_pairs(self) -> List[Tuple[int, int]]:
        return [pair for pair, s in self.source_sets.items() if not s]

    @property
    def passed(self) -> bool:
        return not self.failed_pairs


def check_identifiability(model: ObservationModel) -> IdentifiabilityReport:
    """Source set of every unordered hypothesis pair; passes iff none is empty."""
    return IdentifiabilityReport({(p, q): source_set(model, p, q) for p, q in hypothesis_pairs(model.m)})


# -- sampling ---------------------------------------------------------------

def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, cdf.size - 1)


def sample_signal_block(model: ObservationModel, rngs, steps: int) -> np.ndarray:
    """Draw ``steps`` i.i.d. joint signal profiles under the true hypothesis.

    ``rngs`` is either one ``numpy.random.Generator`` or, for independent
    models, a sequence with one generator per agent.  Returns an integer
    array of shape ``(steps, n)``.
    """
    star = model.true_index
    if model.kind == "joint":
        rng = rngs if isinstance(rngs, np.random.Generator) else rngs[0]
        sizes = model.joint.shape[1:]
        flat = _draw(np.cumsum(model.joint[star].ravel()), rng.random(steps))
        return np.stack(np.unravel_index(flat, sizes), axis=1).astype(np.int64)
    if isinstance(rngs, np.random.Generator):
        streams = [rngs] * model.n
    else:
        streams = list(rngs)
        if len(streams) != model.n:
            raise InputError(f"need {model.n} generators, got {len(streams)}")
    out = np.empty((steps, model.n), dtype=np.int64)
    for i, s in enumerate(model.structures):
        out[:, i] = _draw(np.cumsum(s.row(star)), streams[i].random(steps))
    return out


def sample_signals(model: ObservationModel, rng) -> np.ndarray:
    """One joint signal profile (one signal index per agent) under the truth."""
    return sample_signal_block(model, rng, 1)[0]
