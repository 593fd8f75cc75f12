"""Synchronous round-based simulation of the min-rule and LFRHE protocols.

One round ``t -> t+1`` is a read phase followed by a write phase:

1. draw the joint signal profile for step ``t+1``;
2. every regular agent forms its new local belief from its own signal;
3. every adversary emits one message per out-neighbor (dated ``t``);
4. every regular agent forms its new actual belief from its new local belief
   and the actual beliefs of its neighbors dated ``t``.

The update is vectorized over agents.  Neighbor values are gathered into a
``(agents, max_in_degree, m)`` block padded with ``+inf``.  Padding never wins
a min and sorts to the end, so trimming can read the ``(f+1)``-th smallest
value directly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from . import graph as G
from .adversary import AdversaryConfig, Snapshot, emit_message, f_local_violations
from .beliefs import AgentState, BeliefVector, log_normalize, normalization_error
from .exceptions import ConfigError, InvariantViolation, NumericDegeneracyError
from .model import ObservationModel, hypothesis_pairs, sample_signal_block, source_set

log = logging.getLogger(__name__)

RULES = ("min_rule", "lfrhe")
SCHEMA = "dhtlearn-experiment/1"
NORMALIZATION_TOL = 1e-9

# spawn-key purposes for the per-(agent, purpose) random streams
_SIGNALS, _ADVERSARY, _JOINT = 0, 1, 2


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    graph: G.DirectedGraph
    model: ObservationModel
    rule: str = "min_rule"
    adversary: Optional[AdversaryConfig] = None
    priors: Optional[Tuple[AgentState, ...]] = None
    horizon: int = 100
    seed: int = 0
    checked_mode: bool = False
    thin: int = 1

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.graph.node_count != self.model.n:
            raise ConfigError(
                f"graph has {self.graph.node_count} nodes but the model has {self.model.n} agents"
            )
        if self.adversary is not None:
            self.adversary.validate(self.graph)
            if self.adversary.adversarial_set and self.rule != "lfrhe":
                raise ConfigError("adversaries are only supported with the lfrhe rule")
        if self.priors is not None:
            priors = tuple(self.priors)
            object.__setattr__(self, "priors", priors)
            if len(priors) != self.model.n:
                raise ConfigError(f"need priors for {self.model.n} agents, got {len(priors)}")
            for i, st in enumerate(priors):
                if st.local.m != self.model.m or st.actual.m != self.model.m:
                    raise ConfigError(f"agent {i}: prior length differs from {self.model.m} hypotheses")
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if isinstance(self.thin, bool) or not isinstance(self.thin, int) or self.thin < 1:
            raise ConfigError(f"thin must be a positive integer, got {self.thin!r}")

    @property
    def n(self) -> int:
        return self.graph.node_count

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def f(self) -> int:
        return self.adversary.f if self.adversary is not None else 0

    @property
    def adversarial_set(self) -> FrozenSet[int]:
        return self.adversary.adversarial_set if self.adversary is not None else frozenset()

    @property
    def regular(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.adversarial_set)

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def initial_state(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(local, actual)`` log-belief arrays of shape ``(n, m)``."""
        if self.priors is None:
            u = BeliefVector.uniform(self.m).log_values
            return np.tile(u, (self.n, 1)), np.tile(u, (self.n, 1))
        local = np.stack([p.local.log_values for p in self.priors])
        actual = np.stack([p.actual.log_values for p in self.priors])
        return local, actual

    def to_dict(self) -> dict:
        """Canonical, fully-resolved experiment document for this config."""
        model = self.model
        agents: dict = {"likelihoods": [s.likelihood.tolist() for s in model.structures]}
        if model.kind == "joint":
            agents["joint"] = model.joint.tolist()
        if self.priors is not None:
            agents["priors"] = {
                "local": [p.local.probs.tolist() for p in self.priors],
                "actual": [p.actual.probs.tolist() for p in self.priors],
            }
        doc = {
            "schema": SCHEMA,
            "graph": {"n": self.n, "edges": [list(e) for e in self.graph.sorted_edges()]},
            "hypotheses": {"labels": list(model.hypotheses.labels), "true": model.true_index},
            "agents": agents,
            "run": {
                "rule": self.rule,
                "horizon": self.horizon,
                "seed": self.seed,
                "checked": self.checked_mode,
            },
            "output": {"thin": self.thin},
        }
        if self.adversary is not None:
            adv = {"agents": sorted(self.adversary.adversarial_set), "f": self.adversary.f}
            if self.adversary.strategy is not None:
                adv["strategy"] = self.adversary.strategy.to_dict()
            doc["adversary"] = adv
        return doc

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# -- precondition report -----------------------------------------------------

@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    detail: str
    pair: Optional[Tuple[int, int]] = None
    witness: FrozenSet[int] = frozenset()


@dataclass(frozen=True)
class PreconditionReport:
    rule: str
    checks: Tuple[ConditionCheck, ...]
    source_sets: Dict[Tuple[int, int], FrozenSet[int]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[ConditionCheck]:
        return [c for c in self.checks if not c.passed]

    def by_name(self, name: str) -> List[ConditionCheck]:
        return [c for c in self.checks if c.name == name]

    def format(self, labels: Optional[Sequence[str]] = None) -> str:
        lines = []
        for c in self.checks:
            where = ""
            if c.pair is not None:
                p, q = c.pair
                where = f" ({labels[p]}, {labels[q]})" if labels else f" ({p}, {q})"
            line = f"[{'PASS' if c.passed else 'FAIL'}] {c.name}{where}: {c.detail}"
            if c.witness:
                line += f" witness={sorted(c.witness)}"
            lines.append(line)
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _fmt(s) -> str:
    return "{" + ", ".join(str(x) for x in sorted(s)) + "}"


def precondition_report(config: SimulationConfig) -> PreconditionReport:
    """Check the sufficient conditions for learning under the configured rule."""
    g, model = config.graph, config.model
    nodes = frozenset(g.nodes)
    checks: List[ConditionCheck] = []
    sources = {pq: source_set(model, *pq) for pq in hypothesis_pairs(model.m)}

    if config.rule == "min_rule":
        for pq, S in sources.items():
            checks.append(ConditionCheck(
                "identifiability", bool(S),
                f"source set {_fmt(S)}" if S else "no agent distinguishes this pair", pq))
        for pq, S in sources.items():
            if not S:
                checks.append(ConditionCheck("reachability", False, "source set is empty", pq, nodes))
                continue
            missing = (nodes - S) - G.reachable_from(g, S)
            checks.append(ConditionCheck(
                "reachability", not missing,
                "every non-source agent is reachable from the source set" if not missing
                else "agents unreachable from the source set", pq, frozenset(missing)))
        checked_agents = nodes
    else:
        r = 2 * config.f + 1
        for pq, S in sources.items():
            stalled = G.stalled_set(g, S, r)
            checks.append(ConditionCheck(
                "strong-robustness", not stalled,
                f"strongly {r}-robust w.r.t. source set {_fmt(S)}" if not stalled
                else f"percolation from {_fmt(S)} with threshold {r} stalls", pq, stalled))
        for pq, S in sources.items():
            ok = len(S) >= r or S == nodes
            checks.append(ConditionCheck(
                "redundancy", ok, f"|source set| = {len(S)}, need >= {r} when non-sources exist", pq))
        bad = f_local_violations(g, config.adversarial_set, config.f)
        checks.append(ConditionCheck(
            "f-local", not bad,
            f"every regular agent has at most {config.f} adversarial neighbors" if not bad
            else f"regular agents with more than {config.f} adversarial neighbors", None,
            frozenset(bad)))
        checked_agents = frozenset(config.regular)

    local, actual = config.initial_state()
    zero = frozenset(i for i in checked_agents
                     if np.any(local[i] == -np.inf) or np.any(actual[i] == -np.inf))
    checks.append(ConditionCheck(
        "prior-positivity", not zero,
        "all priors strictly positive" if not zero else "agents with a zero prior entry",
        None, zero))
    return PreconditionReport(config.rule, tuple(checks), sources)


# -- trace -------------------------------------------------------------------

@dataclass(eq=False)
class Trace:
    """Recorded belief history; adversary rows of ``local_log``/``actual_log`` are NaN."""

    times: np.ndarray
    local_log: np.ndarray
    actual_log: np.ndarray
    regular: Tuple[int, ...]
    labels: Tuple[str, ...]
    true_index: int
    fingerprint: str
    message_edges: Tuple[Tuple[int, int], ...] = ()
    message_times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    messages: Optional[np.ndarray] = None
    config: Optional[SimulationConfig] = None
    config_doc: Optional[dict] = None
    preconditions: Optional[PreconditionReport] = None

    @property
    def horizon(self) -> int:
        return int(self.times[-1])

    @property
    def m(self) -> int:
        return len(self.labels)

    def index_of(self, t: int) -> int:
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or self.times[idx] != t:
            raise KeyError(f"time {t} was not recorded")
        return idx

    def local(self, t: int, agent: int) -> BeliefVector:
        return BeliefVector(self.local_log[self.index_of(t), agent])

    def actual(self, t: int, agent: int) -> BeliefVector:
        return BeliefVector(self.actual_log[self.index_of(t), agent])

    def final_actual_probs(self) -> np.ndarray:
        """Actual beliefs at the last recorded step, regular agents only, shape ``(|R|, m)``."""
        return np.exp(self.actual_log[-1, list(self.regular)])


# -- the round kernel --------------------------------------------------------

class RoundKernel:
    """Precomputed gather tables for one (graph, model, rule, adversary) setup.

    State arrays carry a leading batch axis, one slice per independent run,
    so a seed sweep shares every vectorized operation.  Shapes: beliefs
    ``(B, n, m)``, signals ``(B, n)``, messages ``(B, E, m)`` with one row per
    adversary->regular edge in ``message_edges`` order.
    """

    def __init__(self, config: SimulationConfig):
        self.config = config
        g, model = config.graph, config.model
        n, m = config.n, config.m
        self.n, self.m, self.f = n, m, config.f
        self.rule = config.rule
        self.truth = model.true_index
        self.adversaries = tuple(sorted(config.adversarial_set))
        self.strategy = config.adversary.strategy if config.adversary is not None else None
        self.R = np.array(config.regular, dtype=np.int64)
        self.rows = np.arange(len(self.R))

        smax = max(s.signal_space_size for s in model.structures)
        loglik = np.zeros((n, smax, m))
        for s in model.structures:
            loglik[s.agent, : s.signal_space_size] = np.log(s.likelihood.T)
        self.loglik_R = loglik[self.R]

        nbrs = [sorted(g.in_neighbors[i]) for i in self.R]
        self.dmax = max((len(x) for x in nbrs), default=0)
        nb = np.full((len(self.R), self.dmax), n, dtype=np.int64)
        for row, lst in enumerate(nbrs):
            nb[row, : len(lst)] = lst
        self.nb = nb
        self.deg = np.array([len(x) for x in nbrs], dtype=np.int64)
        adv = set(self.adversaries)
        self._reg = np.isin(nb, [j for j in range(n) if j not in adv])[None, :, :, None]

        # one message slot per adversary -> regular edge
        row_of = {int(i): r for r, i in enumerate(self.R)}
        edges, rows, slots = [], [], []
        for a in self.adversaries:
            for tgt in sorted(g.out_neighbors[a]):
                if tgt in row_of:
                    r = row_of[tgt]
                    edges.append((a, tgt))
                    rows.append(r)
                    slots.append(nbrs[r].index(a))
        self.message_edges: Tuple[Tuple[int, int], ...] = tuple(edges)
        self.msg_rows = np.array(rows, dtype=np.int64)
        self.msg_slots = np.array(slots, dtype=np.int64)
        self._msg_onehot = np.zeros((len(edges), len(self.R)), dtype=np.int64)
        self._msg_onehot[np.arange(len(edges)), self.msg_rows] = 1
        self._warned_clamp = False
        self.containment_applies = not f_local_violations(g, adv, self.f)

    def streams(self, seed: int):
        """Independent generators per (purpose, agent) derived from one master seed."""
        def stream(*key):
            return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))

        if self.config.model.kind == "joint":
            signal_rngs = stream(_JOINT)
        else:
            signal_rngs = [stream(_SIGNALS, i) for i in range(self.n)]
        adv_rngs = {a: stream(_ADVERSARY, a) for a in self.adversaries}
        return signal_rngs, adv_rngs

    def emit_all(self, t: int, local: np.ndarray, actual: np.ndarray, adv_rngs) -> np.ndarray:
        """Messages of every batch slice, clamped to [0, 1]; NaN rows mark omissions.

        ``adv_rngs`` holds one ``{agent: Generator}`` map per batch slice.
        """
        B = len(adv_rngs)
        out = np.full((B, len(self.message_edges), self.m), np.nan)
        if not self.message_edges:
            return out
        emit = self.strategy.emit
        sent = np.zeros(out.shape[:2], dtype=bool)
        for b in range(B):
            snap = Snapshot(t, self.config.graph, self.truth, local[b], actual[b])
            rngs = adv_rngs[b]
            for k, (a, tgt) in enumerate(self.message_edges):
                raw = emit(t, a, tgt, self.truth, self.m, rngs[a], snap)
                if raw is not None:
                    out[b, k] = raw
                    sent[b, k] = True
        bad = ~((out >= 0.0) & (out <= 1.0))
        bad[~sent] = False
        if bad.any():
            if not self._warned_clamp:
                log.warning("round %d: adversary messages outside [0, 1] were clamped", t)
                self._warned_clamp = True
            out[sent] = np.clip(np.nan_to_num(out[sent], nan=0.0), 0.0, 1.0)
        return out

    def advance(self, t: int, local: np.ndarray, actual: np.ndarray, signals: np.ndarray,
                messages: np.ndarray, checked: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """One synchronous round.  Returns new ``(local, actual)``; inputs untouched."""
        R = self.R
        raw = local[:, R] + self.loglik_R[self.rows, signals[:, R]]
        try:
            pi = log_normalize(raw)
        except NumericDegeneracyError:
            raise self._degenerate(t, raw, "local") from None

        B = local.shape[0]
        buf = np.empty((B, self.n + 1, self.m))
        buf[:, :-1] = actual
        buf[:, -1] = np.inf
        V = buf[:, self.nb]
        received = self.deg[None, :]
        if self.message_edges:
            omitted = np.isnan(messages[:, :, 0])
            with np.errstate(divide="ignore"):
                V[:, self.msg_rows, self.msg_slots] = np.log(messages)
            if omitted.any():
                b, k = np.nonzero(omitted)
                V[b, self.msg_rows[k], self.msg_slots[k]] = np.inf
                received = self.deg[None, :] - omitted.astype(np.int64) @ self._msg_onehot

        # agents that take no neighbor value keep mu = pi exactly
        use = np.broadcast_to(received >= (2 * self.f + 1 if self.rule == "lfrhe" else 1), pi.shape[:2])
        if not use.any():
            v = pi
        elif self.rule == "min_rule" or self.f == 0:
            v = np.minimum(pi, V.min(axis=2))
        else:
            asc = np.sort(V, axis=2)
            v = np.minimum(pi, asc[:, :, self.f, :])
            if checked and self.containment_applies:
                self._check_containment(t, V, asc, received, use)
        if use.any():
            try:
                mu = np.where(use[..., None], log_normalize(v), pi)
            except NumericDegeneracyError:
                raise self._degenerate(t, v, "actual") from None
        else:
            mu = pi
        new_local = local.copy()
        new_actual = actual.copy()
        new_local[:, R] = pi
        new_actual[:, R] = mu
        if checked:
            self._check_state(t, pi, mu)
        return new_local, new_actual

    def _degenerate(self, t, rows, which):
        bad = sorted({int(self.R[r]) for _, r in np.argwhere(np.all(rows == -np.inf, axis=-1))})
        return NumericDegeneracyError(f"round {t}: {which} belief of agents {bad} is zero on every hypothesis")

    def _check_containment(self, t, V, asc, received, use):
        """Every kept value must lie within the range of the regular neighbors' values."""
        lo = np.where(self._reg, V, np.inf).min(axis=2)
        hi = np.where(self._reg, V, -np.inf).max(axis=2)
        top = np.maximum(received - self.f - 1, 0)
        top = np.broadcast_to(top, use.shape)[:, :, None, None]
        kept_lo = asc[:, :, self.f, :]
        kept_hi = np.take_along_axis(asc, top, axis=2)[:, :, 0, :]
        bad = ((kept_lo < lo) | (kept_hi > hi)) & use[..., None]
        if bad.any():
            _, r, th = np.argwhere(bad)[0]
            raise InvariantViolation(
                f"round {t}: agent {int(self.R[r])} kept a value on hypothesis {th} outside the "
                f"range of its regular neighbors' beliefs"
            )

    def _check_state(self, t, pi, mu):
        for name, block in (("local", pi), ("actual", mu)):
            err = np.abs(np.exp(block).sum(axis=-1) - 1.0)
            if (err > NORMALIZATION_TOL).any():
                _, r = np.unravel_index(int(np.argmax(err)), err.shape)
                raise InvariantViolation(
                    f"round {t}: {name} belief of agent {int(self.R[r])} off by {err.max():.3e}")
            zero = block[..., self.truth] == -np.inf
            if zero.any():
                _, r = np.unravel_index(int(np.argmax(zero)), zero.shape)
                raise InvariantViolation(
                    f"round {t}: {name} belief of agent {int(self.R[r])} is zero on the true state")


def _record_times(horizon: int, thin: int) -> np.ndarray:
    times = list(range(0, horizon + 1, thin))
    if times[-1] != horizon:
        times.append(horizon)
    return np.array(times, dtype=np.int64)


def _simulate(config: SimulationConfig, seeds: Sequence[int]) -> List[Trace]:
    report = precondition_report(config)
    if not report.passed:
        for c in report.failures():
            log.warning("precondition failed: %s %s %s", c.name, c.pair, c.detail)

    kernel = RoundKernel(config)
    T, n, m, B = config.horizon, config.n, config.m, len(seeds)
    signal_blocks, adv_rngs = [], []
    for seed in seeds:
        srng, arng = kernel.streams(seed)
        signal_blocks.append(sample_signal_block(config.model, srng, T))
        adv_rngs.append(arng)
    signals = np.stack(signal_blocks)

    times = _record_times(T, config.thin)
    local0, actual0 = config.initial_state()
    adv = list(kernel.adversaries)
    local0[adv] = np.nan
    actual0[adv] = np.nan
    local = np.broadcast_to(local0, (B, n, m)).copy()
    actual = np.broadcast_to(actual0, (B, n, m)).copy()

    local_hist = np.empty((B, times.size, n, m))
    actual_hist = np.empty((B, times.size, n, m))
    local_hist[:, 0], actual_hist[:, 0] = local, actual
    msg_times = times[times < T]
    msg_hist = np.empty((B, msg_times.size, len(kernel.message_edges), m))
    rec = 1
    msg_rec = 0
    checked = config.checked_mode
    if checked:
        kernel._check_state(0, local[:, kernel.R], actual[:, kernel.R])

    for t in range(T):
        messages = kernel.emit_all(t, local, actual, adv_rngs)
        if msg_rec < msg_times.size and msg_times[msg_rec] == t:
            msg_hist[:, msg_rec] = messages
            msg_rec += 1
        local, actual = kernel.advance(t, local, actual, signals[:, t], messages, checked)
        if rec < times.size and times[rec] == t + 1:
            local_hist[:, rec], actual_hist[:, rec] = local, actual
            rec += 1

    traces = []
    for b, seed in enumerate(seeds):
        cfg = config if seed == config.seed else config.replace(seed=int(seed))
        traces.append(Trace(
            times=times,
            local_log=local_hist[b],
            actual_log=actual_hist[b],
            regular=cfg.regular,
            labels=cfg.model.hypotheses.labels,
            true_index=cfg.model.true_index,
            fingerprint=cfg.fingerprint(),
            message_edges=kernel.message_edges,
            message_times=msg_times,
            messages=msg_hist[b],
            config=cfg,
            config_doc=cfg.to_dict(),
            preconditions=report,
        ))
    return traces


def run(config: SimulationConfig) -> Trace:
    """Simulate ``config.horizon`` rounds; precondition failures warn but never block."""
    return _simulate(config, [config.seed])[0]


def _run_chunk(args):
    config, seeds = args
    return _simulate(config, seeds)


def run_batch(config: SimulationConfig, seeds: Sequence[int], max_workers: int = 1) -> List[Trace]:
    """One trace per seed, identical to ``run(config.replace(seed=s))`` for each ``s``.

    Seeds are advanced together in lock-step; ``max_workers > 1`` splits
    them across worker processes.
    """
    seeds = [int(s) for s in seeds]
    for s in seeds:
        config.replace(seed=s)  # validates the seed range
    if not seeds:
        return []
    if max_workers <= 1 or len(seeds) == 1:
        return _simulate(config, seeds)
    chunks = [seeds[k::max_workers] for k in range(max_workers) if seeds[k::max_workers]]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
    by_seed = {}
    for part, chunk in zip(parts, chunks):
        by_seed.update(zip(chunk, part))
    return [by_seed[s] for s in seeds]
