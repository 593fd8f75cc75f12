"""scikit-learn style wrapper: feed observed signal profiles, read off beliefs.

``SocialLearner`` runs the same round kernel as the simulator but consumes
signals supplied by the caller instead of sampling them, so it can sit inside
ordinary data pipelines (replayed logs, externally generated observations).

>>> learner = SocialLearner(graph=g, model=model).fit(signals)   # doctest: +SKIP
>>> learner.predict()                                           # doctest: +SKIP
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .adversary import AdversaryConfig, make_strategy
from .beliefs import AgentState
from .engine import RoundKernel, SimulationConfig
from .graph import DirectedGraph
from .model import ObservationModel
from .validation import check_signal_profiles


class SocialLearner(BaseEstimator):
    """Distributed hypothesis tester over a fixed agent network.

    Parameters
    ----------
    graph : DirectedGraph
    model : ObservationModel
    rule : {"min_rule", "lfrhe"}
    f : int
        Trimming parameter for ``lfrhe``.
    adversarial_set : sequence of int
        Agents that emit ``strategy`` messages instead of learning.
    strategy : str or Strategy, optional
    priors : sequence of AgentState, optional
        Uniform when omitted.
    random_state : int
        Seeds the adversaries' random streams.
    checked : bool
        Assert the live invariants after every round.
    """

    def __init__(self, graph: Optional[DirectedGraph] = None, model: Optional[ObservationModel] = None,
                 rule: str = "min_rule", f: int = 0, adversarial_set: Sequence[int] = (),
                 strategy=None, priors: Optional[Sequence[AgentState]] = None,
                 random_state: int = 0, checked: bool = False):
        self.graph = graph
        self.model = model
        self.rule = rule
        self.f = f
        self.adversarial_set = adversarial_set
        self.strategy = strategy
        self.priors = priors
        self.random_state = random_state
        self.checked = checked

    def _config(self) -> SimulationConfig:
        strategy = self.strategy
        if isinstance(strategy, str):
            strategy = make_strategy(strategy)
        adversary = None
        if self.f or len(self.adversarial_set):
            adversary = AdversaryConfig(frozenset(self.adversarial_set), self.f, strategy)
        return SimulationConfig(
            graph=self.graph, model=self.model, rule=self.rule, adversary=adversary,
            priors=None if self.priors is None else tuple(self.priors),
            seed=self.random_state, checked_mode=self.checked,
        )

    def _start(self):
        config = self._config()
        self.config_ = config
        self._kernel = RoundKernel(config)
        _, adv_rngs = self._kernel.streams(config.seed)
        self._adv_rngs = [adv_rngs]
        local, actual = config.initial_state()
        adv = list(self._kernel.adversaries)
        local[adv] = np.nan
        actual[adv] = np.nan
        self.local_log_ = local
        self.actual_log_ = actual
        self.n_steps_ = 0
        self.regular_ = np.array(config.regular)

    def _consume(self, signals: np.ndarray):
        kernel = self._kernel
        local, actual = self.local_log_[None], self.actual_log_[None]
        for row in signals:
            t = self.n_steps_
            messages = kernel.emit_all(t, local, actual, self._adv_rngs)
            local, actual = kernel.advance(t, local, actual, row[None], messages, self.checked)
            self.n_steps_ += 1
        self.local_log_, self.actual_log_ = local[0], actual[0]

    def fit(self, X, y=None):
        """Start from the priors and process every row of ``X`` as one round."""
        if self.graph is None or self.model is None:
            raise ValueError("SocialLearner needs both a graph and an observation model")
        signals = check_signal_profiles(X, self.model)
        self._start()
        self._consume(signals)
        return self

    def partial_fit(self, X, y=None):
        """Continue from the current beliefs (starting fresh if not fitted yet)."""
        if not hasattr(self, "local_log_"):
            return self.fit(X)
        self._consume(check_signal_profiles(X, self.model))
        return self

    def predict_proba(self, X=None) -> np.ndarray:
        """Actual beliefs of the regular agents, shape ``(n_regular, m)``.

        With ``X``, the signals are processed first (as ``partial_fit``).
        """
        if X is not None:
            self.partial_fit(X)
        check_is_fitted(self, "actual_log_")
        return np.exp(self.actual_log_[self.regular_])

    def predict(self, X=None) -> np.ndarray:
        """Most believed hypothesis label of each regular agent."""
        labels = np.array(self.model.hypotheses.labels, dtype=object)
        return labels[np.argmax(self.predict_proba(X), axis=1)]

    def score(self, X=None, y=None) -> float:
        """Fraction of regular agents whose top hypothesis is ``y`` (default: the true one)."""
        proba = self.predict_proba(X)
        target = self.model.true_index if y is None else self.model.hypotheses.index(y)
        return float(np.mean(np.argmax(proba, axis=1) == target))
