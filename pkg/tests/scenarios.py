"""Topologies and observation models shared by the engine and acceptance tests."""

import numpy as np

from dhtlearn.adversary import AdversaryConfig, make_strategy
from dhtlearn.engine import SimulationConfig
from dhtlearn.graph import DirectedGraph, circulant_graph, path_graph
from dhtlearn.model import HypothesisSet, ObservationModel

FLAT2 = [[0.5, 0.5], [0.5, 0.5]]
BERNOULLI = [[0.8, 0.2], [0.2, 0.8]]
D_BERNOULLI = 0.6 * np.log(4.0)  # D((.8,.2) || (.2,.8)) = .8 ln 4 + .2 ln(1/4)


def two_hypotheses():
    return HypothesisSet(("theta1", "theta2"), 0)


def single_agent(horizon=2000, seed=0, checked=True):
    model = ObservationModel.independent(two_hypotheses(), [BERNOULLI])
    return SimulationConfig(DirectedGraph(1), model, horizon=horizon, seed=seed, checked_mode=checked)


def path3(horizon=5000, seed=0, checked=True):
    """0 -> 1 -> 2 with agent 0 the only source for the lone false pair."""
    model = ObservationModel.independent(two_hypotheses(), [BERNOULLI, FLAT2, FLAT2])
    return SimulationConfig(path_graph(3), model, horizon=horizon, seed=seed, checked_mode=checked)


# three hypotheses; agent kinds by which false hypothesis they can rule out
_A = [[0.7, 0.3], [0.3, 0.7], [0.7, 0.3]]   # separates theta2 from theta1/theta3
_B = [[0.7, 0.3], [0.7, 0.3], [0.3, 0.7]]   # separates theta3 from theta1/theta2
_FLAT3 = [[0.5, 0.5]] * 3


def three_hypotheses():
    return HypothesisSet(("theta1", "theta2", "theta3"), 0)


SIX_AGENT_EDGES = [(0, 1), (1, 3), (3, 4), (3, 0), (1, 2), (4, 5), (2, 5)]


def six_agent(horizon=5000, seed=0, checked=True):
    """Not strongly connected; S(1,2)={0}, S(1,3)={3}, S(2,3)={0,3}, each reaching everyone."""
    tables = [_A, _FLAT3, _FLAT3, _B, _FLAT3, _FLAT3]
    model = ObservationModel.independent(three_hypotheses(), tables)
    g = DirectedGraph.from_edges(6, SIX_AGENT_EDGES)
    return SimulationConfig(g, model, horizon=horizon, seed=seed, checked_mode=checked)


ADVERSARY = 7


def eight_agent_model():
    # agents 0-2 rule out theta2, 3-5 rule out theta3, 6 and the adversary 7 are uninformative
    tables = [_A, _A, _A, _B, _B, _B, _FLAT3, _FLAT3]
    return ObservationModel.independent(three_hypotheses(), tables)


def eight_agent_graph():
    """Bidirectional circulant C8(1,2,3): every node hears from all but its antipode."""
    return circulant_graph(8, [1, 2, 3])


def eight_agent_broken_graph():
    """C8(1,2,3) with edges cut so {3,4,5,6} hears from at most 2 agents outside itself.

    Each of them keeps at most one edge from the sources {0,1,2} of the pair
    (theta1, theta2); 4, 5 and 6 also hear the adversary.  Strongly 2- but not
    3-robust w.r.t. that source set.
    """
    cut = [(0, 3), (1, 3), (2, 4), (2, 5), (1, 6)]
    return eight_agent_graph().without_edges(cut)


def eight_agent_unreachable_graph():
    """C8(1,2,3) with every edge leaving the source set {0,1,2} removed."""
    g = eight_agent_graph()
    return g.without_edges([(i, j) for i, j in g.edges if i in (0, 1, 2) and j not in (0, 1, 2)])


def eight_agent(strategy, graph=None, horizon=5000, seed=0, checked=True, f=1):
    adversary = AdversaryConfig(frozenset({ADVERSARY}), f, make_strategy(strategy))
    return SimulationConfig(graph or eight_agent_graph(), eight_agent_model(), rule="lfrhe",
                            adversary=adversary, horizon=horizon, seed=seed, checked_mode=checked)


def eight_agent_min_rule(graph, horizon=5000, seed=0, checked=True):
    return SimulationConfig(graph, eight_agent_model(), rule="min_rule", horizon=horizon,
                            seed=seed, checked_mode=checked)


def random_instance(rng, max_n=12):
    """Random digraph (n <= max_n), random S and r in {1, 2, 3}."""
    n = int(rng.integers(1, max_n + 1))
    p = float(rng.uniform(0.1, 0.9))
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    g = DirectedGraph.from_edges(n, [tuple(map(int, e)) for e in np.argwhere(mask)])
    S = frozenset(int(v) for v in np.flatnonzero(rng.random(n) < rng.uniform(0.0, 0.6)))
    r = int(rng.integers(1, 4))
    return g, S, r
