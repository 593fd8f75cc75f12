import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dhtlearn.exceptions import CapacityError, ConfigError, DomainError, InputError
from dhtlearn.model import (
    HypothesisSet, ObservationModel, SignalStructure, check_identifiability, equivalence_set,
    hypothesis_pairs, kl_divergence, sample_signal_block, sample_signals, source_set,
)

H2 = HypothesisSet(("a", "b"), 0)
H3 = HypothesisSet(("a", "b", "c"), 0)
FLAT2 = [[0.5, 0.5], [0.5, 0.5]]


def test_hypothesis_set_validation():
    assert H3.m == 3 and H3.index("c") == 2 and H3.index(1) == 1
    with pytest.raises(ConfigError):
        HypothesisSet(("a",), 0)
    with pytest.raises(ConfigError):
        HypothesisSet(("a", "a"), 0)
    with pytest.raises(ConfigError):
        HypothesisSet(("a", "b"), 2)


@pytest.mark.parametrize("table", [
    [[0.5, 0.5], [1.0, 0.0]],          # zero likelihood
    [[0.5, 0.6], [0.5, 0.5]],          # row does not sum to 1
    [[0.5, 0.5]],                      # wrong row count for the model
])
def test_signal_structure_rejects_invalid_tables(table):
    with pytest.raises(ConfigError):
        ObservationModel.independent(H2, [table])


def test_signal_structure_is_read_only():
    s = SignalStructure(0, FLAT2)
    with pytest.raises(ValueError):
        s.likelihood[0, 0] = 0.9


def test_kl_divergence_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.143841, abs=1e-6)
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2), abs=1e-12)
    assert kl_divergence([0.8, 0.2], [0.2, 0.8]) == pytest.approx(0.831777, abs=1e-6)
    with pytest.raises(DomainError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


def test_source_set_examples():
    model = ObservationModel.independent(H2, [FLAT2, FLAT2, [[0.8, 0.2], [0.2, 0.8]]])
    assert source_set(model, 0, 1) == {2}
    with pytest.raises(InputError):
        source_set(model, 1, 1)


def test_equivalence_set_examples():
    same = ObservationModel.independent(H3, [[[0.5, 0.5]] * 3])
    assert equivalence_set(same, 0) == {0, 1, 2}
    distinct = ObservationModel.independent(H3, [[[0.2, 0.8], [0.5, 0.5], [0.7, 0.3]]])
    assert equivalence_set(distinct, 0) == {0}
    # truth a, rows for a and c equal
    model = ObservationModel.independent(H3, [[[0.3, 0.7], [0.6, 0.4], [0.3, 0.7]]])
    assert equivalence_set(model, 0) == {0, 2}


def test_identifiability_examples():
    flat = ObservationModel.independent(H2, [FLAT2, FLAT2])
    assert check_identifiability(flat).failed_pairs == [(0, 1)]
    one = ObservationModel.independent(H2, [FLAT2, [[0.8, 0.2], [0.2, 0.8]]])
    assert check_identifiability(one).passed
    # pair (a, b) indistinguishable by everyone, others fine
    partial = ObservationModel.independent(H3, [[[0.3, 0.7], [0.3, 0.7], [0.6, 0.4]]])
    report = check_identifiability(partial)
    assert report.failed_pairs == [(0, 1)]
    assert report.source_sets[(0, 2)] == {0}


def test_hypothesis_pairs_count():
    assert hypothesis_pairs(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_degenerate_row_always_yields_that_signal():
    row = [[1.0], [1.0]]
    model = ObservationModel.independent(H2, [row])
    assert (sample_signal_block(model, np.random.default_rng(0), 100) == 0).all()


def test_sampling_frequency():
    model = ObservationModel.independent(H2, [[[0.8, 0.2], [0.2, 0.8]]])
    draws = sample_signal_block(model, np.random.default_rng(123), 10000)[:, 0]
    assert abs(np.mean(draws == 0) - 0.8) < 0.02


def test_sampling_is_deterministic_per_seed():
    model = ObservationModel.independent(H2, [[[0.8, 0.2], [0.2, 0.8]], [[0.3, 0.7], [0.6, 0.4]]])
    a = sample_signal_block(model, np.random.default_rng(9), 50)
    b = sample_signal_block(model, np.random.default_rng(9), 50)
    assert np.array_equal(a, b)
    assert sample_signals(model, np.random.default_rng(9)).shape == (2,)


def test_product_joint_matches_independent_marginals():
    r0 = np.array([[0.7, 0.3], [0.4, 0.6]])
    r1 = np.array([[0.2, 0.5, 0.3], [0.3, 0.3, 0.4]])
    joint = np.einsum("pa,pb->pab", r0, r1)
    model = ObservationModel.from_joint(H2, joint)
    assert model.kind == "joint" and model.n == 2
    assert np.allclose(model.structures[1].likelihood, r1)
    draws = sample_signal_block(model, np.random.default_rng(1), 20000)
    assert abs(np.mean(draws[:, 0] == 0) - 0.7) < 0.02
    for s in range(3):
        assert abs(np.mean(draws[:, 1] == s) - r1[0, s]) < 0.02


def test_correlated_joint_model():
    # both agents always see the same bit
    joint = np.array([[[0.8, 0.0], [0.0, 0.2]], [[0.2, 0.0], [0.0, 0.8]]])
    model = ObservationModel.from_joint(H2, joint)
    draws = sample_signal_block(model, np.random.default_rng(2), 1000)
    assert np.array_equal(draws[:, 0], draws[:, 1])
    assert source_set(model, 0, 1) == {0, 1}


def test_joint_table_must_marginalize():
    joint = np.full((2, 2, 2), 0.25)
    with pytest.raises(ConfigError):
        ObservationModel(H2, (SignalStructure(0, [[0.8, 0.2], [0.5, 0.5]]), SignalStructure(1, FLAT2)),
                         kind="joint", joint=joint)


def test_joint_capacity_guard():
    structures = tuple(SignalStructure(i, [[0.5, 0.5], [0.5, 0.5]]) for i in range(21))
    with pytest.raises(CapacityError):
        ObservationModel(H2, structures, kind="joint", joint=np.zeros(1))


def test_with_truth():
    model = ObservationModel.independent(H2, [FLAT2])
    assert model.with_truth(1).true_index == 1


probs = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=4).map(lambda v: list(np.array(v) / sum(v)))


@settings(max_examples=200, deadline=None)
@given(probs, probs)
def test_kl_zero_iff_source_membership(p, q):
    if len(q) != len(p):
        q = p
    model = ObservationModel.independent(H2, [[p, q]])
    member = 0 in source_set(model, 0, 1)
    kl = kl_divergence(p, q)
    assert kl >= 0
    if np.max(np.abs(np.subtract(p, q))) > 1e-6:
        assert member and kl > 0
    elif not member:
        assert kl == pytest.approx(0.0, abs=1e-20)
    assert source_set(model, 0, 1) == source_set(model, 1, 0)
    same = ObservationModel.independent(H2, [[p, p]])
    assert kl_divergence(p, p) == 0.0 and source_set(same, 0, 1) == frozenset()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=3, max_size=3), st.integers(0, 2))
def test_equivalence_set_complements_source_sets(kinds, truth):
    rows = [[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]]
    model = ObservationModel.independent(HypothesisSet(("a", "b", "c"), truth), [[rows[k] for k in kinds]])
    eq = equivalence_set(model, 0)
    for theta in range(3):
        if theta != truth:
            assert (theta in eq) == (0 not in source_set(model, truth, theta))
    assert truth in eq
