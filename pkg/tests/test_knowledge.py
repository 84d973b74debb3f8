from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coco_cp.errors import CapExceeded, InvalidProgram
from coco_cp.knowledge import (
    CIFAR_LABELS,
    ActiveCount,
    AttributeRules,
    DigitSum,
    ExplicitTable,
    MajorityVote,
    Rule,
    SumParity,
    abduce,
    cifar_attribute_rules,
    compile_program,
    deduce,
    deduce_image,
    estimate_deltas,
    load_table,
    marginal_label_distribution,
    marginal_label_distributions,
    save_table,
    table_from_weights,
)
from coco_cp.records import FactorizedConceptDistribution
from coco_cp.sets import ConceptSet

LBL = {n: i for i, n in enumerate(CIFAR_LABELS)}


def _cifar_index(kt, *on):
    from coco_cp.knowledge import CIFAR_ATTRIBUTES
    return kt.concept_space.index([int(a in on) for a in CIFAR_ATTRIBUTES])


def test_digit_sum_table(digit_sum):
    assert digit_sum.weights.shape == (100, 19)
    row = digit_sum.rows(np.array([digit_sum.concept_space.index((7, 5))]))[0]
    assert row[12] == 1.0 and row.sum() == 1.0
    assert digit_sum.is_deterministic


def test_deduce_examples(digit_sum):
    assert deduce((7, 5), digit_sum) == frozenset({12})
    kt = table_from_weights((2,), [[1.0, 0.0], [0.0, 0.0]])
    assert deduce((1,), kt) == frozenset()


def test_shared_signature_splits_mass():
    kt = compile_program(cifar_attribute_rules())
    dog = kt.rows(np.array([_cifar_index(kt, "ani", "hai", "snt")]))[0]
    assert dog[LBL["dog"]] == dog[LBL["horse"]] == 0.5
    car = _cifar_index(kt, "whl", "met")
    assert deduce(kt.concept_space.vector(car), kt) == frozenset({LBL["automobile"], LBL["truck"]})


def test_cifar_rules_follow_literals():
    kt = compile_program(cifar_attribute_rules())
    # only "met" active matches the ship rule
    assert deduce(kt.concept_space.vector(_cifar_index(kt, "met")), kt) == frozenset({LBL["ship"]})


def test_active_count():
    kt = compile_program(ActiveCount(4))
    assert deduce((1, 0, 1, 0), kt) == frozenset({2})
    assert kt.num_labels == 5


def test_sum_parity():
    kt = compile_program(SumParity(2, 10))
    assert deduce((3, 4), kt) == frozenset({1})
    assert deduce((3, 5), kt) == frozenset({0})


def test_majority_vote_conflict_and_priority():
    prog = MajorityVote(3, 3, priority=(2, 1, 0), conflict_pair=(0, 1))
    kt = compile_program(prog)
    assert deduce((0, 1, 2), kt) == frozenset({prog.conflict_label})
    # tie between 1 and 2 broken by priority
    assert deduce((1, 2, 2), kt) == frozenset({2})
    assert deduce((1, 1, 2), kt) == frozenset({1})


def test_majority_vote_bad_priority():
    with pytest.raises(InvalidProgram):
        MajorityVote(3, 3, priority=(0, 0, 1)).validate()


def test_abduce_examples(digit_sum):
    assert abduce({0}, digit_sum).to_tuples() == {(0, 0)}
    assert abduce({1}, digit_sum).to_tuples() == {(0, 1), (1, 0)}
    assert len(abduce(set(), digit_sum)) == 0


@pytest.mark.parametrize("y", range(19))
def test_abduce_cardinality(digit_sum, y):
    assert len(abduce({y}, digit_sum)) == min(y, 18 - y) + 1


def test_abduce_full_label_space_is_feasible_set():
    kt = table_from_weights((3,), [[1.0, 0.0], [0.0, 0.0], [0.5, 0.5]])
    assert abduce({0, 1}, kt).to_tuples() == {(0,), (2,)}


def test_deduce_image_examples(digit_sum, sum_parity):
    sp = digit_sum.concept_space
    assert deduce_image(ConceptSet.from_vectors(sp, [(2, 3), (4, 4)]), digit_sum) == frozenset({5, 8})
    assert deduce_image(ConceptSet.empty(sp), digit_sum) == frozenset()
    assert deduce_image(ConceptSet(sp, np.arange(100)), digit_sum) == frozenset(range(19))
    assert deduce_image(ConceptSet(sp, np.arange(100)), sum_parity) == frozenset({0, 1})


def test_marginal_examples(digit_sum, sum_parity):
    onehot = [np.eye(10)[7], np.eye(10)[5]]
    p = marginal_label_distribution(FactorizedConceptDistribution(onehot), digit_sum)
    assert p[12] == 1.0
    uni = FactorizedConceptDistribution([np.full(10, 0.1), np.full(10, 0.1)])
    np.testing.assert_allclose(marginal_label_distribution(uni, sum_parity), [0.5, 0.5])
    expect = np.array([min(y, 18 - y) + 1 for y in range(19)]) / 100
    np.testing.assert_allclose(marginal_label_distribution(uni, digit_sum), expect)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_batched_marginal_matches_single(seed):
    kt = compile_program(DigitSum(2, 4))
    rng = np.random.default_rng(seed)
    probs = [rng.dirichlet(np.ones(4), size=5) for _ in range(2)]
    batch = marginal_label_distributions(probs, kt)
    for i in range(5):
        single = marginal_label_distribution(FactorizedConceptDistribution([p[i] for p in probs]), kt)
        np.testing.assert_allclose(batch[i], single, atol=1e-12)
    np.testing.assert_allclose(batch.sum(axis=1), 1.0)


def _annotated(c_star, y_star):
    return SimpleNamespace(c_star=np.asarray(c_star), y_star=np.asarray(y_star))


def test_deltas_complete_knowledge(digit_sum):
    pairs = [(1, 2), (3, 4), (9, 9)]
    assert estimate_deltas(_annotated(pairs, [a + b for a, b in pairs]), digit_sum) == (1.0, 1.0)


def test_deltas_shared_pairs():
    prog = cifar_attribute_rules()
    kt = compile_program(prog)
    d_ab, d_de = estimate_deltas(_annotated(prog.signatures, np.arange(10)), kt)
    assert d_ab == 1.0
    assert d_de == pytest.approx(6 / 10 + 4 / 10 * 0.5)


def test_explicit_table_roundtrip(tmp_path, digit_sum):
    path = tmp_path / "w.npy"
    save_table(digit_sum, path)
    kt = load_table(path, [10, 10])
    np.testing.assert_array_equal(kt.weights, digit_sum.weights)


def test_explicit_table_rejects_bad_rows():
    with pytest.raises(InvalidProgram):
        ExplicitTable((2,), 2, ((0.5, 0.2, 0.3), (1.0, 0.0))).validate()


def test_cap_exceeded():
    with pytest.raises(CapExceeded):
        table_from_weights((10, 10, 10), np.ones((1000, 1)), cap=100)
    with pytest.raises(CapExceeded):
        compile_program(ExplicitTable((3,), 1, ((1.0,),) * 3), cap=2)


def test_lazy_program_past_cap_matches_dense():
    lazy = compile_program(DigitSum(3, 10), cap=100)
    dense = compile_program(DigitSum(3, 10))
    assert not lazy.dense and dense.dense
    idx = np.arange(0, 1000, 37)
    np.testing.assert_array_equal(lazy.deduce_rows(idx), dense.deduce_rows(idx))


def test_lazy_rules_past_cap():
    prog = AttributeRules(20, 2, (Rule((0,), ((0, True),)), Rule((1,), ((0, False),))))
    kt = compile_program(prog, cap=1000)
    assert not kt.dense
    assert deduce((1,) + (0,) * 19, kt) == frozenset({0})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_abduce_deduce_galois(seed):
    """c is in abduce(Y) exactly when deduce(c) meets Y."""
    from coco_cp.verify import random_label_set, random_table
    rng = np.random.default_rng(seed)
    kt = random_table(rng)
    ys = random_label_set(rng, kt.num_labels)
    got = abduce(ys, kt).to_tuples()
    want = {kt.concept_space.vector(i) for i in range(kt.concept_space.total_size)
            if deduce(kt.concept_space.vector(i), kt) & ys}
    assert got == want
