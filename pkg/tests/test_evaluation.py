"""Evaluation: hit rates, precision, K-S statistic, TransE baseline."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from automathkg.errors import (
    EmptyTriplesError,
    InsufficientEntitiesError,
    MissingVectorError,
)
from automathkg.evaluation import (
    DEFAULT_SAMPLE_COUNTS,
    HitsResult,
    PrecisionSample,
    ReachEvalConfig,
    TranseConfig,
    Triple,
    hits_at_q,
    hits_csv,
    ks_statistic,
    precision,
    sample_entities,
    transe_to_vd,
    transe_train,
    triples_from_kg,
)
from automathkg.kg import EntityType, TacticLabel
from automathkg.vectordb import VectorDb

from oracles import hits_rate_oracle, ks_by_grid, transe_hits_at_1
from pipeline_util import FIXTURES
from util import kg_from_edges, random_digraph, unit_vectors


# -- config and sampling ------------------------------------------------------


def test_reach_eval_config_validation():
    config = ReachEvalConfig()
    assert config.k == 5 and config.q_values == (1, 5, 10, 15)
    assert config.direction == "either"
    assert config.sample_counts == DEFAULT_SAMPLE_COUNTS
    with pytest.raises(ValueError):
        ReachEvalConfig(k=0)
    with pytest.raises(ValueError):
        ReachEvalConfig(q_values=())


def test_sample_entities_is_stratified_and_seeded():
    kg = kg_from_edges(10, [], entity_type=EntityType.DEFINITION)
    for entity in list(kg.iter_entities())[:4]:
        entity.type = EntityType.THEOREM
    counts = {EntityType.DEFINITION: 3, EntityType.THEOREM: 2}
    first = sample_entities(kg, counts, seed=5)
    second = sample_entities(kg, counts, seed=5)
    assert first == second
    assert len(first) == 5
    assert len(set(first)) == 5  # without replacement
    third = sample_entities(kg, counts, seed=6)
    assert sorted(third) != sorted(first) or third != first


def test_sample_entities_insufficient_population():
    kg = kg_from_edges(2, [], entity_type=EntityType.PROBLEM)
    with pytest.raises(InsufficientEntitiesError) as info:
        sample_entities(kg, {EntityType.PROBLEM: 3}, seed=0)
    assert info.value.wanted == 3 and info.value.available == 2


# -- hits@q -------------------------------------------------------------------


def adjacency_vd(n, edges, dim=32):
    """Vectors derived from adjacency rows, padded and unit-normalized."""
    vd = VectorDb(dim=dim)
    for i in range(n):
        vec = np.full(dim, 1e-3)
        vec[i % dim] += 1.0
        for u, v in edges:
            if u == i:
                vec[v % dim] += 0.5
        vd.insert(i, vec)
    return vd


def test_hits_at_q_matches_the_standalone_oracle_exactly():
    rng = np.random.default_rng(2026)
    n = 40
    edges = random_digraph(rng, n, p=0.08)
    kg = kg_from_edges(n, edges)
    records = unit_vectors(rng, count=n, dim=24)
    vd = VectorDb(dim=24)
    for eid, vec in records.items():
        vd.insert(eid, vec)
    samples = list(range(0, n, 3))
    for k in (1, 3):
        for q in (1, 4, 7):
            result = hits_at_q(kg, vd, samples, k=k, q=q, direction="either")
            oracle = hits_rate_oracle(
                n, edges, {i: vd.vector(i) for i in range(n)},
                samples, k=k, q=q, direction="either",
            )
            assert result.rates[q] == oracle  # bitwise-equal arithmetic


def test_hits_at_q_accepts_a_sequence_of_q_values():
    kg = kg_from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    vd = adjacency_vd(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    result = hits_at_q(kg, vd, [0, 1, 2], k=6, q=[1, 2, 4], direction="forward")
    assert sorted(result.rates) == [1, 2, 4]
    assert len(result.details) == 9
    assert {d.q for d in result.details} == {1, 2, 4}
    for detail in result.details:
        assert 0 <= detail.r <= detail.q


def test_hits_at_q_rates_are_monotone_in_k():
    rng = np.random.default_rng(77)
    n = 30
    edges = random_digraph(rng, n, p=0.1)
    kg = kg_from_edges(n, edges)
    records = unit_vectors(rng, count=n, dim=16)
    vd = VectorDb(dim=16)
    for eid, vec in records.items():
        vd.insert(eid, vec)
    samples = list(range(0, n, 2))
    previous = 0.0
    for k in range(1, 7):
        rate = hits_at_q(kg, vd, samples, k=k, q=5).rates[5]
        assert rate >= previous - 1e-15
        previous = rate


def test_hits_at_q_validates_inputs():
    kg = kg_from_edges(3, [(0, 1)])
    vd = adjacency_vd(3, [(0, 1)])
    with pytest.raises(ValueError):
        hits_at_q(kg, vd, [0], k=1, q=0)
    vd.remove(2)
    with pytest.raises(MissingVectorError) as info:
        hits_at_q(kg, vd, [0, 2], k=1, q=1)
    assert info.value.entity_id == 2


def test_hits_result_serialization_and_csv():
    result = HitsResult(rates={5: 0.5, 1: 1.0})
    data = result.to_dict()
    assert list(data["rates"]) == ["1", "5"]
    assert hits_csv(result) == "q,rate\n1,1.0\n5,0.5\n"


# -- precision ----------------------------------------------------------------


def test_precision_hand_computed_fixture_to_1e_12():
    samples = [
        PrecisionSample(0, (True, True, True, False)),
        PrecisionSample(1, (False, True, False, False)),
        PrecisionSample(2, (True, True, True, True)),
    ]
    summary = precision(samples)
    assert summary.per_sample == (0.75, 0.25, 1.0)
    assert math.isclose(summary.mean, 2.0 / 3.0, abs_tol=1e-12)
    assert math.isclose(summary.stdev, math.sqrt(7.0 / 48.0), abs_tol=1e-12)


def test_precision_single_sample_has_zero_stdev():
    summary = precision([PrecisionSample(0, (True, False))])
    assert summary.per_sample == (0.5,)
    assert summary.mean == 0.5
    assert summary.stdev == 0.0


def test_precision_validation():
    with pytest.raises(ValueError):
        precision([])
    with pytest.raises(ValueError):
        precision([PrecisionSample(0, ())])
    with pytest.raises(ValueError, match="entity 1"):
        precision(
            [PrecisionSample(0, (True, True)), PrecisionSample(1, (True,))]
        )


def test_precision_summary_to_dict():
    summary = precision([PrecisionSample(0, (True,)), PrecisionSample(1, (False,))])
    assert summary.to_dict() == {
        "per_sample": [1.0, 0.0],
        "mean": 0.5,
        "stdev": pytest.approx(math.sqrt(0.5)),
    }


# -- Kolmogorov-Smirnov --------------------------------------------------------


def test_ks_statistic_hand_computed_fixtures():
    assert math.isclose(ks_statistic([1, 2, 3], [1.5, 2.5]), 1.0 / 3.0, abs_tol=1e-12)
    assert math.isclose(ks_statistic([0, 0, 1], [0, 1, 1]), 1.0 / 3.0, abs_tol=1e-12)
    assert ks_statistic([1, 2], [1, 2]) == 0.0
    assert ks_statistic([0, 0], [1, 1]) == 1.0


def test_ks_statistic_matches_grid_oracle_on_random_data():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = rng.normal(size=int(rng.integers(1, 40)))
        b = rng.normal(loc=0.3, size=int(rng.integers(1, 40)))
        assert math.isclose(
            ks_statistic(a, b), ks_by_grid(a, b), abs_tol=1e-12
        )


def test_ks_statistic_is_symmetric_and_validates():
    a, b = [0.1, 0.5, 0.9], [0.2, 0.4]
    assert ks_statistic(a, b) == ks_statistic(b, a)
    with pytest.raises(ValueError):
        ks_statistic([], [1.0])


# -- TransE ---------------------------------------------------------------------


def disjoint_pair_triples():
    """Twenty disjoint head->tail pairs under two alternating relations."""
    triples = []
    for i in range(20):
        relation = (
            TacticLabel.DEDUCTION if (i // 5) % 2 == 0 else TacticLabel.LEMMA
        )
        triples.append(Triple(head=i, relation=relation, tail=20 + i))
    return triples


@pytest.fixture(scope="module")
def disjoint_pair_run():
    triples = disjoint_pair_triples()
    cfg = TranseConfig(dim=384, epochs=75, seed=11)
    return triples, transe_train(triples, cfg)


def test_triples_from_kg_mirrors_edges():
    kg = kg_from_edges(4, [(0, 1), (1, 2), (0, 3)], tactic=TacticLabel.LEMMA)
    triples = triples_from_kg(kg)
    assert triples == [
        Triple(0, TacticLabel.LEMMA, 1),
        Triple(0, TacticLabel.LEMMA, 3),
        Triple(1, TacticLabel.LEMMA, 2),
    ]


def test_transe_config_validation():
    with pytest.raises(ValueError):
        TranseConfig(dim=0)
    with pytest.raises(ValueError):
        TranseConfig(margin=0.0)
    with pytest.raises(ValueError):
        TranseConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TranseConfig(epochs=-1)
    with pytest.raises(ValueError):
        TranseConfig(negatives_per_positive=0)


def test_transe_rejects_empty_triples():
    with pytest.raises(EmptyTriplesError):
        transe_train([])


def test_transe_zero_epochs_returns_seeded_init():
    cfg = TranseConfig(dim=16, epochs=0, seed=3)
    result = transe_train([Triple(0, TacticLabel.DEDUCTION, 1)], cfg)
    assert result.epoch_losses == []
    again = transe_train([Triple(0, TacticLabel.DEDUCTION, 1)], cfg)
    npt.assert_array_equal(result.entity_vectors[0], again.entity_vectors[0])
    npt.assert_array_equal(
        result.relation_vectors[TacticLabel.DEDUCTION],
        again.relation_vectors[TacticLabel.DEDUCTION],
    )
    bound = 6.0 / math.sqrt(16)
    for vec in result.entity_vectors.values():
        assert np.all(np.abs(vec) <= bound)
    # relation vectors are normalized at init
    assert math.isclose(
        float(np.linalg.norm(result.relation_vectors[TacticLabel.DEDUCTION])),
        1.0,
        abs_tol=1e-12,
    )


def test_transe_zero_epochs_matches_frozen_golden():
    golden = json.loads(
        (FIXTURES / "transe_zero_epoch_golden.json").read_text(encoding="utf-8")
    )
    cfg = TranseConfig(
        dim=golden["dim"], margin=3.0, epochs=0, seed=golden["seed"]
    )
    result = transe_train([Triple(0, TacticLabel.DEDUCTION, 1)], cfg)
    blob = np.concatenate(
        [
            result.entity_vectors[0],
            result.entity_vectors[1],
            result.relation_vectors[TacticLabel.DEDUCTION],
        ]
    ).tobytes()
    assert hashlib.sha256(blob).hexdigest() == golden["sha256"]
    npt.assert_allclose(result.entity_vectors[0][:6], golden["ent0_head"], atol=1e-15)
    npt.assert_allclose(result.entity_vectors[1][:6], golden["ent1_head"], atol=1e-15)
    npt.assert_allclose(
        result.relation_vectors[TacticLabel.DEDUCTION][:6],
        golden["rel_head"],
        atol=1e-15,
    )
    npt.assert_allclose(
        float(np.linalg.norm(result.relation_vectors[TacticLabel.DEDUCTION])),
        golden["rel_norm"],
        atol=1e-15,
    )


def test_transe_single_triple_converges_to_translation():
    cfg = TranseConfig(dim=384, margin=3.0, epochs=2000, seed=9)
    result = transe_train([Triple(0, TacticLabel.DEDUCTION, 1)], cfg)
    h = result.entity_vectors[0]
    t = result.entity_vectors[1]
    r = result.relation_vectors[TacticLabel.DEDUCTION]
    assert float(np.linalg.norm(h + r - t)) < 0.1
    # entity vectors stay on the unit sphere
    npt.assert_allclose(np.linalg.norm(h), 1.0, atol=1e-9)
    npt.assert_allclose(np.linalg.norm(t), 1.0, atol=1e-9)


def test_transe_loss_decreases_over_windows_on_disjoint_pairs(disjoint_pair_run):
    _, result = disjoint_pair_run
    assert len(result.epoch_losses) == 75
    windows = [
        float(np.mean(result.epoch_losses[i : i + 5])) for i in range(0, 75, 5)
    ]
    for earlier, later in zip(windows, windows[1:]):
        assert later <= earlier + 1e-9, windows


def test_transe_ranks_true_completions_first(disjoint_pair_run):
    triples, result = disjoint_pair_run
    assert transe_hits_at_1(result, triples) == 1.0


def test_transe_to_vd_round_trip():
    triples = [Triple(0, TacticLabel.DEDUCTION, 1), Triple(1, TacticLabel.LEMMA, 2)]
    result = transe_train(triples, TranseConfig(dim=8, epochs=5, seed=0))
    vd = transe_to_vd(result, dim=8)
    assert len(vd) == 3
    assert vd.strategy_tag == "transe"
    hits = vd.top_k(result.entity_vectors[0], k=1)
    assert hits[0].entity_id == 0
