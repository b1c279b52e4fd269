import math

import numpy as np
import pytest

import tempo_meta as tm


def small_spec(seed=0):
    spec = tm.RegimeSpec()
    spec.num_entities = 30
    spec.num_relations = 3
    spec.num_groups = 3
    spec.timestamps = 12
    spec.changepoint = 10
    spec.facts_per_snapshot = 25
    spec.seed = seed
    return spec


def small_config():
    cfg = tm.MetaConfig()
    cfg.alpha = 0.5
    cfg.beta = 0.2
    cfg.dim = 6
    cfg.epochs = 2
    return cfg


def test_parse_and_build():
    quads = tm.parse_quadruples("0 0 1 0\n1 0 2 24\n2 1 0 24\n", time_gap=24)
    assert quads == [(0, 0, 1, 0), (1, 0, 2, 1), (2, 1, 0, 1)]
    kg = tm.build_temporal_kg(quads, split=False)
    assert kg.num_timestamps == 2
    assert kg.num_entities == 3
    assert kg.split is None
    assert kg.facts(2) == [(1, 0, 2, 2), (2, 1, 0, 2)]


def test_parse_error_is_a_value_error():
    with pytest.raises(ValueError, match="line 1"):
        tm.parse_quadruples("0 0 x 0\n")


def test_split():
    s = tm.compute_split(10)
    assert (s.train_end, s.valid_end, s.test_end) == (8, 9, 10)


def test_score_and_grad():
    p = tm.init_params(2, 1, 1, 0)
    p.entity = np.array([[0.5], [-1.0]])
    p.relation = np.array([[2.0], [0.5]])
    p.other = np.array([1.5])
    loss, grad = tm.loss_and_grad(p, [(0, 0, 1, 1)])
    assert loss == pytest.approx(1.8781783475825310, rel=1e-12)
    assert grad["entity"][0, 0] == pytest.approx(2.9970447253780321, rel=1e-12)
    assert tm.loss(p, [(0, 0, 1, 1)]) == loss
    assert tm.score(p, 0, 0, [1]) == [pytest.approx(-1.5)]


def test_gated_blend_and_ranks():
    a = tm.init_params(4, 2, 3, 0)
    b = tm.init_params(4, 2, 3, 1)
    mid = tm.init_support_params(a, b, tm.GateSet.zeros(3))
    np.testing.assert_allclose(mid.entity, 0.5 * (a.entity + b.entity), rtol=0, atol=1e-15)
    assert tm.pessimistic_rank([0.25] * 5, 0) == 5
    m = tm.compute_metrics([1, 2, 4])
    assert m["mrr"] == pytest.approx(7 / 12)
    assert m["hits3"] == pytest.approx(2 / 3)


def test_train_evaluate_report():
    kg, rules = tm.generate(small_spec())
    assert rules["changepoint"] == 10
    cfg = small_config()
    state, log = tm.train(kg, cfg)
    assert len(log) == cfg.epochs * (kg.split.train_end - 1)
    assert all(math.isfinite(r["query_loss"]) for r in log)
    ranks = tm.evaluate(kg, state, cfg)
    assert len(ranks) == 2 * sum(len(kg.facts(t)) for t in range(kg.split.valid_end + 1, 13))
    rep = tm.report(kg, ranks, periods=2, history_bounds=[50, 200, 500])
    assert 0 < rep["overall"]["mrr"] <= 100
    assert len(rep["periods"]) == 2
    # Deterministic.
    state2, _ = tm.train(kg, cfg)
    assert state2.params == state.params
    assert tm.evaluate(kg, state2, cfg) == ranks


def test_baseline_modes_and_checkpoint(tmp_path):
    kg, _ = tm.generate(small_spec(1))
    cfg = small_config()
    plain = tm.run_experiment(kg, cfg, tm.RunMode.PLAIN)
    assert all(r["rank"] >= 1 for r in plain)
    p = tm.init_params(kg.num_entities, kg.num_relations, 4, 3)
    path = str(tmp_path / "theta.ckpt")
    tm.save_checkpoint(path, p)
    assert tm.load_checkpoint(path) == p


def test_config_text_round_trip():
    cfg = small_config()
    cfg.ablation = tm.Ablation.SHARED_GATE
    cfg.optimizer = tm.Optimizer.ADAM
    back = tm.MetaConfig.from_text(cfg.to_text())
    assert back.ablation == tm.Ablation.SHARED_GATE
    assert back.alpha == cfg.alpha
    with pytest.raises(ValueError):
        tm.MetaConfig.from_text("nonsense = 1\n")


def test_gradcheck():
    backbone_err, gate_err = tm.gradcheck(0, 2)
    assert backbone_err < 1e-4
    assert gate_err < 1e-4
