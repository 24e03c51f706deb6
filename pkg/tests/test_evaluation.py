import numpy as np
import pytest

from core.autodiff.rng import make_rng
from core.envs import make_env
from core.errors import ParameterError
from core.evaluation import (
    EvalDataset,
    EvalReport,
    aggregate,
    aggregate_by_codebook_size,
    build_dataset,
    codebook_context_histogram,
    dominant_code,
    dump_lcgs,
    episode_eval,
    evaluate,
    prediction_accuracy,
    prediction_mae,
    shd,
    shd_by_context,
)
from core.graphs import AdjacencyMatrix
from core.planning import CemParams
from core.records import RecordWriter, read_records
from core.training.trainer import build_model


def test_shd_counts_differing_entries():
    a = AdjacencyMatrix.from_edges(2, 1, [(0, 0), (2, 1)])
    b = AdjacencyMatrix.from_edges(2, 1, [(0, 0), (1, 1), (0, 1)])
    assert shd(a, a) == 0
    assert shd(a, b) == 3
    assert shd(a.entries, b.entries) == 3
    with pytest.raises(ParameterError):
        shd(a, AdjacencyMatrix.empty(3, 1))


def test_shd_is_a_metric():
    rng = make_rng(9)
    graphs = [(rng.random((5, 4)) < 0.5).astype(np.int8) for _ in range(12)]
    for a in graphs:
        for b in graphs:
            assert shd(a, b) == shd(b, a)
            assert (shd(a, b) == 0) == np.array_equal(a, b)
            for c in graphs:
                assert shd(a, c) <= shd(a, b) + shd(b, c)


def test_true_dynamics_predicts_perfectly(chem_env):
    data = build_dataset(chem_env, 60, make_rng(1))
    assert prediction_accuracy(chem_env.oracle_dynamics(), data) == 1.0


def test_accuracy_set_validation(chem_env):
    data = build_dataset(chem_env, 10, make_rng(1))
    with pytest.raises(ParameterError):
        prediction_accuracy(chem_env.oracle_dynamics(), data, noisy=[1], clean=[1, 2])
    with pytest.raises(ParameterError):
        build_dataset(chem_env, 10, make_rng(1), noisy_count=chem_env.layout.n_state)


def test_noisy_dataset_records_perturbed_sets(chem_env):
    data = build_dataset(chem_env, 20, make_rng(2), noisy_count=2)
    for obs, s, chosen in zip(data.observations, data.states, data.noisy):
        assert len(chosen) == 2 and 0 not in chosen
        for j in range(chem_env.layout.n_state):
            sl = chem_env.layout.state_slice(j)
            if j not in chosen:
                np.testing.assert_array_equal(obs[sl], s[sl])


def test_magnetic_true_dynamics_has_zero_mae(magnetic_cfg):
    env = make_env(magnetic_cfg)
    data = build_dataset(env, 30, make_rng(3))
    assert prediction_mae(env.oracle_dynamics(), data) == pytest.approx(0.0, abs=1e-12)


def test_oracle_graph_shd_equals_redundant_edges(small_cfg, chem_env):
    model = build_model(small_cfg.with_updates(method="oracle-graph"), chem_env, 0)
    data = build_dataset(chem_env, 80, make_rng(4))
    overall, per = shd_by_context(model, data, chem_env.structure)
    assert per.get("full", 0.0) == 0.0
    if "fork" in per:
        assert per["fork"] == chem_env.structure.redundant_edges("fork")
    assert 0.0 <= overall <= chem_env.structure.redundant_edges("fork")


def test_histogram_counts_every_sample(small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    data = build_dataset(chem_env, 50, make_rng(5))
    hist = codebook_context_histogram(model, data, chem_env.structure.names)
    assert hist.shape == (model.k, 2)
    assert hist.sum() == 50
    assert model.codebook.usage.sum() == 0


def test_histogram_ignores_sample_order(small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    data = build_dataset(chem_env, 60, make_rng(6))
    perm = make_rng(7).permutation(len(data))
    shuffled = EvalDataset(
        observations=data.observations[perm],
        states=data.states[perm],
        actions=data.actions[perm],
        next_states=data.next_states[perm],
        contexts=[data.contexts[i] for i in perm],
    )
    names = chem_env.structure.names
    np.testing.assert_array_equal(
        codebook_context_histogram(model, shuffled, names), codebook_context_histogram(model, data, names)
    )


def test_single_code_gives_one_graph_for_every_input(small_cfg, chem_env):
    model = build_model(small_cfg.with_updates(**{"model.codebook_size": 1}), chem_env, 0)
    data = build_dataset(chem_env, 40, make_rng(8))
    z, graphs = model.assign(data.observations, data.actions)
    assert set(z.tolist()) == {0}
    for g in graphs:
        np.testing.assert_array_equal(g, model.code_graph(0).flat())


def test_dominant_code():
    hist = np.array([[1, 0], [7, 2], [2, 0]])
    assert dominant_code(hist, 0) == (1, 0.7)
    assert dominant_code(np.zeros((2, 1), dtype=int), 0) == (0, 0.0)


def test_episode_eval_with_true_dynamics(chem_env):
    params = CemParams(1, 32, 8, 2, chem_env.action_space)
    stats = episode_eval(chem_env.oracle_dynamics(), chem_env, params, 2, make_rng(6))
    assert len(stats.rewards) == 2
    assert 0.0 <= stats.success_rate <= 1.0
    with pytest.raises(ParameterError):
        episode_eval(chem_env.oracle_dynamics(), chem_env, params, 0, make_rng(6))


def test_episode_trace_round_trips_as_jsonl(tmp_path, chem_env):
    params = CemParams(1, 32, 8, 2, chem_env.action_space)
    path = tmp_path / "traces.jsonl"
    writer = RecordWriter(path)
    seen = []

    def trace(t):
        seen.append(t)
        writer.write(t.to_record())

    stats = episode_eval(chem_env.oracle_dynamics(), chem_env, params, 1, make_rng(6), trace)
    records = read_records(path)
    assert len(records) == len(seen) >= 1
    assert set(records[0]) == {"state", "action", "next_state", "reward", "done", "context"}
    assert [r["done"] for r in records] == [False] * (len(records) - 1) + [True]
    assert sum(r["reward"] for r in records) == pytest.approx(stats.rewards[0])
    for record, t in zip(records, seen):
        np.testing.assert_array_equal(record["state"], t.state)
        np.testing.assert_array_equal(record["action"], t.action)
        assert record["context"] == t.context
        assert record["context"] in chem_env.structure.names
    for prev, nxt in zip(records, records[1:]):
        assert prev["next_state"] == nxt["state"]


def test_evaluate_fills_report(small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    report = evaluate(model, small_cfg, 0, step=5, episodes=0)
    assert report.step == 5 and report.shd is not None
    assert set(report.accuracy) == {"0", "2"}
    assert set(report.histogram) == {"fork", "full"}
    assert report.perplexity is not None and report.reward_mean is None
    assert report.to_record()["kind"] == "eval"


def test_evaluate_is_deterministic(small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    a = evaluate(model, small_cfg, 0, episodes=1)
    b = evaluate(model, small_cfg, 0, episodes=1)
    assert a.model_dump() == b.model_dump()


def test_aggregate_refuses_mixed_configs():
    a = EvalReport(seed=0, config_hash="x", method="fcdl", env="e", shd=1.0, accuracy={"0": 0.5})
    b = EvalReport(seed=1, config_hash="x", method="fcdl", env="e", shd=3.0, accuracy={"0": 0.7})
    out = aggregate([a, b])
    assert out["metrics"]["shd"] == {"mean": 2.0, "std": 1.0, "n": 2}
    assert out["metrics"]["accuracy.0"]["mean"] == pytest.approx(0.6)
    assert out["seeds"] == [0, 1]
    with pytest.raises(ParameterError):
        aggregate([a, b.model_copy(update={"config_hash": "y"})])
    with pytest.raises(ParameterError):
        aggregate([])


def test_aggregate_groups_by_codebook_size():
    def report(seed, k, shd_value):
        return EvalReport(seed=seed, config_hash=f"h{k}", method="fcdl", env="e", codebook_size=k, shd=shd_value)

    groups = aggregate_by_codebook_size([report(0, 4, 1.0), report(0, 1, 5.0), report(1, 4, 3.0), report(1, 1, 5.0)])
    assert list(groups) == [1, 4]
    assert groups[1]["codebook_size"] == 1 and groups[1]["metrics"]["shd"]["std"] == 0.0
    assert groups[4]["metrics"]["shd"] == {"mean": 2.0, "std": 1.0, "n": 2}


def test_report_carries_effective_codebook_size(small_cfg, chem_env):
    assert evaluate(build_model(small_cfg, chem_env, 0), small_cfg, 0, episodes=0).codebook_size == 4
    dense = small_cfg.with_updates(method="dense")
    assert evaluate(build_model(dense, chem_env, 0), dense, 0, episodes=0).codebook_size == 1


def test_dump_lcgs_writes_codes_and_truth(tmp_path, small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    written = dump_lcgs(model, chem_env, tmp_path)
    names = sorted(p.name for p in written)
    assert names == sorted([f"code_{k}.txt" for k in range(4)] + ["true_fork.txt", "true_full.txt"])
    assert AdjacencyMatrix.load(tmp_path / "true_fork.txt") == chem_env.structure.lcg("fork")
