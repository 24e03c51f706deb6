import numpy as np
import pytest

from core.autodiff.rng import make_rng
from core.envs import Transition, make_env
from core.errors import CheckpointError, LayoutMismatchError, ParameterError, TrainingError
from core.training.buffer import ReplayBuffer
from core.training.checkpoint import (
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    model_header,
    restore_model,
    save_checkpoint,
)
from core.training.trainer import Trainer, build_model, collect, explore, random_policy


def _transition(i, dim=2):
    return Transition(np.full(dim, float(i)), np.array([float(i)]), np.full(dim, float(i + 1)), f"c{i}")


# --- buffer -----------------------------------------------------------------


def test_buffer_ring_overwrites_oldest():
    buf = ReplayBuffer(3, 2, 1, make_rng(0))
    for i in range(5):
        buf.add(_transition(i))
    assert len(buf) == 3
    assert sorted(buf.all().states[:, 0]) == [2.0, 3.0, 4.0]
    assert buf.contexts[0] == "c3"


def test_buffer_sample_size_and_errors():
    buf = ReplayBuffer(10, 2, 1, make_rng(0))
    with pytest.raises(ParameterError):
        buf.sample(4)
    buf.add(_transition(0))
    buf.add(_transition(1))
    assert len(buf.sample(8)) == 2
    with pytest.raises(ParameterError):
        ReplayBuffer(0, 2, 1, make_rng(0))


def test_buffer_sampling_is_uniform():
    buf = ReplayBuffer(32, 2, 1, make_rng(5))
    for i in range(20):
        buf.add(_transition(i))
    draws = np.concatenate([buf.sample(20).index for _ in range(5000)])
    counts = np.bincount(draws, minlength=32)
    assert counts[20:].sum() == 0
    expected = len(draws) / 20
    chi2 = float(((counts[:20] - expected) ** 2 / expected).sum())
    assert chi2 < 43.82  # χ² critical value, 19 dof, p = 0.001


# --- collection ---------------------------------------------------------------


def test_collect_fills_buffer_with_true_transitions(small_cfg, chem_env):
    trainer = Trainer(small_cfg, chem_env, seed=0)
    rng = make_rng(11)
    out = collect(chem_env, trainer.buffer, random_policy(chem_env, rng), 30, rng)
    assert len(out) == 30 and len(trainer.buffer) == 30
    for t in out:
        action = chem_env.action_from_vector(t.action)
        np.testing.assert_array_equal(chem_env.transition(t.state, action), t.next_state)
        assert t.context == chem_env.context_of(t.state, action)
    with pytest.raises(ParameterError):
        collect(chem_env, trainer.buffer, random_policy(chem_env, rng), 0, rng)


def test_explore_categorical(small_cfg, chem_env):
    never = small_cfg.with_updates(**{"training.exploration_prob": 0.0})
    always = small_cfg.with_updates(**{"training.exploration_prob": 1.0})
    rng = make_rng(2)
    assert all(explore(chem_env, 7, never, rng) == 7 for _ in range(20))
    picks = {explore(chem_env, 7, always, rng) for _ in range(50)}
    assert len(picks) > 1


def test_explore_continuous_stays_in_bounds(magnetic_cfg):
    env = make_env(magnetic_cfg)
    noisy = magnetic_cfg.with_updates(**{"training.exploration_noise": 1.0})
    rng = make_rng(3)
    for _ in range(20):
        a = explore(env, np.zeros(3), noisy, rng)
        assert np.all(np.abs(a) <= env.action_space.high)


# --- trainer ------------------------------------------------------------------


def _filled(cfg, env, seed=0, steps=40):
    trainer = Trainer(cfg, env, seed)
    rng = make_rng(seed, 1)
    collect(env, trainer.buffer, random_policy(env, rng), steps, rng)
    return trainer


def test_fcdl_loss_has_every_term(small_cfg, chem_env):
    trainer = _filled(small_cfg, chem_env)
    b = trainer.train_step(trainer.buffer.sample(16))
    assert b.pred_nll > 0 and b.sparsity > 0 and b.quant_sg >= 0 and b.commit >= 0
    assert b.total == pytest.approx(b.pred_nll + b.sparsity + b.quant_sg + b.commit)
    assert trainer.step == 1


@pytest.mark.parametrize("method", ["dense", "modular", "oracle-graph"])
def test_baselines_pay_no_sparsity(small_cfg, chem_env, method):
    trainer = _filled(small_cfg.with_updates(method=method), chem_env)
    b = trainer.train_step(trainer.buffer.sample(16))
    assert b.sparsity == 0.0 and b.quant_sg == 0.0 and b.commit == 0.0
    assert b.total == pytest.approx(b.pred_nll)


def test_training_reduces_prediction_loss(small_cfg, chem_env):
    cfg = small_cfg.with_updates(**{"training.lr": 1e-2})
    trainer = _filled(cfg, chem_env, steps=80)
    batch = trainer.buffer.all()
    before = trainer.loss(batch)[1]["pred_nll"].data.mean()
    trainer.update(60)
    after = trainer.loss(batch)[1]["pred_nll"].data.mean()
    assert after < before


def test_non_finite_loss_raises(small_cfg, chem_env):
    trainer = _filled(small_cfg, chem_env)
    head = trainer.model.named_parameters()["heads.0.layers.0.weight"]
    head.data[...] = np.nan
    with pytest.raises(TrainingError) as info:
        trainer.train_step(trainer.buffer.sample(8))
    assert info.value.diagnostics["step"] == 0


def test_frozen_single_code_trains_like_modular(small_cfg, chem_env):
    """K=1 with saturated graph logits follows the modular baseline's trajectory."""
    frozen = small_cfg.with_updates(**{"model.codebook_size": 1, "model.graph_logit_override": 50.0})
    modular = small_cfg.with_updates(method="modular", **{"model.codebook_size": 1})
    a, b = _filled(frozen, chem_env), _filled(modular, chem_env)
    a.update(5)
    b.update(5)
    pa, pb = a.model.named_parameters(), b.model.named_parameters()
    for name in pb:
        np.testing.assert_allclose(pa[name].data, pb[name].data, atol=1e-9, err_msg=name)


def test_grad_norms_cover_groups(small_cfg, chem_env):
    trainer = _filled(small_cfg, chem_env)
    trainer.update(1)
    norms = trainer.grad_norms()
    assert set(norms) == {"features", "encoder", "decoder", "heads"}
    assert norms["heads"] > 0


def test_prediction_gradient_reaches_decoder(small_cfg, chem_env):
    cfg = small_cfg.with_updates(**{"training.sparsity": 0.0})
    trainer = _filled(cfg, chem_env)
    trainer.train_step(trainer.buffer.sample(16))
    decoder = {k: p for k, p in trainer.model.named_parameters().items() if k.startswith("decoder.")}
    assert decoder
    for name, p in decoder.items():
        assert p.grad is not None and np.any(p.grad != 0), name


# --- checkpoints --------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, small_cfg, chem_env, rng):
    from helpers import random_batch

    trainer = _filled(small_cfg, chem_env)
    trainer.update(3)
    path = save_checkpoint(tmp_path / "m.bin", trainer.model, small_cfg.config_hash(), step=3, episode=1, seed=0)
    ckpt = load_checkpoint(path)
    assert ckpt.header["step"] == 3 and ckpt.header["K"] == 4 and ckpt.header["seed"] == 0
    fresh = restore_model(ckpt, build_model(small_cfg, chem_env, seed=9))
    s, a, _ = random_batch(chem_env, rng, 5)
    np.testing.assert_array_equal(fresh.predict_next(s, a), trainer.model.predict_next(s, a))
    np.testing.assert_array_equal(fresh.codebook.codes, trainer.model.codebook.codes)


def test_checkpoint_rejects_bad_bytes(small_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    data = encode_checkpoint(model_header(model, "h", 0, 0), model.state_dict())
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"XXXX" + data[4:])
    with pytest.raises(CheckpointError):
        decode_checkpoint(data[:-3])
    with pytest.raises(CheckpointError):
        decode_checkpoint(data + b"\x00")
    with pytest.raises(CheckpointError):
        decode_checkpoint(data[:4] + (2).to_bytes(4, "little") + data[8:])


def test_checkpoint_rejects_other_models(tmp_path, small_cfg, magnetic_cfg, chem_env):
    model = build_model(small_cfg, chem_env, 0)
    ckpt = load_checkpoint(save_checkpoint(tmp_path / "m.bin", model, "h"))
    with pytest.raises(CheckpointError):
        restore_model(ckpt, build_model(small_cfg.with_updates(method="dense"), chem_env, 0))
    with pytest.raises(CheckpointError):
        restore_model(ckpt, build_model(small_cfg.with_updates(**{"model.codebook_size": 2}), chem_env, 0))
    with pytest.raises(LayoutMismatchError):
        restore_model(ckpt, build_model(magnetic_cfg, make_env(magnetic_cfg), 0))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.bin")
