import numpy as np
import pytest

from cellang.agents import GameConfig, init_params, named_params
from cellang.autodiff import Tensor
from cellang.data import SyntheticSpec, generate_synthetic, standardize, stratified_split
from cellang.errors import CheckpointError, TrainingError
from cellang.training import (Adam, TrainConfig, TrainState, accuracy_of,
                              evaluate, history_csv, load_checkpoint,
                              save_checkpoint, train)


@pytest.fixture
def tiny_setup(small_cfg):
    spec = SyntheticSpec(n_per_class=(30, 30, 30), labels=("a", "b", "c"),
                         feature_dim=small_cfg.feature_dim,
                         class_separation=4.0, seed=0)
    train_s, val_s, test_s = standardize(
        *stratified_split(generate_synthetic(spec), seed=0))
    return small_cfg, train_s, val_s, test_s


def tiny_train_cfg(**overrides):
    base = dict(max_epochs=3, episodes_per_epoch=60, eval_episodes=50,
                early_stop_patience=10, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


class TestAdam:
    def test_first_step_is_sign_update(self):
        cfg = TrainConfig(learning_rate=1e-3)
        for g in (0.5, -0.02, 1e-3):
            p = Tensor([1.0], requires_grad=True)
            p.grad = np.array([g])
            Adam({"p": p}, cfg).step()
            delta = p.data[0] - 1.0
            assert abs(delta + cfg.learning_rate * np.sign(g)) < 1e-6

    def test_zero_gradient_leaves_parameter(self):
        cfg = TrainConfig()
        p = Tensor([2.5], requires_grad=True)
        opt = Adam({"p": p}, cfg)
        p.grad = np.array([0.0])
        opt.step()
        assert p.data[0] == 2.5
        # After a real step, a zero-gradient step decays the moments.
        p.grad = np.array([1.0])
        opt.step()
        m1, v1 = opt.m["p"][0], opt.v["p"][0]
        p.grad = np.array([0.0])
        opt.step()
        assert opt.m["p"][0] == cfg.beta1 * m1
        assert opt.v["p"][0] == cfg.beta2 * v1

    def test_scalar_quadratic_converges(self):
        # 200 steps on f(w) = (w - 3)^2 with lr 0.1.
        cfg = TrainConfig(learning_rate=0.1)
        p = Tensor([0.0], requires_grad=True)
        opt = Adam({"p": p}, cfg)
        for _ in range(200):
            p.grad = 2 * (p.data - 3.0)
            opt.step()
        assert abs(p.data[0] - 3.0) < 0.01

    def test_non_finite_gradient_aborts(self):
        p = Tensor([0.0], requires_grad=True)
        p.grad = np.array([np.nan])
        with pytest.raises(TrainingError):
            Adam({"p": p}, TrainConfig()).step()


class TestEvaluate:
    def test_deterministic(self, tiny_setup):
        cfg, _, _, test_s = tiny_setup
        sender, receiver = init_params(cfg, 0)
        a = evaluate(sender, receiver, test_s, cfg, 50, seed=5)
        b = evaluate(sender, receiver, test_s, cfg, 50, seed=5)
        assert a == b

    def test_symbol_indices_in_vocab(self, tiny_setup):
        cfg, _, _, test_s = tiny_setup
        sender, receiver = init_params(cfg, 1)
        for o in evaluate(sender, receiver, test_s, cfg, 100, seed=0):
            assert 0 <= o.symbol_index < cfg.vocab_size


class TestTrainLoop:
    def test_history_and_determinism(self, tiny_setup):
        cfg, train_s, val_s, _ = tiny_setup
        tcfg = tiny_train_cfg()
        _, _, h1 = train(train_s, val_s, cfg, tcfg)
        _, _, h2 = train(train_s, val_s, cfg, tcfg)
        assert h1 == h2
        assert len(h1) == 3
        assert history_csv(h1) == history_csv(h2)
        for row in h1:
            assert row["train_loss"] >= 0.0

    def test_learning_improves_loss(self, tiny_setup):
        cfg, train_s, val_s, _ = tiny_setup
        tcfg = tiny_train_cfg(max_epochs=20, episodes_per_epoch=300,
                              early_stop_patience=30, learning_rate=3e-3)
        _, _, history = train(train_s, val_s, cfg, tcfg)
        assert history[-1]["train_loss"] < history[0]["train_loss"]
        assert history[-1]["val_accuracy"] > 0.5

    def test_best_params_are_returned(self, tiny_setup):
        cfg, train_s, val_s, _ = tiny_setup
        tcfg = tiny_train_cfg(max_epochs=5)
        sender, receiver, history = train(train_s, val_s, cfg, tcfg)
        best = max(row["val_accuracy"] for row in history)
        acc = accuracy_of(evaluate(sender, receiver, val_s, cfg,
                                   tcfg.eval_episodes,
                                   tcfg.resolved_seeds()["val_seed"]))
        assert acc == best

    def test_temperature_schedule(self):
        tcfg = TrainConfig(temp_decay_epochs=4, temp_floor=0.5)
        taus = [tcfg.temperature_at(e, 1.0) for e in range(6)]
        assert taus[0] == 1.0
        assert taus[4] == 0.5 == taus[5]
        assert all(a >= b for a, b in zip(taus, taus[1:]))


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, tiny_setup, tmp_path):
        cfg, train_s, val_s, _ = tiny_setup
        path = tmp_path / "ck.npz"
        train(train_s, val_s, cfg, tiny_train_cfg(max_epochs=2),
              checkpoint_path=path)
        state = load_checkpoint(path)
        save_checkpoint(tmp_path / "ck2.npz", state)
        state2 = load_checkpoint(tmp_path / "ck2.npz")
        for k, p in named_params(state.sender, state.receiver).items():
            q = named_params(state2.sender, state2.receiver)[k]
            assert np.array_equal(p.data, q.data)
        assert state.history == state2.history
        assert state.episode_rng.bit_generator.state == \
            state2.episode_rng.bit_generator.state

    def test_resume_matches_uninterrupted(self, tiny_setup, tmp_path):
        cfg, train_s, val_s, _ = tiny_setup
        full_cfg = tiny_train_cfg(max_epochs=4)
        _, _, full_history = train(train_s, val_s, cfg, full_cfg)

        half_cfg = tiny_train_cfg(max_epochs=2)
        path = tmp_path / "half.npz"
        train(train_s, val_s, cfg, half_cfg, checkpoint_path=path)
        _, _, resumed = train(train_s, val_s, cfg, full_cfg, resume_from=path)
        assert resumed == full_history

    def test_truncated_file_rejected(self, tiny_setup, tmp_path):
        cfg, train_s, val_s, _ = tiny_setup
        path = tmp_path / "ck.npz"
        train(train_s, val_s, cfg, tiny_train_cfg(max_epochs=1),
              checkpoint_path=path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "junk.npz"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


class TestSeeds:
    def test_resolved_seeds_deterministic(self):
        a = TrainConfig(seed=5).resolved_seeds()
        b = TrainConfig(seed=5).resolved_seeds()
        c = TrainConfig(seed=6).resolved_seeds()
        assert a == b
        assert a != c

    def test_explicit_seed_overrides(self):
        seeds = TrainConfig(seed=5, gumbel_seed=123).resolved_seeds()
        assert seeds["gumbel_seed"] == 123
