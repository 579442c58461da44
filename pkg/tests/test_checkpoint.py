"""Checkpoint round-trips and resume-from-disk equivalence."""

import numpy as np

from iqautoml.nn.checkpoint import load_checkpoint, save_checkpoint
from iqautoml.nn.train import train
from test_train import _learn, _small_spec, _toy_split


def test_checkpoint_roundtrip_exact(tmp_path):
    split = _toy_split()
    tm = train(_small_spec(), split, _learn(early_stopping=True), 4, seed=1)
    path = save_checkpoint(tm, tmp_path / "model.ckpt")
    back = load_checkpoint(path)

    assert back.spec == tm.spec
    assert back.learn == tm.learn
    assert back.seed == tm.seed
    assert back.epochs_consumed == tm.epochs_consumed
    assert back.early_stopped == tm.early_stopped
    assert back.best_epoch == tm.best_epoch
    assert [vars(r) for r in back.history] == [vars(r) for r in tm.history]
    for a, b in zip(tm.model.get_weights(), back.model.get_weights()):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(tm.optimizer.state_arrays(), back.optimizer.state_arrays()):
        np.testing.assert_array_equal(a, b)
    assert back.optimizer.t == tm.optimizer.t


def test_resume_from_checkpoint_bitwise_equal(tmp_path):
    split = _toy_split()
    straight = train(_small_spec(), split, _learn(), 6, seed=2)

    partial = train(_small_spec(), split, _learn(), 3, seed=2)
    path = save_checkpoint(partial, tmp_path / "partial.ckpt")
    resumed = train(_small_spec(), split, _learn(), 6, seed=2, resume_from=load_checkpoint(path))

    assert [vars(a) for a in straight.history] == [vars(b) for b in resumed.history]
    for wa, wb in zip(straight.model.get_weights(), resumed.model.get_weights()):
        np.testing.assert_array_equal(wa, wb)


def test_checkpoint_evaluation_reproducible(tmp_path):
    split = _toy_split()
    tm = train(_small_spec(), split, _learn(), 3, seed=3)
    from iqautoml.nn.train import evaluate

    before = evaluate(tm, split.test)
    path = save_checkpoint(tm, tmp_path / "m.ckpt")
    after = evaluate(load_checkpoint(path), split.test)
    assert abs(before.accuracy - after.accuracy) < 1e-6
    assert abs(before.loss - after.loss) < 1e-6
